#pragma once

// Directory checkpoints. Layout:
//   <dir>/metadata.json   format version, config, vocab, epoch, metrics,
//                         optimizer step, per-matrix shape/bytes/crc32
//   <dir>/<name>.bin      raw little-endian floats, row-major; f32 unless the
//                         config requests 64-bit storage
// Twelve matrix files: the four embedding matrices plus Adam first/second
// moments for each. save -> load -> save reproduces every byte.

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cause/embedding.hpp"
#include "cause/errors.hpp"
#include "cause/kg.hpp"
#include "cause/train.hpp"

namespace cause {

// CRC-32 (IEEE, reflected polynomial 0xEDB88320), as used by zip/png.
inline std::uint32_t crc32(std::span<const unsigned char> bytes) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

struct Checkpoint {
  TrainConfig config;
  Vocab vocab;
  DisentangledEmbeddingTable table;
  OptimizerState opt;
  int epoch = 0;
  std::map<std::string, double> metrics;  // e.g. best_val_mrr
};

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = score_kind_name(c.model.kind);
  j["norm_p"] = c.model.norm_p;
  j["d_e"] = c.d_e;
  j["d_r"] = c.d_r;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["num_negatives"] = c.num_negatives;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  j["op"] = intervention_op_name(c.op);
  j["seed"] = c.seed;
  j["loss_weights"] = c.loss_weights;
  j["eval_every"] = c.eval_every;
  j["patience"] = c.patience;
  j["store_fp64"] = c.store_fp64;
  return j;
}

// Reads a TrainConfig from JSON. Every key is optional (defaults apply), but
// unknown keys are rejected so config typos fail loudly.
template <class Json>
TrainConfig train_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const char* known[] = {"model",      "norm_p",     "d_e",        "d_r",
                                "gamma",      "alpha",      "num_negatives", "batch_size",
                                "lr",         "epochs",     "op",         "seed",
                                "loss_weights", "eval_every", "patience",   "store_fp64"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown config key: '" + it.key() + "'");
  }
  TrainConfig c;
  try {
    if (j.contains("model")) c.model.kind = parse_score_kind(j.at("model").template get<std::string>());
    if (j.contains("norm_p")) c.model.norm_p = j.at("norm_p").template get<int>();
    if (j.contains("d_e")) c.d_e = j.at("d_e").template get<int>();
    if (j.contains("d_r")) c.d_r = j.at("d_r").template get<int>();
    else c.d_r = relation_dim(c.model.kind, c.d_e);
    if (j.contains("gamma")) c.gamma = j.at("gamma").template get<double>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").template get<double>();
    if (j.contains("num_negatives")) c.num_negatives = j.at("num_negatives").template get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").template get<int>();
    if (j.contains("lr")) c.lr = j.at("lr").template get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").template get<int>();
    if (j.contains("op")) c.op = parse_intervention_op(j.at("op").template get<std::string>());
    if (j.contains("seed")) c.seed = j.at("seed").template get<std::uint64_t>();
    if (j.contains("loss_weights")) {
      auto w = j.at("loss_weights");
      if (!w.is_array() || w.size() != 5) {
        throw ConfigError("loss_weights must be an array of five numbers");
      }
      for (std::size_t i = 0; i < 5; ++i) c.loss_weights[i] = w[i].template get<double>();
    }
    if (j.contains("eval_every")) c.eval_every = j.at("eval_every").template get<int>();
    if (j.contains("patience")) c.patience = j.at("patience").template get<int>();
    if (j.contains("store_fp64")) c.store_fp64 = j.at("store_fp64").template get<bool>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

namespace detail {

inline constexpr int kCheckpointFormatVersion = 1;

inline std::vector<std::pair<std::string, const Matrix*>> checkpoint_matrices(const Checkpoint& c) {
  std::vector<std::pair<std::string, const Matrix*>> m;
  static const char* slot_names[4] = {"ent_causal", "ent_conf", "rel_causal", "rel_conf"};
  for (int s = 0; s < 4; ++s) m.emplace_back(slot_names[s], &slot_matrix(c.table, s));
  for (int s = 0; s < 4; ++s) m.emplace_back(std::string("adam_m_") + slot_names[s], &c.opt.m[s]);
  for (int s = 0; s < 4; ++s) m.emplace_back(std::string("adam_v_") + slot_names[s], &c.opt.v[s]);
  return m;
}

inline std::vector<unsigned char> encode_matrix(const Matrix& m, bool fp64) {
  const std::size_t n = m.data.size();
  std::vector<unsigned char> out(n * (fp64 ? 8 : 4));
  std::size_t o = 0;
  for (double v : m.data) {
    if (fp64) {
      std::uint64_t u = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) out[o++] = static_cast<unsigned char>(u >> (8 * b));
    } else {
      std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) out[o++] = static_cast<unsigned char>(u >> (8 * b));
    }
  }
  return out;
}

inline void decode_matrix(std::span<const unsigned char> bytes, bool fp64, Matrix& m) {
  std::size_t o = 0;
  for (double& v : m.data) {
    if (fp64) {
      std::uint64_t u = 0;
      for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[o++]) << (8 * b);
      v = std::bit_cast<double>(u);
    } else {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[o++]) << (8 * b);
      v = static_cast<double>(std::bit_cast<float>(u));
    }
  }
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + p.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create checkpoint dir " + dir.string());

  const bool fp64 = ck.config.store_fp64;
  nlohmann::ordered_json meta;
  meta["format_version"] = detail::kCheckpointFormatVersion;
  meta["config"] = train_config_to_json(ck.config);
  meta["vocab"] = {{"entities", ck.vocab.entity_names()}, {"relations", ck.vocab.relation_names()}};
  meta["epoch"] = ck.epoch;
  meta["metrics"] = ck.metrics;
  meta["optimizer_step"] = ck.opt.step;
  meta["precision"] = fp64 ? "f64" : "f32";

  nlohmann::ordered_json mats = nlohmann::ordered_json::object();
  for (const auto& [name, mat] : detail::checkpoint_matrices(ck)) {
    std::vector<unsigned char> bytes = detail::encode_matrix(*mat, fp64);
    std::ofstream out(dir / (name + ".bin"), std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + (dir / (name + ".bin")).string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + (dir / (name + ".bin")).string());
    nlohmann::ordered_json entry;
    entry["rows"] = mat->rows;
    entry["cols"] = mat->cols;
    entry["bytes"] = bytes.size();
    entry["crc32"] = crc32(bytes);
    mats[name] = entry;
  }
  meta["matrices"] = mats;

  std::ofstream out(dir / "metadata.json", std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + (dir / "metadata.json").string());
  out << meta.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path meta_path = dir / "metadata.json";
  std::ifstream in(meta_path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const std::exception& e) {
    throw CheckpointError("bad metadata in " + meta_path.string() + ": " + e.what());
  }

  int version = meta.value("format_version", -1);
  if (version != detail::kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version) +
                          " in " + meta_path.string());
  }

  Checkpoint ck;
  try {
    ck.config = train_config_from_json(meta.at("config"));
    for (const auto& name : meta.at("vocab").at("entities")) {
      ck.vocab.add_entity(name.get<std::string>());
    }
    for (const auto& name : meta.at("vocab").at("relations")) {
      ck.vocab.add_relation(name.get<std::string>());
    }
    ck.epoch = meta.at("epoch").get<int>();
    if (meta.contains("metrics")) {
      for (auto it = meta["metrics"].begin(); it != meta["metrics"].end(); ++it) {
        ck.metrics[it.key()] = it.value().get<double>();
      }
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("bad metadata in " + meta_path.string() + ": " + e.what());
  }

  const std::string precision = meta.value("precision", "f32");
  if (precision != "f32" && precision != "f64") {
    throw CheckpointError("unknown checkpoint precision '" + precision + "'");
  }
  const bool fp64 = precision == "f64";
  const std::size_t width = fp64 ? 8 : 4;

  ck.table.model = ck.config.model;
  auto load_matrix = [&](const std::string& name, Matrix& m) {
    nlohmann::json entry;
    try {
      entry = meta.at("matrices").at(name);
      m = Matrix(entry.at("rows").get<std::int64_t>(), entry.at("cols").get<std::int64_t>());
    } catch (const std::exception& e) {
      throw CheckpointError("bad matrix entry '" + name + "' in " + meta_path.string() + ": " +
                            e.what());
    }
    std::vector<unsigned char> bytes = detail::read_file_bytes(dir / (name + ".bin"));
    const std::size_t expected = m.data.size() * width;
    if (bytes.size() != expected || entry.at("bytes").get<std::size_t>() != expected) {
      throw CheckpointError("truncated or oversized matrix file " +
                            (dir / (name + ".bin")).string() + ": got " +
                            std::to_string(bytes.size()) + " bytes, expected " +
                            std::to_string(expected));
    }
    if (crc32(bytes) != entry.at("crc32").get<std::uint32_t>()) {
      throw CheckpointError("checksum mismatch for " + (dir / (name + ".bin")).string());
    }
    detail::decode_matrix(bytes, fp64, m);
  };

  static const char* slot_names[4] = {"ent_causal", "ent_conf", "rel_causal", "rel_conf"};
  for (int s = 0; s < 4; ++s) load_matrix(slot_names[s], slot_matrix(ck.table, s));
  for (int s = 0; s < 4; ++s) {
    load_matrix(std::string("adam_m_") + slot_names[s], ck.opt.m[s]);
    load_matrix(std::string("adam_v_") + slot_names[s], ck.opt.v[s]);
  }
  try {
    ck.opt.step = meta.at("optimizer_step").get<std::int64_t>();
  } catch (const std::exception& e) {
    throw CheckpointError("bad optimizer_step in " + meta_path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace cause
