#pragma once

// In-process implementations of the CLI commands (train, evaluate, corrupt,
// ablate, export). The binary in tools/ is a thin argument-parsing wrapper
// around these, which keeps every command testable without spawning a
// process.
//
// Exit codes: 0 success, 1 config/usage error, 2 data error, 3 training
// divergence.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cause/checkpoint.hpp"
#include "cause/embedding.hpp"
#include "cause/errors.hpp"
#include "cause/eval.hpp"
#include "cause/kg.hpp"
#include "cause/log.hpp"
#include "cause/train.hpp"

namespace cause::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTrain = 3;

struct Dataset {
  Vocab vocab;
  TripleSet train;
  TripleSet valid;
  TripleSet test;
};

// Loads the three split files, building one shared vocabulary so that every
// entity (including ones that only appear in valid/test) gets an embedding
// row and a rank candidate slot.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.train = load_triples(dir / "train.txt", d.vocab, VocabMode::build, Split::train);
  d.valid = load_triples(dir / "valid.txt", d.vocab, VocabMode::build, Split::valid);
  d.test = load_triples(dir / "test.txt", d.vocab, VocabMode::build, Split::test);
  return d;
}

inline std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

inline int loss_term_index(const std::string& name) {
  if (name == "l_caus") return 0;
  if (name == "l_conf") return 1;
  if (name == "l_inter") return 2;
  if (name == "l_aux1") return 3;
  if (name == "l_aux2") return 4;
  throw ConfigError("unknown loss term '" + name +
                    "' (expected l_caus|l_conf|l_inter|l_aux1|l_aux2)");
}

// Parses the user-facing config file: versioned JSON, "version" and "model"
// required, unknown keys rejected, d_r derived from the model when absent.
inline TrainConfig read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must contain a JSON object");
  if (!j.contains("version")) throw ConfigError("config missing required key 'version'");
  int version;
  try {
    version = j.at("version").get<int>();
  } catch (const std::exception&) {
    throw ConfigError("config key 'version' must be an integer");
  }
  if (version != 1) {
    throw ConfigError("unsupported config version " + std::to_string(version) + " (expected 1)");
  }
  if (!j.contains("model")) throw ConfigError("config missing required key 'model'");
  j.erase("version");
  TrainConfig cfg = train_config_from_json(j);
  cfg.validate();
  return cfg;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct TrainArgs {
  std::filesystem::path config_path;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  int threads = 1;
  std::optional<std::uint64_t> seed;  // overrides the config's seed
  std::string drop_loss;              // ablation: loss term to zero out
  std::optional<InterventionOp> op_override;
};

namespace detail {

inline int run_train(const TrainArgs& a, const char* command, std::ostream& err) {
  try {
    if (a.threads < 1) throw ConfigError("--threads must be >= 1");
    TrainConfig cfg = read_config_file(a.config_path);
    if (a.seed) cfg.seed = *a.seed;

    nlohmann::ordered_json ablation = nlohmann::ordered_json::object();
    if (!a.drop_loss.empty()) {
      cfg.loss_weights[static_cast<std::size_t>(loss_term_index(a.drop_loss))] = 0.0;
      ablation["drop_loss"] = a.drop_loss;
    }
    if (a.op_override) {
      cfg.op = *a.op_override;
      ablation["op"] = intervention_op_name(cfg.op);
    }

    Dataset data = load_dataset(a.data_dir);
    logging::info("loaded %zu entities, %zu relations, %zu/%zu/%zu train/valid/test triples",
                  data.vocab.num_entities(), data.vocab.num_relations(), data.train.size(),
                  data.valid.size(), data.test.size());

    TrainOutcome out = train(cfg, data.train, data.valid, data.vocab.num_entities(),
                             data.vocab.num_relations(), a.threads);

    std::filesystem::create_directories(a.out_dir);
    Checkpoint ck;
    ck.config = cfg;
    ck.vocab = data.vocab;
    ck.table = out.table;
    ck.opt = out.opt;
    ck.epoch = out.best_epoch > 0 ? out.best_epoch : out.epochs_run;
    if (out.best_epoch > 0) {
      ck.metrics["best_epoch"] = static_cast<double>(out.best_epoch);
      ck.metrics["best_val_mrr"] = out.best_val_mrr;
    }
    if (!out.log.empty()) ck.metrics["final_train_loss"] = out.log.back().loss.total;
    save_checkpoint(a.out_dir / "checkpoint", ck);

    {
      std::ofstream log(a.out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
      if (!log) throw DataError("cannot write " + (a.out_dir / "train_log.jsonl").string());
      for (const EpochRecord& r : out.log) {
        nlohmann::ordered_json line;
        line["epoch"] = r.epoch;
        line["l_caus"] = r.loss.l_caus;
        line["l_conf"] = r.loss.l_conf;
        line["l_inter"] = r.loss.l_inter;
        line["l_aux1"] = r.loss.l_aux1;
        line["l_aux2"] = r.loss.l_aux2;
        line["total"] = r.loss.total;
        if (r.has_val) line["val_mrr"] = r.val_mrr;
        log << line.dump() << '\n';
      }
    }

    nlohmann::ordered_json manifest;
    manifest["command"] = command;
    manifest["config"] = train_config_to_json(cfg);
    manifest["data_dir"] = a.data_dir.string();
    manifest["out_dir"] = a.out_dir.string();
    manifest["threads"] = a.threads;
    if (!ablation.empty()) manifest["ablation"] = ablation;
    manifest["artifacts"] = {{"checkpoint", "checkpoint"}, {"train_log", "train_log.jsonl"}};
    manifest["created_utc"] = utc_timestamp();
    write_json_file(a.out_dir / "manifest.json", manifest);

    logging::info("trained %d epochs, best_epoch=%d best_val_mrr=%.4f", out.epochs_run,
                  out.best_epoch, out.best_val_mrr);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const TrainError& e) {
    err << "training aborted: " << e.what() << '\n';
    return kExitTrain;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace detail

inline int cmd_train(const TrainArgs& a, std::ostream& err) {
  return detail::run_train(a, "train", err);
}

inline int cmd_ablate(const TrainArgs& a, std::ostream& err) {
  if (a.drop_loss.empty() && !a.op_override) {
    err << "config error: ablate requires --drop-loss or --op\n";
    return kExitUsage;
  }
  return detail::run_train(a, "ablate", err);
}

inline nlohmann::ordered_json metric_block_json(const MetricBlock& m, const char* direction) {
  nlohmann::ordered_json j;
  j["direction"] = direction;
  j["mrr"] = m.mrr;
  j["hits1"] = m.hits1;
  j["hits3"] = m.hits3;
  j["hits10"] = m.hits10;
  j["n_queries"] = m.n_queries;
  return j;
}

inline nlohmann::ordered_json eval_report_json(const EvalReport& r, View view, Split split) {
  nlohmann::ordered_json j;
  j["view"] = view_name(view);
  j["split"] = split_name(split);
  j["head"] = metric_block_json(r.head, "head");
  j["tail"] = metric_block_json(r.tail, "tail");
  j["both"] = metric_block_json(r.both, "both");
  return j;
}

struct EvalArgs {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path data_dir;
  View view = View::causal;
  Split split = Split::test;
  int threads = 1;
};

inline int cmd_evaluate(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  try {
    if (a.threads < 1) throw ConfigError("--threads must be >= 1");
    if (a.split == Split::train) throw ConfigError("--split must be valid or test");
    Checkpoint ck = load_checkpoint(a.checkpoint_dir);
    Dataset d;
    d.vocab = ck.vocab;  // ids must match the embedding rows
    d.train = load_triples(a.data_dir / "train.txt", d.vocab, VocabMode::frozen, Split::train);
    d.valid = load_triples(a.data_dir / "valid.txt", d.vocab, VocabMode::frozen, Split::valid);
    d.test = load_triples(a.data_dir / "test.txt", d.vocab, VocabMode::frozen, Split::test);
    FilterIndex filter = FilterIndex::build(d.train, d.valid, d.test);
    const TripleSet& split_set = a.split == Split::valid ? d.valid : d.test;
    EvalReport rep = evaluate(ck.table, a.view, ck.config.op, split_set, filter, a.threads);
    out << eval_report_json(rep, a.view, a.split).dump(2) << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

struct CorruptArgs {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  double lambda = 0.0;
  std::uint64_t seed = 1;
  NoiseMode mode = NoiseMode::replace;
};

inline int cmd_corrupt(const CorruptArgs& a, std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    if (a.lambda < 0.0 || a.lambda > 1.0) throw ConfigError("--lambda must be in [0, 1]");
    Dataset d = load_dataset(a.data_dir);
    fs::create_directories(a.out_dir);

    const std::size_t count = noisy_triple_count(a.lambda, d.train.size());
    if (count == 0) {
      fs::copy_file(a.data_dir / "train.txt", a.out_dir / "train.txt",
                    fs::copy_options::overwrite_existing);
    } else {
      FilterIndex clean = FilterIndex::build(d.train, d.valid, d.test);
      Rng rng(a.seed);
      TripleSet noisy = corrupt_dataset(d.train, a.lambda, clean, d.vocab.num_entities(), rng,
                                        a.mode);
      write_triples(a.out_dir / "train.txt", noisy, d.vocab);
    }
    fs::copy_file(a.data_dir / "valid.txt", a.out_dir / "valid.txt",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(a.data_dir / "test.txt", a.out_dir / "test.txt",
                  fs::copy_options::overwrite_existing);

    nlohmann::ordered_json manifest;
    manifest["command"] = "corrupt";
    manifest["lambda"] = a.lambda;
    manifest["seed"] = a.seed;
    manifest["mode"] = a.mode == NoiseMode::replace ? "replace" : "append";
    manifest["data_dir"] = a.data_dir.string();
    manifest["out_dir"] = a.out_dir.string();
    manifest["noisy_triples"] = count;
    manifest["created_utc"] = utc_timestamp();
    write_json_file(a.out_dir / "manifest.json", manifest);
    logging::info("injected %zu noisy triples at lambda=%g", count, a.lambda);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

struct ExportArgs {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path out_file;
  View view = View::causal;
};

// Writes one TSV row per entity: name, then the view's vector components in
// shortest round-trip decimal form.
inline int cmd_export(const ExportArgs& a, std::ostream& err) {
  try {
    Checkpoint ck = load_checkpoint(a.checkpoint_dir);
    ViewTables vt = materialize_view(ck.table, a.view, ck.config.op);
    if (!a.out_file.parent_path().empty()) {
      std::filesystem::create_directories(a.out_file.parent_path());
    }
    std::ofstream out(a.out_file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + a.out_file.string());
    char buf[64];
    for (std::int64_t e = 0; e < vt.ent.rows; ++e) {
      out << ck.vocab.entity_name(static_cast<EntityId>(e));
      for (double v : vt.ent.row(e)) {
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        out << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
      }
      out << '\n';
    }
    if (!out) throw DataError("short write to " + a.out_file.string());
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace cause::cli
