#pragma once

// Dataset layer: vocabulary, triple storage, the filtered-candidate index,
// negative sampling, noise injection and the synthetic benchmark generator.
//
// Triple files are UTF-8 text, one "head<TAB>relation<TAB>tail" per line,
// LF endings, no header. A dataset directory holds train.txt / valid.txt /
// test.txt indexed against one shared vocabulary.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cause/errors.hpp"
#include "cause/log.hpp"
#include "cause/rng.hpp"

namespace cause {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t x = static_cast<std::uint32_t>(t.head);
    x = x * 0x9e3779b97f4a7c15ULL + static_cast<std::uint32_t>(t.rel);
    x = x * 0x9e3779b97f4a7c15ULL + static_cast<std::uint32_t>(t.tail);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

using TripleSetLookup = std::unordered_set<Triple, TripleHash>;

// Dense 0-based name <-> index maps. Indices are assigned in first-appearance
// order and stay stable for the rest of the run.
class Vocab {
 public:
  EntityId add_entity(const std::string& name) {
    auto it = entity_ids_.find(name);
    if (it != entity_ids_.end()) return it->second;
    EntityId id = static_cast<EntityId>(entity_names_.size());
    entity_names_.push_back(name);
    entity_ids_.emplace(name, id);
    return id;
  }

  RelationId add_relation(const std::string& name) {
    auto it = relation_ids_.find(name);
    if (it != relation_ids_.end()) return it->second;
    RelationId id = static_cast<RelationId>(relation_names_.size());
    relation_names_.push_back(name);
    relation_ids_.emplace(name, id);
    return id;
  }

  std::optional<EntityId> entity_id(const std::string& name) const {
    auto it = entity_ids_.find(name);
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<RelationId> relation_id(const std::string& name) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t num_entities() const { return entity_names_.size(); }
  std::size_t num_relations() const { return relation_names_.size(); }

  const std::string& entity_name(EntityId id) const { return entity_names_.at(static_cast<std::size_t>(id)); }
  const std::string& relation_name(RelationId id) const { return relation_names_.at(static_cast<std::size_t>(id)); }

  const std::vector<std::string>& entity_names() const { return entity_names_; }
  const std::vector<std::string>& relation_names() const { return relation_names_; }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.entity_names_ == b.entity_names_ && a.relation_names_ == b.relation_names_;
  }

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
};

enum class Split { train, valid, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split name: '" + s + "' (expected train|valid|test)");
}

struct TripleSet {
  std::vector<Triple> triples;
  Split split = Split::train;

  std::size_t size() const { return triples.size(); }
  bool empty() const { return triples.empty(); }

  friend bool operator==(const TripleSet&, const TripleSet&) = default;
};

enum class VocabMode { build, frozen };

// Loads one split file. In build mode unseen names are appended to the vocab
// in first-appearance order (head, relation, tail within each line); in
// frozen mode an unknown name is an error. Duplicate lines are dropped and
// counted.
inline TripleSet load_triples(const std::filesystem::path& path, Vocab& vocab, VocabMode mode,
                              Split split = Split::train) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open triple file: " + path.string());

  TripleSet out;
  out.split = split;
  TripleSetLookup seen;
  std::size_t duplicates = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed line, expected 3 tab-separated fields");
    }
    std::string head = line.substr(0, tab1);
    std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
    std::string tail = line.substr(tab2 + 1);

    Triple t;
    if (mode == VocabMode::build) {
      t.head = vocab.add_entity(head);
      t.rel = vocab.add_relation(rel);
      t.tail = vocab.add_entity(tail);
    } else {
      auto h = vocab.entity_id(head);
      auto r = vocab.relation_id(rel);
      auto tl = vocab.entity_id(tail);
      const std::string* missing = !h ? &head : (!r ? &rel : (!tl ? &tail : nullptr));
      if (missing != nullptr) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": name not in vocabulary: '" + *missing + "'");
      }
      t = Triple{*h, *r, *tl};
    }
    if (seen.insert(t).second) {
      out.triples.push_back(t);
    } else {
      ++duplicates;
    }
  }
  if (duplicates > 0) {
    logging::info("%s: dropped %zu duplicate line(s)", path.string().c_str(), duplicates);
  }
  return out;
}

inline void write_triples(const std::filesystem::path& path, const TripleSet& ts, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write triple file: " + path.string());
  for (const Triple& t : ts.triples) {
    out << vocab.entity_name(t.head) << '\t' << vocab.relation_name(t.rel) << '\t'
        << vocab.entity_name(t.tail) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

// True-triple index over train + valid + test, used by the filtered ranking
// protocol and by noise injection.
class FilterIndex {
 public:
  static FilterIndex build(const TripleSet& train, const TripleSet& valid, const TripleSet& test) {
    FilterIndex idx;
    for (const TripleSet* ts : {&train, &valid, &test}) {
      for (const Triple& t : ts->triples) {
        idx.tails_[pack(t.head, t.rel)].push_back(t.tail);
        idx.heads_[pack(t.tail, t.rel)].push_back(t.head);
      }
    }
    for (auto* m : {&idx.tails_, &idx.heads_}) {
      for (auto& [k, v] : *m) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
      }
    }
    return idx;
  }

  // Sorted true tails for (head, rel), empty span if none.
  std::span<const EntityId> tails_of(EntityId head, RelationId rel) const {
    auto it = tails_.find(pack(head, rel));
    if (it == tails_.end()) return {};
    return it->second;
  }

  // Sorted true heads for (rel, tail), empty span if none.
  std::span<const EntityId> heads_of(RelationId rel, EntityId tail) const {
    auto it = heads_.find(pack(tail, rel));
    if (it == heads_.end()) return {};
    return it->second;
  }

  bool contains(const Triple& t) const {
    auto tails = tails_of(t.head, t.rel);
    return std::binary_search(tails.begin(), tails.end(), t.tail);
  }

  bool empty() const { return tails_.empty(); }

 private:
  static std::uint64_t pack(EntityId e, RelationId r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e)) << 32) |
           static_cast<std::uint32_t>(r);
  }

  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
};

// One corruption of a positive triple: either the head or the tail slot is
// replaced, and the replacement always differs from the original entity.
struct NegativeSample {
  bool corrupt_head = false;
  EntityId replacement = 0;
};

struct NegativeBatch {
  Triple positive;
  std::vector<NegativeSample> samples;

  Triple corrupted(std::size_t i) const {
    Triple t = positive;
    if (samples[i].corrupt_head) {
      t.head = samples[i].replacement;
    } else {
      t.tail = samples[i].replacement;
    }
    return t;
  }
};

// Uniform replacement over the entity set minus the original. Corruptions are
// deliberately not filtered against true triples.
inline NegativeBatch negative_sample(const Triple& pos, int k, std::size_t num_entities, Rng& rng) {
  if (num_entities < 2) throw DataError("negative sampling needs at least 2 entities");
  if (k < 1) throw ConfigError("negative sample count must be >= 1");
  NegativeBatch batch;
  batch.positive = pos;
  batch.samples.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    NegativeSample s;
    s.corrupt_head = rng.coin();
    EntityId original = s.corrupt_head ? pos.head : pos.tail;
    auto draw = static_cast<EntityId>(rng.index(num_entities - 1));
    s.replacement = draw >= original ? draw + 1 : draw;
    batch.samples.push_back(s);
  }
  return batch;
}

enum class NoiseMode { replace, append };

// ceil(lambda * n) guarded against floating-point wobble when the product is
// an exact integer (e.g. 0.1 * 100).
inline std::size_t noisy_triple_count(double lambda, std::size_t n) {
  double raw = lambda * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

// Injects noise into a training set. In replace mode exactly
// noisy_triple_count(lambda, |train|) triples, chosen uniformly without
// replacement, are overwritten in place by corruptions; in append mode the
// corruptions are appended instead (lambda stays relative to the clean size).
// Every corrupted triple is guaranteed absent from the clean KG described by
// `clean` and distinct from the other injected corruptions.
inline TripleSet corrupt_dataset(const TripleSet& train, double lambda, const FilterIndex& clean,
                                 std::size_t num_entities, Rng& rng,
                                 NoiseMode mode = NoiseMode::replace) {
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("noise rate must be in [0, 1]");
  if (num_entities < 2) throw DataError("noise injection needs at least 2 entities");

  TripleSet out = train;
  const std::size_t n = train.size();
  const std::size_t count = noisy_triple_count(lambda, n);
  if (count == 0) return out;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // partial Fisher-Yates: the first `count` entries are a uniform sample
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
    std::swap(order[i], order[j]);
  }

  TripleSetLookup injected;
  constexpr int kMaxRetries = 1000;
  for (std::size_t i = 0; i < count; ++i) {
    const Triple& original = train.triples[order[i]];
    Triple noisy;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
      noisy = original;
      bool corrupt_head = rng.coin();
      EntityId old_entity = corrupt_head ? noisy.head : noisy.tail;
      auto draw = static_cast<EntityId>(rng.index(num_entities - 1));
      EntityId replacement = draw >= old_entity ? draw + 1 : draw;
      (corrupt_head ? noisy.head : noisy.tail) = replacement;
      if (!clean.contains(noisy) && injected.find(noisy) == injected.end()) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw DataError("noise injection failed: could not find a corrupted triple absent from "
                      "the clean KG (graph too dense)");
    }
    injected.insert(noisy);
    if (mode == NoiseMode::replace) {
      out.triples[order[i]] = noisy;
    } else {
      out.triples.push_back(noisy);
    }
  }
  return out;
}

struct SyntheticKg {
  Vocab vocab;
  TripleSet train;
  TripleSet valid;
  TripleSet test;
};

// Generates a small KG with planted structure. Each relation partitions the
// entities into groups (sizes cycling over 2..5 per relation) and links every
// ordered pair inside a group; rule_density is the probability that a given
// unordered pair is kept, with both directions kept together so the planted
// structure stays symmetric and is learnable by bilinear models. Splits are
// disjoint, roughly 80/10/10, and every entity and relation is guaranteed to
// appear in train.
inline SyntheticKg generate_synthetic_kg(std::size_t n_entities, std::size_t n_relations,
                                         double rule_density, Rng& rng) {
  if (n_entities < 10) throw ConfigError("synthetic KG needs at least 10 entities");
  if (n_relations < 2) throw ConfigError("synthetic KG needs at least 2 relations");
  if (rule_density < 0.0 || rule_density > 1.0) throw ConfigError("rule density must be in [0, 1]");

  SyntheticKg kg;
  for (std::size_t e = 0; e < n_entities; ++e) kg.vocab.add_entity("e" + std::to_string(e));
  for (std::size_t r = 0; r < n_relations; ++r) kg.vocab.add_relation("r" + std::to_string(r));

  TripleSetLookup seen;
  std::vector<Triple> all;
  std::vector<EntityId> perm(n_entities);
  for (std::size_t e = 0; e < n_entities; ++e) perm[e] = static_cast<EntityId>(e);
  for (std::size_t r = 0; r < n_relations; ++r) {
    const std::size_t group = 2 + r % 4;
    rng.shuffle(perm);
    const std::size_t n_groups = std::max<std::size_t>(1, n_entities / group);
    for (std::size_t g = 0; g < n_groups; ++g) {
      const std::size_t lo = g * group;
      // the division remainder joins the last group
      const std::size_t hi = g + 1 == n_groups ? n_entities : lo + group;
      for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t j = i + 1; j < hi; ++j) {
          if (rng.real() >= rule_density) continue;
          Triple fwd{perm[i], static_cast<RelationId>(r), perm[j]};
          Triple rev{perm[j], static_cast<RelationId>(r), perm[i]};
          if (seen.insert(fwd).second) all.push_back(fwd);
          if (seen.insert(rev).second) all.push_back(rev);
        }
      }
    }
  }

  rng.shuffle(all);

  // force one covering triple per entity and per relation into train
  std::vector<char> ent_covered(n_entities, 0);
  std::vector<char> rel_covered(n_relations, 0);
  std::vector<char> forced(all.size(), 0);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Triple& t = all[i];
    bool needed = !ent_covered[static_cast<std::size_t>(t.head)] ||
                  !ent_covered[static_cast<std::size_t>(t.tail)] ||
                  !rel_covered[static_cast<std::size_t>(t.rel)];
    if (needed) {
      forced[i] = 1;
      ent_covered[static_cast<std::size_t>(t.head)] = 1;
      ent_covered[static_cast<std::size_t>(t.tail)] = 1;
      rel_covered[static_cast<std::size_t>(t.rel)] = 1;
    }
  }
  if (std::find(ent_covered.begin(), ent_covered.end(), 0) != ent_covered.end() ||
      std::find(rel_covered.begin(), rel_covered.end(), 0) != rel_covered.end()) {
    throw DataError("synthetic KG generation failed: not every entity/relation got a triple; "
                    "increase the entity or relation count");
  }

  const std::size_t target_eval = std::max<std::size_t>(1, all.size() / 10);
  kg.train.split = Split::train;
  kg.valid.split = Split::valid;
  kg.test.split = Split::test;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (forced[i]) {
      kg.train.triples.push_back(all[i]);
    } else if (kg.valid.size() < target_eval) {
      kg.valid.triples.push_back(all[i]);
    } else if (kg.test.size() < target_eval) {
      kg.test.triples.push_back(all[i]);
    } else {
      kg.train.triples.push_back(all[i]);
    }
  }
  if (kg.valid.empty() || kg.test.empty()) {
    throw DataError("synthetic KG generation failed: too few triples to form valid/test splits");
  }
  return kg;
}

}  // namespace cause
