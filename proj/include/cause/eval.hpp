#pragma once

// Filtered link-prediction ranking and the score-separation diagnostic.
//
// Ranking protocol: for each evaluated triple both the head query (?, r, t)
// and the tail query (h, r, ?) are scored over all entities. Candidates whose
// completed triple is a known true triple are removed, except the query's own
// target. Ties take the mean rank. Aggregates sum left-to-right in evaluation
// order, so results do not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "cause/embedding.hpp"
#include "cause/kg.hpp"
#include "cause/model.hpp"
#include "cause/parallel.hpp"
#include "cause/rng.hpp"

namespace cause {

enum class QueryDirection { head, tail };

inline const char* direction_name(QueryDirection d) {
  return d == QueryDirection::head ? "head" : "tail";
}

struct RankResult {
  Triple query;
  QueryDirection direction = QueryDirection::tail;
  double rank = 0.0;  // fractional under the mean-rank tie convention
};

// Mean-tie rank of `target` among the candidates with keep[i] != 0. The
// target's own entry is always counted. Depends only on the energy order, so
// any strictly increasing transform of the energies leaves it unchanged.
inline double rank_among(std::span<const double> energies, std::size_t target,
                         std::span<const char> keep) {
  const double target_energy = energies[target];
  std::size_t lower = 0;
  std::size_t equal = 0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (i == target || !keep[i]) continue;
    if (energies[i] < target_energy) {
      ++lower;
    } else if (energies[i] == target_energy) {
      ++equal;
    }
  }
  return 1.0 + static_cast<double>(lower) + static_cast<double>(equal) / 2.0;
}

namespace detail {

// Energies for every candidate completion of the queried slot, in blocks over
// the entity table.
inline void candidate_energies(const ViewTables& vt, const Triple& query, QueryDirection dir,
                               std::vector<double>& out) {
  const std::int64_t n = vt.ent.rows;
  out.resize(static_cast<std::size_t>(n));
  auto rel = vt.rel.row(query.rel);
  constexpr std::int64_t kBlock = 512;
  if (dir == QueryDirection::tail) {
    auto head = vt.ent.row(query.head);
    for (std::int64_t b = 0; b < n; b += kBlock) {
      std::int64_t end = std::min(n, b + kBlock);
      for (std::int64_t e = b; e < end; ++e) {
        out[static_cast<std::size_t>(e)] = energy(vt.model, head, rel, vt.ent.row(e));
      }
    }
  } else {
    auto tail = vt.ent.row(query.tail);
    for (std::int64_t b = 0; b < n; b += kBlock) {
      std::int64_t end = std::min(n, b + kBlock);
      for (std::int64_t e = b; e < end; ++e) {
        out[static_cast<std::size_t>(e)] = energy(vt.model, vt.ent.row(e), rel, tail);
      }
    }
  }
}

inline void survivor_mask(const FilterIndex& filter, const Triple& query, QueryDirection dir,
                          std::size_t n, std::vector<char>& keep) {
  keep.assign(n, 1);
  std::span<const EntityId> known = dir == QueryDirection::tail
                                        ? filter.tails_of(query.head, query.rel)
                                        : filter.heads_of(query.rel, query.tail);
  for (EntityId e : known) keep[static_cast<std::size_t>(e)] = 0;
  EntityId target = dir == QueryDirection::tail ? query.tail : query.head;
  keep[static_cast<std::size_t>(target)] = 1;
}

}  // namespace detail

// Filtered rank of one query against a materialized view.
inline RankResult rank_query(const ViewTables& vt, const Triple& query, QueryDirection dir,
                             const FilterIndex& filter) {
  std::vector<double> energies;
  detail::candidate_energies(vt, query, dir, energies);
  std::vector<char> keep;
  detail::survivor_mask(filter, query, dir, energies.size(), keep);
  EntityId target = dir == QueryDirection::tail ? query.tail : query.head;
  RankResult res;
  res.query = query;
  res.direction = dir;
  res.rank = rank_among(energies, static_cast<std::size_t>(target), keep);
  return res;
}

inline RankResult rank_query(const DisentangledEmbeddingTable& table, View view, InterventionOp op,
                             const Triple& query, QueryDirection dir, const FilterIndex& filter) {
  return rank_query(materialize_view(table, view, op), query, dir, filter);
}

struct MetricBlock {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t n_queries = 0;
};

// Left-to-right aggregation in the order the ranks are given.
inline MetricBlock metrics_from_ranks(std::span<const double> ranks) {
  MetricBlock m;
  m.n_queries = ranks.size();
  if (ranks.empty()) return m;
  double rr = 0.0, h1 = 0.0, h3 = 0.0, h10 = 0.0;
  for (double r : ranks) {
    rr += 1.0 / r;
    h1 += r <= 1.0 ? 1.0 : 0.0;
    h3 += r <= 3.0 ? 1.0 : 0.0;
    h10 += r <= 10.0 ? 1.0 : 0.0;
  }
  auto n = static_cast<double>(ranks.size());
  m.mrr = rr / n;
  m.hits1 = h1 / n;
  m.hits3 = h3 / n;
  m.hits10 = h10 / n;
  return m;
}

struct EvalReport {
  MetricBlock head;
  MetricBlock tail;
  MetricBlock both;  // head queries first, then tail queries, equal weight
};

// Filtered MRR / Hits@K over a split. Queries fan out across threads; the
// per-query ranks land in preassigned slots and are aggregated in order, so
// the report is identical for any thread count.
inline EvalReport evaluate(const DisentangledEmbeddingTable& table, View view, InterventionOp op,
                           const TripleSet& eval_set, const FilterIndex& filter, int threads = 1) {
  if (eval_set.empty()) throw DataError("evaluate: empty triple set");
  const ViewTables vt = materialize_view(table, view, op);
  const std::size_t n = eval_set.size();
  std::vector<double> head_ranks(n), tail_ranks(n);
  parallel_chunks(n, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> energies;
    std::vector<char> keep;
    for (std::size_t i = begin; i < end; ++i) {
      const Triple& t = eval_set.triples[i];
      detail::candidate_energies(vt, t, QueryDirection::head, energies);
      detail::survivor_mask(filter, t, QueryDirection::head, energies.size(), keep);
      head_ranks[i] = rank_among(energies, static_cast<std::size_t>(t.head), keep);
      detail::candidate_energies(vt, t, QueryDirection::tail, energies);
      detail::survivor_mask(filter, t, QueryDirection::tail, energies.size(), keep);
      tail_ranks[i] = rank_among(energies, static_cast<std::size_t>(t.tail), keep);
    }
  });

  EvalReport report;
  report.head = metrics_from_ranks(head_ranks);
  report.tail = metrics_from_ranks(tail_ranks);
  std::vector<double> all;
  all.reserve(2 * n);
  all.insert(all.end(), head_ranks.begin(), head_ranks.end());
  all.insert(all.end(), tail_ranks.begin(), tail_ranks.end());
  report.both = metrics_from_ranks(all);
  return report;
}

// Area under the ROC curve of -energy separating `pos` from `neg`, with
// midranks for ties. 0.5 = indistinguishable, 1.0 = perfect separation.
inline double ranking_auc(std::span<const double> pos_energies,
                          std::span<const double> neg_energies) {
  const std::size_t p = pos_energies.size();
  const std::size_t q = neg_energies.size();
  if (p == 0 || q == 0) throw std::invalid_argument("ranking_auc: empty sample");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(p + q);
  for (double e : pos_energies) items.push_back({-e, true});
  for (double e : neg_energies) items.push_back({-e, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].positive) pos_rank_sum += midrank;
    }
    i = j;
  }
  double auc = (pos_rank_sum - 0.5 * static_cast<double>(p) * static_cast<double>(p + 1)) /
               (static_cast<double>(p) * static_cast<double>(q));
  return auc;
}

struct SeparationReport {
  double auc_causal = 0.0;
  double auc_conf = 0.0;
  double auc_inter = 0.0;
};

// Disentanglement diagnostic: how well each view separates true triples from
// one matched uniform corruption each.
inline SeparationReport score_separation(const DisentangledEmbeddingTable& table,
                                         InterventionOp op, const TripleSet& test,
                                         std::size_t num_entities, Rng& rng) {
  if (test.size() < 50) {
    throw DataError("score_separation needs at least 50 triples, got " +
                    std::to_string(test.size()));
  }
  const std::size_t n = test.size();
  std::vector<Triple> corruptions;
  corruptions.reserve(n);
  for (const Triple& t : test.triples) {
    corruptions.push_back(negative_sample(t, 1, num_entities, rng).corrupted(0));
  }
  SeparationReport rep;
  const View views[] = {View::causal, View::confounder, View::intervention};
  double* out[] = {&rep.auc_causal, &rep.auc_conf, &rep.auc_inter};
  for (int v = 0; v < 3; ++v) {
    std::vector<double> pos(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = triple_energy(table, test.triples[i], views[v], op);
      neg[i] = triple_energy(table, corruptions[i], views[v], op);
    }
    *out[v] = ranking_auc(pos, neg);
  }
  return rep;
}

}  // namespace cause
