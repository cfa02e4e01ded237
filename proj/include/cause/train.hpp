#pragma once

// Training: the five-objective batch loss, sparse Adam over the four
// embedding matrices, and the epoch loop.
//
// Determinism contract: everything downstream of the seed is reproducible.
// Negatives are drawn from one master stream in item order before any
// parallel work starts; per-item gradient row-sums are computed independently
// and merged in item order, so the result is bit-identical for any thread
// count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cause/embedding.hpp"
#include "cause/errors.hpp"
#include "cause/eval.hpp"
#include "cause/kg.hpp"
#include "cause/log.hpp"
#include "cause/loss.hpp"
#include "cause/model.hpp"
#include "cause/parallel.hpp"
#include "cause/rng.hpp"

namespace cause {

struct TrainConfig {
  ScoreModel model;
  int d_e = 256;
  int d_r = 256;
  double gamma = 4.0;        // margin
  double alpha = 1.0;        // self-adversarial temperature
  int num_negatives = 64;    // negatives per positive
  int batch_size = 512;
  double lr = 1e-3;
  int epochs = 100;
  InterventionOp op = InterventionOp::add;
  std::uint64_t seed = 1;
  // causal, confounder, intervention, aux1, aux2
  std::array<double, 5> loss_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  int eval_every = 10;       // validation cadence in epochs; 0 disables
  int patience = 0;          // stop after this many non-improving evals; 0 disables
  bool store_fp64 = false;   // checkpoint matrices in 64-bit instead of 32

  void validate() const {
    validate_dims(model, d_e, d_r);
    if (gamma < 0.0) throw ConfigError("margin gamma must be >= 0");
    if (!(alpha > 0.0)) throw ConfigError("temperature alpha must be > 0");
    if (num_negatives < 1) throw ConfigError("negative sample count must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (epochs < 0) throw ConfigError("epoch count must be >= 0");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    for (double w : loss_weights) {
      if (!std::isfinite(w)) throw ConfigError("loss weights must be finite");
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum MatSlot : int { kEntCausal = 0, kEntConf = 1, kRelCausal = 2, kRelConf = 3 };

inline Matrix& slot_matrix(DisentangledEmbeddingTable& t, int slot) {
  switch (slot) {
    case kEntCausal: return t.ent_causal;
    case kEntConf: return t.ent_conf;
    case kRelCausal: return t.rel_causal;
    default: return t.rel_conf;
  }
}

inline const Matrix& slot_matrix(const DisentangledEmbeddingTable& t, int slot) {
  return slot_matrix(const_cast<DisentangledEmbeddingTable&>(t), slot);
}

// Dense gradient buffer with per-row touched flags; only touched rows take an
// optimizer step.
struct RowGrads {
  std::array<Matrix, 4> mats;
  std::array<std::vector<char>, 4> touched;

  static RowGrads like(const DisentangledEmbeddingTable& t) {
    RowGrads g;
    for (int s = 0; s < 4; ++s) {
      const Matrix& m = slot_matrix(t, s);
      g.mats[s] = Matrix(m.rows, m.cols);
      g.touched[s].assign(static_cast<std::size_t>(m.rows), 0);
    }
    return g;
  }

  void reset() {
    for (int s = 0; s < 4; ++s) {
      mats[s].fill(0.0);
      std::fill(touched[s].begin(), touched[s].end(), 0);
    }
  }

  void add_row(int slot, std::int64_t row, std::span<const double> g) {
    auto dst = mats[slot].row(row);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    touched[slot][static_cast<std::size_t>(row)] = 1;
  }

  void scale(double s) {
    for (int m = 0; m < 4; ++m) {
      for (std::int64_t r = 0; r < mats[m].rows; ++r) {
        if (!touched[m][static_cast<std::size_t>(r)]) continue;
        for (double& v : mats[m].row(r)) v *= s;
      }
    }
  }

  std::vector<std::int64_t> touched_rows(int slot) const {
    std::vector<std::int64_t> rows;
    for (std::size_t r = 0; r < touched[slot].size(); ++r) {
      if (touched[slot][r]) rows.push_back(static_cast<std::int64_t>(r));
    }
    return rows;
  }
};

namespace detail {

// Per-item row-sum accumulator backed by a flat arena. Each item's
// contributions to a row are pre-summed locally; the arenas are merged in
// item order afterwards, which makes the batch gradient independent of how
// items were distributed over threads.
class ItemGradArena {
 public:
  void clear() {
    entries_.clear();
    item_starts_.clear();
    buf_.clear();
  }

  void begin_item() { item_starts_.push_back(entries_.size()); }

  std::span<double> row_sum(int slot, std::int64_t row, std::size_t dim) {
    std::size_t begin = item_starts_.back();
    for (std::size_t i = begin; i < entries_.size(); ++i) {
      if (entries_[i].slot == slot && entries_[i].row == row) {
        return {buf_.data() + entries_[i].offset, entries_[i].dim};
      }
    }
    Entry e{slot, row, buf_.size(), dim};
    buf_.resize(buf_.size() + dim, 0.0);
    entries_.push_back(e);
    return {buf_.data() + e.offset, e.dim};
  }

  // Two row-sums bound together. Creating a row can grow the arena and move
  // its storage, which would invalidate a span taken earlier, so both entries
  // are created before either span is bound.
  std::pair<std::span<double>, std::span<double>> row_sum_pair(int slot_a, std::int64_t row_a,
                                                               int slot_b, std::int64_t row_b,
                                                               std::size_t dim) {
    row_sum(slot_a, row_a, dim);
    std::span<double> b = row_sum(slot_b, row_b, dim);
    std::span<double> a = row_sum(slot_a, row_a, dim);  // re-fetch: no growth past here
    return {a, b};
  }

  void accumulate(int slot, std::int64_t row, std::span<const double> g, double coeff) {
    auto dst = row_sum(slot, row, g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += coeff * g[i];
  }

  std::size_t num_items() const { return item_starts_.size(); }

  template <class Fn>
  void for_each_entry_of(std::size_t item, Fn&& fn) const {
    std::size_t begin = item_starts_[item];
    std::size_t end = item + 1 < item_starts_.size() ? item_starts_[item + 1] : entries_.size();
    for (std::size_t i = begin; i < end; ++i) {
      const Entry& e = entries_[i];
      fn(e.slot, e.row, std::span<const double>{buf_.data() + e.offset, e.dim});
    }
  }

 private:
  struct Entry {
    int slot;
    std::int64_t row;
    std::size_t offset;
    std::size_t dim;
  };
  std::vector<Entry> entries_;
  std::vector<std::size_t> item_starts_;
  std::vector<double> buf_;
};

struct ItemScratch {
  std::vector<double> gh, gr, gt;        // raw energy gradients
  std::vector<double> ih, ir, it;        // intervened vectors
  std::vector<double> gih, gir, git;     // gradients w.r.t. intervened vectors
  std::vector<double> neg_e;             // negative energies per channel
  std::vector<double> weights;
};

struct ItemLoss {
  double l_caus = 0.0, l_conf = 0.0, l_inter = 0.0, l_aux1 = 0.0, l_aux2 = 0.0;
};

// Loss terms and gradient row-sums for one positive with its negatives.
// Channels whose loss weight is zero (and that no aux term needs) are skipped
// entirely and reported as zero.
inline void item_loss_grads(const DisentangledEmbeddingTable& table, const TrainConfig& cfg,
                            const NegativeBatch& negs, ItemGradArena& arena, ItemScratch& ws,
                            ItemLoss& out) {
  const auto& w = cfg.loss_weights;
  const bool need_caus = w[0] != 0.0 || w[3] != 0.0;
  const bool need_conf = w[1] != 0.0 || w[4] != 0.0;
  const bool need_inter = w[2] != 0.0 || w[3] != 0.0 || w[4] != 0.0;
  const double gamma = cfg.gamma;
  const Triple pos = negs.positive;
  const std::size_t k = negs.samples.size();

  arena.begin_item();
  out = ItemLoss{};

  const std::size_t de = static_cast<std::size_t>(table.entity_dim());
  const std::size_t dr = static_cast<std::size_t>(table.rel_dim());
  ws.gh.resize(intervened_dim(cfg.op, de));
  ws.gt.resize(intervened_dim(cfg.op, de));
  ws.gr.resize(intervened_dim(cfg.op, dr));

  double e_caus_pos = 0.0, e_conf_pos = 0.0, e_inter_pos = 0.0;

  // ---- causal channel ----
  if (need_caus) {
    std::span<double> gh{ws.gh.data(), de}, gr{ws.gr.data(), dr}, gt{ws.gt.data(), de};
    e_caus_pos = energy_grad(table.model, table.ent_causal.row(pos.head),
                             table.rel_causal.row(pos.rel), table.ent_causal.row(pos.tail),
                             gh, gr, gt);
    double c_pos = (w[0] + w[3]) * sigmoid(e_caus_pos - gamma);
    if (c_pos != 0.0) {
      arena.accumulate(kEntCausal, pos.head, gh, c_pos);
      arena.accumulate(kRelCausal, pos.rel, gr, c_pos);
      arena.accumulate(kEntCausal, pos.tail, gt, c_pos);
    }
    if (w[0] != 0.0) {
      ws.neg_e.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        Triple neg = negs.corrupted(i);
        ws.neg_e[i] = energy(table.model, table.ent_causal.row(neg.head),
                             table.rel_causal.row(neg.rel), table.ent_causal.row(neg.tail));
      }
      ws.weights = self_adv_weights(ws.neg_e, cfg.alpha);
      out.l_caus = sigmoid_margin_loss(e_caus_pos, ws.neg_e, ws.weights, gamma);
      for (std::size_t i = 0; i < k; ++i) {
        Triple neg = negs.corrupted(i);
        energy_grad(table.model, table.ent_causal.row(neg.head), table.rel_causal.row(neg.rel),
                    table.ent_causal.row(neg.tail), gh, gr, gt);
        double c = -w[0] * ws.weights[i] * sigmoid(gamma - ws.neg_e[i]);
        if (c == 0.0) continue;
        arena.accumulate(kEntCausal, neg.head, gh, c);
        arena.accumulate(kRelCausal, neg.rel, gr, c);
        arena.accumulate(kEntCausal, neg.tail, gt, c);
      }
    }
  }

  // ---- confounder channel ----
  if (need_conf) {
    std::span<double> gh{ws.gh.data(), de}, gr{ws.gr.data(), dr}, gt{ws.gt.data(), de};
    e_conf_pos = energy_grad(table.model, table.ent_conf.row(pos.head),
                             table.rel_conf.row(pos.rel), table.ent_conf.row(pos.tail),
                             gh, gr, gt);
    double c_pos = -w[4] * sigmoid(gamma - e_conf_pos);  // aux2 pushes this energy up
    if (w[1] != 0.0) {
      ws.neg_e.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        Triple neg = negs.corrupted(i);
        ws.neg_e[i] = energy(table.model, table.ent_conf.row(neg.head),
                             table.rel_conf.row(neg.rel), table.ent_conf.row(neg.tail));
      }
      ws.weights = self_adv_weights(ws.neg_e, cfg.alpha);
      out.l_conf = conf_mse_loss(e_conf_pos, ws.neg_e, ws.weights);
      double mean = 0.0;
      for (std::size_t i = 0; i < k; ++i) mean += ws.weights[i] * ws.neg_e[i];
      double residual = e_conf_pos - mean;
      c_pos += w[1] * 2.0 * residual;
      if (c_pos != 0.0) {
        arena.accumulate(kEntConf, pos.head, gh, c_pos);
        arena.accumulate(kRelConf, pos.rel, gr, c_pos);
        arena.accumulate(kEntConf, pos.tail, gt, c_pos);
      }
      for (std::size_t i = 0; i < k; ++i) {
        Triple neg = negs.corrupted(i);
        energy_grad(table.model, table.ent_conf.row(neg.head), table.rel_conf.row(neg.rel),
                    table.ent_conf.row(neg.tail), gh, gr, gt);
        double c = -w[1] * 2.0 * residual * ws.weights[i];
        if (c == 0.0) continue;
        arena.accumulate(kEntConf, neg.head, gh, c);
        arena.accumulate(kRelConf, neg.rel, gr, c);
        arena.accumulate(kEntConf, neg.tail, gt, c);
      }
    } else if (c_pos != 0.0) {
      arena.accumulate(kEntConf, pos.head, gh, c_pos);
      arena.accumulate(kRelConf, pos.rel, gr, c_pos);
      arena.accumulate(kEntConf, pos.tail, gt, c_pos);
    }
  }

  // ---- intervention channel ----
  if (need_inter) {
    const std::size_t die = intervened_dim(cfg.op, de);
    const std::size_t dir = intervened_dim(cfg.op, dr);
    ws.ih.resize(die);
    ws.it.resize(die);
    ws.ir.resize(dir);
    ws.gih.resize(die);
    ws.git.resize(die);
    ws.gir.resize(dir);

    auto combine_entity = [&](EntityId e, std::span<double> dst) {
      intervene_into(table.ent_causal.row(e), table.ent_conf.row(e), cfg.op, dst);
    };
    auto route_entity = [&](EntityId e, std::span<const double> g, double coeff) {
      auto [gc, gf] = arena.row_sum_pair(kEntCausal, e, kEntConf, e, de);
      intervene_backward(table.ent_causal.row(e), table.ent_conf.row(e), cfg.op, g, coeff, gc, gf);
    };
    auto route_relation = [&](RelationId r, std::span<const double> g, double coeff) {
      auto [gc, gf] = arena.row_sum_pair(kRelCausal, r, kRelConf, r, dr);
      intervene_backward(table.rel_causal.row(r), table.rel_conf.row(r), cfg.op, g, coeff, gc, gf);
    };

    combine_entity(pos.head, ws.ih);
    combine_entity(pos.tail, ws.it);
    intervene_into(table.rel_causal.row(pos.rel), table.rel_conf.row(pos.rel), cfg.op, ws.ir);
    e_inter_pos = energy_grad(table.model, ws.ih, ws.ir, ws.it, ws.gih, ws.gir, ws.git);
    double c_pos = (w[2] + w[4]) * sigmoid(e_inter_pos - gamma) - w[3] * sigmoid(gamma - e_inter_pos);
    if (c_pos != 0.0) {
      route_entity(pos.head, ws.gih, c_pos);
      route_relation(pos.rel, ws.gir, c_pos);
      route_entity(pos.tail, ws.git, c_pos);
    }
    if (w[2] != 0.0) {
      ws.neg_e.resize(k);
      std::vector<double>& nh = ws.gh;  // reuse as combined-neg scratch
      nh.resize(die);
      for (std::size_t i = 0; i < k; ++i) {
        const NegativeSample& s = negs.samples[i];
        combine_entity(s.replacement, nh);
        ws.neg_e[i] = s.corrupt_head ? energy(table.model, nh, ws.ir, ws.it)
                                     : energy(table.model, ws.ih, ws.ir, nh);
      }
      ws.weights = self_adv_weights(ws.neg_e, cfg.alpha);
      out.l_inter = sigmoid_margin_loss(e_inter_pos, ws.neg_e, ws.weights, gamma);
      for (std::size_t i = 0; i < k; ++i) {
        const NegativeSample& s = negs.samples[i];
        Triple neg = negs.corrupted(i);
        combine_entity(s.replacement, nh);
        if (s.corrupt_head) {
          energy_grad(table.model, nh, ws.ir, ws.it, ws.gih, ws.gir, ws.git);
        } else {
          energy_grad(table.model, ws.ih, ws.ir, nh, ws.gih, ws.gir, ws.git);
        }
        double c = -w[2] * ws.weights[i] * sigmoid(gamma - ws.neg_e[i]);
        if (c == 0.0) continue;
        route_entity(neg.head, ws.gih, c);
        route_relation(neg.rel, ws.gir, c);
        route_entity(neg.tail, ws.git, c);
      }
    }
  }

  // ---- auxiliary contrasts (positive triples only) ----
  if (w[3] != 0.0) out.l_aux1 = aux_contrast_loss(e_caus_pos, e_inter_pos, gamma);
  if (w[4] != 0.0) out.l_aux2 = aux_contrast_loss(e_inter_pos, e_conf_pos, gamma);
}

}  // namespace detail

// One mini-batch of the full objective. Draws one shared negative batch per
// positive from `rng` (in item order, before any threading), computes
// per-channel energies and self-adversarial weights, and accumulates the
// averaged gradient row-sums into `grads`.
inline LossBreakdown batch_loss(const DisentangledEmbeddingTable& table,
                                std::span<const Triple> batch, const TrainConfig& cfg,
                                std::size_t num_entities, Rng& rng, RowGrads& grads,
                                int threads = 1) {
  if (batch.empty()) throw ConfigError("batch_loss: empty batch");
  const std::size_t n = batch.size();

  std::vector<NegativeBatch> negs;
  negs.reserve(n);
  for (const Triple& t : batch) {
    negs.push_back(negative_sample(t, cfg.num_negatives, num_entities, rng));
  }

  const std::size_t chunks = num_chunks(n, threads);
  std::vector<detail::ItemGradArena> arenas(chunks);
  std::vector<detail::ItemLoss> losses(n);
  parallel_chunks(n, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    detail::ItemScratch ws;
    arenas[c].clear();
    for (std::size_t i = begin; i < end; ++i) {
      detail::item_loss_grads(table, cfg, negs[i], arenas[c], ws, losses[i]);
    }
  });

  grads.reset();
  for (const auto& arena : arenas) {
    for (std::size_t item = 0; item < arena.num_items(); ++item) {
      arena.for_each_entry_of(item, [&](int slot, std::int64_t row, std::span<const double> g) {
        grads.add_row(slot, row, g);
      });
    }
  }
  grads.scale(1.0 / static_cast<double>(n));

  LossBreakdown breakdown;
  for (const auto& l : losses) {
    breakdown.l_caus += l.l_caus;
    breakdown.l_conf += l.l_conf;
    breakdown.l_inter += l.l_inter;
    breakdown.l_aux1 += l.l_aux1;
    breakdown.l_aux2 += l.l_aux2;
  }
  const double inv = 1.0 / static_cast<double>(n);
  breakdown.l_caus *= inv;
  breakdown.l_conf *= inv;
  breakdown.l_inter *= inv;
  breakdown.l_aux1 *= inv;
  breakdown.l_aux2 *= inv;
  const auto& w = cfg.loss_weights;
  breakdown.total = w[0] * breakdown.l_caus + w[1] * breakdown.l_conf +
                    w[2] * breakdown.l_inter + w[3] * breakdown.l_aux1 + w[4] * breakdown.l_aux2;
  return breakdown;
}

struct OptimizerState {
  std::array<Matrix, 4> m;
  std::array<Matrix, 4> v;
  std::int64_t step = 0;

  static OptimizerState like(const DisentangledEmbeddingTable& t) {
    OptimizerState s;
    for (int i = 0; i < 4; ++i) {
      const Matrix& mat = slot_matrix(t, i);
      s.m[i] = Matrix(mat.rows, mat.cols);
      s.v[i] = Matrix(mat.rows, mat.cols);
    }
    return s;
  }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Sparse Adam: the global step advances once per call, moments and parameters
// update only for touched rows. Exact update per entry, in this order:
//   m  = b1*m + (1-b1)*g
//   v  = b2*v + (1-b2)*g*g
//   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
inline void adam_step(DisentangledEmbeddingTable& table, const RowGrads& grads,
                      OptimizerState& state, double lr) {
  for (int s = 0; s < 4; ++s) {
    const Matrix& g = grads.mats[s];
    const Matrix& p = slot_matrix(table, s);
    if (g.rows != p.rows || g.cols != p.cols) {
      throw std::invalid_argument("adam_step: gradient shape does not match table");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  for (int s = 0; s < 4; ++s) {
    Matrix& p = slot_matrix(table, s);
    Matrix& m = state.m[s];
    Matrix& v = state.v[s];
    const Matrix& g = grads.mats[s];
    for (std::int64_t r = 0; r < p.rows; ++r) {
      if (!grads.touched[s][static_cast<std::size_t>(r)]) continue;
      auto gr = g.row(r);
      auto mr = m.row(r);
      auto vr = v.row(r);
      auto pr = p.row(r);
      for (std::size_t i = 0; i < gr.size(); ++i) {
        mr[i] = kAdamBeta1 * mr[i] + (1.0 - kAdamBeta1) * gr[i];
        vr[i] = kAdamBeta2 * vr[i] + (1.0 - kAdamBeta2) * gr[i] * gr[i];
        pr[i] -= lr * (mr[i] / bc1) / (std::sqrt(vr[i] / bc2) + kAdamEps);
      }
    }
  }
}

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossBreakdown loss;
  bool has_val = false;
  double val_mrr = 0.0;
};

struct TrainOutcome {
  DisentangledEmbeddingTable table;  // best-validation snapshot; final if no eval ran
  OptimizerState opt;
  std::vector<EpochRecord> log;
  int epochs_run = 0;
  int best_epoch = -1;  // -1 when no validation was performed
  double best_val_mrr = 0.0;
};

// Full training loop: shuffled mini-batches, Adam, filtered validation MRR on
// the causal view every eval_every epochs, optional early stopping.
inline TrainOutcome train(const TrainConfig& cfg, const TripleSet& train_set,
                          const TripleSet& valid_set, std::size_t num_entities,
                          std::size_t num_relations, int threads = 1) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");

  Rng rng(cfg.seed);
  TrainOutcome out;
  out.table = init_embeddings(num_entities, num_relations, cfg.d_e, cfg.d_r, cfg.model, rng);
  out.opt = OptimizerState::like(out.table);

  const bool run_validation = cfg.eval_every > 0 && !valid_set.empty();
  FilterIndex val_filter;
  if (run_validation) {
    TripleSet empty;
    val_filter = FilterIndex::build(train_set, valid_set, empty);
  }

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Triple> batch;
  RowGrads grads = RowGrads::like(out.table);

  std::optional<DisentangledEmbeddingTable> best_table;
  std::optional<OptimizerState> best_opt;
  int evals_since_best = 0;

  const std::size_t n = train_set.size();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    LossBreakdown epoch_loss;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train_set.triples[order[i]]);
      LossBreakdown b = batch_loss(out.table, batch, cfg, num_entities, rng, grads, threads);
      if (!b.all_finite()) {
        const char* term = !std::isfinite(b.l_caus)   ? "l_caus"
                           : !std::isfinite(b.l_conf) ? "l_conf"
                           : !std::isfinite(b.l_inter) ? "l_inter"
                           : !std::isfinite(b.l_aux1) ? "l_aux1"
                           : !std::isfinite(b.l_aux2) ? "l_aux2"
                                                      : "total";
        throw TrainError("non-finite loss term " + std::string(term) + " at epoch " +
                         std::to_string(epoch));
      }
      adam_step(out.table, grads, out.opt, cfg.lr);
      const double scale = static_cast<double>(end - begin);
      epoch_loss.l_caus += b.l_caus * scale;
      epoch_loss.l_conf += b.l_conf * scale;
      epoch_loss.l_inter += b.l_inter * scale;
      epoch_loss.l_aux1 += b.l_aux1 * scale;
      epoch_loss.l_aux2 += b.l_aux2 * scale;
      epoch_loss.total += b.total * scale;
    }
    const double inv = 1.0 / static_cast<double>(n);
    epoch_loss.l_caus *= inv;
    epoch_loss.l_conf *= inv;
    epoch_loss.l_inter *= inv;
    epoch_loss.l_aux1 *= inv;
    epoch_loss.l_aux2 *= inv;
    epoch_loss.total *= inv;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = epoch_loss;
    out.epochs_run = epoch;

    bool stop = false;
    if (run_validation && epoch % cfg.eval_every == 0) {
      EvalReport rep = evaluate(out.table, View::causal, cfg.op, valid_set, val_filter, threads);
      rec.has_val = true;
      rec.val_mrr = rep.both.mrr;
      if (out.best_epoch < 0 || rep.both.mrr > out.best_val_mrr) {
        out.best_val_mrr = rep.both.mrr;
        out.best_epoch = epoch;
        best_table = out.table;
        best_opt = out.opt;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (cfg.patience > 0 && evals_since_best >= cfg.patience) stop = true;
      }
      logging::debug("epoch %d total %.6f val_mrr %.4f", epoch, epoch_loss.total, rep.both.mrr);
    } else {
      logging::debug("epoch %d total %.6f", epoch, epoch_loss.total);
    }
    out.log.push_back(rec);
    if (stop) break;
  }

  if (best_table.has_value()) {
    out.table = std::move(*best_table);
    out.opt = std::move(*best_opt);
  }
  return out;
}

}  // namespace cause
