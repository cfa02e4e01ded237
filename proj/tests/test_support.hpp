#pragma once

// Shared oracles for the test suites. Everything here is an independent
// reimplementation of the quantity it checks: the naive batch loss re-derives
// the objective from the public loss primitives (with the self-adversarial
// weights frozen at the base point, matching their detached-constant
// semantics), the plain trainer is a from-scratch single-table KGE trainer,
// and the brute-force evaluator ranks by linear scans without the filter
// index or materialized views.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cause/embedding.hpp"
#include "cause/eval.hpp"
#include "cause/kg.hpp"
#include "cause/loss.hpp"
#include "cause/model.hpp"
#include "cause/rng.hpp"
#include "cause/train.hpp"

namespace cause::testing {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// |a-b| relative to the larger magnitude, with a 1e-3 scale floor (the usual
// atol 1e-8 / rtol 1e-5 convention expressed as one ratio).
inline double grad_rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1e-3, std::fabs(a), std::fabs(b)});
}

// Distance from (h, r, t) to the nearest kink of the score function; infinity
// for the smooth models. Finite-difference probes are only trusted when every
// energy evaluated sits further than the probe step from a kink.
inline double kink_margin(const ScoreModel& model, std::span<const double> h,
                          std::span<const double> r, std::span<const double> t) {
  const std::size_t d = h.size();
  switch (model.kind) {
    case ScoreKind::TransE: {
      if (model.norm_p == 2) return energy(model, h, r, t);
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < d; ++i) m = std::min(m, std::fabs(h[i] + r[i] - t[i]));
      return m;
    }
    case ScoreKind::RotatE:
      return energy(model, h, r, t);
    case ScoreKind::PairRE: {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < d; ++i) m = std::min(m, std::fabs(h[i] * r[i] - t[i] * r[d + i]));
      return m;
    }
    default:
      return std::numeric_limits<double>::infinity();
  }
}

// One item's self-adversarial weights per channel, computed at the base point.
struct FrozenItemWeights {
  std::vector<double> caus;
  std::vector<double> conf;
  std::vector<double> inter;
};

namespace detail {

struct ChannelVectors {
  std::vector<double> h, r, t;
};

// The three channel views of one positive triple, as plain vectors.
inline ChannelVectors channel_positive(const DisentangledEmbeddingTable& table,
                                       InterventionOp op, const Triple& pos, int channel) {
  ChannelVectors v;
  auto copy = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  switch (channel) {
    case 0:
      v.h = copy(table.ent_causal.row(pos.head));
      v.r = copy(table.rel_causal.row(pos.rel));
      v.t = copy(table.ent_causal.row(pos.tail));
      break;
    case 1:
      v.h = copy(table.ent_conf.row(pos.head));
      v.r = copy(table.rel_conf.row(pos.rel));
      v.t = copy(table.ent_conf.row(pos.tail));
      break;
    default:
      v.h = intervene(table.ent_causal.row(pos.head), table.ent_conf.row(pos.head), op);
      v.r = intervene(table.rel_causal.row(pos.rel), table.rel_conf.row(pos.rel), op);
      v.t = intervene(table.ent_causal.row(pos.tail), table.ent_conf.row(pos.tail), op);
      break;
  }
  return v;
}

// Energy of one corruption under one channel.
inline double channel_neg_energy(const DisentangledEmbeddingTable& table, InterventionOp op,
                                 const ChannelVectors& pos, const NegativeSample& s, int channel) {
  std::vector<double> repl;
  switch (channel) {
    case 0:
      repl.assign(table.ent_causal.row(s.replacement).begin(),
                  table.ent_causal.row(s.replacement).end());
      break;
    case 1:
      repl.assign(table.ent_conf.row(s.replacement).begin(),
                  table.ent_conf.row(s.replacement).end());
      break;
    default:
      repl = intervene(table.ent_causal.row(s.replacement), table.ent_conf.row(s.replacement), op);
      break;
  }
  return s.corrupt_head ? energy(table.model, repl, pos.r, pos.t)
                        : energy(table.model, pos.h, pos.r, repl);
}

}  // namespace detail

inline std::vector<FrozenItemWeights> freeze_weights(const DisentangledEmbeddingTable& table,
                                                     const TrainConfig& cfg,
                                                     const std::vector<NegativeBatch>& negs) {
  std::vector<FrozenItemWeights> frozen(negs.size());
  for (std::size_t item = 0; item < negs.size(); ++item) {
    const std::size_t k = negs[item].samples.size();
    std::vector<double> e(k);
    std::vector<double>* out[] = {&frozen[item].caus, &frozen[item].conf, &frozen[item].inter};
    for (int channel = 0; channel < 3; ++channel) {
      detail::ChannelVectors pos =
          detail::channel_positive(table, cfg.op, negs[item].positive, channel);
      for (std::size_t i = 0; i < k; ++i) {
        e[i] = detail::channel_neg_energy(table, cfg.op, pos, negs[item].samples[i], channel);
      }
      *out[channel] = self_adv_weights(e, cfg.alpha);
    }
  }
  return frozen;
}

// The full objective recomputed from the public loss primitives, with the
// self-adversarial weights held at their base-point values.
inline double naive_total_loss(const DisentangledEmbeddingTable& table, const TrainConfig& cfg,
                               const std::vector<NegativeBatch>& negs,
                               const std::vector<FrozenItemWeights>& frozen) {
  const auto& w = cfg.loss_weights;
  double total = 0.0;
  for (std::size_t item = 0; item < negs.size(); ++item) {
    const std::size_t k = negs[item].samples.size();
    std::vector<double> e(k);
    double pos_e[3];
    double l[3];
    for (int channel = 0; channel < 3; ++channel) {
      detail::ChannelVectors pos =
          detail::channel_positive(table, cfg.op, negs[item].positive, channel);
      pos_e[channel] = energy(table.model, pos.h, pos.r, pos.t);
      for (std::size_t i = 0; i < k; ++i) {
        e[i] = detail::channel_neg_energy(table, cfg.op, pos, negs[item].samples[i], channel);
      }
      const std::vector<double>& fw = channel == 0   ? frozen[item].caus
                                      : channel == 1 ? frozen[item].conf
                                                     : frozen[item].inter;
      l[channel] = channel == 1 ? conf_mse_loss(pos_e[1], e, fw)
                                : sigmoid_margin_loss(pos_e[channel], e, fw, cfg.gamma);
    }
    double l_aux1 = aux_contrast_loss(pos_e[0], pos_e[2], cfg.gamma);
    double l_aux2 = aux_contrast_loss(pos_e[2], pos_e[1], cfg.gamma);
    total += w[0] * l[0] + w[1] * l[1] + w[2] * l[2] + w[3] * l_aux1 + w[4] * l_aux2;
  }
  return total / static_cast<double>(negs.size());
}

// Smallest kink margin over every energy the batch objective evaluates.
inline double batch_kink_margin(const DisentangledEmbeddingTable& table, const TrainConfig& cfg,
                                const std::vector<NegativeBatch>& negs) {
  double m = std::numeric_limits<double>::infinity();
  for (const NegativeBatch& nb : negs) {
    for (int channel = 0; channel < 3; ++channel) {
      detail::ChannelVectors pos = detail::channel_positive(table, cfg.op, nb.positive, channel);
      m = std::min(m, kink_margin(table.model, pos.h, pos.r, pos.t));
      for (const NegativeSample& s : nb.samples) {
        std::vector<double> repl;
        if (channel == 0) {
          repl.assign(table.ent_causal.row(s.replacement).begin(),
                      table.ent_causal.row(s.replacement).end());
        } else if (channel == 1) {
          repl.assign(table.ent_conf.row(s.replacement).begin(),
                      table.ent_conf.row(s.replacement).end());
        } else {
          repl =
              intervene(table.ent_causal.row(s.replacement), table.ent_conf.row(s.replacement),
                        cfg.op);
        }
        m = std::min(m, s.corrupt_head ? kink_margin(table.model, repl, pos.r, pos.t)
                                       : kink_margin(table.model, pos.h, pos.r, repl));
      }
    }
  }
  return m;
}

// Central finite differences of the naive objective against the accumulated
// analytic gradient, over every touched row. Returns the worst grad_rel_err.
inline double max_grad_fd_err(DisentangledEmbeddingTable& table, const TrainConfig& cfg,
                              const std::vector<NegativeBatch>& negs, const RowGrads& grads,
                              double eps = 1e-5) {
  const std::vector<FrozenItemWeights> frozen = freeze_weights(table, cfg, negs);
  double worst = 0.0;
  for (int slot = 0; slot < 4; ++slot) {
    Matrix& mat = slot_matrix(table, slot);
    for (std::int64_t row : grads.touched_rows(slot)) {
      auto analytic = grads.mats[slot].row(row);
      auto params = mat.row(row);
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + eps;
        const double up = naive_total_loss(table, cfg, negs, frozen);
        params[i] = saved - eps;
        const double down = naive_total_loss(table, cfg, negs, frozen);
        params[i] = saved;
        const double fd = (up - down) / (2.0 * eps);
        worst = std::max(worst, grad_rel_err(analytic[i], fd));
      }
    }
  }
  return worst;
}

// A from-scratch single-table KGE trainer: self-adversarial sigmoid ranking
// loss, sparse Adam, one master RNG for negatives. The reduction claim is
// that the full five-term machinery at loss weights (1,0,0,0,0) collapses to
// exactly this, bit for bit.
class PlainKgeTrainer {
 public:
  PlainKgeTrainer(Matrix ent, Matrix rel, ScoreModel model, double gamma, double alpha,
                  int num_negatives)
      : ent_(std::move(ent)),
        rel_(std::move(rel)),
        model_(model),
        gamma_(gamma),
        alpha_(alpha),
        k_(num_negatives) {
    m_ent_ = Matrix(ent_.rows, ent_.cols);
    v_ent_ = Matrix(ent_.rows, ent_.cols);
    m_rel_ = Matrix(rel_.rows, rel_.cols);
    v_rel_ = Matrix(rel_.rows, rel_.cols);
  }

  const Matrix& entities() const { return ent_; }
  const Matrix& relations() const { return rel_; }

  void step(std::span<const Triple> batch, std::size_t num_entities, Rng& rng, double lr) {
    const std::size_t n = batch.size();
    std::vector<NegativeBatch> negs;
    negs.reserve(n);
    for (const Triple& t : batch) negs.push_back(negative_sample(t, k_, num_entities, rng));

    Matrix g_ent(ent_.rows, ent_.cols), g_rel(rel_.rows, rel_.cols);
    std::vector<char> touched_ent(static_cast<std::size_t>(ent_.rows), 0);
    std::vector<char> touched_rel(static_cast<std::size_t>(rel_.rows), 0);

    // per-item row pre-sums, merged in item order (mirrors the arena merge)
    struct Entry {
      bool is_rel;
      std::int64_t row;
      std::vector<double> sum;
    };
    std::vector<Entry> entries;
    std::vector<double> gh(static_cast<std::size_t>(ent_.cols)),
        gr(static_cast<std::size_t>(rel_.cols)), gt(static_cast<std::size_t>(ent_.cols));
    std::vector<double> neg_e(static_cast<std::size_t>(k_));

    auto accumulate = [&](std::size_t item_begin, bool is_rel, std::int64_t row,
                          std::span<const double> g, double coeff) {
      for (std::size_t i = item_begin; i < entries.size(); ++i) {
        if (entries[i].is_rel == is_rel && entries[i].row == row) {
          for (std::size_t j = 0; j < g.size(); ++j) entries[i].sum[j] += coeff * g[j];
          return;
        }
      }
      entries.push_back({is_rel, row, std::vector<double>(g.size(), 0.0)});
      for (std::size_t j = 0; j < g.size(); ++j) entries.back().sum[j] += coeff * g[j];
    };

    for (std::size_t item = 0; item < n; ++item) {
      const std::size_t item_begin = entries.size();
      const Triple pos = negs[item].positive;
      double e_pos = energy_grad(model_, ent_.row(pos.head), rel_.row(pos.rel),
                                 ent_.row(pos.tail), gh, gr, gt);
      double c_pos = sigmoid(e_pos - gamma_);
      if (c_pos != 0.0) {
        accumulate(item_begin, false, pos.head, gh, c_pos);
        accumulate(item_begin, true, pos.rel, gr, c_pos);
        accumulate(item_begin, false, pos.tail, gt, c_pos);
      }
      for (int i = 0; i < k_; ++i) {
        Triple neg = negs[item].corrupted(static_cast<std::size_t>(i));
        neg_e[static_cast<std::size_t>(i)] =
            energy(model_, ent_.row(neg.head), rel_.row(neg.rel), ent_.row(neg.tail));
      }
      std::vector<double> weights = self_adv_weights(neg_e, alpha_);
      for (int i = 0; i < k_; ++i) {
        Triple neg = negs[item].corrupted(static_cast<std::size_t>(i));
        energy_grad(model_, ent_.row(neg.head), rel_.row(neg.rel), ent_.row(neg.tail), gh, gr,
                    gt);
        double c = -weights[static_cast<std::size_t>(i)] *
                   sigmoid(gamma_ - neg_e[static_cast<std::size_t>(i)]);
        if (c == 0.0) continue;
        accumulate(item_begin, false, neg.head, gh, c);
        accumulate(item_begin, true, neg.rel, gr, c);
        accumulate(item_begin, false, neg.tail, gt, c);
      }
    }

    for (const Entry& e : entries) {
      Matrix& g = e.is_rel ? g_rel : g_ent;
      auto dst = g.row(e.row);
      for (std::size_t j = 0; j < e.sum.size(); ++j) dst[j] += e.sum[j];
      (e.is_rel ? touched_rel : touched_ent)[static_cast<std::size_t>(e.row)] = 1;
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::int64_t r = 0; r < g_ent.rows; ++r) {
      if (touched_ent[static_cast<std::size_t>(r)]) {
        for (double& v : g_ent.row(r)) v *= inv;
      }
    }
    for (std::int64_t r = 0; r < g_rel.rows; ++r) {
      if (touched_rel[static_cast<std::size_t>(r)]) {
        for (double& v : g_rel.row(r)) v *= inv;
      }
    }

    step_ += 1;
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
    auto adam = [&](Matrix& p, Matrix& m, Matrix& v, const Matrix& g,
                    const std::vector<char>& touched) {
      for (std::int64_t r = 0; r < p.rows; ++r) {
        if (!touched[static_cast<std::size_t>(r)]) continue;
        auto grow = g.row(r);
        auto mrow = m.row(r);
        auto vrow = v.row(r);
        auto prow = p.row(r);
        for (std::size_t i = 0; i < grow.size(); ++i) {
          mrow[i] = kAdamBeta1 * mrow[i] + (1.0 - kAdamBeta1) * grow[i];
          vrow[i] = kAdamBeta2 * vrow[i] + (1.0 - kAdamBeta2) * grow[i] * grow[i];
          prow[i] -= lr * (mrow[i] / bc1) / (std::sqrt(vrow[i] / bc2) + kAdamEps);
        }
      }
    };
    adam(ent_, m_ent_, v_ent_, g_ent, touched_ent);
    adam(rel_, m_rel_, v_rel_, g_rel, touched_rel);
  }

 private:
  Matrix ent_, rel_;
  Matrix m_ent_, v_ent_, m_rel_, v_rel_;
  ScoreModel model_;
  double gamma_;
  double alpha_;
  int k_;
  std::int64_t step_ = 0;
};

// Reference evaluator: linear scans instead of the filter index, per-triple
// energies instead of materialized views, metrics accumulated the same
// left-to-right way. Intended for small KGs only.
inline EvalReport brute_force_evaluate(const DisentangledEmbeddingTable& table, View view,
                                       InterventionOp op, const TripleSet& eval_set,
                                       const std::vector<const TripleSet*>& known_sets) {
  auto is_known = [&](const Triple& t) {
    for (const TripleSet* ts : known_sets) {
      for (const Triple& k : ts->triples) {
        if (k == t) return true;
      }
    }
    return false;
  };
  const auto n_ent = static_cast<EntityId>(table.num_entities());

  std::vector<double> head_ranks, tail_ranks;
  for (const Triple& q : eval_set.triples) {
    for (QueryDirection dir : {QueryDirection::head, QueryDirection::tail}) {
      const EntityId target = dir == QueryDirection::head ? q.head : q.tail;
      const double target_e = triple_energy(table, q, view, op);
      std::size_t lower = 0, equal = 0;
      for (EntityId c = 0; c < n_ent; ++c) {
        if (c == target) continue;
        Triple cand = q;
        (dir == QueryDirection::head ? cand.head : cand.tail) = c;
        if (is_known(cand)) continue;
        double e = triple_energy(table, cand, view, op);
        if (e < target_e) {
          ++lower;
        } else if (e == target_e) {
          ++equal;
        }
      }
      double rank = 1.0 + static_cast<double>(lower) + static_cast<double>(equal) / 2.0;
      (dir == QueryDirection::head ? head_ranks : tail_ranks).push_back(rank);
    }
  }

  auto block = [](const std::vector<double>& ranks) {
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
  };
  EvalReport rep;
  rep.head = block(head_ranks);
  rep.tail = block(tail_ranks);
  std::vector<double> all = head_ranks;
  all.insert(all.end(), tail_ranks.begin(), tail_ranks.end());
  rep.both = block(all);
  return rep;
}

inline bool metric_blocks_equal(const MetricBlock& a, const MetricBlock& b) {
  return a.mrr == b.mrr && a.hits1 == b.hits1 && a.hits3 == b.hits3 && a.hits10 == b.hits10 &&
         a.n_queries == b.n_queries;
}

inline bool eval_reports_equal(const EvalReport& a, const EvalReport& b) {
  return metric_blocks_equal(a.head, b.head) && metric_blocks_equal(a.tail, b.tail) &&
         metric_blocks_equal(a.both, b.both);
}

}  // namespace cause::testing
