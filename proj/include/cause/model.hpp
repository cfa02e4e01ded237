#pragma once

// Score functions and the intervention operator. Every function here is pure.
//
// Energies follow the convention lower = more plausible, so the dot-product
// models (DistMult, ComplEx) are negated. Complex-valued vectors are laid out
// as (real || imag) halves. RotatE relations are phase vectors with half the
// entity dimension, which keeps the rotation unit-modulus by construction.
//
// Subgradient convention at L1/L2 kinks: zero.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cause/errors.hpp"

namespace cause {

enum class ScoreKind { TransE, DistMult, ComplEx, RotatE, PairRE };

inline const char* score_kind_name(ScoreKind k) {
  switch (k) {
    case ScoreKind::TransE: return "transe";
    case ScoreKind::DistMult: return "distmult";
    case ScoreKind::ComplEx: return "complex";
    case ScoreKind::RotatE: return "rotate";
    case ScoreKind::PairRE: return "pairre";
  }
  return "?";
}

inline ScoreKind parse_score_kind(const std::string& s) {
  if (s == "transe") return ScoreKind::TransE;
  if (s == "distmult") return ScoreKind::DistMult;
  if (s == "complex") return ScoreKind::ComplEx;
  if (s == "rotate") return ScoreKind::RotatE;
  if (s == "pairre") return ScoreKind::PairRE;
  throw ConfigError("unknown score function: '" + s +
                    "' (expected transe|distmult|complex|rotate|pairre)");
}

struct ScoreModel {
  ScoreKind kind = ScoreKind::DistMult;
  int norm_p = 1;  // TransE only; ignored elsewhere

  friend bool operator==(const ScoreModel&, const ScoreModel&) = default;
};

// Relation dimension implied by the entity dimension.
inline int relation_dim(ScoreKind kind, int d_e) {
  switch (kind) {
    case ScoreKind::RotatE: return d_e / 2;
    case ScoreKind::PairRE: return 2 * d_e;
    default: return d_e;
  }
}

inline void validate_dims(const ScoreModel& model, int d_e, int d_r) {
  if (d_e <= 0 || d_r <= 0) throw ConfigError("embedding dimensions must be positive");
  if ((model.kind == ScoreKind::ComplEx || model.kind == ScoreKind::RotatE) && d_e % 2 != 0) {
    throw ConfigError(std::string(score_kind_name(model.kind)) +
                      " needs an even entity dimension, got " + std::to_string(d_e));
  }
  if (model.kind == ScoreKind::TransE && model.norm_p != 1 && model.norm_p != 2) {
    throw ConfigError("transe norm must be 1 or 2");
  }
  int want = relation_dim(model.kind, d_e);
  if (d_r != want) {
    throw ConfigError(std::string(score_kind_name(model.kind)) + ": relation dimension must be " +
                      std::to_string(want) + " for entity dimension " + std::to_string(d_e) +
                      ", got " + std::to_string(d_r));
  }
}

namespace detail {

inline void check_shapes(const ScoreModel& model, std::size_t h, std::size_t r, std::size_t t) {
  bool ok = false;
  switch (model.kind) {
    case ScoreKind::TransE:
    case ScoreKind::DistMult:
      ok = h == r && r == t && h > 0;
      break;
    case ScoreKind::ComplEx:
      ok = h == r && r == t && h > 0 && h % 2 == 0;
      break;
    case ScoreKind::RotatE:
      ok = h == t && h > 0 && h % 2 == 0 && r == h / 2;
      break;
    case ScoreKind::PairRE:
      ok = h == t && h > 0 && r == 2 * h;
      break;
  }
  if (!ok) {
    throw std::invalid_argument(std::string("shape mismatch for ") + score_kind_name(model.kind) +
                                ": |h|=" + std::to_string(h) + " |r|=" + std::to_string(r) +
                                " |t|=" + std::to_string(t));
  }
}

inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Energy of one triple; lower = more plausible.
inline double energy(const ScoreModel& model, std::span<const double> h, std::span<const double> r,
                     std::span<const double> t) {
  detail::check_shapes(model, h.size(), r.size(), t.size());
  const std::size_t d = h.size();
  switch (model.kind) {
    case ScoreKind::TransE: {
      if (model.norm_p == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += std::fabs(h[i] + r[i] - t[i]);
        return acc;
      }
      double ss = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double v = h[i] + r[i] - t[i];
        ss += v * v;
      }
      return std::sqrt(ss);
    }
    case ScoreKind::DistMult: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += h[i] * r[i] * t[i];
      return -acc;
    }
    case ScoreKind::ComplEx: {
      const std::size_t m = d / 2;
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double hr = h[i], hi = h[m + i];
        double rr = r[i], ri = r[m + i];
        double tr = t[i], ti = t[m + i];
        acc += hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr;
      }
      return -acc;
    }
    case ScoreKind::RotatE: {
      const std::size_t m = d / 2;
      double ss = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double c = std::cos(r[i]), s = std::sin(r[i]);
        double ur = h[i] * c - h[m + i] * s - t[i];
        double ui = h[i] * s + h[m + i] * c - t[m + i];
        ss += ur * ur + ui * ui;
      }
      return std::sqrt(ss);
    }
    case ScoreKind::PairRE: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += std::fabs(h[i] * r[i] - t[i] * r[d + i]);
      return acc;
    }
  }
  return 0.0;
}

// Energy plus analytic gradients with respect to each input vector. The
// gradient spans must match the input sizes; they are overwritten.
inline double energy_grad(const ScoreModel& model, std::span<const double> h,
                          std::span<const double> r, std::span<const double> t,
                          std::span<double> dh, std::span<double> dr, std::span<double> dt) {
  detail::check_shapes(model, h.size(), r.size(), t.size());
  if (dh.size() != h.size() || dr.size() != r.size() || dt.size() != t.size()) {
    throw std::invalid_argument("gradient spans must match input sizes");
  }
  const std::size_t d = h.size();
  switch (model.kind) {
    case ScoreKind::TransE: {
      if (model.norm_p == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          double v = h[i] + r[i] - t[i];
          acc += std::fabs(v);
          double s = detail::sign0(v);
          dh[i] = s;
          dr[i] = s;
          dt[i] = -s;
        }
        return acc;
      }
      double ss = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double v = h[i] + r[i] - t[i];
        ss += v * v;
        dh[i] = v;  // scaled below
      }
      double norm = std::sqrt(ss);
      double inv = norm > 0.0 ? 1.0 / norm : 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double g = dh[i] * inv;
        dh[i] = g;
        dr[i] = g;
        dt[i] = -g;
      }
      return norm;
    }
    case ScoreKind::DistMult: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        acc += h[i] * r[i] * t[i];
        dh[i] = -r[i] * t[i];
        dr[i] = -h[i] * t[i];
        dt[i] = -h[i] * r[i];
      }
      return -acc;
    }
    case ScoreKind::ComplEx: {
      const std::size_t m = d / 2;
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double hr = h[i], hi = h[m + i];
        double rr = r[i], ri = r[m + i];
        double tr = t[i], ti = t[m + i];
        acc += hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr;
        dh[i] = -(rr * tr + ri * ti);
        dh[m + i] = -(rr * ti - ri * tr);
        dr[i] = -(hr * tr + hi * ti);
        dr[m + i] = -(hr * ti - hi * tr);
        dt[i] = -(hr * rr - hi * ri);
        dt[m + i] = -(hi * rr + hr * ri);
      }
      return -acc;
    }
    case ScoreKind::RotatE: {
      const std::size_t m = d / 2;
      double ss = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double c = std::cos(r[i]), s = std::sin(r[i]);
        double ar = h[i] * c - h[m + i] * s;
        double ai = h[i] * s + h[m + i] * c;
        double ur = ar - t[i];
        double ui = ai - t[m + i];
        ss += ur * ur + ui * ui;
        // stash the residual and rotation; rescaled by 1/norm below
        dh[i] = ur * c + ui * s;
        dh[m + i] = -ur * s + ui * c;
        dr[i] = -ur * ai + ui * ar;
        dt[i] = -ur;
        dt[m + i] = -ui;
      }
      double norm = std::sqrt(ss);
      double inv = norm > 0.0 ? 1.0 / norm : 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        dh[i] *= inv;
        dh[m + i] *= inv;
        dr[i] *= inv;
        dt[i] *= inv;
        dt[m + i] *= inv;
      }
      return norm;
    }
    case ScoreKind::PairRE: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double v = h[i] * r[i] - t[i] * r[d + i];
        acc += std::fabs(v);
        double s = detail::sign0(v);
        dh[i] = s * r[i];
        dr[i] = s * h[i];
        dt[i] = -s * r[d + i];
        dr[d + i] = -s * t[i];
      }
      return acc;
    }
  }
  return 0.0;
}

struct TripleGradients {
  std::vector<double> d_head;
  std::vector<double> d_rel;
  std::vector<double> d_tail;
};

inline double energy_grad(const ScoreModel& model, std::span<const double> h,
                          std::span<const double> r, std::span<const double> t,
                          TripleGradients& grads) {
  grads.d_head.resize(h.size());
  grads.d_rel.resize(r.size());
  grads.d_tail.resize(t.size());
  return energy_grad(model, h, r, t, grads.d_head, grads.d_rel, grads.d_tail);
}

enum class InterventionOp { add, subtract, multiply, concat };

inline const char* intervention_op_name(InterventionOp op) {
  switch (op) {
    case InterventionOp::add: return "add";
    case InterventionOp::subtract: return "subtract";
    case InterventionOp::multiply: return "multiply";
    case InterventionOp::concat: return "concat";
  }
  return "?";
}

inline InterventionOp parse_intervention_op(const std::string& s) {
  if (s == "add") return InterventionOp::add;
  if (s == "subtract") return InterventionOp::subtract;
  if (s == "multiply") return InterventionOp::multiply;
  if (s == "concat") return InterventionOp::concat;
  throw ConfigError("unknown intervention operator: '" + s +
                    "' (expected add|subtract|multiply|concat)");
}

inline std::size_t intervened_dim(InterventionOp op, std::size_t d) {
  return op == InterventionOp::concat ? 2 * d : d;
}

// Recombines a causal and a confounder vector into one intervention vector.
inline void intervene_into(std::span<const double> caus, std::span<const double> conf,
                           InterventionOp op, std::span<double> out) {
  if (caus.size() != conf.size()) throw std::invalid_argument("intervene: size mismatch");
  if (out.size() != intervened_dim(op, caus.size())) {
    throw std::invalid_argument("intervene: bad output size");
  }
  const std::size_t d = caus.size();
  switch (op) {
    case InterventionOp::add:
      for (std::size_t i = 0; i < d; ++i) out[i] = caus[i] + conf[i];
      break;
    case InterventionOp::subtract:
      for (std::size_t i = 0; i < d; ++i) out[i] = caus[i] - conf[i];
      break;
    case InterventionOp::multiply:
      for (std::size_t i = 0; i < d; ++i) out[i] = caus[i] * conf[i];
      break;
    case InterventionOp::concat:
      for (std::size_t i = 0; i < d; ++i) out[i] = caus[i];
      for (std::size_t i = 0; i < d; ++i) out[d + i] = conf[i];
      break;
  }
}

inline std::vector<double> intervene(std::span<const double> caus, std::span<const double> conf,
                                     InterventionOp op) {
  std::vector<double> out(intervened_dim(op, caus.size()));
  intervene_into(caus, conf, op, out);
  return out;
}

// Routes a gradient on the intervention vector back onto the causal and
// confounder inputs. Accumulates into g_caus / g_conf with the given scale.
inline void intervene_backward(std::span<const double> caus, std::span<const double> conf,
                               InterventionOp op, std::span<const double> g_out, double scale,
                               std::span<double> g_caus, std::span<double> g_conf) {
  const std::size_t d = caus.size();
  switch (op) {
    case InterventionOp::add:
      for (std::size_t i = 0; i < d; ++i) {
        g_caus[i] += scale * g_out[i];
        g_conf[i] += scale * g_out[i];
      }
      break;
    case InterventionOp::subtract:
      for (std::size_t i = 0; i < d; ++i) {
        g_caus[i] += scale * g_out[i];
        g_conf[i] -= scale * g_out[i];
      }
      break;
    case InterventionOp::multiply:
      for (std::size_t i = 0; i < d; ++i) {
        g_caus[i] += scale * g_out[i] * conf[i];
        g_conf[i] += scale * g_out[i] * caus[i];
      }
      break;
    case InterventionOp::concat:
      for (std::size_t i = 0; i < d; ++i) {
        g_caus[i] += scale * g_out[i];
        g_conf[i] += scale * g_out[d + i];
      }
      break;
  }
}

}  // namespace cause
