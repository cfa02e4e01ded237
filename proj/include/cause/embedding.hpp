#pragma once

// The four-matrix embedding state: causal/confounder x entity/relation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "cause/errors.hpp"
#include "cause/kg.hpp"
#include "cause/model.hpp"
#include "cause/rng.hpp"

namespace cause {

struct Matrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

  std::span<double> row(std::int64_t i) {
    return {data.data() + i * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(std::int64_t i) const {
    return {data.data() + i * cols, static_cast<std::size_t>(cols)};
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct DisentangledEmbeddingTable {
  Matrix ent_causal;
  Matrix ent_conf;
  Matrix rel_causal;
  Matrix rel_conf;
  ScoreModel model;

  std::int64_t num_entities() const { return ent_causal.rows; }
  std::int64_t num_relations() const { return rel_causal.rows; }
  int entity_dim() const { return static_cast<int>(ent_causal.cols); }
  int rel_dim() const { return static_cast<int>(rel_causal.cols); }

  bool all_finite() const {
    return ent_causal.all_finite() && ent_conf.all_finite() && rel_causal.all_finite() &&
           rel_conf.all_finite();
  }

  friend bool operator==(const DisentangledEmbeddingTable&,
                         const DisentangledEmbeddingTable&) = default;
};

// Fresh table. Entity (and non-phase relation) entries are i.i.d. uniform on
// [-sqrt(6/d), +sqrt(6/d)] for the matrix's own dimension d; RotatE relation
// rows are phases, uniform on [-pi, pi]. Draw order is fixed: ent_causal,
// ent_conf, rel_causal, rel_conf, row-major within each matrix.
inline DisentangledEmbeddingTable init_embeddings(std::size_t num_entities,
                                                  std::size_t num_relations, int d_e, int d_r,
                                                  const ScoreModel& model, Rng& rng) {
  validate_dims(model, d_e, d_r);
  if (num_entities == 0 || num_relations == 0) {
    throw ConfigError("cannot initialize embeddings over an empty vocabulary");
  }

  DisentangledEmbeddingTable table;
  table.model = model;
  auto n_ent = static_cast<std::int64_t>(num_entities);
  auto n_rel = static_cast<std::int64_t>(num_relations);
  table.ent_causal = Matrix(n_ent, d_e);
  table.ent_conf = Matrix(n_ent, d_e);
  table.rel_causal = Matrix(n_rel, d_r);
  table.rel_conf = Matrix(n_rel, d_r);

  const double ent_bound = std::sqrt(6.0 / d_e);
  const bool rel_is_phase = model.kind == ScoreKind::RotatE;
  const double rel_bound = rel_is_phase ? std::numbers::pi : std::sqrt(6.0 / d_r);

  for (Matrix* m : {&table.ent_causal, &table.ent_conf}) {
    for (double& v : m->data) v = rng.uniform(-ent_bound, ent_bound);
  }
  for (Matrix* m : {&table.rel_causal, &table.rel_conf}) {
    for (double& v : m->data) v = rng.uniform(-rel_bound, rel_bound);
  }
  return table;
}

enum class View { causal, confounder, intervention };

inline const char* view_name(View v) {
  switch (v) {
    case View::causal: return "causal";
    case View::confounder: return "confounder";
    case View::intervention: return "intervention";
  }
  return "?";
}

inline View parse_view(const std::string& s) {
  if (s == "causal") return View::causal;
  if (s == "confounder") return View::confounder;
  if (s == "intervention") return View::intervention;
  throw ConfigError("unknown view: '" + s + "' (expected causal|confounder|intervention)");
}

// A view's effective entity/relation matrices. For the intervention view the
// causal and confounder rows are recombined up front; for the other views the
// matrices are plain copies.
struct ViewTables {
  Matrix ent;
  Matrix rel;
  ScoreModel model;
};

inline ViewTables materialize_view(const DisentangledEmbeddingTable& table, View view,
                                   InterventionOp op) {
  ViewTables vt;
  vt.model = table.model;
  switch (view) {
    case View::causal:
      vt.ent = table.ent_causal;
      vt.rel = table.rel_causal;
      return vt;
    case View::confounder:
      vt.ent = table.ent_conf;
      vt.rel = table.rel_conf;
      return vt;
    case View::intervention: {
      vt.ent = Matrix(table.ent_causal.rows,
                      static_cast<std::int64_t>(intervened_dim(op, table.ent_causal.cols)));
      vt.rel = Matrix(table.rel_causal.rows,
                      static_cast<std::int64_t>(intervened_dim(op, table.rel_causal.cols)));
      for (std::int64_t i = 0; i < vt.ent.rows; ++i) {
        intervene_into(table.ent_causal.row(i), table.ent_conf.row(i), op, vt.ent.row(i));
      }
      for (std::int64_t i = 0; i < vt.rel.rows; ++i) {
        intervene_into(table.rel_causal.row(i), table.rel_conf.row(i), op, vt.rel.row(i));
      }
      return vt;
    }
  }
  return vt;
}

// Energy of one indexed triple under a view. The intervention view recombines
// both the entity and the relation embeddings before scoring.
inline double triple_energy(const DisentangledEmbeddingTable& table, const Triple& t, View view,
                            InterventionOp op = InterventionOp::add) {
  if (t.head < 0 || t.head >= table.num_entities() || t.tail < 0 ||
      t.tail >= table.num_entities() || t.rel < 0 || t.rel >= table.num_relations()) {
    throw std::out_of_range("triple index outside the embedding table");
  }
  switch (view) {
    case View::causal:
      return energy(table.model, table.ent_causal.row(t.head), table.rel_causal.row(t.rel),
                    table.ent_causal.row(t.tail));
    case View::confounder:
      return energy(table.model, table.ent_conf.row(t.head), table.rel_conf.row(t.rel),
                    table.ent_conf.row(t.tail));
    case View::intervention: {
      std::vector<double> h = intervene(table.ent_causal.row(t.head), table.ent_conf.row(t.head), op);
      std::vector<double> r = intervene(table.rel_causal.row(t.rel), table.rel_conf.row(t.rel), op);
      std::vector<double> tl =
          intervene(table.ent_causal.row(t.tail), table.ent_conf.row(t.tail), op);
      return energy(table.model, h, r, tl);
    }
  }
  return 0.0;
}

}  // namespace cause
