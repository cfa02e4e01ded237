#pragma once

// The five training objectives, assembled from three pieces: the
// self-adversarial sigmoid loss, the confounder MSE loss and the positive-only
// contrast loss. All functions are pure and numerically stable.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace cause {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// Softmax over -alpha * energy, so the hardest (lowest-energy, most
// plausible) negatives get the largest weights. Weights sum to 1 and are
// treated as constants in the backward pass.
inline std::vector<double> self_adv_weights(std::span<const double> neg_energies, double alpha) {
  if (neg_energies.empty()) throw std::invalid_argument("self_adv_weights: no energies");
  if (!(alpha > 0.0)) throw std::invalid_argument("self_adv_weights: alpha must be positive");
  std::vector<double> w(neg_energies.size());
  double hi = -alpha * neg_energies[0];
  for (std::size_t i = 1; i < neg_energies.size(); ++i) {
    hi = std::max(hi, -alpha * neg_energies[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < neg_energies.size(); ++i) {
    w[i] = std::exp(-alpha * neg_energies[i] - hi);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Margin sigmoid loss for one positive against K weighted negatives:
//   -log s(gamma - E_pos) - sum_i w_i log s(E_neg_i - gamma)
inline double sigmoid_margin_loss(double pos_energy, std::span<const double> neg_energies,
                                  std::span<const double> weights, double gamma) {
  if (neg_energies.size() != weights.size()) {
    throw std::invalid_argument("sigmoid_margin_loss: weight/energy size mismatch");
  }
  double loss = -log_sigmoid(gamma - pos_energy);
  for (std::size_t i = 0; i < neg_energies.size(); ++i) {
    loss -= weights[i] * log_sigmoid(neg_energies[i] - gamma);
  }
  return loss;
}

// Squared residual between the positive confounder energy and the weighted
// mean of the negative confounder energies. Zero exactly when the positive is
// indistinguishable from the weighted negatives.
inline double conf_mse_loss(double pos_energy, std::span<const double> neg_energies,
                            std::span<const double> weights) {
  if (neg_energies.size() != weights.size()) {
    throw std::invalid_argument("conf_mse_loss: weight/energy size mismatch");
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < neg_energies.size(); ++i) mean += weights[i] * neg_energies[i];
  double residual = pos_energy - mean;
  return residual * residual;
}

// Positive-only contrast pushing one channel's energy below the margin and the
// other's above it. Used causal-vs-intervention and intervention-vs-confounder.
inline double aux_contrast_loss(double better_energy, double worse_energy, double gamma) {
  return -log_sigmoid(gamma - better_energy) - log_sigmoid(worse_energy - gamma);
}

// Per-term values are unweighted means over the batch; total is the weighted
// sum under the configured loss weights.
struct LossBreakdown {
  double l_caus = 0.0;
  double l_conf = 0.0;
  double l_inter = 0.0;
  double l_aux1 = 0.0;
  double l_aux2 = 0.0;
  double total = 0.0;

  bool all_finite() const {
    return std::isfinite(l_caus) && std::isfinite(l_conf) && std::isfinite(l_inter) &&
           std::isfinite(l_aux1) && std::isfinite(l_aux2) && std::isfinite(total);
  }
};

}  // namespace cause
