#pragma once

// Rank-1 (and C-class) linear probes on frozen node vectors: scores,
// losses with analytic gradients, and the AdamW optimizer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/matrix.hpp"

namespace dagprobe {

enum class ProbeVariant { ranking, regression, classification, distance };

inline std::string to_string(ProbeVariant v) {
  switch (v) {
    case ProbeVariant::ranking: return "ranking";
    case ProbeVariant::regression: return "regression";
    case ProbeVariant::classification: return "classification";
    case ProbeVariant::distance: return "distance";
  }
  return "?";
}

inline ProbeVariant variant_from_string(std::string_view s) {
  if (s == "ranking") return ProbeVariant::ranking;
  if (s == "regression") return ProbeVariant::regression;
  if (s == "classification") return ProbeVariant::classification;
  if (s == "distance") return ProbeVariant::distance;
  throw FormatError("unknown probe variant '" + std::string(s) + "'");
}

inline bool is_depth_variant(ProbeVariant v) { return v != ProbeVariant::distance; }

/// Depth classes 0..5: one class per supervised depth value.
inline constexpr std::size_t kDepthClasses = 6;

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Scalar losses.

inline double depth_score(std::span<const double> w, std::span<const double> z) {
  if (w.size() != z.size()) throw ValidationError("probe and feature dimensions differ");
  return dot(w, z);
}

/// softplus(-(deep - shallow)): small when the deeper node scores higher.
inline double ranking_loss(double score_deep, double score_shallow) {
  return softplus(-(score_deep - score_shallow));
}

/// d ranking_loss / d score_deep; the shallow-side gradient is its negation.
inline double ranking_loss_grad(double score_deep, double score_shallow) {
  return -sigmoid(-(score_deep - score_shallow));
}

inline double regression_loss(double pred, double gold) {
  const double r = pred - gold;
  return r * r;
}

inline double regression_loss_grad(double pred, double gold) { return 2.0 * (pred - gold); }

/// Cross-entropy of softmax(logits) against a gold class.
inline double classification_loss(std::span<const double> logits, std::size_t gold_class) {
  if (gold_class >= logits.size()) throw ValidationError("gold class out of range");
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - top);
  return top + std::log(sum) - logits[gold_class];
}

/// softmax(logits) - one_hot(gold).
inline std::vector<double> classification_loss_grad(std::span<const double> logits,
                                                    std::size_t gold_class) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> g(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) sum += (g[k] = std::exp(logits[k] - top));
  for (double& x : g) x /= sum;
  g[gold_class] -= 1.0;
  return g;
}

/// w . |z_u - z_v|; symmetric in (u, v) by construction.
inline double distance_prediction(std::span<const double> w, std::span<const double> z_u,
                                  std::span<const double> z_v) {
  if (w.size() != z_u.size() || z_u.size() != z_v.size())
    throw ValidationError("probe and feature dimensions differ");
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * std::abs(z_u[k] - z_v[k]);
  return s;
}

inline double distance_loss(std::span<const double> z_u, std::span<const double> z_v,
                            std::span<const double> w, double gold) {
  return regression_loss(distance_prediction(w, z_u, z_v), gold);
}

// ---------------------------------------------------------------------------
// Objectives in parameter space. Each returns the loss and adds its
// gradient with respect to the weights into `grad` (scaled by `scale`).

inline double ranking_objective(std::span<const double> w, std::span<const double> z_deep,
                                std::span<const double> z_shallow, std::span<double> grad,
                                double scale = 1.0) {
  const double sd = dot(w, z_deep);
  const double ss = dot(w, z_shallow);
  const double g = ranking_loss_grad(sd, ss) * scale;
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g * (z_deep[k] - z_shallow[k]);
  return ranking_loss(sd, ss);
}

inline double regression_objective(std::span<const double> w, std::span<const double> z,
                                   double gold, std::span<double> grad, double scale = 1.0) {
  const double pred = dot(w, z);
  const double g = regression_loss_grad(pred, gold) * scale;
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g * z[k];
  return regression_loss(pred, gold);
}

/// `weights` is the flattened C x d matrix W; logits = W z.
inline double classification_objective(std::span<const double> weights, std::size_t classes,
                                       std::span<const double> z, std::size_t gold_class,
                                       std::span<double> grad, double scale = 1.0) {
  const std::size_t d = z.size();
  std::vector<double> logits(classes);
  for (std::size_t c = 0; c < classes; ++c) logits[c] = dot(weights.subspan(c * d, d), z);
  if (!grad.empty()) {
    const auto g = classification_loss_grad(logits, gold_class);
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t k = 0; k < d; ++k) grad[c * d + k] += scale * g[c] * z[k];
  }
  return classification_loss(logits, gold_class);
}

inline double distance_objective(std::span<const double> w, std::span<const double> z_u,
                                 std::span<const double> z_v, double gold, std::span<double> grad,
                                 double scale = 1.0) {
  const double pred = distance_prediction(w, z_u, z_v);
  const double g = regression_loss_grad(pred, gold) * scale;
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g * std::abs(z_u[k] - z_v[k]);
  return regression_loss(pred, gold);
}

// ---------------------------------------------------------------------------

struct AdamParams {
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with decoupled weight decay: the decay shrinks the parameters
/// directly instead of entering the gradient moments.
class AdamW {
 public:
  AdamW(std::size_t size, AdamParams params) : params_(params), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> theta, std::span<const double> grad) {
    ++t_;
    const double lr = params_.learning_rate;
    const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] *= 1.0 - lr * params_.weight_decay;
      m_[i] = params_.beta1 * m_[i] + (1.0 - params_.beta1) * grad[i];
      v_[i] = params_.beta2 * v_[i] + (1.0 - params_.beta2) * grad[i] * grad[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + params_.epsilon);
    }
  }

  std::size_t steps() const { return static_cast<std::size_t>(t_); }

 private:
  AdamParams params_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------

/// A trained linear probe. Rank-1 variants hold one weight row; the
/// classifier holds kDepthClasses rows. No bias anywhere.
struct Probe {
  ProbeVariant variant = ProbeVariant::ranking;
  int layer = 0;
  std::size_t dim = 0;
  Matrix weights;  // rows x dim

  std::size_t classes() const { return weights.rows(); }
};

/// Per-node depth prediction: w.z for rank-1 probes, the argmax class for
/// the classifier.
inline std::vector<double> predict_depths(const Probe& probe, const Matrix& features) {
  if (!is_depth_variant(probe.variant)) throw ValidationError("not a depth probe");
  if (features.cols() != probe.dim) throw ValidationError("probe and feature dimensions differ");
  std::vector<double> out(features.rows());
  for (std::size_t v = 0; v < features.rows(); ++v) {
    if (probe.variant == ProbeVariant::classification) {
      std::size_t best = 0;
      double best_logit = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < probe.classes(); ++c) {
        const double l = dot(probe.weights.row(c), features.row(v));
        if (l > best_logit) {
          best_logit = l;
          best = c;
        }
      }
      out[v] = static_cast<double>(best);
    } else {
      out[v] = dot(probe.weights.row(0), features.row(v));
    }
  }
  return out;
}

/// Symmetric matrix of predicted distances with a zero diagonal.
inline Matrix predict_distances(const Probe& probe, const Matrix& features) {
  if (probe.variant != ProbeVariant::distance) throw ValidationError("not a distance probe");
  if (features.cols() != probe.dim) throw ValidationError("probe and feature dimensions differ");
  const std::size_t n = features.rows();
  Matrix d(n, n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      d(u, v) = d(v, u) = distance_prediction(probe.weights.row(0), features.row(u), features.row(v));
  return d;
}

}  // namespace dagprobe
