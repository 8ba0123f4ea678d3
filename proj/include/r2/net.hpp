#pragma once

// Permutation-invariant policy/value network over a variable-size action set.
//
//   embed:  row -> relu(W1 x + b1) -> relu(W2 . + b2)             (F -> H -> H)
//   pool:   g = [mean over rows ; max over rows]                   (2H)
//   policy: logit_i = wp2 . relu(Wp1 [e_i ; g] + bp1) + bp2        (3H -> H -> 1)
//   value:  v = tanh(wv2 . relu(Wv1 g + bv1) + bv2)                (2H -> H -> 1)
//
// All parameters live in one flat vector in the order
//   W1 b1 W2 b2 Wp1 bp1 wp2 bp2 Wv1 bv1 wv2 bv2
// with matrices row-major (out x in). Gradients share the layout.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "r2/error.hpp"
#include "r2/features.hpp"

namespace r2 {

struct NetArch {
  int feature_width = 10;
  int hidden = 64;

  [[nodiscard]] auto param_count() const noexcept -> Eigen::Index {
    const Eigen::Index F = feature_width, H = hidden;
    return (H * F + H) + (H * H + H) + (H * 3 * H + H) + (H + 1) + (H * 2 * H + H) + (H + 1);
  }
  friend auto operator==(const NetArch&, const NetArch&) -> bool = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline constexpr double default_weight_decay = 1e-4;
inline constexpr double default_learning_rate = 1e-3;

// Weights plus Adam moments and step counter.
struct NetParams {
  NetArch arch;
  Eigen::VectorXd theta;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
  std::int64_t step = 0;

  friend auto operator==(const NetParams& a, const NetParams& b) -> bool {
    return a.arch == b.arch && a.step == b.step && a.theta == b.theta && a.adam_m == b.adam_m && a.adam_v == b.adam_v;
  }
};

struct NetOutput {
  Eigen::VectorXd policy;
  double value = 0.0;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Offsets of each tensor inside the flat parameter vector.
struct Layout {
  Eigen::Index W1, b1, W2, b2, Wp1, bp1, wp2, bp2, Wv1, bv1, wv2, bv2, end;

  explicit Layout(const NetArch& a) {
    const Eigen::Index F = a.feature_width, H = a.hidden;
    W1 = 0;
    b1 = W1 + H * F;
    W2 = b1 + H;
    b2 = W2 + H * H;
    Wp1 = b2 + H;
    bp1 = Wp1 + H * 3 * H;
    wp2 = bp1 + H;
    bp2 = wp2 + H;
    Wv1 = bp2 + 1;
    bv1 = Wv1 + H * 2 * H;
    wv2 = bv1 + H;
    bv2 = wv2 + H;
    end = bv2 + 1;
  }
};

template <class Scalar>
struct Views {
  using Mat = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>, const RowMat, RowMat>>;
  using Vec = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>, const Eigen::VectorXd, Eigen::VectorXd>>;

  Mat W1, W2, Wp1, Wv1;
  Vec b1, b2, bp1, wp2, bv1, wv2;
  Scalar* bp2;
  Scalar* bv2;

  Views(Scalar* p, const NetArch& a, const Layout& l)
      : W1(p + l.W1, a.hidden, a.feature_width),
        W2(p + l.W2, a.hidden, a.hidden),
        Wp1(p + l.Wp1, a.hidden, 3 * a.hidden),
        Wv1(p + l.Wv1, a.hidden, 2 * a.hidden),
        b1(p + l.b1, a.hidden),
        b2(p + l.b2, a.hidden),
        bp1(p + l.bp1, a.hidden),
        wp2(p + l.wp2, a.hidden),
        bv1(p + l.bv1, a.hidden),
        wv2(p + l.wv2, a.hidden),
        bp2(p + l.bp2),
        bv2(p + l.bv2) {}
  Views(Scalar* p, const NetArch& a) : Views(p, a, Layout(a)) {}
};

// Intermediate activations kept for the backward pass.
struct Trace {
  RowMat a1, h1, a2, e, a3, h3;
  Eigen::VectorXd g, a4, h4, logits, policy;
  Eigen::VectorXi argmax;
  double value = 0.0;
};

inline void require_finite(const auto& m, const char* layer) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in layer ") + layer);
}

inline auto run_forward(const NetParams& p, const FeatureMatrix& x) -> Trace {
  const auto& a = p.arch;
  if (x.rows() < 1) throw ContractError("forward needs at least one action row");
  if (x.cols() != a.feature_width) {
    throw ContractError("feature width " + std::to_string(x.cols()) + " does not match network width " +
                        std::to_string(a.feature_width));
  }
  const Views<const double> w(p.theta.data(), a);
  const Eigen::Index H = a.hidden;
  Trace t;
  t.a1 = (x * w.W1.transpose()).rowwise() + w.b1.transpose();
  t.h1 = t.a1.cwiseMax(0.0);
  t.a2 = (t.h1 * w.W2.transpose()).rowwise() + w.b2.transpose();
  t.e = t.a2.cwiseMax(0.0);
  require_finite(t.e, "embed");

  t.g.resize(2 * H);
  t.argmax.resize(H);
  t.g.head(H) = t.e.colwise().mean().transpose();
  for (Eigen::Index j = 0; j < H; ++j) {
    Eigen::Index r = 0;
    t.g(H + j) = t.e.col(j).maxCoeff(&r);
    t.argmax(j) = static_cast<int>(r);
  }

  const auto wpe = w.Wp1.leftCols(H);
  const auto wpg = w.Wp1.rightCols(2 * H);
  const Eigen::VectorXd shared = wpg * t.g + w.bp1;
  t.a3 = (t.e * wpe.transpose()).rowwise() + shared.transpose();
  t.h3 = t.a3.cwiseMax(0.0);
  t.logits = (t.h3 * w.wp2).array() + *w.bp2;
  require_finite(t.logits, "policy");
  const double mx = t.logits.maxCoeff();
  t.policy = (t.logits.array() - mx).exp();
  t.policy /= t.policy.sum();

  t.a4 = w.Wv1 * t.g + w.bv1;
  t.h4 = t.a4.cwiseMax(0.0);
  t.value = std::tanh(w.wv2.dot(t.h4) + *w.bv2);
  if (!std::isfinite(t.value)) throw NumericError("non-finite values in layer value");
  return t;
}

}  // namespace detail

// He-uniform weights, zero biases, zeroed optimizer state.
[[nodiscard]] inline auto init_params(const NetArch& arch, std::uint64_t seed) -> NetParams {
  if (arch.feature_width < 1 || arch.hidden < 1) throw ContractError("network sizes must be positive");
  NetParams p;
  p.arch = arch;
  p.theta = Eigen::VectorXd::Zero(arch.param_count());
  p.adam_m = Eigen::VectorXd::Zero(arch.param_count());
  p.adam_v = Eigen::VectorXd::Zero(arch.param_count());
  std::mt19937_64 rng(seed);
  detail::Views<double> w(p.theta.data(), arch);
  auto fill = [&](auto&& m, Eigen::Index fan_in) {
    const double lim = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-lim, lim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  const Eigen::Index F = arch.feature_width, H = arch.hidden;
  fill(w.W1, F);
  fill(w.W2, H);
  fill(w.Wp1, 3 * H);
  fill(w.wp2, H);
  fill(w.Wv1, 2 * H);
  fill(w.wv2, H);
  return p;
}

[[nodiscard]] inline auto forward(const NetParams& p, const FeatureMatrix& x) -> NetOutput {
  auto t = detail::run_forward(p, x);
  return {std::move(t.policy), t.value};
}

struct LossTerms {
  double policy = 0.0;  // cross-entropy
  double value = 0.0;   // squared error
  double l2 = 0.0;      // lambda * |theta|^2
  [[nodiscard]] auto total() const noexcept -> double { return policy + value + l2; }
};

// Data terms of the loss for one sample; accumulates d(data terms)/d(theta)
// into `grad` (scaled by `scale`). The L2 term is left to the caller.
inline auto accumulate_data_grad(const NetParams& p, const FeatureMatrix& x, const Eigen::VectorXd& target_policy,
                                 double target_z, Eigen::VectorXd& grad, double scale = 1.0) -> LossTerms {
  if (target_policy.size() != x.rows()) {
    throw ContractError("target policy length " + std::to_string(target_policy.size()) + " != action count " +
                        std::to_string(x.rows()));
  }
  if (grad.size() != p.theta.size()) throw ContractError("gradient buffer has the wrong size");
  const auto t = detail::run_forward(p, x);
  const auto& a = p.arch;
  const Eigen::Index n = x.rows(), H = a.hidden;
  const detail::Views<const double> w(p.theta.data(), a);
  detail::Views<double> gw(grad.data(), a);

  LossTerms loss;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (target_policy(i) > 0.0) loss.policy -= target_policy(i) * std::log(t.policy(i));
  }
  loss.value = (t.value - target_z) * (t.value - target_z);

  // Policy head. d(CE)/d(logits) = p - pi when pi sums to one.
  const Eigen::VectorXd dlogits = scale * (t.policy - target_policy);
  *gw.bp2 += dlogits.sum();
  gw.wp2 += t.h3.transpose() * dlogits;
  detail::RowMat da3 = (dlogits * w.wp2.transpose()).cwiseProduct((t.a3.array() > 0.0).cast<double>().matrix());
  const Eigen::VectorXd da3_sum = da3.colwise().sum().transpose();
  gw.Wp1.leftCols(H) += da3.transpose() * t.e;
  gw.Wp1.rightCols(2 * H) += da3_sum * t.g.transpose();
  gw.bp1 += da3_sum;
  Eigen::VectorXd dg = w.Wp1.rightCols(2 * H).transpose() * da3_sum;
  detail::RowMat de = da3 * w.Wp1.leftCols(H);

  // Value head.
  const double dpre = scale * 2.0 * (t.value - target_z) * (1.0 - t.value * t.value);
  *gw.bv2 += dpre;
  gw.wv2 += dpre * t.h4;
  const Eigen::VectorXd da4 = (dpre * w.wv2).cwiseProduct((t.a4.array() > 0.0).cast<double>().matrix());
  gw.Wv1 += da4 * t.g.transpose();
  gw.bv1 += da4;
  dg += w.Wv1.transpose() * da4;

  // Pooling: mean spreads evenly, max routes to the first arg-max row.
  de.rowwise() += (dg.head(H) / static_cast<double>(n)).transpose();
  for (Eigen::Index j = 0; j < H; ++j) de(t.argmax(j), j) += dg(H + j);

  // Embedding.
  const detail::RowMat da2 = de.cwiseProduct((t.a2.array() > 0.0).cast<double>().matrix());
  gw.W2 += da2.transpose() * t.h1;
  gw.b2 += da2.colwise().sum().transpose();
  const detail::RowMat da1 = (da2 * w.W2).cwiseProduct((t.a1.array() > 0.0).cast<double>().matrix());
  gw.W1 += da1.transpose() * x;
  gw.b1 += da1.colwise().sum().transpose();
  return loss;
}

// cross-entropy(pi, p) + (v - z)^2 + lambda |theta|^2 and its exact gradient.
inline auto loss_and_grad(const NetParams& p, const FeatureMatrix& x, const Eigen::VectorXd& target_policy,
                          double target_z, Eigen::VectorXd& grad, double weight_decay = default_weight_decay)
    -> LossTerms {
  if (std::abs(target_policy.sum() - 1.0) > 1e-6 || (target_policy.array() < 0.0).any()) {
    throw ContractError("target policy must be a probability vector");
  }
  grad = Eigen::VectorXd::Zero(p.theta.size());
  auto terms = accumulate_data_grad(p, x, target_policy, target_z, grad);
  terms.l2 = weight_decay * p.theta.squaredNorm();
  grad += 2.0 * weight_decay * p.theta;
  return terms;
}

[[nodiscard]] inline auto loss_value(const NetParams& p, const FeatureMatrix& x, const Eigen::VectorXd& target_policy,
                                     double target_z, double weight_decay = default_weight_decay) -> double {
  const auto out = forward(p, x);
  double ce = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (target_policy(i) > 0.0) ce -= target_policy(i) * std::log(out.policy(i));
  }
  return ce + (out.value - target_z) * (out.value - target_z) + weight_decay * p.theta.squaredNorm();
}

inline void adam_step(NetParams& p, const Eigen::VectorXd& grad, double lr, const AdamConfig& cfg = {}) {
  if (grad.size() != p.theta.size()) throw ContractError("gradient size mismatch");
  if (!grad.allFinite()) throw NumericError("non-finite gradient passed to adam_step");
  ++p.step;
  p.adam_m = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * grad;
  p.adam_v = cfg.beta2 * p.adam_v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
  const Eigen::VectorXd update =
      lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + cfg.eps);
  if (!update.allFinite()) throw NumericError("non-finite Adam update");
  p.theta -= update;
}

}  // namespace r2
