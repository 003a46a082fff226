#include "rsam/optim.hpp"

#include <cmath>
#include <numbers>

namespace rsam {
namespace {

constexpr double kDegenerateNorm = 1e-12;

const Matrix& grad_for(const OracleResult& r, const ParamGroup& g) {
  auto it = r.grads.find(g.name);
  if (it == r.grads.end()) {
    throw std::invalid_argument("oracle returned no gradient for group '" + g.name + "'");
  }
  if (!it->second.same_shape(g.point.value)) {
    throw ShapeError("oracle gradient for group '" + g.name + "' has the wrong shape");
  }
  if (!all_finite(it->second)) {
    throw NumericError("non-finite gradient for group '" + g.name + "'");
  }
  return it->second;
}

void check_loss(const OracleResult& r) {
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
}

Point retract_named(const ParamGroup& g, const Matrix& step) {
  try {
    return retract_raw(g.point, step);
  } catch (const RankError& e) {
    throw RankError("group '" + g.name + "': " + e.what());
  }
}

// Base descent for one group with the given Euclidean gradient.
void descend(ParamGroup& g, const Matrix& grad, double lr_scale) {
  const double lr = g.config.lr * lr_scale;
  if (g.config.strategy == Strategy::SGD) {
    if (!g.momentum_buffer) g.momentum_buffer = Matrix::zeros_like(grad);
    Matrix& m = *g.momentum_buffer;
    m *= g.config.momentum;
    m += grad;
    axpy(-lr, m, g.point.value);
    return;
  }
  Tangent direction = riemannian_grad(g.point, grad);
  direction.value *= -lr;
  g.point = retract_named(g, direction.value);
}

Matrix metric_direction(const Point& point, const Matrix& euclid_grad, MetricKind metric) {
  return apply_metric(riemannian_grad(point, euclid_grad).value, point, metric);
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::SGD: return "sgd";
    case Strategy::RSGD: return "rsgd";
    case Strategy::SAM: return "sam";
    case Strategy::RSAMApprox: return "rsam-approx";
    case Strategy::RSAMExact: return "rsam-exact";
  }
  return "unknown";
}

std::string_view to_string(MetricKind m) {
  return m == MetricKind::Identity ? "identity" : "diag-abs";
}

Strategy parse_strategy(std::string_view s) {
  for (Strategy k : {Strategy::SGD, Strategy::RSGD, Strategy::SAM, Strategy::RSAMApprox,
                     Strategy::RSAMExact}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown optimizer strategy '" + std::string(s) + "'");
}

MetricKind parse_metric(std::string_view s) {
  if (s == "identity") return MetricKind::Identity;
  if (s == "diag-abs") return MetricKind::DiagAbs;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

bool is_sharpness_aware(Strategy s) {
  return s == Strategy::SAM || s == Strategy::RSAMApprox || s == Strategy::RSAMExact;
}

bool is_riemannian(Strategy s) {
  return s == Strategy::RSGD || s == Strategy::RSAMApprox || s == Strategy::RSAMExact;
}

void validate(const ParamGroup& g) {
  const auto& c = g.config;
  const std::string who = "group '" + g.name + "': ";
  if (!(c.lr > 0.0)) throw ConfigError(who + "learning rate must be positive");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) {
    throw ConfigError(who + "momentum must lie in [0, 1)");
  }
  if (is_sharpness_aware(c.strategy) && !(c.rho > 0.0)) {
    throw ConfigError(who + std::string(to_string(c.strategy)) + " requires rho > 0");
  }
  if (!is_riemannian(c.strategy) && g.point.manifold.is_stiefel()) {
    throw ConfigError(who + std::string(to_string(c.strategy)) +
                      " cannot optimize a manifold-constrained parameter");
  }
  if (g.point.manifold.is_stiefel() && !on_manifold(g.point)) {
    throw NumericError(who + "point has left the Stiefel manifold (error " +
                       std::to_string(membership_error(g.point)) + ")");
  }
}

ParamMap snapshot(const std::vector<ParamGroup>& groups) {
  ParamMap m;
  for (const auto& g : groups) m.emplace(g.name, g.point.value);
  return m;
}

Matrix apply_metric(const Matrix& grad, const Point& point, MetricKind metric) {
  if (!grad.same_shape(point.value)) throw ShapeError("apply_metric: shape mismatch");
  if (metric == MetricKind::Identity) return grad;
  Matrix out = grad;
  auto o = out.flat();
  auto t = point.value.flat();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= std::abs(t[i]);
  return out;
}

Tangent approx_epsilon(const Point& point, const Matrix& euclid_grad, double rho,
                       MetricKind metric, bool allow_degenerate) {
  if (!(rho > 0.0)) throw std::invalid_argument("approx_epsilon: rho must be positive");
  Matrix v = metric_direction(point, euclid_grad, metric);
  const double n = fro_norm(v);
  if (n < kDegenerateNorm && !(allow_degenerate && n > 0.0)) {
    throw DegenerateGradientError("approx_epsilon: ascent direction has norm " +
                                  std::to_string(n));
  }
  v *= rho / n;
  return project_tangent(point, v);
}

Tangent exact_epsilon(const Point& point, const Matrix& euclid_grad, double rho,
                      MetricKind metric, const TangentBasis* basis,
                      bool allow_degenerate) {
  if (!(rho > 0.0)) throw std::invalid_argument("exact_epsilon: rho must be positive");
  TangentBasis owned;
  if (basis == nullptr) {
    owned = tangent_basis(point);
    basis = &owned;
  }
  const Matrix v = metric_direction(point, euclid_grad, metric);

  std::vector<double> coeff(basis->vectors.size());
  double sumsq = 0.0;
  double largest = 0.0;
  for (std::size_t j = 0; j < coeff.size(); ++j) {
    coeff[j] = dot_flat(v, basis->vectors[j]);
    sumsq += coeff[j] * coeff[j];
    largest = std::max(largest, std::abs(coeff[j]));
  }
  if (largest < kDegenerateNorm && !(allow_degenerate && sumsq > 0.0)) {
    throw DegenerateGradientError("exact_epsilon: every basis coefficient is below 1e-12");
  }
  const double factor = rho / std::sqrt(sumsq);
  Matrix eps = Matrix::zeros_like(point.value);
  for (std::size_t j = 0; j < coeff.size(); ++j) {
    axpy(factor * coeff[j], basis->vectors[j], eps);
  }
  auto at = basis->at ? basis->at : std::make_shared<const Point>(point);
  return {std::move(at), std::move(eps)};
}

StepReport rsam_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                     const Batch& batch, const StepOptions& opts) {
  for (const auto& g : groups) validate(g);

  const ParamMap params = snapshot(groups);
  const OracleResult first = oracle(params, batch);
  check_loss(first);

  StepReport report{first.loss, {}};
  ParamMap perturbed = params;
  std::vector<bool> skipped(groups.size(), false);

  for (std::size_t i = 0; i < groups.size(); ++i) {
    const ParamGroup& g = groups[i];
    if (!is_sharpness_aware(g.config.strategy)) continue;
    const Matrix& grad = grad_for(first, g);
    try {
      Tangent eps;
      if (g.config.strategy == Strategy::RSAMExact) {
        // The basis depends only on the point; built once per step.
        const TangentBasis basis = tangent_basis(g.point);
        eps = exact_epsilon(g.point, grad, g.config.rho, g.config.metric, &basis,
                            opts.bypass_degeneracy_guard);
      } else {
        eps = approx_epsilon(g.point, grad, g.config.rho, g.config.metric,
                             opts.bypass_degeneracy_guard);
      }
      perturbed[g.name] = retract_named(g, eps.value).value;
    } catch (const DegenerateGradientError&) {
      skipped[i] = true;
      report.degenerate_groups.push_back(g.name);
    }
  }

  const OracleResult second = oracle(perturbed, batch);
  check_loss(second);

  for (std::size_t i = 0; i < groups.size(); ++i) {
    ParamGroup& g = groups[i];
    const Matrix& grad = skipped[i] ? grad_for(first, g) : grad_for(second, g);
    descend(g, grad, opts.lr_scale);
  }
  return report;
}

StepReport rsgd_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                     const Batch& batch, const StepOptions& opts) {
  for (const auto& g : groups) validate(g);
  const OracleResult r = oracle(snapshot(groups), batch);
  check_loss(r);
  for (auto& g : groups) descend(g, grad_for(r, g), opts.lr_scale);
  return {r.loss, {}};
}

StepReport sgd_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                    const Batch& batch, const StepOptions& opts) {
  for (const auto& g : groups) {
    if (g.point.manifold.is_stiefel()) {
      throw ConfigError("group '" + g.name + "': SGD cannot optimize a manifold parameter");
    }
    validate(g);
  }
  const OracleResult r = oracle(snapshot(groups), batch);
  check_loss(r);
  for (auto& g : groups) {
    const Matrix& grad = grad_for(r, g);
    if (!g.momentum_buffer) g.momentum_buffer = Matrix::zeros_like(grad);
    Matrix& m = *g.momentum_buffer;
    m *= g.config.momentum;
    m += grad;
    axpy(-g.config.lr * opts.lr_scale, m, g.point.value);
  }
  return {r.loss, {}};
}

StepReport optimizer_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                          const Batch& batch, const StepOptions& opts) {
  for (const auto& g : groups) {
    if (is_sharpness_aware(g.config.strategy)) return rsam_step(groups, oracle, batch, opts);
  }
  return rsgd_step(groups, oracle, batch, opts);
}

double cosine_lr_scale(std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return 1.0;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace rsam
