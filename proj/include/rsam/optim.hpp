#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsam/batch.hpp"
#include "rsam/linalg.hpp"
#include "rsam/manifold.hpp"

namespace rsam {

/// D_θ in ⟨ε, ε'⟩_θ = εᵀ D_θ ε'. DiagAbs is diag(|θ₁|, …, |θ_k|) over the
/// row-major flattening of the parameter.
enum class MetricKind { Identity, DiagAbs };

enum class Strategy { SGD, RSGD, SAM, RSAMApprox, RSAMExact };

std::string_view to_string(Strategy s);
std::string_view to_string(MetricKind m);
Strategy parse_strategy(std::string_view s);
MetricKind parse_metric(std::string_view s);

/// SAM and both RSAM variants.
bool is_sharpness_aware(Strategy s);
/// Strategies that keep the parameter on its manifold by retraction.
bool is_riemannian(Strategy s);

struct OptimizerConfig {
  Strategy strategy = Strategy::RSAMApprox;
  double lr = 0.1;
  double rho = 0.3;
  double momentum = 0.0;  // SGD only
  MetricKind metric = MetricKind::Identity;
};

struct ParamGroup {
  std::string name;
  Point point;
  OptimizerConfig config;
  std::optional<Matrix> momentum_buffer;
};

/// Throws ConfigError when the group's strategy, manifold and
/// hyperparameters are inconsistent.
void validate(const ParamGroup& g);

using ParamMap = std::map<std::string, Matrix>;

struct OracleResult {
  double loss = 0.0;
  ParamMap grads;  // Euclidean gradients keyed by group name
};

/// Loss and Euclidean gradients at a parameter snapshot for one batch.
/// Must be deterministic for fixed inputs.
using GradOracle = std::function<OracleResult(const ParamMap&, const Batch&)>;

ParamMap snapshot(const std::vector<ParamGroup>& groups);

/// grad_ij · |θ_ij| for DiagAbs, `grad` unchanged for Identity.
Matrix apply_metric(const Matrix& grad, const Point& point, MetricKind metric);

/// Relaxed ascent direction: Proj_θ(ρ·v/‖v‖) with
/// v = apply_metric(riemannian_grad(θ, ∇L)). ‖result‖ ≤ ρ.
/// Throws DegenerateGradientError when ‖v‖ < 1e-12, unless `allow_degenerate`.
Tangent approx_epsilon(const Point& point, const Matrix& euclid_grad, double rho,
                       MetricKind metric, bool allow_degenerate = false);

/// Closed-form maximizer of ⟨v, ε⟩ over the tangent ρ-ball, expanded in an
/// orthonormal tangent basis: ε = ρ Σ_j c_j u_j / √(Σ_j c_j²), c_j = ⟨v, u_j⟩.
///
/// `basis` may be supplied when the caller already built it for this point.
/// Throws DegenerateGradientError when every |c_j| < 1e-12 and CapacityError
/// when the basis is too large to build.
Tangent exact_epsilon(const Point& point, const Matrix& euclid_grad, double rho,
                      MetricKind metric, const TangentBasis* basis = nullptr,
                      bool allow_degenerate = false);

struct StepOptions {
  /// Multiplies every group's learning rate (for schedules).
  double lr_scale = 1.0;
  /// Compute the ascent even for tiny gradients (ρ → 0 studies).
  bool bypass_degeneracy_guard = false;
};

struct StepReport {
  double loss = 0.0;
  /// Names of groups whose ascent step was skipped for a degenerate gradient.
  std::vector<std::string> degenerate_groups;
};

/// Sharpness-aware step with two oracle calls. Ascent directions for every
/// SAM/RSAM group are computed at θ_t and applied simultaneously; the second
/// gradient, taken at that perturbed snapshot, is projected onto T_{θ_t} and
/// retracted at θ_t. SGD/RSGD groups descend with the second gradient and no
/// perturbation. Returns the loss of the first call.
StepReport rsam_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                     const Batch& batch, const StepOptions& opts = {});

/// θ ← R_θ(−η·Proj_θ(∇L)), or the momentum update for SGD groups.
StepReport rsgd_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                     const Batch& batch, const StepOptions& opts = {});

/// m ← μm + g; θ ← θ − η·m. Euclidean groups only.
StepReport sgd_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                    const Batch& batch, const StepOptions& opts = {});

/// Dispatches on the strategies present: rsam_step if any group is
/// sharpness-aware, otherwise rsgd_step.
StepReport optimizer_step(std::vector<ParamGroup>& groups, const GradOracle& oracle,
                          const Batch& batch, const StepOptions& opts = {});

/// ½(1 + cos(π·t/T)); 1 at t = 0, 0 at t = T.
double cosine_lr_scale(std::size_t step, std::size_t total_steps);

}  // namespace rsam
