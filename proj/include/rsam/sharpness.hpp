#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rsam/batch.hpp"
#include "rsam/optim.hpp"

namespace rsam {

enum class SharpnessMode { FirstOrder, RandomProbe };

struct SharpnessConfig {
  double rho = 0.3;
  SharpnessMode mode = SharpnessMode::FirstOrder;
  std::size_t probes = 16;  // RandomProbe only
  std::uint64_t seed = 0;
};

/// Estimate of max_{ε ∈ T_θ, ‖ε‖ ≤ ρ} L(R_θ(ε)) − L(θ).
///
/// FirstOrder retracts along approx_epsilon (Identity metric) for every
/// group; the value may be negative. RandomProbe takes the max over `probes`
/// random tangents of norm ρ and lower-bounds the true sharpness. When every
/// group's gradient is degenerate, FirstOrder falls back to RandomProbe with
/// 16 probes.
double sharpness_estimate(const std::vector<ParamGroup>& groups, const GradOracle& oracle,
                          const Batch& batch, const SharpnessConfig& cfg);

/// Parameter groups flattened (row-major) and concatenated in declared order.
std::vector<double> flatten(const std::vector<ParamGroup>& groups);
ParamMap unflatten(const std::vector<ParamGroup>& groups, const std::vector<double>& flat);
std::vector<double> flatten_grads(const std::vector<ParamGroup>& groups,
                                  const OracleResult& r);

/// 1e-4·(1 + ‖θ‖_∞)
double default_fd_step(const std::vector<ParamGroup>& groups);

/// Hv ≈ (∇L(θ + hv) − ∇L(θ − hv)) / 2h in the ambient parameterization.
/// Requires ‖v‖ > 0 and h > 0.
std::vector<double> hvp(const GradOracle& oracle, const std::vector<ParamGroup>& groups,
                        const Batch& batch, const std::vector<double>& v, double h);

struct SpectrumConfig {
  std::size_t lanczos_iters = 20;
  std::size_t probes = 1;
  double fd_step = 0.0;  // 0 selects default_fd_step
  std::uint64_t seed = 0;
};

struct RitzPair {
  std::size_t probe = 0;
  double value = 0.0;
  double weight = 0.0;
};

struct SpectrumResult {
  std::vector<RitzPair> pairs;  // grouped by probe, ascending value within a probe
  double max_eig = 0.0;
  bool truncated = false;       // some probe hit a Lanczos breakdown
};

/// m-step Lanczos with full reorthogonalization on finite-difference
/// Hessian-vector products, once per seeded Gaussian start. Ritz weights are
/// the squared first components of the tridiagonal eigenvectors.
SpectrumResult lanczos_spectrum(const GradOracle& oracle,
                                const std::vector<ParamGroup>& groups, const Batch& batch,
                                const SpectrumConfig& cfg);

}  // namespace rsam
