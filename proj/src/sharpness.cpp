#include "rsam/sharpness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace rsam {
namespace {

constexpr double kBreakdown = 1e-12;
constexpr std::size_t kFallbackProbes = 16;

std::uint64_t probe_seed(std::uint64_t seed, std::size_t probe, std::size_t group) {
  // splitmix64 over the triple, so nearby seeds give unrelated streams.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (probe + 1) + 0xBF58476D1CE4E5B9ull * group;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double loss_at(const GradOracle& oracle, const ParamMap& params, const Batch& batch) {
  const double l = oracle(params, batch).loss;
  if (!std::isfinite(l)) throw NumericError("sharpness: non-finite loss");
  return l;
}

double random_probe(const std::vector<ParamGroup>& groups, const GradOracle& oracle,
                    const Batch& batch, double rho, std::size_t probes, std::uint64_t seed,
                    double base_loss) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < probes; ++k) {
    ParamMap moved;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      const Tangent t = random_tangent(g.point, rho, probe_seed(seed, k, gi));
      moved.emplace(g.name, retract(g.point, t).value);
    }
    best = std::max(best, loss_at(oracle, moved, batch) - base_loss);
  }
  return best;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

double sharpness_estimate(const std::vector<ParamGroup>& groups, const GradOracle& oracle,
                          const Batch& batch, const SharpnessConfig& cfg) {
  if (!(cfg.rho > 0.0)) throw std::invalid_argument("sharpness: rho must be positive");
  const ParamMap params = snapshot(groups);

  if (cfg.mode == SharpnessMode::RandomProbe) {
    if (cfg.probes == 0) throw std::invalid_argument("sharpness: probes must be >= 1");
    return random_probe(groups, oracle, batch, cfg.rho, cfg.probes, cfg.seed,
                        loss_at(oracle, params, batch));
  }

  const OracleResult base = oracle(params, batch);
  if (!std::isfinite(base.loss)) throw NumericError("sharpness: non-finite loss");
  ParamMap moved = params;
  bool any_moved = false;
  for (const auto& g : groups) {
    auto it = base.grads.find(g.name);
    if (it == base.grads.end()) {
      throw std::invalid_argument("sharpness: no gradient for group '" + g.name + "'");
    }
    try {
      const Tangent eps = approx_epsilon(g.point, it->second, cfg.rho, MetricKind::Identity);
      moved[g.name] = retract(g.point, eps).value;
      any_moved = true;
    } catch (const DegenerateGradientError&) {
    }
  }
  if (!any_moved) {
    return random_probe(groups, oracle, batch, cfg.rho, kFallbackProbes, cfg.seed, base.loss);
  }
  return loss_at(oracle, moved, batch) - base.loss;
}

std::vector<double> flatten(const std::vector<ParamGroup>& groups) {
  std::vector<double> out;
  for (const auto& g : groups) {
    out.insert(out.end(), g.point.value.flat().begin(), g.point.value.flat().end());
  }
  return out;
}

ParamMap unflatten(const std::vector<ParamGroup>& groups, const std::vector<double>& flat) {
  ParamMap out;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    const std::size_t n = g.point.value.size();
    if (offset + n > flat.size()) throw ShapeError("unflatten: vector too short");
    std::vector<double> chunk(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                              flat.begin() + static_cast<std::ptrdiff_t>(offset + n));
    out.emplace(g.name, Matrix(g.point.value.rows(), g.point.value.cols(), std::move(chunk)));
    offset += n;
  }
  if (offset != flat.size()) throw ShapeError("unflatten: vector too long");
  return out;
}

std::vector<double> flatten_grads(const std::vector<ParamGroup>& groups,
                                  const OracleResult& r) {
  std::vector<double> out;
  for (const auto& g : groups) {
    auto it = r.grads.find(g.name);
    if (it == r.grads.end()) {
      throw std::invalid_argument("no gradient for group '" + g.name + "'");
    }
    out.insert(out.end(), it->second.flat().begin(), it->second.flat().end());
  }
  return out;
}

double default_fd_step(const std::vector<ParamGroup>& groups) {
  double m = 0.0;
  for (const auto& g : groups) m = std::max(m, max_abs(g.point.value));
  return 1e-4 * (1.0 + m);
}

std::vector<double> hvp(const GradOracle& oracle, const std::vector<ParamGroup>& groups,
                        const Batch& batch, const std::vector<double>& v, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("hvp: step must be positive");
  const std::vector<double> theta = flatten(groups);
  if (v.size() != theta.size()) throw ShapeError("hvp: direction has the wrong length");
  if (!(norm(v) > 0.0)) throw std::invalid_argument("hvp: direction must be nonzero");

  std::vector<double> plus = theta;
  std::vector<double> minus = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    plus[i] += h * v[i];
    minus[i] -= h * v[i];
  }
  const auto gp = flatten_grads(groups, oracle(unflatten(groups, plus), batch));
  const auto gm = flatten_grads(groups, oracle(unflatten(groups, minus), batch));
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (gp[i] - gm[i]) / (2.0 * h);
    if (!std::isfinite(out[i])) throw NumericError("hvp: non-finite result");
  }
  return out;
}

SpectrumResult lanczos_spectrum(const GradOracle& oracle,
                                const std::vector<ParamGroup>& groups, const Batch& batch,
                                const SpectrumConfig& cfg) {
  const std::size_t dim = flatten(groups).size();
  const std::size_t m = cfg.lanczos_iters;
  if (m == 0 || m > dim) {
    throw std::invalid_argument("lanczos: iterations must lie in [1, " +
                                std::to_string(dim) + "]");
  }
  if (cfg.probes == 0) throw std::invalid_argument("lanczos: probes must be >= 1");
  const double h = cfg.fd_step > 0.0 ? cfg.fd_step : default_fd_step(groups);

  SpectrumResult result;
  result.max_eig = -std::numeric_limits<double>::infinity();

  for (std::size_t probe = 0; probe < cfg.probes; ++probe) {
    std::mt19937_64 rng(probe_seed(cfg.seed, probe, 0));
    std::normal_distribution<double> normal;
    std::vector<double> q(dim);
    for (double& x : q) x = normal(rng);
    const double qn = norm(q);
    for (double& x : q) x /= qn;

    std::vector<std::vector<double>> basis{q};
    std::vector<double> alpha;
    std::vector<double> beta;
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> w = hvp(oracle, groups, batch, basis[j], h);
      alpha.push_back(dot(basis[j], w));
      // Full reorthogonalization (two passes) subsumes the three-term recurrence.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) {
          const double c = dot(b, w);
          for (std::size_t i = 0; i < dim; ++i) w[i] -= c * b[i];
        }
      }
      if (j + 1 == m) break;
      const double bj = norm(w);
      if (bj < kBreakdown) {
        result.truncated = true;
        break;
      }
      beta.push_back(bj);
      for (double& x : w) x /= bj;
      basis.push_back(std::move(w));
    }

    const auto k = static_cast<Eigen::Index>(alpha.size());
    Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), k);
    Eigen::VectorXd sub(std::max<Eigen::Index>(k - 1, 0));
    for (Eigen::Index i = 0; i + 1 < k; ++i) sub(i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) throw NumericError("lanczos: tridiagonal eigensolve failed");
    for (Eigen::Index i = 0; i < k; ++i) {
      const double v = eig.eigenvalues()(i);
      const double first = eig.eigenvectors()(0, i);
      result.pairs.push_back({probe, v, first * first});
      result.max_eig = std::max(result.max_eig, v);
    }
  }
  return result;
}

}  // namespace rsam
