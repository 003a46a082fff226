#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rsam/errors.hpp"
#include "rsam/sharpness.hpp"
#include "test_util.hpp"

namespace rsam {
namespace {

// L(θ) = ½θᵀAθ + bᵀθ over a single column group "theta".
struct Quadratic {
  Matrix a;
  Matrix b;

  OracleResult operator()(const ParamMap& params, const Batch&) const {
    const Matrix& t = params.at("theta");
    const Matrix at = test::naive_matmul(a, t);
    return {0.5 * dot_flat(t, at) + dot_flat(b, t), {{"theta", add(at, b)}}};
  }
};

Quadratic diagonal(std::size_t dim) {
  Quadratic q{Matrix(dim, dim), Matrix(dim, 1)};
  for (std::size_t i = 0; i < dim; ++i) q.a(i, i) = double(i + 1);
  return q;
}

std::vector<ParamGroup> at(Matrix theta) {
  const std::size_t n = theta.rows();
  return {{"theta", make_point(ManifoldKind::euclidean(n, 1), std::move(theta)),
           {Strategy::SAM, 0.1, 0.3, 0.0, MetricKind::Identity}, std::nullopt}};
}

std::vector<double> flat(const Matrix& m) { return {m.flat().begin(), m.flat().end()}; }

TEST(Sharpness, ConstantLossIsFlat) {
  GradOracle constant = [](const ParamMap& p, const Batch&) {
    return OracleResult{3.0, {{"theta", Matrix(p.at("theta").rows(), 1)}}};
  };
  const auto groups = at(Matrix(3, 1, 1.0));
  for (auto mode : {SharpnessMode::FirstOrder, SharpnessMode::RandomProbe}) {
    EXPECT_NEAR(sharpness_estimate(groups, constant, {}, {0.3, mode, 8, 1}), 0.0, 1e-12);
  }
}

TEST(Sharpness, RandomProbeBoundedByCurvatureAtMinimum) {
  const Quadratic q = diagonal(2);
  const auto groups = at(Matrix(2, 1));
  const double rho = 0.3;
  const double bound = 0.5 * rho * rho * 2.0;
  double prev = -1.0;
  for (std::size_t k : {1u, 4u, 16u, 256u, 4096u}) {
    const double s = sharpness_estimate(groups, q, {}, {rho, SharpnessMode::RandomProbe, k, 5});
    EXPECT_LE(s, bound + 1e-10);
    EXPECT_GE(s, prev);  // nested probe streams
    prev = s;
  }
  EXPECT_GE(prev, 0.999 * bound);
}

TEST(Sharpness, RandomProbeMonotoneInRhoAtMinimum) {
  const Quadratic q = diagonal(4);
  const auto groups = at(Matrix(4, 1));
  double prev = 0.0;
  for (double rho : {0.01, 0.05, 0.1, 0.3, 1.0}) {
    const double s = sharpness_estimate(groups, q, {}, {rho, SharpnessMode::RandomProbe, 8, 2});
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(Sharpness, FirstOrderMatchesClosedForm) {
  Quadratic q = diagonal(3);
  q.b = Matrix{{0.2}, {-0.1}, {0.4}};
  const Matrix theta{{1.0}, {0.5}, {-0.3}};
  const double rho = 0.2;
  const Matrix g = add(test::naive_matmul(q.a, theta), q.b);
  const Matrix moved = add(theta, scale(g, rho / test::frob(g)));
  const double expected = q({{"theta", moved}}, {}).loss - q({{"theta", theta}}, {}).loss;
  EXPECT_NEAR(sharpness_estimate(at(theta), q, {}, {rho, SharpnessMode::FirstOrder, 1, 0}),
              expected, 1e-14);
}

TEST(Sharpness, RejectsNonPositiveRho) {
  EXPECT_THROW(sharpness_estimate(at(Matrix(2, 1)), diagonal(2), {}, {0.0}),
               std::invalid_argument);
}

TEST(Hvp, QuadraticGivesAv) {
  Quadratic q{gaussian_matrix(5, 5, 1), gaussian_matrix(5, 1, 2)};
  q.a = add(q.a, transpose(q.a));
  const auto groups = at(gaussian_matrix(5, 1, 3));
  const Matrix v = gaussian_matrix(5, 1, 4);
  const auto hv = hvp(q, groups, {}, flat(v), 1e-4);
  const Matrix av = test::naive_matmul(q.a, v);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(hv[i], av(i, 0), 1e-8);
}

TEST(Hvp, LinearObjectiveHasNoCurvature) {
  Quadratic q{Matrix(4, 4), gaussian_matrix(4, 1, 1)};
  const auto hv = hvp(q, at(gaussian_matrix(4, 1, 2)), {}, flat(gaussian_matrix(4, 1, 3)), 1e-4);
  for (double v : hv) EXPECT_NEAR(v, 0.0, 1e-8);
}

TEST(Hvp, SymmetricAndLinearOnNonQuadratic) {
  // L = Σ cosh(θ_i) + (Σθ_i)², Hessian diag(cosh θ) + 2·11ᵀ.
  GradOracle f = [](const ParamMap& p, const Batch&) {
    const Matrix& t = p.at("theta");
    double sum = 0.0, loss = 0.0;
    for (double v : t.flat()) sum += v;
    Matrix g(t.rows(), 1);
    for (std::size_t i = 0; i < t.rows(); ++i) {
      loss += std::cosh(t(i, 0));
      g(i, 0) = std::sinh(t(i, 0)) + 2.0 * sum;
    }
    return OracleResult{loss + sum * sum, {{"theta", g}}};
  };
  const auto groups = at(gaussian_matrix(6, 1, 1));
  const auto u = flat(gaussian_matrix(6, 1, 2));
  const auto v = flat(gaussian_matrix(6, 1, 3));
  const auto hu = hvp(f, groups, {}, u, 1e-4);
  const auto hv = hvp(f, groups, {}, v, 1e-4);
  double uhv = 0.0, vhu = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    uhv += u[i] * hv[i];
    vhu += v[i] * hu[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  EXPECT_LE(std::abs(uhv - vhu), 1e-4 * std::sqrt(nu * nv));

  std::vector<double> combo(6);
  for (std::size_t i = 0; i < 6; ++i) combo[i] = 2.0 * u[i] - 0.5 * v[i];
  const auto hc = hvp(f, groups, {}, combo, 1e-4);
  for (std::size_t i = 0; i < 6; ++i) {
    const double expect = 2.0 * hu[i] - 0.5 * hv[i];
    EXPECT_LE(std::abs(hc[i] - expect), 1e-6 * std::max(1.0, std::abs(expect)));
  }
}

TEST(Hvp, RejectsZeroDirectionAndBadStep) {
  const auto groups = at(Matrix(3, 1));
  EXPECT_THROW(hvp(diagonal(3), groups, {}, {0, 0, 0}, 1e-4), std::invalid_argument);
  EXPECT_THROW(hvp(diagonal(3), groups, {}, {1, 0, 0}, 0.0), std::invalid_argument);
  EXPECT_THROW(hvp(diagonal(3), groups, {}, {1, 0}, 1e-4), ShapeError);
}

TEST(Lanczos, RecoversDiagonalSpectrum) {
  const auto res = lanczos_spectrum(diagonal(10), at(gaussian_matrix(10, 1, 1)), {},
                                    {10, 1, 0.0, 7});
  ASSERT_EQ(res.pairs.size(), 10u);
  std::vector<double> values;
  double weight = 0.0;
  for (const auto& p : res.pairs) {
    values.push_back(p.value);
    weight += p.weight;
  }
  std::sort(values.begin(), values.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(values[i], double(i + 1), 1e-6);
  EXPECT_NEAR(res.max_eig, 10.0, 1e-6);
  EXPECT_NEAR(weight, 1.0, 1e-10);
  EXPECT_FALSE(res.truncated);
}

TEST(Lanczos, RitzValuesInsideSpectralInterval) {
  Matrix g = gaussian_matrix(12, 12, 3);
  Quadratic q{test::naive_matmul(transpose(g), g), Matrix(12, 1)};
  // Reference extreme eigenvalues via power iteration on A and on (c·I − A).
  auto power = [](const Matrix& a) {
    Matrix v(a.rows(), 1, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 5000; ++it) {
      Matrix w = test::naive_matmul(a, v);
      lambda = test::frob(w);
      v = scale(w, 1.0 / lambda);
    }
    return lambda;
  };
  const double hi = power(q.a);
  Matrix shifted = scale(q.a, -1.0);
  for (std::size_t i = 0; i < 12; ++i) shifted(i, i) += hi;
  const double lo = hi - power(shifted);
  const auto res = lanczos_spectrum(q, at(Matrix(12, 1)), {}, {6, 3, 0.0, 1});
  for (const auto& p : res.pairs) {
    EXPECT_GE(p.value, lo - 1e-6);
    EXPECT_LE(p.value, hi + 1e-6);
  }
}

TEST(Lanczos, ZeroObjectiveBreaksDownWithZeroRitzValues) {
  GradOracle zero = [](const ParamMap& p, const Batch&) {
    return OracleResult{0.0, {{"theta", Matrix(p.at("theta").rows(), 1)}}};
  };
  const auto res = lanczos_spectrum(zero, at(Matrix(5, 1)), {}, {4, 1, 0.0, 0});
  EXPECT_TRUE(res.truncated);
  for (const auto& p : res.pairs) EXPECT_NEAR(p.value, 0.0, 1e-8);
}

TEST(Lanczos, ProbeStreamsArePrefixConsistent) {
  const Quadratic q = diagonal(8);
  const auto groups = at(gaussian_matrix(8, 1, 1));
  const auto one = lanczos_spectrum(q, groups, {}, {5, 1, 0.0, 3});
  const auto four = lanczos_spectrum(q, groups, {}, {5, 4, 0.0, 3});
  ASSERT_EQ(four.pairs.size(), 4 * one.pairs.size());
  for (std::size_t i = 0; i < one.pairs.size(); ++i) {
    EXPECT_EQ(one.pairs[i].value, four.pairs[i].value);
    EXPECT_EQ(one.pairs[i].weight, four.pairs[i].weight);
  }
}

TEST(Lanczos, RejectsTooManyIterations) {
  EXPECT_THROW(lanczos_spectrum(diagonal(3), at(Matrix(3, 1)), {}, {4, 1, 0.0, 0}),
               std::invalid_argument);
}

TEST(Flatten, RoundTripsAcrossGroups) {
  std::vector<ParamGroup> groups = at(gaussian_matrix(3, 1, 1));
  groups.push_back({"w", random_point(ManifoldKind::stiefel(4, 2), 2),
                    {Strategy::RSGD, 0.1, 0.0, 0.0, MetricKind::Identity}, std::nullopt});
  const auto f = flatten(groups);
  ASSERT_EQ(f.size(), 11u);
  const ParamMap back = unflatten(groups, f);
  EXPECT_EQ(back, snapshot(groups));
  EXPECT_THROW(unflatten(groups, std::vector<double>(10)), ShapeError);
}

}  // namespace
}  // namespace rsam
