#include <gtest/gtest.h>

#include <cmath>

#include "rsam/data.hpp"
#include "rsam/errors.hpp"
#include "rsam/manifold.hpp"
#include "rsam/models.hpp"
#include "reference.hpp"
#include "test_util.hpp"

namespace rsam {
namespace {

using test::central_difference;
using test::rel_error;
using test::ae_reference_loss;
using test::supcon_reference_loss;

Batch random_batch(std::size_t rows, std::size_t n, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  b.x = gaussian_matrix(rows, n, rng);
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  for (std::size_t i = 0; i < rows; ++i) b.y.push_back(label(rng));
  return b;
}

std::vector<std::size_t> coords(std::size_t size, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, size - 1);
  std::vector<std::size_t> out(count);
  for (auto& c : out) c = pick(rng);
  return out;
}

TEST(Autoencoder, LossMatchesDirectFormula) {
  for (auto mode : {ReconstructionMean::PerSample, ReconstructionMean::PerElement}) {
    const AutoencoderLossConfig cfg{0.3, 0.7, mode};
    const Matrix w = gaussian_matrix(6, 3, 1);
    const Batch b = random_batch(5, 6, 3, 2);
    EXPECT_NEAR(ae_loss_and_grad(w, b, cfg).loss, ae_reference_loss(w, b, cfg), 1e-12);
    EXPECT_NEAR(ae_loss_terms(w, b, cfg).total(), ae_reference_loss(w, b, cfg), 1e-12);
  }
}

TEST(Autoencoder, GradientMatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    const auto mode = draw % 2 ? ReconstructionMean::PerSample : ReconstructionMean::PerElement;
    const AutoencoderLossConfig cfg{0.1 + 0.05 * double(draw), draw % 3 ? 0.5 : 0.0, mode};
    const Matrix w = scale(gaussian_matrix(12, 4, 100 + draw), 0.4);
    const Batch b = random_batch(8, 12, 4, 200 + draw);
    const Matrix grad = ae_loss_and_grad(w, b, cfg).grad;
    auto f = [&](const Matrix& m) { return ae_reference_loss(m, b, cfg); };
    for (std::size_t c : coords(w.size(), 50, 300 + draw)) {
      const double fd = central_difference(f, w, c, 1e-5);
      EXPECT_LE(rel_error(grad.flat()[c], fd), 1e-5) << "draw " << draw << " coord " << c;
      ++checked;
    }
  }
  EXPECT_GE(checked, 1000);
}

TEST(Autoencoder, PenaltyVanishesOnStiefel) {
  const Matrix w = random_point(ManifoldKind::stiefel(7, 3), 3).value;
  const Batch b = random_batch(4, 7, 3, 4);
  const AutoencoderLossConfig with{0.1, 5.0, ReconstructionMean::PerSample};
  const AutoencoderLossConfig without{0.1, 0.0, ReconstructionMean::PerSample};
  EXPECT_LE(ae_loss_terms(w, b, with).penalty, 1e-28);
  const Matrix diff = sub(ae_loss_and_grad(w, b, with).grad, ae_loss_and_grad(w, b, without).grad);
  EXPECT_LE(fro_norm(diff), 1e-10);
}

TEST(Autoencoder, SquareOrthogonalReconstructsPerfectly) {
  const Matrix w = random_point(ManifoldKind::stiefel(4, 4), 5).value;
  const Batch b = random_batch(6, 4, 4, 6);
  EXPECT_LE(ae_loss_terms(w, b, {0.0, 0.0, ReconstructionMean::PerSample}).reconstruction, 1e-24);
}

TEST(Autoencoder, InvariantUnderBatchRowPermutation) {
  const Matrix w = gaussian_matrix(5, 3, 1);
  const Batch b = random_batch(6, 5, 3, 2);
  Batch rev;
  rev.x = Matrix(6, 5);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 5; ++j) rev.x(i, j) = b.x(5 - i, j);
    rev.y.push_back(b.y[5 - i]);
  }
  const AutoencoderLossConfig cfg{0.2, 0.1, ReconstructionMean::PerElement};
  EXPECT_NEAR(ae_loss_and_grad(w, b, cfg).loss, ae_loss_and_grad(w, rev, cfg).loss, 1e-13);
}

TEST(Autoencoder, RejectsBadInputs) {
  const Matrix w = gaussian_matrix(5, 3, 1);
  Batch b = random_batch(4, 5, 3, 2);
  b.y[0] = 3;
  EXPECT_THROW(ae_loss_and_grad(w, b, {}), std::invalid_argument);
  EXPECT_THROW(ae_loss_and_grad(w, random_batch(4, 6, 3, 2), {}), ShapeError);
}

TEST(Autoencoder, OverflowIsANumericError) {
  const Matrix w = scale(gaussian_matrix(5, 3, 1), 1e160);
  EXPECT_THROW(ae_loss_and_grad(w, random_batch(4, 5, 3, 2), {}), NumericError);
}

TEST(Residual, ClosedFormsAndNaiveOracle) {
  EXPECT_NEAR(ae_orthogonality_residual(scale(Matrix::identity(5), 2.0)), 45.0, 1e-12);
  EXPECT_LE(ae_orthogonality_residual(random_point(ManifoldKind::stiefel(9, 4), 1).value), 1e-28);
  const Matrix w = gaussian_matrix(6, 3, 7);
  double naive = 0.0;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t c = 0; c < 3; ++c) {
      double g = (a == c) ? -1.0 : 0.0;
      for (std::size_t j = 0; j < 6; ++j) g += w(j, a) * w(j, c);
      naive += g * g;
    }
  EXPECT_NEAR(ae_orthogonality_residual(w), naive, 1e-12 * naive);
}

struct SupconCase {
  RStiefelHead head;
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> pairing;
};

SupconCase supcon_case(std::uint64_t seed, std::size_t nfeat = 6, std::size_t p = 3) {
  Dataset d = synthetic_clusters(2, 2, nfeat, 1.5, seed);
  const Batch b = batches(d, {4, seed, true, 0.01}, 0).front();
  Rng rng(seed + 1);
  std::normal_distribution<double> small(0.0, 0.3);
  SupconCase c{{random_point(ManifoldKind::stiefel(nfeat, p), seed + 2).value, {}, 0.5},
               b.x, b.y, b.pairing};
  for (std::size_t k = 0; k < p; ++k) c.head.log_scale.push_back(small(rng));
  return c;
}

TEST(SupCon, LossMatchesDirectFormula) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SupconCase c = supcon_case(s);
    EXPECT_NEAR(supcon_loss_and_grad(c.head, c.features, c.labels, c.pairing).loss,
                supcon_reference_loss(c.head, c.features, c.labels), 1e-11);
  }
}

TEST(SupCon, IdentityHeadIsPlainSupCon) {
  const SupconCase base = supcon_case(3, 4, 4);
  RStiefelHead h{Matrix::identity(4), std::vector<double>(4, 0.0), 0.1};
  // With U = I and S = 1 the logits are raw feature dot products.
  const Matrix& f = base.features;
  double expected = 0.0;
  for (std::size_t i = 0; i < f.rows(); ++i) {
    double denom = 0.0, pos = 0.0;
    int count = 0;
    for (std::size_t a = 0; a < f.rows(); ++a) {
      if (a == i) continue;
      const double s = dot_flat(Matrix(1, 4, {f.row(i).begin(), f.row(i).end()}),
                                Matrix(1, 4, {f.row(a).begin(), f.row(a).end()})) / 0.1;
      denom += std::exp(s);
      if (base.labels[a] == base.labels[i]) {
        pos += s;
        ++count;
      }
    }
    expected += -(pos - count * std::log(denom)) / count;
  }
  EXPECT_NEAR(supcon_loss_and_grad(h, f, base.labels).loss, expected, 1e-9 * std::abs(expected));
}

TEST(SupCon, GradientsMatchFiniteDifferences) {
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    SupconCase c = supcon_case(50 + draw, 8, 3);
    const SupConLossAndGrad r = supcon_loss_and_grad(c.head, c.features, c.labels, c.pairing);
    auto fu = [&](const Matrix& u) {
      RStiefelHead h = c.head;
      h.u = u;
      return supcon_reference_loss(h, c.features, c.labels);
    };
    for (std::size_t k : coords(c.head.u.size(), 50, 900 + draw)) {
      const double fd = central_difference(fu, c.head.u, k, 1e-5);
      EXPECT_LE(rel_error(r.grad_u.flat()[k], fd), 1e-5) << "draw " << draw << " coord " << k;
    }
    auto fs = [&](const Matrix& s) {
      RStiefelHead h = c.head;
      h.log_scale.assign(s.flat().begin(), s.flat().end());
      return supcon_reference_loss(h, c.features, c.labels);
    };
    const Matrix s0(3, 1, c.head.log_scale);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_LE(rel_error(r.grad_log_scale[k], central_difference(fs, s0, k, 1e-5)), 1e-5);
    }
  }
}

TEST(SupCon, SeparatedFeaturesBeatPermutedLabels) {
  Dataset d = synthetic_clusters(2, 4, 4, 6.0, 11);
  RStiefelHead h{Matrix::identity(4), std::vector<double>(4, 0.0), 0.1};
  const double good = supcon_loss_and_grad(h, d.x, d.y).loss;
  std::vector<int> shuffled{0, 1, 0, 1, 0, 1, 0, 1};
  EXPECT_LT(good, supcon_loss_and_grad(h, d.x, shuffled).loss);
}

TEST(SupCon, InvariantUnderClassRelabeling) {
  const SupconCase c = supcon_case(8);
  std::vector<int> swapped = c.labels;
  for (int& y : swapped) y = 1 - y;
  EXPECT_NEAR(supcon_loss_and_grad(c.head, c.features, c.labels).loss,
              supcon_loss_and_grad(c.head, c.features, swapped).loss, 1e-12);
}

TEST(SupCon, EmptyPositiveSetIsABatchCompositionError) {
  const SupconCase c = supcon_case(1);
  std::vector<int> lonely = c.labels;
  lonely[0] = 7;
  EXPECT_THROW(supcon_loss_and_grad(c.head, c.features, lonely), BatchCompositionError);
  std::vector<std::size_t> bad = c.pairing;
  std::swap(bad[0], bad[2]);
  EXPECT_THROW(supcon_loss_and_grad(c.head, c.features, c.labels, bad), BatchCompositionError);
}

}  // namespace
}  // namespace rsam
