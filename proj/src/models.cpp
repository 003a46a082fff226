#include "rsam/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rsam {
namespace {

void check_autoencoder_inputs(const Matrix& w, const Batch& batch) {
  if (batch.x.cols() != w.rows()) {
    throw ShapeError("autoencoder: batch has " + std::to_string(batch.x.cols()) +
                     " features but W has " + std::to_string(w.rows()) + " rows");
  }
  if (batch.y.size() != batch.x.rows()) {
    throw ShapeError("autoencoder: label count does not match batch rows");
  }
  if (batch.x.rows() == 0) throw ShapeError("autoencoder: empty batch");
  for (int y : batch.y) {
    if (y < 0 || static_cast<std::size_t>(y) >= w.cols()) {
      throw std::invalid_argument("autoencoder: label " + std::to_string(y) +
                                  " outside [0, code_dim)");
    }
  }
}

double reconstruction_divisor(const Matrix& w, const Batch& batch,
                              const AutoencoderLossConfig& cfg) {
  const double b = static_cast<double>(batch.x.rows());
  return cfg.reconstruction == ReconstructionMean::PerElement
             ? b * static_cast<double>(w.rows())
             : b;
}

// Row-wise softmax of z in place; returns Σ_i −log softmax(z_i)[y_i].
double softmax_rows(Matrix& z, const std::vector<int>& y) {
  double nll = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      sum += v;
    }
    const double log_sum = std::log(sum);
    nll += -(std::log(row[static_cast<std::size_t>(y[i])]) - log_sum);
    for (double& v : row) v /= sum;
  }
  return nll;
}

Matrix gram_minus_identity(const Matrix& w) {
  Matrix e = matmul_tn(w, w);
  for (std::size_t i = 0; i < e.rows(); ++i) e(i, i) -= 1.0;
  return e;
}

}  // namespace

AutoencoderTerms ae_loss_terms(const Matrix& w, const Batch& batch,
                               const AutoencoderLossConfig& cfg) {
  check_autoencoder_inputs(w, batch);
  const Matrix z = matmul(batch.x, w);
  const Matrix r = batch.x - matmul_nt(z, w);
  Matrix probs = z;
  AutoencoderTerms t;
  t.reconstruction = dot_flat(r, r) / reconstruction_divisor(w, batch, cfg);
  t.cross_entropy = cfg.beta * softmax_rows(probs, batch.y) / static_cast<double>(batch.size());
  if (cfg.lambda != 0.0) {
    const Matrix e = gram_minus_identity(w);
    t.penalty = cfg.lambda * dot_flat(e, e);
  }
  return t;
}

LossAndGrad ae_loss_and_grad(const Matrix& w, const Batch& batch,
                             const AutoencoderLossConfig& cfg) {
  check_autoencoder_inputs(w, batch);
  const double b = static_cast<double>(batch.x.rows());
  const double rec_scale = 2.0 / reconstruction_divisor(w, batch, cfg);

  const Matrix z = matmul(batch.x, w);
  const Matrix r = batch.x - matmul_nt(z, w);
  Matrix probs = z;
  const double nll = softmax_rows(probs, batch.y);

  double loss = dot_flat(r, r) * rec_scale / 2.0 + cfg.beta * nll / b;

  // Reconstruction: −(2/s)(xᵀ(rW) + rᵀz); cross-entropy: (β/B)·xᵀ(softmax − onehot).
  // Both xᵀ(·) products share one pass over x.
  Matrix coeff = matmul(r, w);
  coeff *= -rec_scale;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    probs(i, static_cast<std::size_t>(batch.y[i])) -= 1.0;
  }
  axpy(cfg.beta / b, probs, coeff);
  Matrix grad = matmul_tn(batch.x, coeff);
  axpy(-rec_scale, matmul_tn(r, z), grad);

  if (cfg.lambda != 0.0) {
    const Matrix e = gram_minus_identity(w);
    loss += cfg.lambda * dot_flat(e, e);
    axpy(4.0 * cfg.lambda, matmul(w, e), grad);
  }

  if (!std::isfinite(loss)) throw NumericError("autoencoder loss is not finite");
  return {loss, std::move(grad)};
}

double ae_orthogonality_residual(const Matrix& w) {
  const Matrix e = gram_minus_identity(w);
  return dot_flat(e, e);
}

std::vector<double> RStiefelHead::scale() const {
  std::vector<double> s(log_scale.size());
  std::transform(log_scale.begin(), log_scale.end(), s.begin(),
                 [](double v) { return std::exp(v); });
  return s;
}

SupConLossAndGrad supcon_loss_and_grad(const RStiefelHead& head, const Matrix& features,
                                       const std::vector<int>& labels,
                                       const std::vector<std::size_t>& pairing) {
  const std::size_t n = features.rows();
  const std::size_t p = head.u.cols();
  if (features.cols() != head.u.rows()) throw ShapeError("supcon: feature/U mismatch");
  if (head.log_scale.size() != p) throw ShapeError("supcon: log_scale length != U cols");
  if (labels.size() != n) throw ShapeError("supcon: label count != feature rows");
  if (!(head.temperature > 0.0)) throw std::invalid_argument("supcon: temperature <= 0");
  if (!pairing.empty()) {
    if (pairing.size() != n) throw BatchCompositionError("supcon: pairing length != rows");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pairing[i];
      if (j >= n || j == i || pairing[j] != i || labels[j] != labels[i]) {
        throw BatchCompositionError("supcon: inconsistent multiview pairing at row " +
                                    std::to_string(i));
      }
    }
  }

  const std::vector<double> s = head.scale();
  const double inv_tau = 1.0 / head.temperature;
  const Matrix a = matmul(features, head.u);  // N x p
  Matrix zhat = a;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < p; ++k) zhat(i, k) *= s[k];
  const Matrix logits = matmul_nt(zhat, zhat);  // before 1/τ

  // g(i, a) = ∂L/∂logit_ia
  Matrix g(n, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) ++positives;
    }
    if (positives == 0) {
      throw BatchCompositionError("supcon: sample " + std::to_string(i) +
                                  " has no positive partner");
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) m = std::max(m, logits(i, j) * inv_tau);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) denom += std::exp(logits(i, j) * inv_tau - m);
    }
    const double lse = m + std::log(denom);
    const double inv_p = 1.0 / static_cast<double>(positives);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double sij = logits(i, j) * inv_tau;
      g(i, j) = std::exp(sij - lse);
      if (labels[j] == labels[i]) {
        loss -= inv_p * (sij - lse);
        g(i, j) -= inv_p;
      }
    }
  }
  if (!std::isfinite(loss)) throw NumericError("supcon loss is not finite");

  // ∂L/∂ẑ = (G + Gᵀ) ẑ / τ
  Matrix gsym = g + transpose(g);
  Matrix dzhat = matmul(gsym, zhat);
  dzhat *= inv_tau;

  SupConLossAndGrad out;
  out.loss = loss;
  out.grad_log_scale.assign(p, 0.0);
  Matrix da = dzhat;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < p; ++k) {
      out.grad_log_scale[k] += a(i, k) * dzhat(i, k);
      da(i, k) *= s[k];
    }
  }
  for (std::size_t k = 0; k < p; ++k) out.grad_log_scale[k] *= s[k];
  out.grad_u = matmul_tn(features, da);
  return out;
}

}  // namespace rsam
