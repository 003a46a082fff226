#pragma once

#include <cstddef>
#include <vector>

#include "rsam/batch.hpp"
#include "rsam/linalg.hpp"

namespace rsam {

// ---------------------------------------------------------------------------
// PCA-style orthogonal autoencoder
//
//   z = xW,  x̃ = zWᵀ,
//   L(W) = mean_i ‖x_i − x̃_i‖² / s + β·CE(z_i, y_i) + λ‖WᵀW − I‖²_F
//
// where s = 1 when the reconstruction is averaged per sample and s = n (the
// input dimension) when it is averaged per element. The code z doubles as the
// class logits, so code_dim must equal the number of classes.
// ---------------------------------------------------------------------------

enum class ReconstructionMean { PerSample, PerElement };

struct AutoencoderLossConfig {
  double beta = 0.1;
  double lambda = 0.0;
  ReconstructionMean reconstruction = ReconstructionMean::PerElement;
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Loss terms reported separately for diagnostics.
struct AutoencoderTerms {
  double reconstruction = 0.0;
  double cross_entropy = 0.0;
  double penalty = 0.0;
  double total() const noexcept { return reconstruction + cross_entropy + penalty; }
};

AutoencoderTerms ae_loss_terms(const Matrix& w, const Batch& batch,
                               const AutoencoderLossConfig& cfg);

/// Loss and exact analytic gradient with respect to W (input_dim x code_dim).
/// Throws NumericError if the loss is not finite.
LossAndGrad ae_loss_and_grad(const Matrix& w, const Batch& batch,
                             const AutoencoderLossConfig& cfg);

/// ‖WᵀW − I_p‖²_F
double ae_orthogonality_residual(const Matrix& w);

// ---------------------------------------------------------------------------
// SupCon loss with an R-Stiefel projection head
// ---------------------------------------------------------------------------

/// Mahalanobis head M = U·diag(S)²·Uᵀ applied as ẑ = z·U·diag(S).
/// S = exp(log_scale) keeps the diagonal strictly positive.
struct RStiefelHead {
  Matrix u;                        // n_feat x p, on St(n_feat, p)
  std::vector<double> log_scale;   // length p
  double temperature = 0.1;

  std::vector<double> scale() const;
};

struct SupConLossAndGrad {
  double loss = 0.0;
  Matrix grad_u;
  std::vector<double> grad_log_scale;
};

/// L = Σ_i −1/|P(i)| Σ_{p∈P(i)} log( exp(ẑ_i·ẑ_p/τ) / Σ_{a≠i} exp(ẑ_i·ẑ_a/τ) ),
/// P(i) = {p ≠ i : y_p = y_i}. Gradients are Euclidean: grad_u is the raw
/// ∂L/∂U, grad_log_scale is ∂L/∂log_scale.
///
/// `pairing` may be empty; when given it must pair rows with equal labels.
/// Throws BatchCompositionError when some P(i) is empty.
SupConLossAndGrad supcon_loss_and_grad(const RStiefelHead& head, const Matrix& features,
                                       const std::vector<int>& labels,
                                       const std::vector<std::size_t>& pairing = {});

}  // namespace rsam
