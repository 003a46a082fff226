#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rsam/linalg.hpp"

namespace rsam {

/// Geometry of one parameter block: the Stiefel manifold
/// St(p, n) = {X ∈ R^{n×p} : XᵀX = I_p}, or flat Euclidean space.
class ManifoldKind {
 public:
  enum class Type { Stiefel, Euclidean };

  static ManifoldKind stiefel(std::size_t n, std::size_t p);
  static ManifoldKind euclidean(std::size_t rows, std::size_t cols);

  Type type() const noexcept { return type_; }
  bool is_stiefel() const noexcept { return type_ == Type::Stiefel; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  /// Intrinsic dimension: np − p(p+1)/2 for Stiefel, rows·cols otherwise.
  std::size_t dimension() const noexcept;
  std::string describe() const;

  bool operator==(const ManifoldKind&) const = default;

 private:
  ManifoldKind(Type t, std::size_t r, std::size_t c) : type_(t), rows_(r), cols_(c) {}

  Type type_;
  std::size_t rows_;
  std::size_t cols_;
};

inline constexpr double kMembershipTolerance = 1e-8;
inline constexpr double kTangencyTolerance = 1e-8;

struct Point {
  ManifoldKind manifold;
  Matrix value;
};

/// Builds a point after checking shape and (for Stiefel) ‖XᵀX − I‖_F ≤ tol.
Point make_point(const ManifoldKind& kind, Matrix value,
                 double tol = kMembershipTolerance);

/// ‖XᵀX − I‖_F for Stiefel points, 0 for Euclidean ones.
double membership_error(const Point& x);
bool on_manifold(const Point& x, double tol = kMembershipTolerance);

/// A tangent vector together with its base point. The base point is shared
/// so that a basis of many tangents does not copy it.
struct Tangent {
  std::shared_ptr<const Point> at;
  Matrix value;
};

/// ‖sym(XᵀZ)‖_F for Stiefel, 0 for Euclidean.
double tangency_error(const Tangent& t);

/// Proj_X(v) = v − X·sym(Xᵀv) on Stiefel; identity on Euclidean.
Tangent project_tangent(const Point& x, const Matrix& v);
Tangent project_tangent(const std::shared_ptr<const Point>& x, const Matrix& v);

/// R_X(ε) = qf(X + ε) on Stiefel, X + ε on Euclidean. Throws RankError when
/// X + ε is rank deficient.
Point retract(const Point& x, const Tangent& eps);

/// Same retraction, taking a raw matrix that the caller guarantees lies in
/// T_X. Used by optimizers that already hold projected directions.
Point retract_raw(const Point& x, const Matrix& eps);

/// Proj_X(∇f): the Riemannian gradient under the embedded metric.
Tangent riemannian_grad(const Point& x, const Matrix& euclid_grad);

Point random_point(const ManifoldKind& kind, std::uint64_t seed);

/// Seeded tangent of Frobenius norm `norm` (zero tangent when norm == 0).
Tangent random_tangent(const Point& x, double norm, std::uint64_t seed);

/// Above this many ambient coordinates the explicit tangent basis is refused.
inline constexpr std::size_t kTangentBasisCapacity = 4096;

struct TangentBasis {
  std::shared_ptr<const Point> at;
  std::vector<Matrix> vectors;  // orthonormal under dot_flat
};

/// Orthonormal basis of T_X built by projecting every matrix unit onto T_X
/// and running modified Gram–Schmidt. Throws CapacityError when
/// rows·cols > kTangentBasisCapacity.
TangentBasis tangent_basis(const Point& x);

std::vector<Tangent> tangent_basis_list(const Point& x);

}  // namespace rsam
