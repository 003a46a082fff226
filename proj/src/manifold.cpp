#include "rsam/manifold.hpp"

#include <cmath>
#include <sstream>

#include "rsam/random.hpp"

namespace rsam {
namespace {

constexpr double kBasisDiscardTolerance = 1e-9;
constexpr double kDegenerateSampleNorm = 1e-12;
constexpr int kMaxRedraws = 64;

void require_shape(const Point& x, const Matrix& v, const char* op) {
  if (!x.value.same_shape(v)) {
    std::ostringstream os;
    os << op << ": expected " << x.value.rows() << "x" << x.value.cols() << ", got "
       << v.rows() << "x" << v.cols();
    throw ShapeError(os.str());
  }
}

Matrix stiefel_project(const Matrix& x, const Matrix& v) {
  return v - matmul(x, sym(matmul_tn(x, v)));
}

bool same_base(const Point& x, const Point& y) {
  return &x == &y || (x.manifold == y.manifold && x.value == y.value);
}

}  // namespace

ManifoldKind ManifoldKind::stiefel(std::size_t n, std::size_t p) {
  if (n == 0 || p == 0 || p > n) {
    throw ShapeError("Stiefel manifold needs 0 < p <= n, got n=" + std::to_string(n) +
                     " p=" + std::to_string(p));
  }
  return {Type::Stiefel, n, p};
}

ManifoldKind ManifoldKind::euclidean(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ShapeError("Euclidean manifold needs positive dims");
  return {Type::Euclidean, rows, cols};
}

std::size_t ManifoldKind::dimension() const noexcept {
  if (type_ == Type::Stiefel) return rows_ * cols_ - cols_ * (cols_ + 1) / 2;
  return rows_ * cols_;
}

std::string ManifoldKind::describe() const {
  std::ostringstream os;
  os << (is_stiefel() ? "St(n=" : "R(") << rows_ << (is_stiefel() ? ", p=" : "x") << cols_
     << ")";
  return os.str();
}

Point make_point(const ManifoldKind& kind, Matrix value, double tol) {
  if (value.rows() != kind.rows() || value.cols() != kind.cols()) {
    throw ShapeError("make_point: value shape does not match " + kind.describe());
  }
  Point p{kind, std::move(value)};
  if (!on_manifold(p, tol)) {
    throw NumericError("make_point: value is not on " + kind.describe() +
                       " (membership error " + std::to_string(membership_error(p)) + ")");
  }
  return p;
}

double membership_error(const Point& x) {
  return x.manifold.is_stiefel() ? orthonormality_error(x.value) : 0.0;
}

bool on_manifold(const Point& x, double tol) {
  if (!all_finite(x.value)) return false;
  return membership_error(x) <= tol;
}

double tangency_error(const Tangent& t) {
  if (!t.at->manifold.is_stiefel()) return 0.0;
  return fro_norm(sym(matmul_tn(t.at->value, t.value)));
}

Tangent project_tangent(const std::shared_ptr<const Point>& x, const Matrix& v) {
  require_shape(*x, v, "project_tangent");
  if (!x->manifold.is_stiefel()) return {x, v};
  return {x, stiefel_project(x->value, v)};
}

Tangent project_tangent(const Point& x, const Matrix& v) {
  return project_tangent(std::make_shared<const Point>(x), v);
}

Point retract_raw(const Point& x, const Matrix& eps) {
  require_shape(x, eps, "retract");
  if (!x.manifold.is_stiefel()) return {x.manifold, x.value + eps};
  return {x.manifold, qf(x.value + eps)};
}

Point retract(const Point& x, const Tangent& eps) {
  if (!eps.at || !same_base(*eps.at, x)) {
    throw std::invalid_argument("retract: tangent is not based at this point");
  }
  return retract_raw(x, eps.value);
}

Tangent riemannian_grad(const Point& x, const Matrix& euclid_grad) {
  return project_tangent(x, euclid_grad);
}

Point random_point(const ManifoldKind& kind, std::uint64_t seed) {
  if (!kind.is_stiefel()) return {kind, gaussian_matrix(kind.rows(), kind.cols(), seed)};
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    try {
      return {kind, qf(gaussian_matrix(kind.rows(), kind.cols(), seed + attempt))};
    } catch (const RankError&) {
    }
  }
  throw NumericError("random_point: could not draw a full-rank sample");
}

Tangent random_tangent(const Point& x, double norm, std::uint64_t seed) {
  if (norm < 0.0) throw std::invalid_argument("random_tangent: norm must be >= 0");
  auto base = std::make_shared<const Point>(x);
  if (norm == 0.0) return {base, Matrix::zeros_like(x.value)};
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    Tangent t = project_tangent(
        base, gaussian_matrix(x.value.rows(), x.value.cols(), seed + attempt));
    const double n = fro_norm(t.value);
    if (n >= kDegenerateSampleNorm) {
      t.value *= norm / n;
      return t;
    }
  }
  throw NumericError("random_tangent: projected samples keep vanishing");
}

TangentBasis tangent_basis(const Point& x) {
  const std::size_t rows = x.value.rows();
  const std::size_t cols = x.value.cols();
  const std::size_t ambient = rows * cols;
  if (ambient > kTangentBasisCapacity) {
    throw CapacityError("tangent_basis: " + std::to_string(ambient) +
                        " ambient coordinates exceed the exact-solver capacity of " +
                        std::to_string(kTangentBasisCapacity));
  }
  const std::size_t target = x.manifold.dimension();
  TangentBasis basis{std::make_shared<const Point>(x), {}};
  basis.vectors.reserve(target);

  for (std::size_t k = 0; k < ambient && basis.vectors.size() < target; ++k) {
    Matrix unit(rows, cols);
    unit.flat()[k] = 1.0;
    Matrix v = x.manifold.is_stiefel() ? stiefel_project(x.value, unit) : std::move(unit);
    // Two passes of modified Gram–Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      for (const Matrix& u : basis.vectors) axpy(-dot_flat(u, v), u, v);
    }
    const double n = fro_norm(v);
    if (n < kBasisDiscardTolerance) continue;
    v *= 1.0 / n;
    basis.vectors.push_back(std::move(v));
  }
  if (basis.vectors.size() != target) {
    throw NumericError("tangent_basis: found " + std::to_string(basis.vectors.size()) +
                       " directions, expected " + std::to_string(target));
  }
  return basis;
}

std::vector<Tangent> tangent_basis_list(const Point& x) {
  TangentBasis b = tangent_basis(x);
  std::vector<Tangent> out;
  out.reserve(b.vectors.size());
  for (Matrix& v : b.vectors) out.push_back({b.at, std::move(v)});
  return out;
}

}  // namespace rsam
