#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "rsam/errors.hpp"

namespace rsam {

/// Dense row-major matrix of doubles.
///
/// Every parameter, tangent vector and gradient in the library is carried by
/// this type. A default-constructed matrix is empty (0 x 0) and only useful as
/// a placeholder; all operations below reject shape mismatches with
/// ShapeError.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix zeros_like(const Matrix& m) { return Matrix(m.rows(), m.cols()); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(Matrix a);
Matrix operator*(double s, Matrix a);
Matrix operator*(Matrix a, double s);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
/// Entrywise product.
Matrix hadamard(const Matrix& a, const Matrix& b);
/// y += alpha * x
void axpy(double alpha, const Matrix& x, Matrix& y);

/// ½(a + aᵀ); exactly symmetric.
Matrix sym(const Matrix& a);

double fro_norm(const Matrix& a);
/// Frobenius inner product of the row-major flattenings.
double dot_flat(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);

/// Absolute values of the row-major flattening: the diagonal of
/// diag(|θ₁|, …, |θ_k|). Never materialized as a k x k matrix.
std::vector<double> diag_from_abs(const Matrix& a);

/// ‖aᵀa − I‖_F
double orthonormality_error(const Matrix& a);

struct QrResult {
  Matrix q;  // rows x cols, orthonormal columns
  Matrix r;  // cols x cols, upper triangular, positive diagonal
};

/// Thin Householder QR with the sign convention diag(r) > 0, which makes the
/// Q factor a well-defined function of `a`.
///
/// Requires a.rows() >= a.cols(). Throws RankError when any |r_ii| < 1e-12
/// (measured before the sign fix).
QrResult qr_unique(const Matrix& a);

/// Q factor of qr_unique.
Matrix qf(const Matrix& a);

}  // namespace rsam
