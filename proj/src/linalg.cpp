#include "rsam/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace rsam {
namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

constexpr double kRankTolerance = 1e-12;

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "sub");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator-(Matrix a) { return a *= -1.0; }
Matrix operator*(double s, Matrix a) { return a *= s; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + dims(a) + " x " + dims(b));
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + dims(a) + "^T x " + dims(b));
  }
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* bk = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* ci = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + dims(a) + " x " + dims(b) + "^T");
  }
  Matrix c(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) { return a + b; }
Matrix sub(const Matrix& a, const Matrix& b) { return a - b; }
Matrix scale(const Matrix& a, double s) { return s * a; }

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  auto cf = c.flat();
  auto bf = b.flat();
  for (std::size_t i = 0; i < cf.size(); ++i) cf[i] *= bf[i];
  return c;
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  require_same_shape(x, y, "axpy");
  auto yf = y.flat();
  auto xf = x.flat();
  for (std::size_t i = 0; i < yf.size(); ++i) yf[i] += alpha * xf[i];
}

Matrix sym(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("sym: non-square " + dims(a));
  const std::size_t n = a.rows();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = a(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

double fro_norm(const Matrix& a) { return std::sqrt(dot_flat(a, a)); }

double dot_flat(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "dot_flat");
  auto af = a.flat();
  auto bf = b.flat();
  double s = 0.0;
  for (std::size_t i = 0; i < af.size(); ++i) s += af[i] * bf[i];
  return s;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.flat()) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.flat().begin(), a.flat().end(),
                     [](double v) { return std::isfinite(v); });
}

std::vector<double> diag_from_abs(const Matrix& a) {
  std::vector<double> d(a.size());
  std::transform(a.flat().begin(), a.flat().end(), d.begin(),
                 [](double v) { return std::abs(v); });
  return d;
}

double orthonormality_error(const Matrix& a) {
  Matrix g = matmul_tn(a, a);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return fro_norm(g);
}

QrResult qr_unique(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw ShapeError("qr_unique: needs rows >= cols, got " + dims(a));

  Matrix work = a;
  Matrix r(n, n);
  // Householder vectors, v_k stored in entries k..m-1 of column k.
  Matrix reflectors(m, n);

  for (std::size_t k = 0; k < n; ++k) {
    double norm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) norm2 += work(i, k) * work(i, k);
    const double norm = std::sqrt(norm2);
    if (!(norm >= kRankTolerance)) {
      throw RankError("qr_unique: rank-deficient input (|r[" + std::to_string(k) +
                      "]| < 1e-12)");
    }
    const double alpha = work(k, k) >= 0.0 ? -norm : norm;

    double vnorm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) {
      const double vi = (i == k) ? work(k, k) - alpha : work(i, k);
      reflectors(i, k) = vi;
      vnorm2 += vi * vi;
    }
    const double vnorm = std::sqrt(vnorm2);
    if (vnorm > 0.0) {
      for (std::size_t i = k; i < m; ++i) reflectors(i, k) /= vnorm;
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += reflectors(i, k) * work(i, j);
        s *= 2.0;
        for (std::size_t i = k; i < m; ++i) work(i, j) -= s * reflectors(i, k);
      }
    }
    for (std::size_t j = k; j < n; ++j) r(k, j) = work(k, j);
    r(k, k) = alpha;
  }

  Matrix q(m, n);
  for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = kk; i < m; ++i) s += reflectors(i, kk) * q(i, j);
      if (s == 0.0) continue;
      s *= 2.0;
      for (std::size_t i = kk; i < m; ++i) q(i, j) -= s * reflectors(i, kk);
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (r(k, k) < 0.0) {
      for (std::size_t i = 0; i < m; ++i) q(i, k) = -q(i, k);
      for (std::size_t j = k; j < n; ++j) r(k, j) = -r(k, j);
    }
  }
  return {std::move(q), std::move(r)};
}

Matrix qf(const Matrix& a) { return qr_unique(a).q; }

}  // namespace rsam
