#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "halfcalc/errors.hpp"

namespace halfcalc {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr cplx I_unit{0.0, 1.0};

////////////////////////////////////////////////////////////////////////////////
//
// dense complex matrix, row-major
//
////////////////////////////////////////////////////////////////////////////////

class CMatrix {
 public:
  CMatrix() = default;

  CMatrix(std::size_t rows, std::size_t cols, cplx fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw shape_error("CMatrix: empty shape");
  }

  CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows == 0 || cols == 0) throw shape_error("CMatrix: empty shape");
    if (data_.size() != rows * cols)
      throw shape_error("CMatrix: entry count does not match shape");
    for (const auto& z : data_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw domain_error("CMatrix: non-finite entry");
  }

  CMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    if (rows_ == 0 || cols_ == 0) throw shape_error("CMatrix: empty shape");
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw shape_error("CMatrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static CMatrix diagonal(std::span<const cplx> d) {
    CMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static CMatrix column(std::span<const cplx> v) {
    return CMatrix(v.size(), 1, std::vector<cplx>(v.begin(), v.end()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  bool is_square() const { return rows_ == cols_ && rows_ > 0; }

  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const cplx> entries() const { return data_; }
  std::span<cplx> entries() { return data_; }

  CVector col(std::size_t j) const {
    CVector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  void set_col(std::size_t j, std::span<const cplx> v) {
    if (v.size() != rows_) throw shape_error("set_col: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
  }

  CMatrix adjoint() const {
    CMatrix m(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
    return m;
  }

  CMatrix transpose() const {
    CMatrix m(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) m(j, i) = (*this)(i, j);
    return m;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](const cplx& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  CMatrix& operator+=(const CMatrix& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  CMatrix& operator-=(const CMatrix& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  CMatrix& operator*=(cplx s) {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }
  friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
  friend CMatrix operator*(const CMatrix& a, const CMatrix& b);

  bool operator==(const CMatrix&) const = default;

 private:
  void require_same_shape(const CMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw shape_error("CMatrix: shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

inline CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows())
    throw shape_error("matmul: " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " times " +
                      std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  CMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline CMatrix operator*(const CMatrix& a, const CMatrix& b) { return matmul(a, b); }

inline CVector matvec(const CMatrix& a, std::span<const cplx> x) {
  if (a.cols() != x.size()) throw shape_error("matvec: dimension mismatch");
  CVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

// Conjugate-linear in the first argument.
inline cplx dot(std::span<const cplx> x, std::span<const cplx> y) {
  if (x.size() != y.size()) throw shape_error("dot: length mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

inline double norm2(std::span<const cplx> x) {
  double s = 0.0;
  for (const auto& z : x) s += std::norm(z);
  return std::sqrt(s);
}

inline CVector axpy(cplx a, std::span<const cplx> x, std::span<const cplx> y) {
  if (x.size() != y.size()) throw shape_error("axpy: length mismatch");
  CVector r(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] += a * x[i];
  return r;
}

inline double frobenius_norm(const CMatrix& a) { return norm2(a.entries()); }

inline double max_abs(const CMatrix& a) {
  double m = 0.0;
  for (const auto& z : a.entries()) m = std::max(m, std::abs(z));
  return m;
}

inline cplx trace(const CMatrix& a) {
  if (!a.is_square()) throw shape_error("trace: matrix not square");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

////////////////////////////////////////////////////////////////////////////////
//
// LU with partial pivoting
//
////////////////////////////////////////////////////////////////////////////////

struct LUFactors {
  std::vector<std::size_t> permutation;  // row k of the factors is row permutation[k] of the input
  CMatrix lu;                             // unit lower part below the diagonal, upper part on and above
  bool singular = false;
  double smallest_pivot = 0.0;
};

inline LUFactors lu_factor(const CMatrix& a) {
  if (!a.is_square()) throw shape_error("lu_factor: matrix not square");
  const std::size_t n = a.rows();
  LUFactors f{std::vector<std::size_t>(n), a, false,
              std::numeric_limits<double>::infinity()};
  std::iota(f.permutation.begin(), f.permutation.end(), std::size_t{0});
  const double threshold = 1e-14 * max_abs(a);
  CMatrix& m = f.lu;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > best) {
        best = std::abs(m(i, k));
        p = i;
      }
    f.smallest_pivot = std::min(f.smallest_pivot, best);
    if (best <= threshold || best == 0.0) {
      f.singular = true;
      continue;
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
      std::swap(f.permutation[k], f.permutation[p]);
    }
    const cplx pivot = m(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx l = m(i, k) / pivot;
      m(i, k) = l;
      if (l == cplx{}) continue;
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
    }
  }
  return f;
}

inline CMatrix lu_solve(const LUFactors& f, const CMatrix& rhs) {
  const std::size_t n = f.lu.rows();
  if (rhs.rows() != n) throw shape_error("lu_solve: rhs row count mismatch");
  if (f.singular)
    throw singular_matrix_error("lu_solve: pivot below 1e-14 * max|a| (smallest pivot " +
                                std::to_string(f.smallest_pivot) + ")");
  CMatrix x(n, rhs.cols());
  for (std::size_t c = 0; c < rhs.cols(); ++c) {
    CVector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = rhs(f.permutation[i], c);
      for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * y[j];
      y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      cplx s = y[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= f.lu(i, j) * y[j];
      y[i] = s / f.lu(i, i);
    }
    x.set_col(c, y);
  }
  return x;
}

inline CMatrix lu_solve(const CMatrix& a, const CMatrix& rhs) {
  if (!a.is_square()) throw shape_error("lu_solve: matrix not square");
  if (rhs.rows() != a.rows()) throw shape_error("lu_solve: rhs row count mismatch");
  return lu_solve(lu_factor(a), rhs);
}

inline CMatrix inverse(const CMatrix& a) {
  return lu_solve(a, CMatrix::identity(a.rows()));
}

// P·L·U reassembled in the original row order; used by tests.
inline CMatrix lu_reconstruct(const LUFactors& f) {
  const std::size_t n = f.lu.rows();
  CMatrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t k = 0; k <= std::min(i, j); ++k)
        s += (k == i ? cplx{1.0} : f.lu(i, k)) * f.lu(k, j);
      r(f.permutation[i], j) = s;
    }
  return r;
}

////////////////////////////////////////////////////////////////////////////////
//
// spectral norm by power iteration on a^H a
//
////////////////////////////////////////////////////////////////////////////////

class convergence_error : public error {
 public:
  convergence_error(const std::string& what, double last_iterate)
      : error(what), last_iterate_(last_iterate) {}
  double last_iterate() const { return last_iterate_; }

 private:
  double last_iterate_;
};

////////////////////////////////////////////////////////////////////////////////
//
// Hermitian eigensolver: Householder tridiagonalization + implicit QL
//
////////////////////////////////////////////////////////////////////////////////

struct HermitianEig {
  std::vector<double> values;  // ascending
  CMatrix vectors;             // columns are eigenvectors
};

namespace detail {

// Implicit QL with Wilkinson-type shifts on a real symmetric tridiagonal
// matrix (diagonal d, subdiagonal e with e[i] coupling i-1 and i, e[0] unused).
// Rotations are accumulated into z.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e,
                           std::vector<std::vector<double>>& z) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60)
          throw convergence_error("hermitian_eig: QL iteration did not converge", d[l]);
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          const std::size_t i = ii;
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (std::size_t k = 0; k < n; ++k) {
            h = z[k][i + 1];
            z[k][i + 1] = s * z[k][i] + c * h;
            z[k][i] = c * z[k][i] - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

inline HermitianEig hermitian_eig(const CMatrix& a) {
  if (!a.is_square()) throw shape_error("hermitian_eig: matrix not square");
  const std::size_t n = a.rows();
  const double scale = frobenius_norm(a);
  if (frobenius_norm(a - a.adjoint()) > 1e-10 * scale)
    throw domain_error("hermitian_eig: matrix is not Hermitian");

  CMatrix t = 0.5 * (a + a.adjoint());
  CMatrix q = CMatrix::identity(n);

  for (std::size_t k = 0; k + 2 < n; ++k) {
    // Column below the subdiagonal scaled by its largest entry; the reflector
    // is scale invariant and this keeps norms away from underflow.
    CVector v(n, 0.0);
    double vmax = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vmax = std::max(vmax, std::abs(t(i, k)));
    if (vmax <= 1e-30 * scale) {
      for (std::size_t i = k + 1; i < n; ++i) t(i, k) = t(k, i) = 0.0;
      continue;
    }
    double xnorm = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) {
      v[i] = t(i, k) / vmax;
      xnorm += std::norm(v[i]);
    }
    xnorm = std::sqrt(xnorm);
    const cplx x0 = v[k + 1];
    const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx{1.0};
    v[k + 1] += phase * xnorm;
    const double vv = std::norm(norm2(v));
    if (vv == 0.0) continue;
    const double beta = 2.0 / vv;

    // t <- H t H with H = I - beta v v^H
    CVector w(n, 0.0);  // w = t v
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += t(i, j) * v[j];
      w[i] = s;
    }
    const cplx vhw = dot(v, w);
    // H t H = t - beta v w^H - beta w v^H + beta^2 (v^H w) v v^H
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        t(i, j) += -beta * v[i] * std::conj(w[j]) - beta * w[i] * std::conj(v[j]) +
                   beta * beta * vhw * v[i] * std::conj(v[j]);
    // q <- q H
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += q(i, j) * v[j];
      for (std::size_t j = k + 1; j < n; ++j) q(i, j) -= beta * s * std::conj(v[j]);
    }
  }

  // Unitary diagonal scaling makes the subdiagonal real and nonnegative.
  CVector phase(n, 1.0);
  std::vector<double> d(n), e(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = t(i, i).real();
  for (std::size_t i = 1; i < n; ++i) {
    const cplx sub = t(i, i - 1);
    const double mag = std::abs(sub);
    phase[i] = mag > 0.0 ? phase[i - 1] * sub / mag : phase[i - 1];
    e[i] = mag;
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) z[i][i] = 1.0;
  detail::tridiagonal_ql(d, e, z);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });

  HermitianEig out{std::vector<double>(n), CMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.values[c] = d[src];
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q(i, k) * phase[k] * z[k][src];
      out.vectors(i, c) = s;
    }
  }
  return out;
}

inline double op_norm_2(const CMatrix& a, double tol = 1e-10) {
  if (a.empty()) throw shape_error("op_norm_2: empty matrix");
  if (max_abs(a) == 0.0) return 0.0;
  const std::size_t n = a.cols();
  const CMatrix ah = a.adjoint();

  CVector v(n);
  for (std::size_t j = 0; j < n; ++j)
    v[j] = 1.0 + 0.25 * std::polar(1.0, 0.7 * double(j + 1) + 0.3 * double(j * j));
  {
    const double s = norm2(v);
    for (auto& z : v) z /= s;
  }

  // The Rayleigh quotient rises monotonically to sigma_max^2; the geometric
  // rate of its increments bounds the remaining gap.
  double lambda = std::norm(norm2(matvec(a, v)));
  double prev_delta = -1.0;
  constexpr int max_iter = 10'000;
  constexpr int stall_iter = 500;
  for (int it = 0; it < max_iter; ++it) {
    if (it == stall_iter) {
      // Nearly tied top singular values: the increments no longer certify tol.
      // Settle it with the eigenvalues of a^H a instead.
      const auto eig = hermitian_eig(ah * a);
      const double top = std::max(eig.values.back(), lambda);
      if (std::isfinite(top)) return std::sqrt(top);
    }
    CVector w = matvec(ah, matvec(a, v));
    const double wn = norm2(w);
    if (wn == 0.0) return 0.0;
    for (auto& z : w) z /= wn;
    v = std::move(w);
    const double next = std::norm(norm2(matvec(a, v)));
    const double delta = std::abs(next - lambda);
    lambda = next;
    if (delta <= 1e-15 * lambda) return std::sqrt(lambda);
    if (prev_delta > 0.0) {
      const double q = delta / prev_delta;
      if (q < 1.0 && delta * q / (1.0 - q) <= tol * lambda) return std::sqrt(lambda);
    }
    prev_delta = delta;
  }
  throw convergence_error("op_norm_2: power iteration did not converge in 10000 steps",
                          std::sqrt(lambda));
}

}  // namespace halfcalc
