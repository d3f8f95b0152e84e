#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "memop/error.hpp"

namespace memop {

using Complex = std::complex<double>;
using RealVector = std::vector<double>;

inline constexpr Complex kI{0.0, 1.0};

// Dense dim x dim complex matrix, dim in {1, 2}, row-major storage.
class ComplexMatrix {
 public:
  static constexpr int kMaxDim = 2;

  ComplexMatrix() = default;
  explicit ComplexMatrix(int dim) : dim_(check_dim(dim)) {}
  ComplexMatrix(int dim, std::initializer_list<Complex> row_major) : dim_(check_dim(dim)) {
    if (row_major.size() != static_cast<std::size_t>(dim * dim)) {
      throw ShapeError("ComplexMatrix: expected " + std::to_string(dim * dim) + " entries");
    }
    std::size_t k = 0;
    for (const Complex& z : row_major) e_[k++] = z;
  }

  static ComplexMatrix identity(int dim) { return scalar(dim, 1.0); }
  static ComplexMatrix scalar(int dim, Complex v) {
    ComplexMatrix m(dim);
    for (int k = 0; k < dim; ++k) m(k, k) = v;
    return m;
  }

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(dim_ * dim_); }

  Complex& operator()(int r, int c) noexcept { return e_[static_cast<std::size_t>(r * dim_ + c)]; }
  const Complex& operator()(int r, int c) const noexcept {
    return e_[static_cast<std::size_t>(r * dim_ + c)];
  }
  // Flat row-major access.
  Complex& operator[](std::size_t k) noexcept { return e_[k]; }
  const Complex& operator[](std::size_t k) const noexcept { return e_[k]; }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    require_same(o);
    for (std::size_t k = 0; k < size(); ++k) e_[k] += o.e_[k];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    require_same(o);
    for (std::size_t k = 0; k < size(); ++k) e_[k] -= o.e_[k];
    return *this;
  }
  ComplexMatrix& operator*=(Complex s) noexcept {
    for (std::size_t k = 0; k < size(); ++k) e_[k] *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) noexcept { return a *= s; }
  friend ComplexMatrix operator*(ComplexMatrix a, Complex s) noexcept { return a *= s; }

  friend bool operator==(const ComplexMatrix& a, const ComplexMatrix& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a.e_[k] != b.e_[k]) return false;
    }
    return true;
  }

  bool all_finite() const noexcept {
    for (std::size_t k = 0; k < size(); ++k) {
      if (!std::isfinite(e_[k].real()) || !std::isfinite(e_[k].imag())) return false;
    }
    return true;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (std::size_t k = 0; k < size(); ++k) m = std::max(m, std::abs(e_[k]));
    return m;
  }

  void require_same(const ComplexMatrix& o) const {
    if (o.dim_ != dim_) {
      throw ShapeError("ComplexMatrix: dimension mismatch " + std::to_string(dim_) + " vs " +
                       std::to_string(o.dim_));
    }
  }

 private:
  static int check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim) {
      throw ShapeError("ComplexMatrix: unsupported dimension " + std::to_string(dim));
    }
    return dim;
  }

  int dim_ = 1;
  std::array<Complex, kMaxDim * kMaxDim> e_{};
};

inline ComplexMatrix mat_mul(const ComplexMatrix& a, const ComplexMatrix& b) {
  a.require_same(b);
  const int n = a.dim();
  ComplexMatrix out(n);
  if (n == 1) {
    out[0] = a[0] * b[0];
    return out;
  }
  out[0] = a[0] * b[0] + a[1] * b[2];
  out[1] = a[0] * b[1] + a[1] * b[3];
  out[2] = a[2] * b[0] + a[3] * b[2];
  out[3] = a[2] * b[1] + a[3] * b[3];
  return out;
}

// Accumulates w * (a * b) into acc without temporaries; hot loop of the history quadrature.
inline void mat_mul_acc(ComplexMatrix& acc, double w, const ComplexMatrix& a,
                        const ComplexMatrix& b) noexcept {
  if (a.dim() == 1) {
    acc[0] += w * (a[0] * b[0]);
    return;
  }
  acc[0] += w * (a[0] * b[0] + a[1] * b[2]);
  acc[1] += w * (a[0] * b[1] + a[1] * b[3]);
  acc[2] += w * (a[2] * b[0] + a[3] * b[2]);
  acc[3] += w * (a[2] * b[1] + a[3] * b[3]);
}

// cos(re)cosh(im) - i sin(re)sinh(im), entry by entry. Throws rather than returning Inf.
inline ComplexMatrix elementwise_cos(const ComplexMatrix& m) {
  ComplexMatrix out(m.dim());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double re = m[k].real();
    const double im = m[k].imag();
    if (!std::isfinite(re) || !std::isfinite(im)) {
      throw DomainError("elementwise_cos: non-finite entry");
    }
    const double ch = std::cosh(im);
    const double sh = std::sinh(im);
    if (!std::isfinite(ch) || !std::isfinite(sh)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3g", im);
      throw DomainError(std::string("elementwise_cos: cosh overflow for imaginary part ") + buf);
    }
    out[k] = Complex(std::cos(re) * ch, -std::sin(re) * sh);
  }
  return out;
}

// All real parts (row-major) followed by all imaginary parts (row-major).
inline RealVector flatten_ri(const ComplexMatrix& m) {
  const std::size_t n = m.size();
  RealVector v(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = m[k].real();
    v[n + k] = m[k].imag();
  }
  return v;
}

template <class Out>
void flatten_ri_into(const ComplexMatrix& m, Out&& out) {
  const std::size_t n = m.size();
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = m[k].real();
    out[n + k] = m[k].imag();
  }
}

inline ComplexMatrix unflatten_ri(std::span<const double> v, int dim) {
  ComplexMatrix m(dim);
  const std::size_t n = m.size();
  if (v.size() != 2 * n) {
    throw ShapeError("unflatten_ri: expected length " + std::to_string(2 * n) + ", got " +
                     std::to_string(v.size()));
  }
  for (std::size_t k = 0; k < n; ++k) m[k] = Complex(v[k], v[n + k]);
  return m;
}

namespace detail {

// Power series sum_k (-1)^k (x/2)^(2k+n) / (k! (k+n)!), adequate for x < 12.
inline double bessel_j_series(int n, double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= half / k;
  double sum = term;
  const double q = half * half;
  for (int k = 1; k < 200; ++k) {
    term *= -q / (static_cast<double>(k) * static_cast<double>(k + n));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum) && k > 2) break;
  }
  return sum;
}

struct BesselTriple {
  double j0, j1, j2;
};

// Miller backward recurrence normalised by J0 + 2 sum J_2k = 1.
inline BesselTriple bessel_j_miller(double x) {
  int start = static_cast<int>(x + 20.0 * std::cbrt(x) + 40.0);
  start += start % 2;
  const double two_over_x = 2.0 / x;
  double next = 0.0;   // J_{k+1}
  double cur = 1e-30;  // J_k
  double norm = 0.0;
  double j1 = 0.0;
  double j2 = 0.0;
  for (int k = start; k > 0; --k) {
    const double prev = k * two_over_x * cur - next;
    next = cur;
    cur = prev;
    // cur now holds J_{k-1}
    if (k - 1 == 2) j2 = cur;
    if (k - 1 == 1) j1 = cur;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * cur;
    if (std::abs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      norm *= 1e-250;
      j1 *= 1e-250;
      j2 *= 1e-250;
    }
  }
  norm += cur;
  return {cur / norm, j1 / norm, j2 / norm};
}

inline double bessel_j(int n, double x) {
  if (x < 12.0) return bessel_j_series(n, x);
  const BesselTriple t = bessel_j_miller(x);
  return n == 0 ? t.j0 : (n == 1 ? t.j1 : t.j2);
}

}  // namespace detail

inline double bessel_j1(double x) {
  if (!(x >= 0.0)) throw DomainError("bessel_j1: argument must be >= 0");
  if (x == 0.0) return 0.0;
  return detail::bessel_j(1, x);
}

// Weights (without the dt factor) of the composite rule over n uniform samples:
// Simpson for an even interval count, Simpson + trailing 3/8 block for odd counts >= 3,
// trapezoid for a single interval, zero for a single sample.
inline void simpson_weights(std::size_t n_samples, std::span<double> w) {
  if (w.size() < n_samples) throw ShapeError("simpson_weights: output too short");
  if (n_samples == 0) return;
  std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n_samples), 0.0);
  const std::size_t m = n_samples - 1;
  if (m == 0) return;
  if (m == 1) {
    w[0] = w[1] = 0.5;
    return;
  }
  const std::size_t simpson_end = (m % 2 == 0) ? m : m - 3;
  if (simpson_end > 0) {
    for (std::size_t j = 0; j <= simpson_end; ++j) {
      w[j] = (j == 0 || j == simpson_end) ? 1.0 / 3.0 : (j % 2 == 1 ? 4.0 / 3.0 : 2.0 / 3.0);
    }
  }
  if (simpson_end != m) {
    w[m - 3] += 3.0 / 8.0;
    w[m - 2] += 9.0 / 8.0;
    w[m - 1] += 9.0 / 8.0;
    w[m] += 3.0 / 8.0;
  }
}

inline std::vector<double> simpson_weights(std::size_t n_samples) {
  std::vector<double> w(n_samples);
  simpson_weights(n_samples, w);
  return w;
}

inline ComplexMatrix simpson_integrate(std::span<const ComplexMatrix> samples, double dt) {
  if (samples.empty()) throw DomainError("simpson_integrate: empty sample list");
  if (!(dt > 0.0)) throw DomainError("simpson_integrate: dt must be positive");
  const std::vector<double> w = simpson_weights(samples.size());
  ComplexMatrix acc(samples.front().dim());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    samples[j].require_same(acc);
    acc += (w[j] * dt) * samples[j];
  }
  return acc;
}

}  // namespace memop
