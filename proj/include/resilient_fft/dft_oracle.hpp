// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force O(N^2) discrete Fourier transform. Nothing here uses fft_core:
// twiddles come straight from the trig functions of the working precision and
// sums are accumulated left to right.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "resilient_fft/common.hpp"

namespace rfft::oracle {

namespace detail {

template <RealScalar Real>
inline Complex<Real> root(std::uint64_t jk, std::uint64_t n, Real sign) {
  const std::uint64_t m = jk % n;
  const Real angle = sign * std::numbers::pi_v<Real> * Real(2) * static_cast<Real>(m) / static_cast<Real>(n);
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace detail

/// Forward: y_j = sum_n x_n e^{-2 pi i j n / N}. Inverse: conjugate kernel
/// scaled by 1/N.
template <RealScalar Real>
std::vector<Complex<Real>> dft_naive(std::span<const Complex<Real>> x, Direction direction = Direction::forward) {
  const std::size_t n = x.size();
  if (n == 0) throw InvalidArgument("dft_naive: empty sequence");
  const Real sign = direction == Direction::forward ? Real(-1) : Real(1);
  std::vector<Complex<Real>> y(n);
  for (std::size_t j = 0; j < n; ++j) {
    Real re = 0, im = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto w = detail::root<Real>(static_cast<std::uint64_t>(j) * k, n, sign);
      re += x[k].real() * w.real() - x[k].imag() * w.imag();
      im += x[k].real() * w.imag() + x[k].imag() * w.real();
    }
    y[j] = {re, im};
  }
  if (direction == Direction::inverse) {
    const Real scale = Real(1) / static_cast<Real>(n);
    for (auto& v : y) v *= scale;
  }
  return y;
}

template <RealScalar Real>
std::vector<Complex<Real>> dft_naive(const std::vector<Complex<Real>>& x, Direction direction = Direction::forward) {
  return dft_naive<Real>(std::span<const Complex<Real>>(x), direction);
}

/// Dense n x n matrix W[j][k] = omega_n^{jk}, omega_n = e^{-2 pi i / n}.
template <RealScalar Real>
class DftMatrix {
 public:
  explicit DftMatrix(std::size_t n) : n_(n) {
    if (n == 0) throw InvalidArgument("dft_matrix: n must be positive");
    entries_.resize(n * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) entries_[j * n + k] = detail::root<Real>(std::uint64_t(j) * k, n, Real(-1));
  }

  std::size_t size() const noexcept { return n_; }
  const Complex<Real>& operator()(std::size_t j, std::size_t k) const { return entries_[j * n_ + k]; }

 private:
  std::size_t n_;
  std::vector<Complex<Real>> entries_;
};

template <RealScalar Real>
DftMatrix<Real> dft_matrix(std::size_t n) {
  return DftMatrix<Real>(n);
}

/// Row e^T W by explicit GEMV. Matrix entries are read from a table of the
/// n distinct roots (W[j][k] depends on jk mod n), with the same values
/// dft_matrix holds.
template <RealScalar Real>
std::vector<Complex<Real>> gemv_checksum(std::span<const Complex<Real>> e, std::size_t n) {
  if (e.size() != n) throw InvalidArgument("gemv_checksum: encoding length does not match n");
  if (n == 0) throw InvalidArgument("gemv_checksum: n must be positive");
  std::vector<Complex<Real>> roots(n);
  for (std::size_t m = 0; m < n; ++m) roots[m] = detail::root<Real>(m, n, Real(-1));
  std::vector<Complex<Real>> row(n);
  for (std::size_t k = 0; k < n; ++k) {
    Real re = 0, im = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& m = roots[(std::uint64_t(j) * k) % n];
      re += e[j].real() * m.real() - e[j].imag() * m.imag();
      im += e[j].real() * m.imag() + e[j].imag() * m.real();
    }
    row[k] = {re, im};
  }
  return row;
}

template <RealScalar Real>
std::vector<Complex<Real>> gemv_checksum(const std::vector<Complex<Real>>& e, std::size_t n) {
  return gemv_checksum<Real>(std::span<const Complex<Real>>(e), n);
}

}  // namespace rfft::oracle
