// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rfft {

// ---------------------------------------------------------------------------
// Scalars
// ---------------------------------------------------------------------------

template <typename T>
concept RealScalar = std::same_as<T, float> || std::same_as<T, double>;

template <RealScalar Real>
using Complex = std::complex<Real>;

enum class Precision { fp32, fp64 };

enum class Direction { forward, inverse };

template <RealScalar Real>
inline constexpr Precision precision_of = std::same_as<Real, float> ? Precision::fp32 : Precision::fp64;

template <RealScalar Real>
inline constexpr Real machine_epsilon = std::numeric_limits<Real>::epsilon();

inline constexpr std::size_t bytes_per_sample(Precision p) noexcept {
  return p == Precision::fp32 ? 2 * sizeof(float) : 2 * sizeof(double);
}

inline const char* to_string(Precision p) noexcept { return p == Precision::fp32 ? "single" : "double"; }

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Length outside the supported power-of-two range.
struct UnsupportedLength : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

// Recomputation kept failing verification; the fault is not transient.
struct PersistentFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small helpers shared by the kernels
// ---------------------------------------------------------------------------

inline constexpr bool is_power_of_two(std::uint64_t v) noexcept { return v != 0 && (v & (v - 1)) == 0; }

inline constexpr unsigned log2_exact(std::uint64_t v) noexcept { return static_cast<unsigned>(std::countr_zero(v)); }

// Complex multiply without the C99 Annex G NaN recovery that std::complex
// performs; faults may legitimately push Inf/NaN through the kernels.
template <RealScalar Real>
inline Complex<Real> cmul(Complex<Real> a, Complex<Real> b) noexcept {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

template <RealScalar Real>
inline Real abs2(Complex<Real> a) noexcept {
  return a.real() * a.real() + a.imag() * a.imag();
}

template <RealScalar Real>
inline bool is_finite(Complex<Real> a) noexcept {
  return std::isfinite(a.real()) && std::isfinite(a.imag());
}

// e^{-2 pi i k / n}, evaluated in extended precision and rounded once.
// Quadrant points are exact.
template <RealScalar Real>
Complex<Real> unit_root(std::uint64_t k, std::uint64_t n) {
  k %= n;
  if (k == 0) return {Real(1), Real(0)};
  if (2 * k == n) return {Real(-1), Real(0)};
  if (4 * k == n) return {Real(0), Real(-1)};
  if (4 * k == 3 * n) return {Real(0), Real(1)};
  constexpr long double kTwoPi = 6.283185307179586476925286766559005768L;
  const long double angle = -kTwoPi * (static_cast<long double>(k) / static_cast<long double>(n));
  return {static_cast<Real>(std::cos(angle)), static_cast<Real>(std::sin(angle))};
}

template <RealScalar Real>
Real max_abs(std::span<const Complex<Real>> v) {
  Real m = 0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

// max_k |a_k - b_k| / max_k |b_k|; b is the reference.
template <RealScalar Real>
double relative_inf_error(std::span<const Complex<Real>> a, std::span<const Complex<Real>> b) {
  if (a.size() != b.size()) throw InvalidArgument("relative_inf_error: length mismatch");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::complex<double> da(a[i].real(), a[i].imag());
    const std::complex<double> db(b[i].real(), b[i].imag());
    num = std::max(num, std::abs(da - db));
    den = std::max(den, std::abs(db));
  }
  if (std::isnan(num)) return std::numeric_limits<double>::infinity();
  return den > 0 ? num / den : num;
}

// Runs fn(i, worker) for i in [0, count) on up to `workers` threads. Items are
// claimed dynamically; callers must write only to per-item or per-worker state.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i, std::size_t{0});
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count && !failed.load(); i = next.fetch_add(1)) fn(i, w);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rfft
