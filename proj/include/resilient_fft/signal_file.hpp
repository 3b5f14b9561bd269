// Copyright 2026 The resilient-fft Authors
// SPDX-License-Identifier: Apache-2.0

// Batch container on disk. Little-endian throughout:
//
//   offset  size  field
//        0     5  magic "TFFT1"
//        5     1  version (1)
//        6     1  dtype: 1 = c64 (2 x float32), 2 = c128 (2 x float64)
//        7     1  reserved, 0
//        8     8  n, samples per signal
//       16     8  b, signal count
//       24        n*b interleaved (re, im) pairs

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "resilient_fft/common.hpp"
#include "resilient_fft/fft_core.hpp"

namespace rfft::io {

static_assert(std::endian::native == std::endian::little, "signal files are read and written natively");

inline constexpr std::array<char, 5> kMagic{'T', 'F', 'F', 'T', '1'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

enum class Dtype : std::uint8_t { c64 = 1, c128 = 2 };

inline Dtype dtype_of(Precision p) noexcept { return p == Precision::fp32 ? Dtype::c64 : Dtype::c128; }
inline Precision precision_of_dtype(Dtype d) noexcept { return d == Dtype::c64 ? Precision::fp32 : Precision::fp64; }

// Bad magic, version, dtype, or a payload of the wrong size.
struct MalformedFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Header {
  Dtype dtype = Dtype::c64;
  std::uint64_t n = 0;
  std::uint64_t b = 0;
};

using AnyBatch = std::variant<SignalBatch<float>, SignalBatch<double>>;

inline Header parse_header(const unsigned char* p) {
  if (std::memcmp(p, kMagic.data(), kMagic.size()) != 0) throw MalformedFile("bad magic (expected TFFT1)");
  if (p[5] != kVersion) throw MalformedFile("unsupported version " + std::to_string(p[5]));
  if (p[6] != 1 && p[6] != 2) throw MalformedFile("unknown dtype code " + std::to_string(p[6]));
  Header h;
  h.dtype = static_cast<Dtype>(p[6]);
  std::memcpy(&h.n, p + 8, 8);
  std::memcpy(&h.b, p + 16, 8);
  return h;
}

/// Reads a file; the length is validated by the SignalBatch constructor, so
/// an unsupported n surfaces as UnsupportedLength.
inline AnyBatch read_signal_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  if (bytes.size() < kHeaderBytes) throw MalformedFile("file shorter than the 24-byte header");
  const Header h = parse_header(bytes.data());
  const std::size_t scalar = h.dtype == Dtype::c64 ? 4 : 8;
  if (h.b == 0) throw MalformedFile("signal count is zero");
  if (h.n == 0 || h.n > (std::uint64_t{1} << 40) || h.b > (std::uint64_t{1} << 40) / h.n)
    throw MalformedFile("implausible dimensions");
  const std::uint64_t payload = h.n * h.b * 2 * scalar;
  if (bytes.size() - kHeaderBytes != payload)
    throw MalformedFile("payload is " + std::to_string(bytes.size() - kHeaderBytes) + " bytes, header implies " +
                        std::to_string(payload));
  require_supported_length(h.n);
  auto fill = [&](auto tag) {
    using Real = decltype(tag);
    std::vector<Complex<Real>> data(h.n * h.b);
    std::memcpy(data.data(), bytes.data() + kHeaderBytes, payload);
    return SignalBatch<Real>(h.n, h.b, std::move(data));
  };
  if (h.dtype == Dtype::c64) return fill(float{});
  return fill(double{});
}

template <RealScalar Real>
void write_signal_file(const std::string& path, const SignalBatch<Real>& batch) {
  unsigned char header[kHeaderBytes] = {};
  std::memcpy(header, kMagic.data(), kMagic.size());
  header[5] = kVersion;
  header[6] = static_cast<unsigned char>(dtype_of(precision_of<Real>));
  const std::uint64_t n = batch.length(), b = batch.count();
  std::memcpy(header + 8, &n, 8);
  std::memcpy(header + 16, &b, 8);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(header), kHeaderBytes);
  const auto data = batch.data();
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_signal_file(const std::string& path, const AnyBatch& batch) {
  std::visit([&](const auto& b) { write_signal_file(path, b); }, batch);
}

}  // namespace rfft::io
