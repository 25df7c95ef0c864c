#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "marc/tensor.hpp"

namespace marc {

// `.mrt` tensor file, little-endian:
//   magic "MARCTNSR" | version u8 = 1 | dtype u8 | ndim u8 | reserved u8 = 0
//   | ndim x u32 dims | payload row-major
// dtype: 0 = f32, 1 = f64, 2 = complex64 (interleaved re,im f32 pairs)

struct MrtError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MrtFileError : MrtError {
  using MrtError::MrtError;
};
struct MrtBadMagic : MrtError {
  using MrtError::MrtError;
};
struct MrtBadVersion : MrtError {
  using MrtError::MrtError;
};
struct MrtBadDtype : MrtError {
  using MrtError::MrtError;
};
struct MrtTruncated : MrtError {
  using MrtError::MrtError;
};
struct MrtNonFinite : MrtError {
  using MrtError::MrtError;
};

enum class MrtDtype : std::uint8_t { f32 = 0, f64 = 1, c64 = 2 };

namespace detail {

template <typename T>
struct mrt_dtype_of;
template <>
struct mrt_dtype_of<float> {
  static constexpr MrtDtype value = MrtDtype::f32;
};
template <>
struct mrt_dtype_of<double> {
  static constexpr MrtDtype value = MrtDtype::f64;
};
template <>
struct mrt_dtype_of<std::complex<float>> {
  static constexpr MrtDtype value = MrtDtype::c64;
};

inline bool finite(float v) { return std::isfinite(v); }
inline bool finite(double v) { return std::isfinite(v); }
inline bool finite(std::complex<float> v) {
  return std::isfinite(v.real()) && std::isfinite(v.imag());
}

constexpr char kMagic[8] = {'M', 'A', 'R', 'C', 'T', 'N', 'S', 'R'};

}  // namespace detail

struct MrtHeader {
  MrtDtype dtype;
  Shape shape;
};

inline MrtHeader read_mrt_header(std::istream& in, const std::string& path) {
  char magic[8];
  std::uint8_t version, dtype, ndim, reserved;
  in.read(magic, 8);
  if (!in) throw MrtTruncated(path + ": truncated header");
  if (std::memcmp(magic, detail::kMagic, 8) != 0) throw MrtBadMagic(path + ": bad magic");
  in.read(reinterpret_cast<char*>(&version), 1);
  in.read(reinterpret_cast<char*>(&dtype), 1);
  in.read(reinterpret_cast<char*>(&ndim), 1);
  in.read(reinterpret_cast<char*>(&reserved), 1);
  if (!in) throw MrtTruncated(path + ": truncated header");
  if (version != 1) throw MrtBadVersion(path + ": unsupported version " + std::to_string(version));
  if (dtype > 2) throw MrtBadDtype(path + ": unsupported dtype " + std::to_string(dtype));
  if (ndim == 0) throw MrtFileError(path + ": zero-rank tensor");
  MrtHeader h;
  h.dtype = static_cast<MrtDtype>(dtype);
  for (std::uint8_t i = 0; i < ndim; ++i) {
    std::uint32_t d;
    in.read(reinterpret_cast<char*>(&d), 4);
    if (!in) throw MrtTruncated(path + ": truncated dims");
    if (d == 0) throw MrtFileError(path + ": zero dimension");
    h.shape.push_back(static_cast<Index>(d));
  }
  return h;
}

template <typename Scalar>
void write_mrt(const std::string& path, const Tensor<Scalar>& t) {
  for (Index i = 0; i < t.size(); ++i) {
    if (!detail::finite(t[i])) throw MrtNonFinite(path + ": non-finite value at " + std::to_string(i));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MrtFileError(path + ": cannot open for writing");
  out.write(detail::kMagic, 8);
  const std::uint8_t version = 1;
  const std::uint8_t dtype = static_cast<std::uint8_t>(detail::mrt_dtype_of<Scalar>::value);
  const std::uint8_t ndim = static_cast<std::uint8_t>(t.rank());
  const std::uint8_t reserved = 0;
  out.write(reinterpret_cast<const char*>(&version), 1);
  out.write(reinterpret_cast<const char*>(&dtype), 1);
  out.write(reinterpret_cast<const char*>(&ndim), 1);
  out.write(reinterpret_cast<const char*>(&reserved), 1);
  for (Index d : t.shape()) {
    const std::uint32_t v = static_cast<std::uint32_t>(d);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(Scalar)));
  if (!out) throw MrtFileError(path + ": write failed");
}

/// Reads a tensor whose stored dtype matches `Scalar` exactly.
template <typename Scalar>
Tensor<Scalar> read_mrt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MrtFileError(path + ": cannot open");
  const MrtHeader h = read_mrt_header(in, path);
  if (h.dtype != detail::mrt_dtype_of<Scalar>::value)
    throw MrtBadDtype(path + ": dtype does not match requested scalar");
  Tensor<Scalar> t(h.shape);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(Scalar)));
  if (in.gcount() != static_cast<std::streamsize>(t.size() * sizeof(Scalar)))
    throw MrtTruncated(path + ": payload shorter than declared shape");
  for (Index i = 0; i < t.size(); ++i) {
    if (!detail::finite(t[i])) throw MrtNonFinite(path + ": non-finite value at " + std::to_string(i));
  }
  return t;
}

using AnyTensor = std::variant<Tensor<float>, Tensor<double>, ComplexTensor<float>>;

inline AnyTensor read_mrt_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw MrtFileError(path + ": cannot open");
  const MrtHeader h = read_mrt_header(probe, path);
  probe.close();
  switch (h.dtype) {
    case MrtDtype::f32:
      return read_mrt<float>(path);
    case MrtDtype::f64:
      return read_mrt<double>(path);
    default:
      return read_mrt<std::complex<float>>(path);
  }
}

/// Real tensor as f32, converting from f64 when needed.
inline Tensor<float> read_mrt_f32(const std::string& path) {
  AnyTensor any = read_mrt_any(path);
  if (auto* f = std::get_if<Tensor<float>>(&any)) return std::move(*f);
  if (auto* d = std::get_if<Tensor<double>>(&any)) {
    Tensor<float> out(d->shape());
    out.vec() = d->vec().cast<float>();
    return out;
  }
  throw MrtBadDtype(path + ": expected a real-valued tensor");
}

/// 16-bit binary PGM (P5, maxval 65535), values linearly mapped from [0, 1].
inline void write_pgm16(const std::string& path, const Tensor<float>& image) {
  image.require_rank(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MrtFileError(path + ": cannot open for writing");
  out << "P5\n" << image.dim(1) << " " << image.dim(0) << "\n65535\n";
  for (Index i = 0; i < image.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    const std::uint16_t q = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
    // PGM payload is big-endian per netpbm
    const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                                    static_cast<unsigned char>(q & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  if (!out) throw MrtFileError(path + ": write failed");
}

}  // namespace marc
