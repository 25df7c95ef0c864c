#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <vector>

#include "marc/tensor.hpp"

namespace marc {

namespace detail {

// fftshift rotates by floor(n/2); ifftshift by ceil(n/2). They are exact
// inverses for any n.
template <typename T>
void rotate_rows(Tensor<std::complex<T>>& t, Index by) {
  const Index rows = t.dim(0), cols = t.dim(1);
  Tensor<std::complex<T>> tmp = t;
  for (Index r = 0; r < rows; ++r) {
    const Index dst = (r + by) % rows;
    for (Index c = 0; c < cols; ++c) t(dst, c) = tmp(r, c);
  }
}

template <typename T>
void rotate_cols(Tensor<std::complex<T>>& t, Index by) {
  const Index rows = t.dim(0), cols = t.dim(1);
  Tensor<std::complex<T>> tmp = t;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) t(r, (c + by) % cols) = tmp(r, c);
  }
}

template <typename T>
void fftshift2(Tensor<std::complex<T>>& t) {
  rotate_rows(t, t.dim(0) / 2);
  rotate_cols(t, t.dim(1) / 2);
}

template <typename T>
void ifftshift2(Tensor<std::complex<T>>& t) {
  rotate_rows(t, (t.dim(0) + 1) / 2);
  rotate_cols(t, (t.dim(1) + 1) / 2);
}

enum class FftDir { forward, inverse };

template <typename T>
void fft_axes(Tensor<std::complex<T>>& t, FftDir dir) {
  const Index rows = t.dim(0), cols = t.dim(1);
  Eigen::FFT<T> fft;
  std::vector<std::complex<T>> line, spec;

  if (cols > 1) {  // a length-1 DFT is the identity
    line.resize(static_cast<size_t>(cols));
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) line[static_cast<size_t>(c)] = t(r, c);
      if (dir == FftDir::forward)
        fft.fwd(spec, line);
      else
        fft.inv(spec, line);
      for (Index c = 0; c < cols; ++c) t(r, c) = spec[static_cast<size_t>(c)];
    }
  }

  if (rows > 1) {
    line.resize(static_cast<size_t>(rows));
    for (Index c = 0; c < cols; ++c) {
      for (Index r = 0; r < rows; ++r) line[static_cast<size_t>(r)] = t(r, c);
      if (dir == FftDir::forward)
        fft.fwd(spec, line);
      else
        fft.inv(spec, line);
      for (Index r = 0; r < rows; ++r) t(r, c) = spec[static_cast<size_t>(r)];
    }
  }
}

}  // namespace detail

/// Unitary centered 2-D DFT: DC lands at (rows/2, cols/2) and Parseval holds
/// with equality.
template <typename T>
Tensor<std::complex<T>> fft2c(const Tensor<std::complex<T>>& image) {
  image.require_rank(2);
  Tensor<std::complex<T>> k = image;
  detail::ifftshift2(k);
  detail::fft_axes(k, detail::FftDir::forward);
  detail::fftshift2(k);
  const T scale = T(1) / std::sqrt(static_cast<T>(k.size()));
  for (Index i = 0; i < k.size(); ++i) k[i] *= scale;
  return k;
}

/// Exact inverse of fft2c.
template <typename T>
Tensor<std::complex<T>> ifft2c(const Tensor<std::complex<T>>& kspace) {
  kspace.require_rank(2);
  Tensor<std::complex<T>> img = kspace;
  detail::ifftshift2(img);
  detail::fft_axes(img, detail::FftDir::inverse);
  detail::fftshift2(img);
  // Eigen's inverse applies 1/N; rescale to the unitary convention.
  const T scale = std::sqrt(static_cast<T>(img.size()));
  for (Index i = 0; i < img.size(); ++i) img[i] *= scale;
  return img;
}

template <typename T>
Tensor<std::complex<T>> to_complex(const Tensor<T>& real) {
  Tensor<std::complex<T>> out(real.shape());
  for (Index i = 0; i < real.size(); ++i) out[i] = {real[i], T(0)};
  return out;
}

template <typename T>
Tensor<T> magnitude(const Tensor<std::complex<T>>& t) {
  Tensor<T> out(t.shape());
  for (Index i = 0; i < t.size(); ++i) out[i] = std::abs(t[i]);
  return out;
}

}  // namespace marc
