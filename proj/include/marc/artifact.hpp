#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "marc/fft.hpp"
#include "marc/rng.hpp"
#include "marc/tensor.hpp"

namespace marc {

enum class PhasePattern { periodic, random_lines };

/// Parameters of one respiratory phase-error realization. delta_max is the
/// motion amplitude in pixels, alpha the respiratory frequency in Hz, beta
/// the sine phase, ky0 the centric-order delay boundary in radians.
struct PhaseErrorSpec {
  PhasePattern kind = PhasePattern::periodic;
  double delta_max = 10.0;     // pixels, 0..20
  double alpha = 0.3;          // Hz, 0.1..5 for the periodic kind
  double beta = 0.0;           // radians
  double ky0 = std::numbers::pi / 10;  // radians
  double line_fraction = 0.25;  // random kind only, 0.10..0.50
  double scan_seconds = 10.0;
  std::uint64_t seed = 0;
};

struct B0FieldSpec {
  int max_order = 3;           // polynomial order, <= 3
  double peak_to_peak_rad = 8.8;
  std::uint64_t seed = 0;
};

/// Draws one corruption realization from the ranges the simulation uses.
inline PhaseErrorSpec draw_phase_spec(Rng& rng, PhasePattern kind, double delta_max_bound = 20.0,
                                      double scan_seconds = 10.0) {
  PhaseErrorSpec s;
  s.kind = kind;
  s.delta_max = rng.uniform(0.0, delta_max_bound);
  s.alpha = rng.uniform(0.1, 5.0);
  s.beta = rng.uniform(0.0, std::numbers::pi / 4);
  s.ky0 = rng.uniform(std::numbers::pi / 10, std::numbers::pi / 2);
  s.line_fraction = rng.uniform(0.10, 0.50);
  s.scan_seconds = scan_seconds;
  s.seed = rng.next();
  return s;
}

/// Smooth polynomial phase field: sum of c_ij x^i y^j with i+j <= max_order,
/// x,y in [-1,1], rescaled to a random peak-to-peak within the bound and
/// centered to zero mean.
template <typename T>
Tensor<T> gen_b0_field(const B0FieldSpec& spec, Index height, Index width) {
  if (spec.max_order < 0 || spec.max_order > 3)
    throw std::invalid_argument("gen_b0_field: max_order must be in [0, 3]");
  Rng rng(spec.seed);

  std::vector<double> coeffs;
  for (int i = 0; i <= spec.max_order; ++i)
    for (int j = 0; i + j <= spec.max_order; ++j) coeffs.push_back(rng.uniform(-1.0, 1.0));
  const double target_p2p = rng.uniform(0.0, spec.peak_to_peak_rad);

  Tensor<double> field(Shape{height, width});
  for (Index r = 0; r < height; ++r) {
    const double y = height > 1 ? -1.0 + 2.0 * static_cast<double>(r) / (height - 1) : 0.0;
    for (Index c = 0; c < width; ++c) {
      const double x = width > 1 ? -1.0 + 2.0 * static_cast<double>(c) / (width - 1) : 0.0;
      double v = 0.0;
      size_t idx = 0;
      for (int i = 0; i <= spec.max_order; ++i)
        for (int j = 0; i + j <= spec.max_order; ++j)
          v += coeffs[idx++] * std::pow(x, i) * std::pow(y, j);
      field(r, c) = v;
    }
  }

  const double lo = field.vec().minCoeff();
  const double hi = field.vec().maxCoeff();
  const double p2p = hi - lo;
  const double scale = p2p > 1e-12 ? target_p2p / p2p : 0.0;
  const double mean = field.vec().mean();

  Tensor<T> out(Shape{height, width});
  for (Index i = 0; i < field.size(); ++i)
    out[i] = static_cast<T>((field[i] - mean) * scale);
  return out;
}

/// Per-line phase for the periodic respiration pattern. Line index m runs over
/// [-n_pe/2, n_pe/2); centric ordering maps |m| to acquisition time so alpha
/// keeps its Hz meaning.
template <typename T>
Tensor<T> periodic_phase_error(Index n_pe, const PhaseErrorSpec& spec) {
  if (n_pe < 2) throw std::invalid_argument("periodic_phase_error: n_pe < 2");
  Tensor<T> train(Shape{n_pe}, T(0));
  const double half = static_cast<double>(n_pe) / 2.0;
  const double m0 = spec.ky0 / std::numbers::pi * half;
  for (Index i = 0; i < n_pe; ++i) {
    const double m = static_cast<double>(i) - std::floor(half);
    if (std::abs(m) < m0) continue;
    const double t = std::abs(m) / half * spec.scan_seconds;
    const double phi = 2.0 * std::numbers::pi * m / static_cast<double>(n_pe) * spec.delta_max *
                       std::sin(2.0 * std::numbers::pi * spec.alpha * t + spec.beta);
    train[i] = static_cast<T>(phi);
  }
  return train;
}

/// Irregular-motion pattern: a seeded fraction of lines outside the protected
/// center |m| < n_pe/20 gets a per-line displacement uniform in [0, delta_max].
template <typename T>
Tensor<T> random_phase_error(Index n_pe, const PhaseErrorSpec& spec) {
  if (n_pe < 20) throw std::invalid_argument("random_phase_error: n_pe < 20");
  Tensor<T> train(Shape{n_pe}, T(0));
  const double half = static_cast<double>(n_pe) / 2.0;
  const double m_protect = static_cast<double>(n_pe) / 20.0;

  std::vector<Index> eligible;
  for (Index i = 0; i < n_pe; ++i) {
    const double m = static_cast<double>(i) - std::floor(half);
    if (std::abs(m) >= m_protect) eligible.push_back(i);
  }
  Rng rng(spec.seed);
  rng.shuffle(eligible);
  const Index n_hit = static_cast<Index>(
      std::lround(spec.line_fraction * static_cast<double>(eligible.size())));
  for (Index k = 0; k < n_hit; ++k) {
    const Index i = eligible[static_cast<size_t>(k)];
    const double m = static_cast<double>(i) - std::floor(half);
    const double delta = rng.uniform(0.0, spec.delta_max);
    train[i] = static_cast<T>(2.0 * std::numbers::pi * m / static_cast<double>(n_pe) * delta);
  }
  return train;
}

template <typename T>
Tensor<T> phase_error_train(Index n_pe, const PhaseErrorSpec& spec) {
  return spec.kind == PhasePattern::periodic ? periodic_phase_error<T>(n_pe, spec)
                                             : random_phase_error<T>(n_pe, spec);
}

/// Multiplies every k-space sample on PE line m (row m) by e^{-j phi(m)}.
template <typename T>
Tensor<std::complex<T>> corrupt_kspace(const Tensor<std::complex<T>>& kspace,
                                       const Tensor<T>& phase_train) {
  kspace.require_rank(2);
  if (phase_train.size() != kspace.dim(0))
    throw std::invalid_argument("corrupt_kspace: phase train length != PE dimension");
  Tensor<std::complex<T>> out = kspace;
  for (Index r = 0; r < kspace.dim(0); ++r) {
    const std::complex<T> f = std::polar(T(1), -phase_train[r]);
    for (Index c = 0; c < kspace.dim(1); ++c) out(r, c) *= f;
  }
  return out;
}

/// Water k-space from in-phase/out-of-phase echoes: elementwise average.
template <typename T>
Tensor<std::complex<T>> dixon_combine(const Tensor<std::complex<T>>& s_in,
                                      const Tensor<std::complex<T>>& s_out) {
  if (!s_in.same_shape(s_out)) throw std::invalid_argument("dixon_combine: shape mismatch");
  Tensor<std::complex<T>> w(s_in.shape());
  for (Index i = 0; i < w.size(); ++i) w[i] = (s_in[i] + s_out[i]) * T(0.5);
  return w;
}

/// Full corruption of one magnitude slice: apply the B0 phase, transform to
/// k-space, inject the per-line phase error, transform back, take magnitude.
template <typename T>
Tensor<T> simulate_artifact(const Tensor<T>& reference, const B0FieldSpec& b0,
                            const PhaseErrorSpec& err) {
  reference.require_rank(2);
  const Tensor<T> field = gen_b0_field<T>(b0, reference.dim(0), reference.dim(1));
  Tensor<std::complex<T>> img(reference.shape());
  for (Index i = 0; i < img.size(); ++i) img[i] = std::polar(reference[i], field[i]);
  Tensor<std::complex<T>> k = fft2c(img);
  const Tensor<T> train = phase_error_train<T>(reference.dim(0), err);
  k = corrupt_kspace(k, train);
  return magnitude(ifft2c(k));
}

}  // namespace marc
