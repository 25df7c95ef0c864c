#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "marc/io.hpp"
#include "marc/rng.hpp"
#include "marc/tensor.hpp"

namespace marc {

// MARC residual CNN. Head: conv 3x3 (channels -> filters) + ReLU.
// Interior, n_conv times: conv 3x3 + batch norm + ReLU.
// Tail: conv 3x3 (filters -> channels), no activation.
// All convolutions use stride 1 and zero same-padding, so patch training and
// full-slice inference share one code path.

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Vector<Scalar, Eigen::Dynamic>;

template <typename Scalar>
struct ConvLayer {
  Index in_c = 0, out_c = 0;
  MatrixRM<Scalar> weight;  // (out_c, in_c*9), rows laid out as (in_c, ky, kx)
  VectorX<Scalar> bias;     // (out_c)
};

template <typename Scalar>
struct BatchNorm {
  VectorX<Scalar> gamma, beta;            // trainable
  VectorX<Scalar> running_mean, running_var;  // tracked, not trained
  Scalar momentum = Scalar(0.9);
  Scalar eps = Scalar(1e-5);
};

template <typename Scalar>
struct MarcModel {
  int n_conv = 0;
  int n_filters = 64;
  int n_channels = 7;
  std::vector<ConvLayer<Scalar>> convs;  // n_conv + 2
  std::vector<BatchNorm<Scalar>> bns;    // n_conv

  int depth() const { return n_conv + 2; }  // conv layers, 1-based in the API
};

enum class RunMode { train, infer };

template <typename Scalar>
struct Gradients {
  std::vector<MatrixRM<Scalar>> conv_weight;
  std::vector<VectorX<Scalar>> conv_bias;
  std::vector<VectorX<Scalar>> bn_gamma;
  std::vector<VectorX<Scalar>> bn_beta;
};

template <typename Scalar>
struct ForwardCache {
  Tensor<Scalar> input;
  std::vector<Tensor<Scalar>> conv_in;   // input of conv layer i
  std::vector<Tensor<Scalar>> bn_in;     // pre-normalization activations
  std::vector<Tensor<Scalar>> bn_xhat;
  std::vector<VectorX<Scalar>> bn_invstd;
  std::vector<Tensor<Scalar>> relu_in;   // pre-activation of each ReLU (n_conv + 1)
  bool valid = false;
};

namespace detail {

template <typename Scalar>
void im2col(const Scalar* in, Index channels, Index h, Index w, MatrixRM<Scalar>& col) {
  const Index hw = h * w;
  col.resize(channels * 9, hw);
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = in + c * hw;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        Scalar* dst = col.data() + (c * 9 + ky * 3 + kx) * hw;
        const Index dy = ky - 1, dx = kx - 1;
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + dy;
          Scalar* row = dst + y * w;
          if (sy < 0 || sy >= h) {
            for (Index x = 0; x < w; ++x) row[x] = Scalar(0);
            continue;
          }
          const Scalar* src = plane + sy * w;
          for (Index x = 0; x < w; ++x) {
            const Index sx = x + dx;
            row[x] = (sx >= 0 && sx < w) ? src[sx] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_accumulate(const MatrixRM<Scalar>& col, Index channels, Index h, Index w,
                       Scalar* out) {
  const Index hw = h * w;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = out + c * hw;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        const Scalar* src = col.data() + (c * 9 + ky * 3 + kx) * hw;
        const Index dy = ky - 1, dx = kx - 1;
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          Scalar* row = plane + sy * w;
          const Scalar* srow = src + y * w;
          for (Index x = 0; x < w; ++x) {
            const Index sx = x + dx;
            if (sx >= 0 && sx < w) row[sx] += srow[x];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
MarcModel<Scalar> build_marc(int n_conv, int n_filters = 64, int n_channels = 7,
                             std::uint64_t seed = 0) {
  if (n_conv < 1) throw std::invalid_argument("build_marc: n_conv must be >= 1");
  if (n_filters < 1 || n_channels < 1)
    throw std::invalid_argument("build_marc: filters/channels must be >= 1");

  MarcModel<Scalar> m;
  m.n_conv = n_conv;
  m.n_filters = n_filters;
  m.n_channels = n_channels;

  Rng rng(seed);
  auto make_conv = [&](Index in_c, Index out_c) {
    ConvLayer<Scalar> conv;
    conv.in_c = in_c;
    conv.out_c = out_c;
    conv.weight.resize(out_c, in_c * 9);
    // He-style fan-in scaling, uniform variant
    const double limit = std::sqrt(6.0 / static_cast<double>(in_c * 9));
    for (Index i = 0; i < conv.weight.size(); ++i)
      conv.weight.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
    conv.bias = VectorX<Scalar>::Zero(out_c);
    return conv;
  };

  m.convs.push_back(make_conv(n_channels, n_filters));
  for (int i = 0; i < n_conv; ++i) {
    m.convs.push_back(make_conv(n_filters, n_filters));
    BatchNorm<Scalar> bn;
    bn.gamma = VectorX<Scalar>::Ones(n_filters);
    bn.beta = VectorX<Scalar>::Zero(n_filters);
    bn.running_mean = VectorX<Scalar>::Zero(n_filters);
    bn.running_var = VectorX<Scalar>::Ones(n_filters);
    m.bns.push_back(std::move(bn));
  }
  m.convs.push_back(make_conv(n_filters, n_channels));
  return m;
}

/// Counts conv kernels/biases, BN gamma/beta and the tracked running
/// mean/variance (4 values per BN channel).
template <typename Scalar>
long long param_count(const MarcModel<Scalar>& m) {
  long long n = 0;
  for (const auto& c : m.convs) n += static_cast<long long>(c.weight.size() + c.bias.size());
  for (const auto& b : m.bns)
    n += static_cast<long long>(b.gamma.size() + b.beta.size() + b.running_mean.size() +
                                b.running_var.size());
  return n;
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> conv_forward(const ConvLayer<Scalar>& conv, const Tensor<Scalar>& in,
                            MatrixRM<Scalar>& col_scratch) {
  const Index n = in.dim(0), h = in.dim(2), w = in.dim(3);
  Tensor<Scalar> out(Shape{n, conv.out_c, h, w});
  const Index hw = h * w;
  for (Index s = 0; s < n; ++s) {
    im2col(in.data() + s * in.dim(1) * hw, in.dim(1), h, w, col_scratch);
    Eigen::Map<MatrixRM<Scalar>> out_mat(out.data() + s * conv.out_c * hw, conv.out_c, hw);
    out_mat.noalias() = conv.weight * col_scratch;
    out_mat.colwise() += conv.bias;
  }
  return out;
}

template <typename Scalar>
void bn_forward(BatchNorm<Scalar>& bn, Tensor<Scalar>& t, RunMode mode,
                Tensor<Scalar>* xhat_out, VectorX<Scalar>* invstd_out) {
  const Index n = t.dim(0), c = t.dim(1), hw = t.dim(2) * t.dim(3);
  const Index m_count = n * hw;
  if (xhat_out) *xhat_out = Tensor<Scalar>(t.shape());
  if (invstd_out) invstd_out->resize(c);

  for (Index ch = 0; ch < c; ++ch) {
    Scalar mean, invstd;
    if (mode == RunMode::train) {
      Scalar sum = 0, sumsq = 0;
      for (Index s = 0; s < n; ++s) {
        const Scalar* p = t.data() + (s * c + ch) * hw;
        for (Index i = 0; i < hw; ++i) {
          sum += p[i];
          sumsq += p[i] * p[i];
        }
      }
      mean = sum / static_cast<Scalar>(m_count);
      Scalar var = sumsq / static_cast<Scalar>(m_count) - mean * mean;
      if (var < Scalar(0)) var = Scalar(0);
      invstd = Scalar(1) / std::sqrt(var + bn.eps);
      bn.running_mean[ch] = bn.momentum * bn.running_mean[ch] + (Scalar(1) - bn.momentum) * mean;
      bn.running_var[ch] = bn.momentum * bn.running_var[ch] + (Scalar(1) - bn.momentum) * var;
    } else {
      mean = bn.running_mean[ch];
      invstd = Scalar(1) / std::sqrt(bn.running_var[ch] + bn.eps);
    }
    const Scalar g = bn.gamma[ch], b = bn.beta[ch];
    for (Index s = 0; s < n; ++s) {
      Scalar* p = t.data() + (s * c + ch) * hw;
      Scalar* xh = xhat_out ? xhat_out->data() + (s * c + ch) * hw : nullptr;
      for (Index i = 0; i < hw; ++i) {
        const Scalar xhat = (p[i] - mean) * invstd;
        if (xh) xh[i] = xhat;
        p[i] = g * xhat + b;
      }
    }
    if (invstd_out) (*invstd_out)[ch] = invstd;
  }
}

template <typename Scalar>
void relu_inplace(Tensor<Scalar>& t) {
  for (Index i = 0; i < t.size(); ++i)
    if (t[i] < Scalar(0)) t[i] = Scalar(0);
}

}  // namespace detail

/// Forward pass over a (N, channels, H, W) batch. Train mode uses batch
/// statistics and updates running stats; infer mode reads running stats and
/// leaves the model untouched.
template <typename Scalar>
Tensor<Scalar> forward(MarcModel<Scalar>& model, const Tensor<Scalar>& batch, RunMode mode,
                       ForwardCache<Scalar>* cache = nullptr) {
  batch.require_rank(4);
  if (batch.dim(1) != model.n_channels)
    throw std::invalid_argument("forward: channel count does not match model");
  if (batch.dim(2) < 3 || batch.dim(3) < 3)
    throw std::invalid_argument("forward: spatial dims must be >= 3");

  if (cache) {
    *cache = ForwardCache<Scalar>{};
    cache->input = batch;
    cache->conv_in.resize(model.convs.size());
    cache->bn_in.resize(model.bns.size());
    cache->bn_xhat.resize(model.bns.size());
    cache->bn_invstd.resize(model.bns.size());
    cache->relu_in.resize(model.bns.size() + 1);
  }

  MatrixRM<Scalar> col;
  Tensor<Scalar> act = batch;

  if (cache) cache->conv_in[0] = act;
  act = detail::conv_forward(model.convs[0], act, col);
  if (cache) cache->relu_in[0] = act;
  detail::relu_inplace(act);

  for (int i = 0; i < model.n_conv; ++i) {
    if (cache) cache->conv_in[static_cast<size_t>(i) + 1] = act;
    act = detail::conv_forward(model.convs[static_cast<size_t>(i) + 1], act, col);
    if (cache) cache->bn_in[static_cast<size_t>(i)] = act;
    detail::bn_forward(model.bns[static_cast<size_t>(i)], act, mode,
                       cache ? &cache->bn_xhat[static_cast<size_t>(i)] : nullptr,
                       cache ? &cache->bn_invstd[static_cast<size_t>(i)] : nullptr);
    if (cache) cache->relu_in[static_cast<size_t>(i) + 1] = act;
    detail::relu_inplace(act);
  }

  if (cache) cache->conv_in.back() = act;
  act = detail::conv_forward(model.convs.back(), act, col);
  if (cache) cache->valid = true;
  return act;
}

/// Backward pass for the batch most recently run through forward(train) with
/// a cache. Gradients cover conv kernels/biases and BN gamma/beta; running
/// stats are tracked, not trained.
template <typename Scalar>
Gradients<Scalar> backward(const MarcModel<Scalar>& model, const ForwardCache<Scalar>& cache,
                           const Tensor<Scalar>& grad_out) {
  if (!cache.valid) throw std::logic_error("backward: no matching forward(train) cache");

  Gradients<Scalar> g;
  g.conv_weight.resize(model.convs.size());
  g.conv_bias.resize(model.convs.size());
  g.bn_gamma.resize(model.bns.size());
  g.bn_beta.resize(model.bns.size());

  MatrixRM<Scalar> col, dcol;

  auto conv_backward = [&](size_t li, const Tensor<Scalar>& in, const Tensor<Scalar>& dout) {
    const ConvLayer<Scalar>& conv = model.convs[li];
    const Index n = in.dim(0), h = in.dim(2), w = in.dim(3), hw = h * w;
    g.conv_weight[li] = MatrixRM<Scalar>::Zero(conv.out_c, conv.in_c * 9);
    g.conv_bias[li] = VectorX<Scalar>::Zero(conv.out_c);
    Tensor<Scalar> din(in.shape(), Scalar(0));
    for (Index s = 0; s < n; ++s) {
      detail::im2col(in.data() + s * conv.in_c * hw, conv.in_c, h, w, col);
      Eigen::Map<const MatrixRM<Scalar>> dout_mat(dout.data() + s * conv.out_c * hw,
                                                  conv.out_c, hw);
      g.conv_weight[li].noalias() += dout_mat * col.transpose();
      g.conv_bias[li].noalias() += dout_mat.rowwise().sum();
      dcol.noalias() = conv.weight.transpose() * dout_mat;
      detail::col2im_accumulate(dcol, conv.in_c, h, w, din.data() + s * conv.in_c * hw);
    }
    return din;
  };

  auto relu_backward = [](const Tensor<Scalar>& pre, Tensor<Scalar>& d) {
    for (Index i = 0; i < d.size(); ++i)
      if (pre[i] <= Scalar(0)) d[i] = Scalar(0);
  };

  Tensor<Scalar> d = grad_out;

  // tail conv
  d = conv_backward(model.convs.size() - 1, cache.conv_in.back(), d);

  for (int i = model.n_conv - 1; i >= 0; --i) {
    const size_t bi = static_cast<size_t>(i);
    relu_backward(cache.relu_in[bi + 1], d);

    // batch-norm backward from saved xhat/invstd
    const BatchNorm<Scalar>& bn = model.bns[bi];
    const Tensor<Scalar>& xhat = cache.bn_xhat[bi];
    const Index n = d.dim(0), c = d.dim(1), hw = d.dim(2) * d.dim(3);
    const Scalar m_count = static_cast<Scalar>(n * hw);
    g.bn_gamma[bi] = VectorX<Scalar>::Zero(c);
    g.bn_beta[bi] = VectorX<Scalar>::Zero(c);
    for (Index ch = 0; ch < c; ++ch) {
      Scalar sum_dy = 0, sum_dy_xhat = 0;
      for (Index s = 0; s < n; ++s) {
        const Scalar* dy = d.data() + (s * c + ch) * hw;
        const Scalar* xh = xhat.data() + (s * c + ch) * hw;
        for (Index k = 0; k < hw; ++k) {
          sum_dy += dy[k];
          sum_dy_xhat += dy[k] * xh[k];
        }
      }
      g.bn_gamma[bi][ch] = sum_dy_xhat;
      g.bn_beta[bi][ch] = sum_dy;
      const Scalar gam = bn.gamma[ch];
      const Scalar invstd = cache.bn_invstd[bi][ch];
      const Scalar k1 = gam * invstd / m_count;
      for (Index s = 0; s < n; ++s) {
        Scalar* dy = d.data() + (s * c + ch) * hw;
        const Scalar* xh = xhat.data() + (s * c + ch) * hw;
        for (Index k = 0; k < hw; ++k)
          dy[k] = k1 * (m_count * dy[k] - sum_dy - xh[k] * sum_dy_xhat);
      }
    }

    d = conv_backward(bi + 1, cache.conv_in[bi + 1], d);
  }

  relu_backward(cache.relu_in[0], d);
  conv_backward(0, cache.conv_in[0], d);
  return g;
}

/// Full-slice residual denoising: output = clamp(input - predicted artifact, 0).
/// Volume layout (phases, slices, H, W); no patch tiling.
template <typename Scalar>
Tensor<Scalar> denoise(MarcModel<Scalar>& model, const Tensor<Scalar>& volume) {
  volume.require_rank(4);
  const Index phases = volume.dim(0), slices = volume.dim(1);
  const Index h = volume.dim(2), w = volume.dim(3);
  if (phases != model.n_channels)
    throw std::invalid_argument("denoise: phase count does not match model channels");

  Tensor<Scalar> out(volume.shape());
  Tensor<Scalar> slice(Shape{1, phases, h, w});
  for (Index s = 0; s < slices; ++s) {
    for (Index p = 0; p < phases; ++p)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) slice(0, p, y, x) = volume(p, s, y, x);
    Tensor<Scalar> pred = forward(model, slice, RunMode::infer);
    for (Index p = 0; p < phases; ++p)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const Scalar v = volume(p, s, y, x) - pred(0, p, y, x);
          out(p, s, y, x) = v < Scalar(0) ? Scalar(0) : v;
        }
  }
  return out;
}

/// Post-activation feature maps at the requested 1-based conv-layer indices
/// (1 = head, 2..n_conv+1 = interior blocks, n_conv+2 = tail output).
template <typename Scalar>
std::vector<Tensor<Scalar>> extract_features(MarcModel<Scalar>& model,
                                             const Tensor<Scalar>& input,
                                             const std::vector<int>& layer_indices) {
  for (int idx : layer_indices)
    if (idx < 1 || idx > model.depth())
      throw std::out_of_range("extract_features: layer index out of range");

  ForwardCache<Scalar> cache;
  Tensor<Scalar> out = forward(model, input, RunMode::infer, &cache);

  std::vector<Tensor<Scalar>> maps;
  for (int idx : layer_indices) {
    if (idx == model.depth()) {
      maps.push_back(out);
      continue;
    }
    Tensor<Scalar> act = cache.relu_in[static_cast<size_t>(idx) - 1];
    detail::relu_inplace(act);
    maps.push_back(std::move(act));
  }
  return maps;
}

/// Applies fn(name, values) to every parameter vector, trainable first, then
/// tracked running stats. Order is fixed; Adam state and snapshots rely on it.
template <typename Scalar, typename Fn>
void visit_params(MarcModel<Scalar>& model, Fn&& fn, bool include_running = false) {
  for (size_t i = 0; i < model.convs.size(); ++i) {
    auto& c = model.convs[i];
    fn("conv" + std::to_string(i) + "_kernel",
       Eigen::Map<VectorX<Scalar>>(c.weight.data(), c.weight.size()));
    fn("conv" + std::to_string(i) + "_bias",
       Eigen::Map<VectorX<Scalar>>(c.bias.data(), c.bias.size()));
  }
  for (size_t i = 0; i < model.bns.size(); ++i) {
    auto& b = model.bns[i];
    fn("bn" + std::to_string(i) + "_gamma",
       Eigen::Map<VectorX<Scalar>>(b.gamma.data(), b.gamma.size()));
    fn("bn" + std::to_string(i) + "_beta",
       Eigen::Map<VectorX<Scalar>>(b.beta.data(), b.beta.size()));
    if (include_running) {
      fn("bn" + std::to_string(i) + "_rmean",
         Eigen::Map<VectorX<Scalar>>(b.running_mean.data(), b.running_mean.size()));
      fn("bn" + std::to_string(i) + "_rvar",
         Eigen::Map<VectorX<Scalar>>(b.running_var.data(), b.running_var.size()));
    }
  }
}

/// Gradient vectors in the same order as visit_params (trainable only).
template <typename Scalar, typename Fn>
void visit_grads(const Gradients<Scalar>& g, Fn&& fn) {
  for (size_t i = 0; i < g.conv_weight.size(); ++i) {
    fn("conv" + std::to_string(i) + "_kernel",
       Eigen::Map<const VectorX<Scalar>>(g.conv_weight[i].data(), g.conv_weight[i].size()));
    fn("conv" + std::to_string(i) + "_bias",
       Eigen::Map<const VectorX<Scalar>>(g.conv_bias[i].data(), g.conv_bias[i].size()));
  }
  for (size_t i = 0; i < g.bn_gamma.size(); ++i) {
    fn("bn" + std::to_string(i) + "_gamma",
       Eigen::Map<const VectorX<Scalar>>(g.bn_gamma[i].data(), g.bn_gamma[i].size()));
    fn("bn" + std::to_string(i) + "_beta",
       Eigen::Map<const VectorX<Scalar>>(g.bn_beta[i].data(), g.bn_beta[i].size()));
  }
}

// Model bundle: manifest.txt plus one .mrt per parameter tensor. Layer indices
// in filenames enumerate the sequential layer list (head conv, then
// conv/bn alternating, then tail conv).

template <typename Scalar>
void save_model(const std::string& dir, const MarcModel<Scalar>& model) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt");
  if (!manifest) throw MrtFileError(dir + "/manifest.txt: cannot open for writing");
  manifest << "format_version = 1\n";
  manifest << "scalar = " << (sizeof(Scalar) == 4 ? "f32" : "f64") << "\n";
  manifest << "n_conv = " << model.n_conv << "\n";
  manifest << "n_filters = " << model.n_filters << "\n";
  manifest << "n_channels = " << model.n_channels << "\n";

  auto save_conv = [&](int layer, const ConvLayer<Scalar>& c) {
    manifest << "layer" << layer << " = conv " << c.out_c << " " << c.in_c << " 3 3\n";
    Tensor<Scalar> kernel(Shape{c.out_c, c.in_c, 3, 3});
    std::copy(c.weight.data(), c.weight.data() + c.weight.size(), kernel.data());
    write_mrt(dir + "/layer" + std::to_string(layer) + "_kernel.mrt", kernel);
    Tensor<Scalar> bias(Shape{c.out_c});
    std::copy(c.bias.data(), c.bias.data() + c.bias.size(), bias.data());
    write_mrt(dir + "/layer" + std::to_string(layer) + "_bias.mrt", bias);
  };
  auto save_vec = [&](int layer, const std::string& name, const VectorX<Scalar>& v) {
    Tensor<Scalar> t(Shape{v.size()});
    std::copy(v.data(), v.data() + v.size(), t.data());
    write_mrt(dir + "/layer" + std::to_string(layer) + "_" + name + ".mrt", t);
  };

  int layer = 0;
  save_conv(layer++, model.convs[0]);
  for (int i = 0; i < model.n_conv; ++i) {
    save_conv(layer++, model.convs[static_cast<size_t>(i) + 1]);
    const auto& bn = model.bns[static_cast<size_t>(i)];
    manifest << "layer" << layer << " = bn " << bn.gamma.size() << " momentum "
             << bn.momentum << " eps " << bn.eps << "\n";
    save_vec(layer, "gamma", bn.gamma);
    save_vec(layer, "beta", bn.beta);
    save_vec(layer, "rmean", bn.running_mean);
    save_vec(layer, "rvar", bn.running_var);
    ++layer;
  }
  save_conv(layer, model.convs.back());
}

template <typename Scalar>
MarcModel<Scalar> load_model(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.txt");
  if (!manifest) throw MrtFileError(dir + "/manifest.txt: cannot open");
  int n_conv = -1, n_filters = -1, n_channels = -1;
  std::string line;
  while (std::getline(manifest, line)) {
    std::istringstream ss(line);
    std::string key, eq;
    ss >> key >> eq;
    if (key == "n_conv") ss >> n_conv;
    else if (key == "n_filters") ss >> n_filters;
    else if (key == "n_channels") ss >> n_channels;
    else if (key == "scalar") {
      std::string s;
      ss >> s;
      if (s != (sizeof(Scalar) == 4 ? "f32" : "f64"))
        throw std::runtime_error(dir + ": model scalar type mismatch");
    }
  }
  if (n_conv < 1 || n_filters < 1 || n_channels < 1)
    throw std::runtime_error(dir + ": incomplete model manifest");

  MarcModel<Scalar> m = build_marc<Scalar>(n_conv, n_filters, n_channels, 0);

  auto load_conv = [&](int layer, ConvLayer<Scalar>& c) {
    Tensor<Scalar> kernel = read_mrt<Scalar>(dir + "/layer" + std::to_string(layer) + "_kernel.mrt");
    if (kernel.size() != c.weight.size())
      throw std::runtime_error(dir + ": kernel size mismatch at layer " + std::to_string(layer));
    std::copy(kernel.data(), kernel.data() + kernel.size(), c.weight.data());
    Tensor<Scalar> bias = read_mrt<Scalar>(dir + "/layer" + std::to_string(layer) + "_bias.mrt");
    if (bias.size() != c.bias.size())
      throw std::runtime_error(dir + ": bias size mismatch at layer " + std::to_string(layer));
    std::copy(bias.data(), bias.data() + bias.size(), c.bias.data());
  };
  auto load_vec = [&](int layer, const std::string& name, VectorX<Scalar>& v) {
    Tensor<Scalar> t = read_mrt<Scalar>(dir + "/layer" + std::to_string(layer) + "_" + name + ".mrt");
    if (t.size() != v.size())
      throw std::runtime_error(dir + ": " + name + " size mismatch at layer " + std::to_string(layer));
    std::copy(t.data(), t.data() + t.size(), v.data());
  };

  int layer = 0;
  load_conv(layer++, m.convs[0]);
  for (int i = 0; i < n_conv; ++i) {
    load_conv(layer++, m.convs[static_cast<size_t>(i) + 1]);
    auto& bn = m.bns[static_cast<size_t>(i)];
    load_vec(layer, "gamma", bn.gamma);
    load_vec(layer, "beta", bn.beta);
    load_vec(layer, "rmean", bn.running_mean);
    load_vec(layer, "rvar", bn.running_var);
    ++layer;
  }
  load_conv(layer, m.convs.back());
  return m;
}

}  // namespace marc
