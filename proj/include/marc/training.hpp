#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "marc/dataset.hpp"
#include "marc/metrics.hpp"
#include "marc/network.hpp"
#include "marc/rng.hpp"

namespace marc {

/// Non-finite loss or gradient; the CLI maps this to its own exit code.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 64;
  int max_epochs = 100;
  int patience = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool deterministic = true;
  double subset_fraction = 1.0;

  void validate() const {
    if (learning_rate <= 0) throw std::invalid_argument("train: learning_rate must be > 0");
    if (patience > max_epochs) throw std::invalid_argument("train: patience > max_epochs");
    if (subset_fraction <= 0 || subset_fraction > 1)
      throw std::invalid_argument("train: subset_fraction must be in (0, 1]");
  }
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  int stopped_epoch = 0;  // 1-based
  int best_epoch = 0;
  double wall_seconds = 0.0;
};

/// Mean absolute elementwise difference.
template <typename Scalar>
Scalar l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("l1_loss: shape mismatch");
  return (pred.vec() - target.vec()).cwiseAbs().sum() / static_cast<Scalar>(pred.size());
}

/// Subgradient of mean-L1: sign(pred - target)/N, zero at ties.
template <typename Scalar>
Tensor<Scalar> l1_loss_grad(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("l1_loss_grad: shape mismatch");
  Tensor<Scalar> g(pred.shape());
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(pred.size());
  for (Index i = 0; i < g.size(); ++i) {
    const Scalar d = pred[i] - target[i];
    g[i] = d > Scalar(0) ? inv_n : (d < Scalar(0) ? -inv_n : Scalar(0));
  }
  return g;
}

template <typename Scalar>
struct AdamState {
  std::vector<VectorX<Scalar>> m, v;  // per parameter vector, visit order
  long long t = 0;
};

/// Bias-corrected Adam update of one parameter vector at timestep t (1-based).
template <typename Scalar, typename PVec>
void adam_update_vector(PVec&& p, const Eigen::Ref<const VectorX<Scalar>>& g,
                        VectorX<Scalar>& m, VectorX<Scalar>& v, long long t,
                        const TrainConfig& cfg) {
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar eps = static_cast<Scalar>(cfg.adam_eps);
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar bc1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, static_cast<double>(t)));
  const Scalar bc2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, static_cast<double>(t)));
  m = b1 * m + (Scalar(1) - b1) * g;
  v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
  p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

/// One bias-corrected Adam update over all trainable parameters.
template <typename Scalar>
void adam_step(MarcModel<Scalar>& model, const Gradients<Scalar>& grads,
               AdamState<Scalar>& state, const TrainConfig& cfg) {
  std::vector<Eigen::Map<const VectorX<Scalar>>> gvecs;
  std::vector<std::string> names;
  visit_grads(grads, [&](const std::string& name, Eigen::Map<const VectorX<Scalar>> g) {
    for (Index i = 0; i < g.size(); ++i)
      if (!std::isfinite(static_cast<double>(g[i])))
        throw NumericalError("adam_step: non-finite gradient in " + name);
    gvecs.push_back(g);
    names.push_back(name);
  });

  if (state.t == 0) {
    state.m.clear();
    state.v.clear();
    for (const auto& g : gvecs) {
      state.m.push_back(VectorX<Scalar>::Zero(g.size()));
      state.v.push_back(VectorX<Scalar>::Zero(g.size()));
    }
  }
  ++state.t;

  size_t pi = 0;
  visit_params(model, [&](const std::string&, Eigen::Map<VectorX<Scalar>> p) {
    adam_update_vector<Scalar>(p, gvecs[pi], state.m[pi], state.v[pi], state.t, cfg);
    ++pi;
  });
}

namespace detail {

template <typename Scalar>
void gather_batch(const PatchSet& data, const std::vector<Index>& idx, Index start, Index stop,
                  Tensor<Scalar>& art, Tensor<Scalar>& res) {
  const Index c = data.artifact.dim(1), h = data.artifact.dim(2), w = data.artifact.dim(3);
  const Index per = c * h * w;
  art = Tensor<Scalar>(Shape{stop - start, c, h, w});
  res = Tensor<Scalar>(Shape{stop - start, c, h, w});
  for (Index b = start; b < stop; ++b) {
    const Index src = idx[static_cast<size_t>(b)] * per;
    for (Index k = 0; k < per; ++k) {
      art[(b - start) * per + k] = static_cast<Scalar>(data.artifact[src + k]);
      res[(b - start) * per + k] = static_cast<Scalar>(data.residual[src + k]);
    }
  }
}

template <typename Scalar>
double eval_l1(MarcModel<Scalar>& model, const PatchSet& data, const std::vector<Index>& idx,
               int batch_size) {
  double total = 0.0;
  Index count = 0;
  Tensor<Scalar> art, res;
  for (Index start = 0; start < static_cast<Index>(idx.size()); start += batch_size) {
    const Index stop = std::min<Index>(start + batch_size, static_cast<Index>(idx.size()));
    gather_batch(data, idx, start, stop, art, res);
    Tensor<Scalar> pred = forward(model, art, RunMode::infer);
    total += static_cast<double>(l1_loss(pred, res)) * static_cast<double>(pred.size());
    count += pred.size();
  }
  if (count == 0) throw std::invalid_argument("eval_l1: empty index set");
  return total / static_cast<double>(count);
}

template <typename Scalar>
std::vector<VectorX<Scalar>> snapshot_params(MarcModel<Scalar>& model) {
  std::vector<VectorX<Scalar>> snap;
  visit_params(model, [&](const std::string&, Eigen::Map<VectorX<Scalar>> p) { snap.push_back(p); },
               /*include_running=*/true);
  return snap;
}

template <typename Scalar>
void restore_params(MarcModel<Scalar>& model, const std::vector<VectorX<Scalar>>& snap) {
  size_t i = 0;
  visit_params(model, [&](const std::string&, Eigen::Map<VectorX<Scalar>> p) { p = snap[i++]; },
               /*include_running=*/true);
}

}  // namespace detail

/// Epoch loop with seeded shuffles, early stopping on validation L1 and
/// best-weight restoration. `val_override`, when set, replaces the validation
/// evaluator (used by the early-stopping contract tests).
template <typename Scalar>
TrainReport train(MarcModel<Scalar>& model, const PatchSet& data,
                  std::vector<Index> train_idx, std::vector<Index> val_idx,
                  const TrainConfig& cfg,
                  const std::function<double(int)>& val_override = nullptr) {
  cfg.validate();
  if (train_idx.empty()) throw std::invalid_argument("train: empty training split");
  if (val_idx.empty() && !val_override) throw std::invalid_argument("train: empty validation split");

  if (cfg.subset_fraction < 1.0) {
    Rng sub = Rng::derived(cfg.seed, 0xabcdULL);
    sub.shuffle(train_idx);
    const Index keep = std::max<Index>(
        1, static_cast<Index>(std::llround(cfg.subset_fraction *
                                           static_cast<double>(train_idx.size()))));
    train_idx.resize(static_cast<size_t>(keep));
  }

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  AdamState<Scalar> adam;
  ForwardCache<Scalar> cache;
  Tensor<Scalar> art, res;

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<VectorX<Scalar>> best_weights = detail::snapshot_params(model);
  int epochs_without_improvement = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng = Rng::derived(cfg.seed, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(train_idx);

    double epoch_loss = 0.0;
    Index epoch_values = 0;
    for (Index start = 0; start < static_cast<Index>(train_idx.size());
         start += cfg.batch_size) {
      const Index stop =
          std::min<Index>(start + cfg.batch_size, static_cast<Index>(train_idx.size()));
      detail::gather_batch(data, train_idx, start, stop, art, res);
      Tensor<Scalar> pred = forward(model, art, RunMode::train, &cache);
      const double loss = static_cast<double>(l1_loss(pred, res));
      if (!std::isfinite(loss))
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(pred.size());
      epoch_values += pred.size();
      Tensor<Scalar> grad_out = l1_loss_grad(pred, res);
      Gradients<Scalar> grads = backward(model, cache, grad_out);
      adam_step(model, grads, adam, cfg);
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(epoch_values));

    const double val = val_override ? val_override(epoch)
                                    : detail::eval_l1(model, data, val_idx, cfg.batch_size);
    if (!std::isfinite(val))
      throw NumericalError("train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    report.val_loss.push_back(val);
    report.stopped_epoch = epoch;

    if (val < best_val) {
      best_val = val;
      report.best_epoch = epoch;
      best_weights = detail::snapshot_params(model);
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= cfg.patience) break;
    }
  }

  detail::restore_params(model, best_weights);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

struct KFoldReport {
  std::vector<double> fold_losses;  // best validation L1 per fold
  double mean = 0.0;
  double sd = 0.0;
};

/// K independent trainings with fold i held out for validation.
template <typename Scalar>
KFoldReport kfold_validate(const PatchSet& data, int n_conv, int n_filters, int k,
                           const TrainConfig& cfg) {
  const Index n = data.artifact.dim(0);
  const FoldAssignment folds = kfold_split(n, k, cfg.seed);

  KFoldReport out;
  for (int f = 0; f < k; ++f) {
    std::vector<Index> train_idx, val_idx;
    for (Index i = 0; i < n; ++i) {
      if (folds.fold[static_cast<size_t>(i)] == f)
        val_idx.push_back(i);
      else
        train_idx.push_back(i);
    }
    MarcModel<Scalar> model = build_marc<Scalar>(n_conv, n_filters,
                                                 static_cast<int>(data.artifact.dim(1)),
                                                 cfg.seed + static_cast<std::uint64_t>(f));
    TrainReport rep = train(model, data, train_idx, val_idx, cfg);
    out.fold_losses.push_back(rep.val_loss[static_cast<size_t>(rep.best_epoch) - 1]);
  }
  const double n_f = static_cast<double>(out.fold_losses.size());
  out.mean = std::accumulate(out.fold_losses.begin(), out.fold_losses.end(), 0.0) / n_f;
  double ss = 0.0;
  for (double v : out.fold_losses) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / n_f);
  return out;
}

struct SweepEntry {
  int n_conv = 0;
  double ssim_mean = 0.0;
  double ssim_sd = 0.0;
};

struct SweepResult {
  std::vector<SweepEntry> table;
  int selected = 0;
};

/// Depth selection: train each candidate, denoise the validation patches and
/// score SSIM against the reference patches; argmax of mean SSIM wins, ties
/// toward the shallower network.
template <typename Scalar>
SweepResult sweep_nconv(const std::vector<int>& candidates, const PatchSet& data,
                        int n_filters, const TrainConfig& cfg) {
  if (candidates.empty()) throw std::invalid_argument("sweep_nconv: empty candidate list");

  const Index n = data.artifact.dim(0);
  std::vector<Index> order(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng::derived(cfg.seed, 0x5eedULL);
  rng.shuffle(order);
  const Index n_val = std::max<Index>(1, n / 5);
  std::vector<Index> val_idx(order.begin(), order.begin() + n_val);
  std::vector<Index> train_idx(order.begin() + n_val, order.end());

  const Index c = data.artifact.dim(1), h = data.artifact.dim(2), w = data.artifact.dim(3);
  const Index per = c * h * w;

  SweepResult result;
  double best_mean = -2.0;
  for (int cand : candidates) {
    MarcModel<Scalar> model =
        build_marc<Scalar>(cand, n_filters, static_cast<int>(c), cfg.seed);
    train(model, data, train_idx, val_idx, cfg);

    std::vector<double> scores;
    Tensor<Scalar> one(Shape{1, c, h, w});
    for (Index vi : val_idx) {
      for (Index k2 = 0; k2 < per; ++k2)
        one[k2] = static_cast<Scalar>(data.artifact[vi * per + k2]);
      Tensor<Scalar> pred = forward(model, one, RunMode::infer);
      Tensor<Scalar> den(Shape{c, h, w});
      Tensor<Scalar> ref(Shape{c, h, w});
      for (Index k2 = 0; k2 < per; ++k2) {
        const Scalar d = one[k2] - pred[k2];
        den[k2] = d < Scalar(0) ? Scalar(0) : d;
        ref[k2] = static_cast<Scalar>(data.artifact[vi * per + k2] -
                                      data.residual[vi * per + k2]);
      }
      scores.push_back(static_cast<double>(ssim(ref, den)));
    }
    const double nn = static_cast<double>(scores.size());
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / nn;
    double ss = 0.0;
    for (double v : scores) ss += (v - mean) * (v - mean);
    result.table.push_back({cand, mean, std::sqrt(ss / nn)});
    if (mean > best_mean + 1e-15 ||
        (std::abs(mean - best_mean) <= 1e-15 && cand < result.selected)) {
      best_mean = mean;
      result.selected = cand;
    }
  }
  return result;
}

}  // namespace marc
