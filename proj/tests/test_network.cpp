#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "marc/network.hpp"
#include "marc/training.hpp"

using namespace marc;

namespace {

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  Rng r(seed);
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(r.uniform(lo, hi));
  return t;
}

long long closed_form_params(int n_conv, int n_f, int n_ch) {
  return (9LL * n_ch * n_f + n_f) + n_conv * (9LL * n_f * n_f + n_f + 4LL * n_f) +
         (9LL * n_f * n_ch + n_ch);
}

}  // namespace

TEST_CASE("parameter counts") {
  SUBCASE("published configuration: 268,423") {
    auto m = build_marc<float>(7, 64, 7, 0);
    CHECK(param_count(m) == 268423);
  }
  SUBCASE("single block: 45,319") {
    auto m = build_marc<float>(1, 64, 7, 0);
    CHECK(param_count(m) == 45319);
  }
  SUBCASE("closed form holds for n_conv in [1, 16]") {
    for (int n = 1; n <= 16; ++n) {
      auto m = build_marc<float>(n, 64, 7, 0);
      CHECK(param_count(m) == closed_form_params(n, 64, 7));
    }
  }
  SUBCASE("per-block increment is 37,184 at defaults") {
    for (int n = 1; n < 8; ++n)
      CHECK(closed_form_params(n + 1, 64, 7) - closed_form_params(n, 64, 7) == 37184);
  }
  SUBCASE("head + tail alone would be 8,135") {
    CHECK(closed_form_params(0, 64, 7) == 8135);
  }
}

TEST_CASE("build_marc validation and determinism") {
  CHECK_THROWS_AS(build_marc<float>(0, 64, 7, 0), std::invalid_argument);
  auto a = build_marc<float>(2, 8, 7, 33);
  auto b = build_marc<float>(2, 8, 7, 33);
  for (size_t i = 0; i < a.convs.size(); ++i) CHECK(a.convs[i].weight == b.convs[i].weight);
}

TEST_CASE("forward pass shapes and zero-weight behavior") {
  auto m = build_marc<float>(2, 8, 7, 1);
  SUBCASE("zero weights give zero output") {
    visit_params(m, [](const std::string& name, Eigen::Map<VectorX<float>> p) {
      if (name.find("rvar") == std::string::npos) p.setZero();
    });
    auto in = random_tensor<float>(Shape{2, 7, 16, 16}, 5);
    auto out = forward(m, in, RunMode::infer);
    CHECK(out.vec().cwiseAbs().maxCoeff() == 0.0f);
  }
  SUBCASE("same-padding keeps the shape at 48x48 and 280x320") {
    auto in = random_tensor<float>(Shape{1, 7, 48, 48}, 6);
    CHECK(forward(m, in, RunMode::infer).shape() == in.shape());
    auto big = random_tensor<float>(Shape{1, 7, 280, 320}, 7);
    CHECK(forward(m, big, RunMode::infer).shape() == big.shape());
  }
  SUBCASE("channel mismatch rejected") {
    auto in = random_tensor<float>(Shape{1, 6, 16, 16}, 8);
    CHECK_THROWS_AS(forward(m, in, RunMode::infer), std::invalid_argument);
  }
}

TEST_CASE("train-mode batch norm normalizes to mean 0, variance 1 pre-affine") {
  auto m = build_marc<double>(2, 6, 7, 4);
  auto in = random_tensor<double>(Shape{4, 7, 12, 12}, 9);
  ForwardCache<double> cache;
  forward(m, in, RunMode::train, &cache);
  for (size_t bn = 0; bn < cache.bn_xhat.size(); ++bn) {
    const auto& xhat = cache.bn_xhat[bn];
    const Index n = xhat.dim(0), c = xhat.dim(1), hw = xhat.dim(2) * xhat.dim(3);
    for (Index ch = 0; ch < c; ++ch) {
      double sum = 0, sumsq = 0;
      for (Index s = 0; s < n; ++s) {
        const double* p = xhat.data() + (s * c + ch) * hw;
        for (Index i = 0; i < hw; ++i) {
          sum += p[i];
          sumsq += p[i] * p[i];
        }
      }
      const double mean = sum / double(n * hw);
      const double var = sumsq / double(n * hw) - mean * mean;
      CHECK(std::abs(mean) < 1e-5);
      CHECK(var > 1.0 - 1e-3);
      CHECK(var < 1.0 + 1e-3);
    }
  }
}

TEST_CASE("gradients match central finite differences on a tiny model") {
  // smooth probe loss L = sum(out * R) so the check isolates the network's
  // backward path; h = 1e-5 at 64-bit
  auto model = build_marc<double>(1, 4, 7, 12);
  const auto input = random_tensor<double>(Shape{1, 7, 8, 8}, 13);
  const auto probe = random_tensor<double>(Shape{1, 7, 8, 8}, 14);

  auto loss_of = [&](MarcModel<double>& m) {
    MarcModel<double> copy = m;  // keep running stats untouched for the caller
    const auto out = forward(copy, input, RunMode::train);
    double l = 0;
    for (Index i = 0; i < out.size(); ++i) l += out[i] * probe[i];
    return l;
  };

  ForwardCache<double> cache;
  forward(model, input, RunMode::train, &cache);
  const Gradients<double> grads = backward(model, cache, probe);

  const double h = 1e-5;
  double max_rel = 0.0;
  std::vector<Eigen::Map<const VectorX<double>>> gvecs;
  visit_grads(grads, [&](const std::string&, Eigen::Map<const VectorX<double>> g) {
    gvecs.push_back(g);
  });
  size_t pi = 0;
  visit_params(model, [&](const std::string& name, Eigen::Map<VectorX<double>> p) {
    const auto& g = gvecs[pi++];
    for (Index i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      const double lp = loss_of(model);
      p[i] = orig - h;
      const double lm = loss_of(model);
      p[i] = orig;
      const double fd = (lp - lm) / (2 * h);
      // biases ahead of a batch norm have an exactly zero gradient (the mean
      // subtraction absorbs them); both sides are then pure roundoff, so the
      // floor must sit above the ~1e-10 FD cancellation noise
      const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-4});
      const double rel = std::abs(fd - g[i]) / denom;
      if (rel > max_rel) max_rel = rel;
      if (rel >= 1e-4) {
        CAPTURE(name);
        CAPTURE(i);
        CAPTURE(fd);
        CAPTURE(g[i]);
      }
      REQUIRE(rel < 1e-4);
    }
  });
  MESSAGE("max relative error ", max_rel);
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient") {
  auto model = build_marc<double>(1, 4, 7, 2);
  const auto input = random_tensor<double>(Shape{2, 7, 8, 8}, 3);
  ForwardCache<double> cache;
  forward(model, input, RunMode::train, &cache);
  const Tensor<double> zero_grad(input.shape(), 0.0);
  const auto grads = backward(model, cache, zero_grad);
  visit_grads(grads, [](const std::string&, Eigen::Map<const VectorX<double>> g) {
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  });
}

TEST_CASE("backward without a forward cache is rejected") {
  auto model = build_marc<double>(1, 4, 7, 2);
  ForwardCache<double> cache;  // never filled
  Tensor<double> g(Shape{1, 7, 8, 8}, 0.0);
  CHECK_THROWS_AS(backward(model, cache, g), std::logic_error);
}

TEST_CASE("l1 loss gradient takes values in {-1/N, 0, +1/N}") {
  auto pred = random_tensor<double>(Shape{4, 4}, 1);
  auto target = random_tensor<double>(Shape{4, 4}, 2);
  target[3] = pred[3];  // force a tie
  const auto g = l1_loss_grad(pred, target);
  const double inv_n = 1.0 / 16.0;
  for (Index i = 0; i < g.size(); ++i)
    CHECK((g[i] == inv_n || g[i] == -inv_n || g[i] == 0.0));
  CHECK(g[3] == 0.0);
}

TEST_CASE("infer mode is batch-size invariant") {
  auto m = build_marc<float>(2, 6, 7, 21);
  // nudge running stats off their init so the check is non-trivial
  for (auto& bn : m.bns) {
    bn.running_mean.setConstant(0.05f);
    bn.running_var.setConstant(0.9f);
  }
  const auto batch = random_tensor<float>(Shape{3, 7, 10, 10}, 22);
  const auto batched = forward(m, batch, RunMode::infer);
  for (Index s = 0; s < 3; ++s) {
    Tensor<float> one(Shape{1, 7, 10, 10});
    const Index per = 7 * 100;
    for (Index i = 0; i < per; ++i) one[i] = batch[s * per + i];
    const auto single = forward(m, one, RunMode::infer);
    for (Index i = 0; i < per; ++i)
      CHECK(std::abs(single[i] - batched[s * per + i]) < 1e-6f);
  }
}

TEST_CASE("denoise") {
  auto m = build_marc<float>(1, 4, 7, 31);
  SUBCASE("zero-weight model returns the input") {
    visit_params(m, [](const std::string& name, Eigen::Map<VectorX<float>> p) {
      if (name.find("rvar") == std::string::npos) p.setZero();
    });
    const auto vol = random_tensor<float>(Shape{7, 2, 16, 16}, 32, 0.0, 1.0);
    const auto out = denoise(m, vol);
    CHECK(max_abs_diff(out, vol) == 0.0f);
  }
  SUBCASE("shape preserved; residual identity pre-clamp") {
    const auto vol = random_tensor<float>(Shape{7, 2, 20, 24}, 33, 0.0, 1.0);
    const auto out = denoise(m, vol);
    CHECK(out.shape() == vol.shape());
    // out + prediction == input wherever the clamp did not engage
    Tensor<float> slice(Shape{1, 7, 20, 24});
    for (Index p = 0; p < 7; ++p)
      for (Index y = 0; y < 20; ++y)
        for (Index x = 0; x < 24; ++x) slice(0, p, y, x) = vol(p, 0, y, x);
    const auto pred = forward(m, slice, RunMode::infer);
    for (Index p = 0; p < 7; ++p)
      for (Index y = 0; y < 20; ++y)
        for (Index x = 0; x < 24; ++x) {
          if (out(p, 0, y, x) > 0.0f)
            CHECK(out(p, 0, y, x) + pred(0, p, y, x) ==
                  doctest::Approx(vol(p, 0, y, x)).epsilon(1e-5));
        }
  }
  SUBCASE("phase-count mismatch rejected") {
    const auto vol = random_tensor<float>(Shape{6, 2, 16, 16}, 34);
    CHECK_THROWS_AS(denoise(m, vol), std::invalid_argument);
  }
}

TEST_CASE("feature extraction") {
  auto m = build_marc<float>(7, 64, 7, 41);
  const auto input = random_tensor<float>(Shape{1, 7, 12, 12}, 42);
  SUBCASE("layer 1 yields 64 maps at input size") {
    const auto maps = extract_features(m, input, {1});
    REQUIRE(maps.size() == 1);
    CHECK(maps[0].dim(1) == 64);
    CHECK(maps[0].dim(2) == 12);
    CHECK(maps[0].dim(3) == 12);
  }
  SUBCASE("invalid index rejected") {
    CHECK_THROWS_AS(extract_features(m, input, {99}), std::out_of_range);
    CHECK_THROWS_AS(extract_features(m, input, {0}), std::out_of_range);
  }
  SUBCASE("zero input gives zero maps at initialization") {
    // fresh running stats are (0, 1) and beta = 0, so ReLU(BN(0)) == 0
    auto fresh = build_marc<float>(3, 8, 7, 43);
    for (auto& conv : fresh.convs) conv.bias.setZero();
    const Tensor<float> zero(Shape{1, 7, 8, 8}, 0.0f);
    const auto maps = extract_features(fresh, zero, {1, 2, 3, 4});
    for (const auto& map : maps) CHECK(map.vec().cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("model bundle roundtrip is bit-exact") {
  auto m = build_marc<float>(2, 6, 7, 51);
  // make running stats non-trivial
  auto in = random_tensor<float>(Shape{2, 7, 8, 8}, 52);
  forward(m, in, RunMode::train);
  const std::string dir = (std::filesystem::temp_directory_path() / "marc_model_test").string();
  save_model(dir, m);
  const auto loaded = load_model<float>(dir);
  CHECK(loaded.n_conv == m.n_conv);
  for (size_t i = 0; i < m.convs.size(); ++i) {
    CHECK(loaded.convs[i].weight == m.convs[i].weight);
    CHECK(loaded.convs[i].bias == m.convs[i].bias);
  }
  for (size_t i = 0; i < m.bns.size(); ++i) {
    CHECK(loaded.bns[i].gamma == m.bns[i].gamma);
    CHECK(loaded.bns[i].running_mean == m.bns[i].running_mean);
    CHECK(loaded.bns[i].running_var == m.bns[i].running_var);
  }
}
