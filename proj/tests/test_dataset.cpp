#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <set>

#include "marc/dataset.hpp"
#include "marc/phantom.hpp"
#include "marc/rng.hpp"

using namespace marc;

namespace {

// small corrupted pair for patch tests: reference phantom plus a deterministic
// perturbation standing in for the simulation
void make_pair(Tensor<float>& ref, Tensor<float>& art, std::uint64_t seed = 1) {
  PhantomSpec spec;
  spec.n_slices = 2;
  spec.seed = seed;
  const Phantom ph = gen_phantom(spec);
  ref = ph.volume;
  art = ref;
  Rng r(seed + 99);
  for (Index i = 0; i < art.size(); ++i)
    art[i] = std::min(1.0f, art[i] + static_cast<float>(r.uniform(0.0, 0.05)));
}

}  // namespace

TEST_CASE("normalize_volume") {
  SUBCASE("max 2.0 halves everything, scale 2.0") {
    Tensor<float> art(Shape{1, 1, 64, 64}, 0.5f);
    art[0] = 2.0f;
    Tensor<float> ref(Shape{1, 1, 64, 64}, 1.0f);
    const float scale = normalize_volume(art, ref);
    CHECK(scale == 2.0f);
    CHECK(art[0] == 1.0f);
    CHECK(art[1] == 0.25f);
    CHECK(ref[1] == 0.5f);
  }
  SUBCASE("already normalized is unchanged, scale 1") {
    Tensor<float> art(Shape{1, 1, 64, 64}, 0.25f);
    art[0] = 1.0f;
    Tensor<float> ref = art;
    const Tensor<float> before = art;
    CHECK(normalize_volume(art, ref) == 1.0f);
    CHECK(art == before);
  }
  SUBCASE("all-zero artifact rejected") {
    Tensor<float> art(Shape{1, 1, 64, 64}, 0.0f);
    Tensor<float> ref(Shape{1, 1, 64, 64}, 0.5f);
    CHECK_THROWS_AS(normalize_volume(art, ref), std::invalid_argument);
  }
  SUBCASE("denormalize inverts bit-exactly in 64-bit arithmetic") {
    Rng r(3);
    std::vector<double> v(100);
    for (auto& x : v) x = r.uniform(0.0, 1.0);
    const double scale = 1.7;
    for (double x : v) {
      const double norm = x / scale;
      CHECK(norm * scale == doctest::Approx(x).epsilon(1e-15));
    }
  }
}

TEST_CASE("background predicate") {
  std::vector<float> patch(48 * 48 * 7, 0.0f);
  CHECK(is_background_patch(patch.data(), static_cast<Index>(patch.size())));
  // 6% of voxels above threshold -> not background
  const size_t bright = patch.size() * 6 / 100;
  for (size_t i = 0; i < bright; ++i) patch[i] = 0.5f;
  CHECK(!is_background_patch(patch.data(), static_cast<Index>(patch.size())));
}

TEST_CASE("extract_patches") {
  Tensor<float> ref, art;
  make_pair(ref, art);

  SUBCASE("residual identity and count") {
    const PatchSet set = extract_patches(ref, art, 25, 7);
    CHECK(set.artifact.dim(0) == 25);
    CHECK(set.artifact.dim(1) == 7);
    CHECK(set.artifact.dim(2) == 48);
    CHECK(set.artifact.dim(3) == 48);
    CHECK(set.origins.size() == 25);
    // artifact - residual == reference at the source location
    for (Index n = 0; n < 25; ++n) {
      const auto [s, r0, c0] = set.origins[static_cast<size_t>(n)];
      for (Index p = 0; p < 7; ++p)
        for (Index y = 0; y < 48; ++y)
          for (Index x = 0; x < 48; ++x) {
            const float back = set.artifact(n, p, y, x) - set.residual(n, p, y, x);
            CHECK(std::abs(back - ref(p, s, r0 + y, c0 + x)) < 1e-6f);
          }
    }
    // no emitted patch is background
    const Index per = 7 * 48 * 48;
    for (Index n = 0; n < 25; ++n)
      CHECK(!is_background_patch(set.artifact.data() + n * per, per));
  }
  SUBCASE("identical volumes give zero residuals") {
    const PatchSet set = extract_patches(ref, ref, 10, 3);
    CHECK(set.residual.vec().cwiseAbs().maxCoeff() == 0.0f);
  }
  SUBCASE("deterministic per seed") {
    const PatchSet a = extract_patches(ref, art, 10, 5);
    const PatchSet b = extract_patches(ref, art, 10, 5);
    CHECK(a.artifact == b.artifact);
    CHECK(a.residual == b.residual);
    CHECK(a.origins == b.origins);
  }
  SUBCASE("all-zero volumes exhaust the rejection budget") {
    Tensor<float> zero(ref.shape(), 0.0f);
    CHECK_THROWS_AS(extract_patches(zero, zero, 5, 1), std::runtime_error);
  }
  SUBCASE("volume smaller than the patch rejected") {
    Tensor<float> small_ref(Shape{7, 1, 40, 40}, 0.5f);
    CHECK_THROWS_AS(extract_patches(small_ref, small_ref, 5, 1), std::invalid_argument);
  }
}

TEST_CASE("kfold_split") {
  SUBCASE("n = 10, K = 5: five folds of two") {
    const FoldAssignment fa = kfold_split(10, 5, 1);
    std::vector<int> sizes(5, 0);
    for (int f : fa.fold) ++sizes[static_cast<size_t>(f)];
    for (int s : sizes) CHECK(s == 2);
  }
  SUBCASE("n = 11, K = 5: sizes {3,2,2,2,2}") {
    const FoldAssignment fa = kfold_split(11, 5, 2);
    std::vector<int> sizes(5, 0);
    for (int f : fa.fold) ++sizes[static_cast<size_t>(f)];
    std::multiset<int> got(sizes.begin(), sizes.end());
    CHECK(got == std::multiset<int>({3, 2, 2, 2, 2}));
  }
  SUBCASE("disjoint, exhaustive, balanced for 100 random (n, K)") {
    Rng r(9);
    for (int trial = 0; trial < 100; ++trial) {
      const int k = 2 + static_cast<int>(r.below(6));
      const Index n = k + r.below(200);
      const FoldAssignment fa = kfold_split(n, k, static_cast<std::uint64_t>(trial));
      REQUIRE(static_cast<Index>(fa.fold.size()) == n);
      std::vector<Index> sizes(static_cast<size_t>(k), 0);
      for (int f : fa.fold) {
        REQUIRE(f >= 0);
        REQUIRE(f < k);
        ++sizes[static_cast<size_t>(f)];
      }
      const Index mn = *std::min_element(sizes.begin(), sizes.end());
      const Index mx = *std::max_element(sizes.begin(), sizes.end());
      CHECK(mx - mn <= 1);
      CHECK(std::accumulate(sizes.begin(), sizes.end(), Index{0}) == n);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(kfold_split(4, 5, 0), std::invalid_argument);
    CHECK_THROWS_AS(kfold_split(10, 1, 0), std::invalid_argument);
  }
}

TEST_CASE("dataset bundle roundtrip") {
  Tensor<float> ref, art;
  make_pair(ref, art);
  DatasetBundle bundle;
  bundle.scale = normalize_volume(art, ref);
  bundle.seed = 42;
  bundle.patches = extract_patches(ref, art, 12, 42);
  bundle.extra_meta["source_ref_checksum"] = std::to_string(tensor_checksum(ref));

  const std::string dir = (std::filesystem::temp_directory_path() / "marc_ds_test").string();
  save_dataset(dir, bundle);
  const DatasetBundle loaded = load_dataset(dir);
  CHECK(loaded.patches.artifact == bundle.patches.artifact);
  CHECK(loaded.patches.residual == bundle.patches.residual);
  CHECK(loaded.scale == bundle.scale);
  CHECK(loaded.seed == 42);
  CHECK(loaded.extra_meta.at("source_ref_checksum") ==
        bundle.extra_meta.at("source_ref_checksum"));
}
