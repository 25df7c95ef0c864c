#include "marc/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "marc/io.hpp"
#include "marc/rng.hpp"

namespace marc {

float normalize_volume(Tensor<float>& artifact, Tensor<float>& reference) {
  if (!artifact.same_shape(reference))
    throw std::invalid_argument("normalize_volume: shape mismatch");
  const float scale = artifact.vec().maxCoeff();
  if (scale <= 0.0f) throw std::invalid_argument("normalize_volume: all-zero artifact volume");
  artifact.vec() /= scale;
  reference.vec() /= scale;
  return scale;
}

bool is_background_patch(const float* patch, Index n_values) {
  Index low = 0;
  for (Index i = 0; i < n_values; ++i)
    if (patch[i] < 0.05f) ++low;
  return static_cast<double>(low) >= 0.95 * static_cast<double>(n_values);
}

PatchSet extract_patches(const Tensor<float>& reference, const Tensor<float>& artifact,
                         Index count, std::uint64_t seed) {
  if (!artifact.same_shape(reference))
    throw std::invalid_argument("extract_patches: shape mismatch");
  artifact.require_rank(4);
  const Index phases = artifact.dim(0), slices = artifact.dim(1);
  const Index h = artifact.dim(2), w = artifact.dim(3);
  if (h < kPatchSize || w < kPatchSize)
    throw std::invalid_argument("extract_patches: volume smaller than patch");
  if (count < 1) throw std::invalid_argument("extract_patches: count must be >= 1");

  PatchSet set;
  set.artifact = Tensor<float>(Shape{count, phases, kPatchSize, kPatchSize});
  set.residual = Tensor<float>(Shape{count, phases, kPatchSize, kPatchSize});
  set.origins.reserve(static_cast<size_t>(count));

  Rng rng(seed);
  const Index budget = 100 * count;
  Index accepted = 0;
  std::vector<float> candidate(static_cast<size_t>(phases * kPatchSize * kPatchSize));

  for (Index attempt = 0; attempt < budget && accepted < count; ++attempt) {
    const Index s = rng.below(slices);
    const Index r0 = rng.below(h - kPatchSize + 1);
    const Index c0 = rng.below(w - kPatchSize + 1);

    size_t idx = 0;
    for (Index p = 0; p < phases; ++p)
      for (Index y = 0; y < kPatchSize; ++y)
        for (Index x = 0; x < kPatchSize; ++x)
          candidate[idx++] = artifact(p, s, r0 + y, c0 + x);
    if (is_background_patch(candidate.data(), static_cast<Index>(candidate.size()))) continue;

    for (Index p = 0; p < phases; ++p) {
      for (Index y = 0; y < kPatchSize; ++y) {
        for (Index x = 0; x < kPatchSize; ++x) {
          const float a = artifact(p, s, r0 + y, c0 + x);
          const float ref = reference(p, s, r0 + y, c0 + x);
          set.artifact(accepted, p, y, x) = a;
          set.residual(accepted, p, y, x) = a - ref;
        }
      }
    }
    set.origins.push_back({s, r0, c0});
    ++accepted;
  }
  if (accepted < count)
    throw std::runtime_error("extract_patches: rejection budget exhausted (volume mostly background)");
  return set;
}

FoldAssignment kfold_split(Index n, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: K must be >= 2");
  if (n < k) throw std::invalid_argument("kfold_split: n < K");
  std::vector<Index> order(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  FoldAssignment fa;
  fa.k = k;
  fa.fold.assign(static_cast<size_t>(n), 0);
  for (Index pos = 0; pos < n; ++pos)
    fa.fold[static_cast<size_t>(order[static_cast<size_t>(pos)])] =
        static_cast<int>(pos % k);
  return fa;
}

std::uint64_t tensor_checksum(const Tensor<float>& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  const size_t n = static_cast<size_t>(t.size()) * sizeof(float);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_dataset(const std::string& dir, const DatasetBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_mrt(dir + "/patches_artifact.mrt", bundle.patches.artifact);
  write_mrt(dir + "/patches_residual.mrt", bundle.patches.residual);
  std::ofstream meta(dir + "/meta.txt");
  if (!meta) throw MrtFileError(dir + "/meta.txt: cannot open for writing");
  meta << "count = " << bundle.patches.artifact.dim(0) << "\n";
  meta << "seed = " << bundle.seed << "\n";
  meta << "scale = " << bundle.scale << "\n";
  for (const auto& [key, value] : bundle.extra_meta) meta << key << " = " << value << "\n";
}

DatasetBundle load_dataset(const std::string& dir) {
  DatasetBundle bundle;
  bundle.patches.artifact = read_mrt<float>(dir + "/patches_artifact.mrt");
  bundle.patches.residual = read_mrt<float>(dir + "/patches_residual.mrt");
  if (!bundle.patches.artifact.same_shape(bundle.patches.residual))
    throw std::runtime_error(dir + ": artifact/residual patch shapes differ");

  std::ifstream meta(dir + "/meta.txt");
  if (!meta) throw MrtFileError(dir + "/meta.txt: cannot open");
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    trim(key);
    trim(value);
    if (key == "scale")
      bundle.scale = std::stof(value);
    else if (key == "seed")
      bundle.seed = std::stoull(value);
    else if (key != "count")
      bundle.extra_meta[key] = value;
  }
  return bundle;
}

}  // namespace marc
