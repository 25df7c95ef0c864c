#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "marc/tensor.hpp"

namespace marc {

constexpr Index kPatchSize = 48;

/// Aligned training samples: artifact patches (network input) and residual
/// patches (target), both (N, phases, 48, 48).
struct PatchSet {
  Tensor<float> artifact;
  Tensor<float> residual;
  std::vector<std::array<Index, 3>> origins;  // (slice, row, col)
};

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold;  // fold index per sample
};

/// Divides both volumes by max(artifact); returns the scale for inversion at
/// inference time. Errors on an all-zero artifact volume.
float normalize_volume(Tensor<float>& artifact, Tensor<float>& reference);

/// True when the patch is essentially background: >= 95% of voxels across all
/// channels below 0.05 (post-normalization units).
bool is_background_patch(const float* patch, Index n_values);

/// Randomly cropped patch pairs with background rejection. Draws candidate
/// corners from one seeded stream and redraws rejected ones; the budget is
/// 100x the requested count, and exhausting it is an error.
PatchSet extract_patches(const Tensor<float>& reference, const Tensor<float>& artifact,
                         Index count, std::uint64_t seed);

FoldAssignment kfold_split(Index n, int k, std::uint64_t seed);

/// On-disk dataset bundle: patches_artifact.mrt, patches_residual.mrt and a
/// key = value meta.txt.
struct DatasetBundle {
  PatchSet patches;
  float scale = 1.0f;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> extra_meta;
};

void save_dataset(const std::string& dir, const DatasetBundle& bundle);
DatasetBundle load_dataset(const std::string& dir);

/// FNV-1a over raw tensor bytes, for provenance lines in meta files.
std::uint64_t tensor_checksum(const Tensor<float>& t);

}  // namespace marc
