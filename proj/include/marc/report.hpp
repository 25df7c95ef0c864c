#pragma once

#include <string>
#include <vector>

#include "marc/metrics.hpp"
#include "marc/phantom.hpp"
#include "marc/tensor.hpp"

namespace marc {

struct SliceScore {
  Index slice = 0;
  double ssim_artifact = 0.0;
  double ssim_denoised = 0.0;
};

struct Evaluation {
  double threshold = 0.46;
  std::vector<SliceScore> slices;
  std::vector<double> contrast_ref, contrast_den;  // per (slice, phase)
  BlandAltmanReport intensity_ba;  // ROI mean intensities, reference vs denoised
  BlandAltmanReport contrast_ba;   // liver/aorta contrast ratios
  bool empty = true;
};

/// Scores denoised against reference: per-slice SSIM for artifact and
/// denoised stacks, plus Bland-Altman agreement of ROI mean intensities and
/// liver-to-aorta contrast ratios. Volumes are (phase, slice, H, W); masks
/// (slice, H, W) with phantom labels.
Evaluation evaluate_volumes(const Tensor<float>& reference, const Tensor<float>& artifact,
                            const Tensor<float>& denoised, const Tensor<float>& masks,
                            double threshold = 0.46);

/// Deterministic, diff-stable plain-text report.
std::string render_report(const Evaluation& eval);

/// Bland-Altman points as CSV (mean,diff per line) for external plotting.
void write_ba_csv(const std::string& path, const BlandAltmanReport& report);

}  // namespace marc
