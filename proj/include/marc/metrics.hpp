#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "marc/tensor.hpp"

namespace marc {

/// Global-statistics SSIM with c1 = (0.01 L)^2, c2 = (0.03 L)^2 and
/// population (1/N) variance. Whole-tensor statistics, not windowed.
template <typename Scalar>
Scalar ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b, Scalar dynamic_range = Scalar(1)) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  const Scalar n = static_cast<Scalar>(a.size());
  const Scalar mu_a = a.vec().sum() / n;
  const Scalar mu_b = b.vec().sum() / n;
  Scalar var_a = 0, var_b = 0, cov = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const Scalar da = a[i] - mu_a;
    const Scalar db = b[i] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= n;
  var_b /= n;
  cov /= n;
  const Scalar c1 = Scalar(0.01) * dynamic_range * Scalar(0.01) * dynamic_range;
  const Scalar c2 = Scalar(0.03) * dynamic_range * Scalar(0.03) * dynamic_range;
  return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

struct BlandAltmanStats {
  std::size_t count = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double loa_low = 0.0;   // mean - 1.96 SD
  double loa_high = 0.0;  // mean + 1.96 SD
};

struct BlandAltmanReport {
  std::vector<double> means;  // (x + y) / 2 per pair
  std::vector<double> diffs;  // x - y per pair
  BlandAltmanStats overall;
  std::optional<double> threshold;
  BlandAltmanStats below;  // mean < threshold
  BlandAltmanStats above;  // mean >= threshold
};

namespace detail {

inline BlandAltmanStats ba_stats(const std::vector<double>& diffs) {
  BlandAltmanStats s;
  s.count = diffs.size();
  if (diffs.empty()) return s;
  double sum = 0.0;
  for (double d : diffs) sum += d;
  s.mean_diff = sum / static_cast<double>(diffs.size());
  double ss = 0.0;
  for (double d : diffs) ss += (d - s.mean_diff) * (d - s.mean_diff);
  s.sd_diff = std::sqrt(ss / static_cast<double>(diffs.size()));
  s.loa_low = s.mean_diff - 1.96 * s.sd_diff;
  s.loa_high = s.mean_diff + 1.96 * s.sd_diff;
  return s;
}

}  // namespace detail

/// Agreement analysis: differences x - y against means (x + y)/2, with
/// mean +/- 1.96 SD limits and an optional subgroup split at a
/// mean-intensity threshold (0.46 by convention here).
inline BlandAltmanReport bland_altman(const std::vector<double>& x, const std::vector<double>& y,
                                      std::optional<double> subgroup_threshold = std::nullopt) {
  if (x.size() != y.size()) throw std::invalid_argument("bland_altman: length mismatch");
  if (x.empty()) throw std::invalid_argument("bland_altman: empty input");

  BlandAltmanReport rep;
  rep.threshold = subgroup_threshold;
  std::vector<double> below, above;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = 0.5 * (x[i] + y[i]);
    const double d = x[i] - y[i];
    rep.means.push_back(m);
    rep.diffs.push_back(d);
    if (subgroup_threshold) (m < *subgroup_threshold ? below : above).push_back(d);
  }
  rep.overall = detail::ba_stats(rep.diffs);
  if (subgroup_threshold) {
    rep.below = detail::ba_stats(below);
    rep.above = detail::ba_stats(above);
  }
  return rep;
}

/// Arithmetic mean over voxels where mask equals `label`.
template <typename Scalar>
double roi_mean(const Tensor<Scalar>& image, const Tensor<float>& mask, int label) {
  if (image.size() != mask.size()) throw std::invalid_argument("roi_mean: shape mismatch");
  double sum = 0.0;
  Index n = 0;
  for (Index i = 0; i < image.size(); ++i) {
    if (static_cast<int>(mask[i]) == label) {
      sum += static_cast<double>(image[i]);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("roi_mean: empty mask region");
  return sum / static_cast<double>(n);
}

/// Liver-to-aorta contrast: ratio of ROI means.
template <typename Scalar>
double contrast_ratio(const Tensor<Scalar>& image, const Tensor<float>& mask, int liver_label,
                      int aorta_label) {
  const double aorta = roi_mean(image, mask, aorta_label);
  if (aorta == 0.0) throw std::invalid_argument("contrast_ratio: zero aorta mean");
  return roi_mean(image, mask, liver_label) / aorta;
}

}  // namespace marc
