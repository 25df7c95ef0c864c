#include "marc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "marc/io.hpp"

namespace marc {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  const double n = static_cast<double>(v.size());
  mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / n);
}

void print_ba(std::ostringstream& os, const std::string& name, const BlandAltmanStats& s) {
  os << "  " << name << ": n=" << s.count;
  if (s.count > 0) {
    os << " mean_diff=" << fmt(s.mean_diff) << " sd=" << fmt(s.sd_diff) << " loa=["
       << fmt(s.loa_low) << ", " << fmt(s.loa_high) << "]";
  }
  os << "\n";
}

}  // namespace

Evaluation evaluate_volumes(const Tensor<float>& reference, const Tensor<float>& artifact,
                            const Tensor<float>& denoised, const Tensor<float>& masks,
                            double threshold) {
  if (!reference.same_shape(artifact) || !reference.same_shape(denoised))
    throw std::invalid_argument("evaluate: volume shapes differ");
  reference.require_rank(4);
  masks.require_rank(3);
  const Index phases = reference.dim(0), slices = reference.dim(1);
  const Index h = reference.dim(2), w = reference.dim(3);
  if (masks.dim(0) != slices || masks.dim(1) != h || masks.dim(2) != w)
    throw std::invalid_argument("evaluate: mask shape does not match volume");

  Evaluation eval;
  eval.threshold = threshold;

  std::vector<double> intens_ref, intens_den;
  Tensor<float> slice_mask(Shape{h, w});
  Tensor<float> ref_s(Shape{phases, h, w}), art_s(Shape{phases, h, w}), den_s(Shape{phases, h, w});
  Tensor<float> ref_p(Shape{h, w}), den_p(Shape{h, w});

  for (Index s = 0; s < slices; ++s) {
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) slice_mask(y, x) = masks(s, y, x);

    for (Index p = 0; p < phases; ++p)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          ref_s(p, y, x) = reference(p, s, y, x);
          art_s(p, y, x) = artifact(p, s, y, x);
          den_s(p, y, x) = denoised(p, s, y, x);
        }

    SliceScore score;
    score.slice = s;
    score.ssim_artifact = static_cast<double>(ssim(ref_s, art_s));
    score.ssim_denoised = static_cast<double>(ssim(ref_s, den_s));
    eval.slices.push_back(score);

    for (Index p = 0; p < phases; ++p) {
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          ref_p(y, x) = reference(p, s, y, x);
          den_p(y, x) = denoised(p, s, y, x);
        }
      for (int label : {label_liver, label_aorta}) {
        intens_ref.push_back(roi_mean(ref_p, slice_mask, label));
        intens_den.push_back(roi_mean(den_p, slice_mask, label));
      }
      eval.contrast_ref.push_back(contrast_ratio(ref_p, slice_mask, label_liver, label_aorta));
      eval.contrast_den.push_back(contrast_ratio(den_p, slice_mask, label_liver, label_aorta));
    }
  }

  if (!intens_ref.empty()) {
    eval.intensity_ba = bland_altman(intens_ref, intens_den, threshold);
    eval.contrast_ba = bland_altman(eval.contrast_ref, eval.contrast_den);
    eval.empty = false;
  }
  return eval;
}

std::string render_report(const Evaluation& eval) {
  std::ostringstream os;
  os << "MARC evaluation report\n";
  os << "threshold = " << fmt(eval.threshold) << "\n";
  if (eval.empty) return os.str();

  std::vector<double> art, den;
  Index improved = 0;
  for (const auto& s : eval.slices) {
    art.push_back(s.ssim_artifact);
    den.push_back(s.ssim_denoised);
    if (s.ssim_denoised > s.ssim_artifact) ++improved;
  }
  double am, asd, dm, dsd;
  mean_sd(art, am, asd);
  mean_sd(den, dm, dsd);

  os << "\nSSIM vs reference (per slice, all phases)\n";
  os << "  artifact: mean=" << fmt(am) << " sd=" << fmt(asd) << "\n";
  os << "  denoised: mean=" << fmt(dm) << " sd=" << fmt(dsd) << "\n";
  os << "  improved slices: " << improved << "/" << eval.slices.size() << "\n";
  for (const auto& s : eval.slices)
    os << "  slice " << s.slice << ": artifact=" << fmt(s.ssim_artifact)
       << " denoised=" << fmt(s.ssim_denoised) << "\n";

  os << "\nBland-Altman: ROI mean intensity (reference vs denoised)\n";
  print_ba(os, "overall", eval.intensity_ba.overall);
  print_ba(os, "mean <  " + fmt(eval.threshold), eval.intensity_ba.below);
  print_ba(os, "mean >= " + fmt(eval.threshold), eval.intensity_ba.above);

  os << "\nBland-Altman: liver/aorta contrast ratio (reference vs denoised)\n";
  print_ba(os, "overall", eval.contrast_ba.overall);
  return os.str();
}

void write_ba_csv(const std::string& path, const BlandAltmanReport& report) {
  std::ofstream out(path);
  if (!out) throw MrtFileError(path + ": cannot open for writing");
  out << "mean,diff\n";
  for (std::size_t i = 0; i < report.means.size(); ++i)
    out << fmt(report.means[i]) << "," << fmt(report.diffs[i]) << "\n";
}

}  // namespace marc
