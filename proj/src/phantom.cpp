#include "marc/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "marc/rng.hpp"

namespace marc {

namespace {

double curve_at(const std::vector<double>& curve, int phase) {
  return curve[static_cast<size_t>(phase)];
}

std::vector<double> resolve_curve(std::vector<double> given, int n_phases,
                                  std::vector<double> (*fallback)(int)) {
  if (given.empty()) return fallback(n_phases);
  if (static_cast<int>(given.size()) != n_phases)
    throw std::invalid_argument("phantom: enhancement curve length != n_phases");
  return given;
}

struct Ellipse {
  double cy, cx, ry, rx;
  double r2(Index y, Index x) const {
    const double dy = (static_cast<double>(y) - cy) / ry;
    const double dx = (static_cast<double>(x) - cx) / rx;
    return dy * dy + dx * dx;
  }
  bool contains(Index y, Index x) const { return r2(y, x) <= 1.0; }
};

}  // namespace

std::vector<double> default_aorta_curve(int n) {
  std::vector<double> c(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p) {
    // sharp wash-in peaking at the arterial phase, slow wash-out
    const int peak = std::min(2, n - 1);
    c[static_cast<size_t>(p)] =
        p < peak ? 0.35 + 0.25 * p / std::max(1, peak)
                 : 1.0 - 0.45 * (1.0 - std::exp(-0.6 * (p - peak)));
  }
  return c;
}

std::vector<double> default_liver_curve(int n) {
  std::vector<double> c(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p)
    c[static_cast<size_t>(p)] = 0.40 + 0.30 * (1.0 - std::exp(-0.55 * p));
  return c;
}

std::vector<double> default_lesion_curve(int n) {
  std::vector<double> c(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p) {
    const int peak = std::min(3, n - 1);
    c[static_cast<size_t>(p)] =
        p < peak ? 0.30 + 0.40 * p / std::max(1, peak)
                 : 0.70 - 0.25 * (1.0 - std::exp(-0.5 * (p - peak)));
  }
  return c;
}

Phantom gen_phantom(const PhantomSpec& spec) {
  if (spec.height < 64 || spec.width < 64)
    throw std::invalid_argument("phantom: dimensions must be >= 64");
  if (spec.n_phases < 1 || spec.n_slices < 1)
    throw std::invalid_argument("phantom: phases and slices must be >= 1");

  const auto aorta = resolve_curve(spec.aorta_curve, spec.n_phases, default_aorta_curve);
  const auto liver = resolve_curve(spec.liver_curve, spec.n_phases, default_liver_curve);
  const auto lesion = resolve_curve(spec.lesion_curve, spec.n_phases, default_lesion_curve);

  const Index h = spec.height, w = spec.width;
  Phantom out;
  out.volume = Tensor<float>(Shape{spec.n_phases, spec.n_slices, h, w}, 0.0f);
  out.masks = Tensor<float>(Shape{spec.n_slices, h, w}, 0.0f);

  Rng geom_rng(spec.seed);

  for (int s = 0; s < spec.n_slices; ++s) {
    // mild per-slice geometric variation
    const double jy = geom_rng.uniform(-0.02, 0.02);
    const double jx = geom_rng.uniform(-0.02, 0.02);
    const double grow = geom_rng.uniform(0.96, 1.02);

    Ellipse body{h * (0.5 + jy), w * (0.5 + jx), h * 0.42 * grow, w * 0.44 * grow};
    Ellipse liver_e{body.cy - h * 0.08, body.cx - w * 0.12, h * 0.22 * grow, w * 0.26 * grow};
    Ellipse aorta_e{body.cy + h * 0.22, body.cx + w * 0.02, h * 0.030, w * 0.034};
    const bool has_lesion = (s % 2) == 0;
    Ellipse lesion_e{liver_e.cy + h * 0.05, liver_e.cx - w * 0.06, h * 0.035, w * 0.040};

    Rng tex_rng = Rng::derived(spec.seed, 1000 + static_cast<std::uint64_t>(s));

    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        int label = label_background;
        const double br = body.r2(y, x);
        if (br <= 1.0) {
          label = br >= 0.86 ? label_fat : label_body;
          if (label == label_body) {
            if (has_lesion && lesion_e.contains(y, x))
              label = label_lesion;
            else if (aorta_e.contains(y, x))
              label = label_aorta;
            else if (liver_e.contains(y, x))
              label = label_liver;
          }
        }
        out.masks(s, y, x) = static_cast<float>(label);

        // one texture draw per voxel, consumed regardless of label so the
        // stream stays aligned across slices
        const double tex = tex_rng.uniform(-1.0, 1.0);
        for (int p = 0; p < spec.n_phases; ++p) {
          double v = 0.0;
          switch (label) {
            case label_background: v = 0.0; break;
            case label_body: v = 0.30 + 0.03 * tex; break;
            case label_fat: v = 0.92 + 0.04 * tex; break;
            case label_liver: v = curve_at(liver, p) * (1.0 + 0.10 * tex); break;
            case label_aorta: v = curve_at(aorta, p) * (1.0 + 0.03 * tex); break;
            case label_lesion: v = curve_at(lesion, p) * (1.0 + 0.06 * tex); break;
          }
          out.volume(p, s, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return out;
}

}  // namespace marc
