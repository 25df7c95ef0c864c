#pragma once

#include <cstdint>
#include <vector>

#include "marc/tensor.hpp"

namespace marc {

// Region labels in the companion mask volume.
enum PhantomLabel : int {
  label_background = 0,
  label_body = 1,
  label_fat = 2,
  label_liver = 3,
  label_aorta = 4,
  label_lesion = 5,
};

/// Synthetic multi-phase abdominal slice stack: elliptical body with a bright
/// subcutaneous fat ring (the ghosting source), textured liver, small aorta
/// disc and optional lesions. Enhancement curves are per-phase intensity
/// multipliers for the contrast-enhancing regions.
struct PhantomSpec {
  Index height = 128;  // PE
  Index width = 112;   // RO
  int n_phases = 7;
  int n_slices = 8;
  std::uint64_t seed = 0;
  std::vector<double> aorta_curve;   // defaults peak in the arterial phase
  std::vector<double> liver_curve;
  std::vector<double> lesion_curve;
};

struct Phantom {
  Tensor<float> volume;  // (phase, slice, PE, RO), values in [0, 1]
  Tensor<float> masks;   // (slice, PE, RO), labels stored as f32
};

Phantom gen_phantom(const PhantomSpec& spec);

/// Default enhancement curves for n phases (aorta peaks at phase 2).
std::vector<double> default_aorta_curve(int n_phases);
std::vector<double> default_liver_curve(int n_phases);
std::vector<double> default_lesion_curve(int n_phases);

}  // namespace marc
