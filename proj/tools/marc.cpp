// marc: respiratory-ghosting simulation, residual-CNN training and
// evaluation for multi-phase liver MRI, end to end from the command line.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "marc/artifact.hpp"
#include "marc/dataset.hpp"
#include "marc/io.hpp"
#include "marc/network.hpp"
#include "marc/phantom.hpp"
#include "marc/report.hpp"
#include "marc/training.hpp"

namespace {

using namespace marc;

// exit codes: 0 success, 1 usage, 2 data/validation, 3 numerical failure
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::vector<Index> parse_shape(const std::string& text) {
  std::vector<Index> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) dims.push_back(std::stoll(part));
  for (Index d : dims)
    if (d <= 0) throw CLI::ValidationError("--shape", "dimensions must be positive");
  return dims;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw CLI::ValidationError("range", "expected lo:hi in '" + text + "'");
  const double lo = std::stod(text.substr(0, colon));
  const double hi = std::stod(text.substr(colon + 1));
  if (lo > hi) throw CLI::ValidationError("range", "lo > hi in '" + text + "'");
  return {lo, hi};
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct SimulateRanges {
  double delta_max = 20.0;
  std::pair<double, double> alpha{0.1, 5.0};
  std::pair<double, double> beta{0.0, std::numbers::pi / 4};
  std::pair<double, double> ky0{std::numbers::pi / 10, std::numbers::pi / 2};
  std::pair<double, double> line_fraction{0.10, 0.50};
  double scan_seconds = 10.0;
};

PhaseErrorSpec draw_spec_from_ranges(Rng& rng, PhasePattern kind, const SimulateRanges& r) {
  PhaseErrorSpec s;
  s.kind = kind;
  s.delta_max = rng.uniform(0.0, r.delta_max);
  s.alpha = rng.uniform(r.alpha.first, r.alpha.second);
  s.beta = rng.uniform(r.beta.first, r.beta.second);
  s.ky0 = rng.uniform(r.ky0.first, r.ky0.second);
  s.line_fraction = rng.uniform(r.line_fraction.first, r.line_fraction.second);
  s.scan_seconds = r.scan_seconds;
  s.seed = rng.next();
  return s;
}

void split_train_val(Index n, std::uint64_t seed, std::vector<Index>& train_idx,
                     std::vector<Index>& val_idx) {
  std::vector<Index> order(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng::derived(seed, 0x5eedULL);
  rng.shuffle(order);
  const Index n_val = std::max<Index>(1, n / 5);
  val_idx.assign(order.begin(), order.begin() + n_val);
  train_idx.assign(order.begin() + n_val, order.end());
}

void write_train_report(const std::string& path, const TrainReport& rep) {
  std::ofstream out(path);
  if (!out) throw MrtFileError(path + ": cannot open for writing");
  out << "epoch,train_loss,val_loss\n";
  for (size_t e = 0; e < rep.train_loss.size(); ++e)
    out << (e + 1) << "," << fmt6(rep.train_loss[e]) << "," << fmt6(rep.val_loss[e]) << "\n";
  out << "# best_epoch = " << rep.best_epoch << "\n";
  out << "# stopped_epoch = " << rep.stopped_epoch << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"MARC pipeline: simulate respiratory ghosting, train the residual CNN, "
               "denoise and evaluate"};
  app.require_subcommand(1);

  // phantom
  auto* cmd_phantom = app.add_subcommand("phantom", "generate a multi-phase abdominal phantom");
  std::string ph_out, ph_shape = "8x128x112";
  int ph_phases = 7;
  std::uint64_t ph_seed = 0;
  cmd_phantom->add_option("--out", ph_out, "output volume (.mrt)")->required();
  cmd_phantom->add_option("--shape", ph_shape, "SxHxW (slices x PE x RO)");
  cmd_phantom->add_option("--phases", ph_phases, "number of contrast phases");
  cmd_phantom->add_option("--seed", ph_seed, "random seed");

  // simulate
  auto* cmd_sim = app.add_subcommand("simulate", "corrupt a volume with respiratory phase errors");
  std::string sim_in, sim_out, sim_pattern = "mixed";
  std::uint64_t sim_seed = 0;
  SimulateRanges ranges;
  std::string alpha_range, beta_range, ky0_range;
  int b0_order = 3;
  double b0_p2p = 8.8;
  cmd_sim->add_option("--in", sim_in, "reference volume (.mrt)")->required();
  cmd_sim->add_option("--out", sim_out, "artifact volume (.mrt)")->required();
  cmd_sim->add_option("--pattern", sim_pattern, "periodic|random|mixed")
      ->check(CLI::IsMember({"periodic", "random", "mixed"}));
  cmd_sim->add_option("--seed", sim_seed, "random seed");
  cmd_sim->add_option("--delta-max", ranges.delta_max, "max motion amplitude, pixels");
  cmd_sim->add_option("--alpha-range", alpha_range, "respiratory frequency lo:hi, Hz");
  cmd_sim->add_option("--beta-range", beta_range, "sine phase lo:hi, radians");
  cmd_sim->add_option("--ky0-range", ky0_range, "delay boundary lo:hi, radians");
  cmd_sim->add_option("--scan-seconds", ranges.scan_seconds, "breath-hold duration");
  cmd_sim->add_option("--b0-order", b0_order, "polynomial B0 order, <= 3");
  cmd_sim->add_option("--b0-p2p", b0_p2p, "B0 peak-to-peak bound, radians");

  // dataset
  auto* cmd_ds = app.add_subcommand("dataset", "extract normalized 48x48 patch pairs");
  std::string ds_ref, ds_art, ds_out;
  Index ds_patches = 2000;
  std::uint64_t ds_seed = 0;
  cmd_ds->add_option("--ref", ds_ref, "reference volume (.mrt)")->required();
  cmd_ds->add_option("--art", ds_art, "artifact volume (.mrt)")->required();
  cmd_ds->add_option("--out", ds_out, "output bundle directory")->required();
  cmd_ds->add_option("--patches", ds_patches, "number of patch pairs");
  cmd_ds->add_option("--seed", ds_seed, "random seed");

  // train
  auto* cmd_train = app.add_subcommand("train", "train the residual CNN on a dataset bundle");
  std::string tr_data, tr_out;
  int tr_nconv = 7, tr_filters = 64, tr_kfold = 0;
  TrainConfig tcfg;
  cmd_train->add_option("--data", tr_data, "dataset bundle directory")->required();
  cmd_train->add_option("--out", tr_out, "output model bundle directory")->required();
  cmd_train->add_option("--nconv", tr_nconv, "interior conv+BN+ReLU blocks");
  cmd_train->add_option("--filters", tr_filters, "filters per conv layer");
  cmd_train->add_option("--epochs", tcfg.max_epochs, "max epochs");
  cmd_train->add_option("--batch", tcfg.batch_size, "mini-batch size");
  cmd_train->add_option("--lr", tcfg.learning_rate, "Adam learning rate");
  cmd_train->add_option("--patience", tcfg.patience, "early-stopping patience, epochs");
  cmd_train->add_option("--seed", tcfg.seed, "random seed");
  cmd_train->add_option("--kfold", tr_kfold, "also run K-fold validation with this K");
  cmd_train->add_option("--subset-fraction", tcfg.subset_fraction,
                        "train on this fraction of the training split");

  // denoise
  auto* cmd_den = app.add_subcommand("denoise", "subtract the predicted artifact from a volume");
  std::string den_model, den_in, den_out;
  double den_scale = 0.0;
  cmd_den->add_option("--model", den_model, "model bundle directory")->required();
  cmd_den->add_option("--in", den_in, "artifact volume (.mrt)")->required();
  cmd_den->add_option("--out", den_out, "denoised volume (.mrt)")->required();
  cmd_den->add_option("--scale", den_scale,
                      "normalization scale (default: max of the input volume)");

  // evaluate
  auto* cmd_eval = app.add_subcommand("evaluate", "SSIM, Bland-Altman and contrast statistics");
  std::string ev_ref, ev_art, ev_den, ev_masks, ev_out;
  double ev_threshold = 0.46;
  cmd_eval->add_option("--ref", ev_ref, "reference volume (.mrt)")->required();
  cmd_eval->add_option("--art", ev_art, "artifact volume (.mrt)")->required();
  cmd_eval->add_option("--den", ev_den, "denoised volume (.mrt)")->required();
  cmd_eval->add_option("--masks", ev_masks, "region mask volume (.mrt)")->required();
  cmd_eval->add_option("--out", ev_out, "report path")->required();
  cmd_eval->add_option("--threshold", ev_threshold, "Bland-Altman subgroup threshold");

  // sweep
  auto* cmd_sweep = app.add_subcommand("sweep", "select n_conv by validation SSIM");
  std::string sw_data, sw_out, sw_list = "1,3,5,7";
  int sw_filters = 64;
  TrainConfig scfg;
  cmd_sweep->add_option("--data", sw_data, "dataset bundle directory")->required();
  cmd_sweep->add_option("--out", sw_out, "table output path");
  cmd_sweep->add_option("--nconv-list", sw_list, "comma-separated candidates");
  cmd_sweep->add_option("--filters", sw_filters, "filters per conv layer");
  cmd_sweep->add_option("--epochs", scfg.max_epochs, "max epochs");
  cmd_sweep->add_option("--batch", scfg.batch_size, "mini-batch size");
  cmd_sweep->add_option("--lr", scfg.learning_rate, "Adam learning rate");
  cmd_sweep->add_option("--patience", scfg.patience, "early-stopping patience");
  cmd_sweep->add_option("--seed", scfg.seed, "random seed");

  // export-pgm
  auto* cmd_pgm = app.add_subcommand("export-pgm", "write 16-bit PGM images for inspection");
  std::string pgm_in, pgm_out;
  cmd_pgm->add_option("--in", pgm_in, "tensor (.mrt)")->required();
  cmd_pgm->add_option("--out", pgm_out, "output path prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint to stderr
    return kExitUsage;
  }

  if (*cmd_phantom) {
    const auto dims = parse_shape(ph_shape);
    if (dims.size() != 3) throw CLI::ValidationError("--shape", "expected SxHxW");
    PhantomSpec spec;
    spec.n_slices = static_cast<int>(dims[0]);
    spec.height = dims[1];
    spec.width = dims[2];
    spec.n_phases = ph_phases;
    spec.seed = ph_seed;
    const Phantom ph = gen_phantom(spec);
    write_mrt(ph_out, ph.volume);
    const std::string mask_path =
        ph_out.size() > 4 && ph_out.ends_with(".mrt")
            ? ph_out.substr(0, ph_out.size() - 4) + "_masks.mrt"
            : ph_out + "_masks.mrt";
    write_mrt(mask_path, ph.masks);
    std::cout << "phantom: " << ph_out << " + " << mask_path << "\n";
  } else if (*cmd_sim) {
    if (!alpha_range.empty()) ranges.alpha = parse_range(alpha_range);
    if (!beta_range.empty()) ranges.beta = parse_range(beta_range);
    if (!ky0_range.empty()) ranges.ky0 = parse_range(ky0_range);
    Tensor<float> vol = read_mrt_f32(sim_in);
    vol.require_rank(4);
    B0FieldSpec b0;
    b0.max_order = b0_order;
    b0.peak_to_peak_rad = b0_p2p;
    Rng rng(sim_seed);
    Tensor<float> out(vol.shape());
    const Index phases = vol.dim(0), slices = vol.dim(1), h = vol.dim(2), w = vol.dim(3);
    Tensor<float> slice(Shape{h, w});
    for (Index p = 0; p < phases; ++p) {
      // each phase gets an independent realization (motion differs per breath-hold)
      PhasePattern kind;
      if (sim_pattern == "periodic")
        kind = PhasePattern::periodic;
      else if (sim_pattern == "random")
        kind = PhasePattern::random_lines;
      else
        kind = rng.next() % 2 == 0 ? PhasePattern::periodic : PhasePattern::random_lines;
      const PhaseErrorSpec err = draw_spec_from_ranges(rng, kind, ranges);
      b0.seed = rng.next();
      for (Index s = 0; s < slices; ++s) {
        for (Index y = 0; y < h; ++y)
          for (Index x = 0; x < w; ++x) slice(y, x) = vol(p, s, y, x);
        const Tensor<float> corrupted = simulate_artifact(slice, b0, err);
        for (Index y = 0; y < h; ++y)
          for (Index x = 0; x < w; ++x) out(p, s, y, x) = corrupted(y, x);
      }
    }
    write_mrt(sim_out, out);
    std::cout << "simulate: " << sim_out << "\n";
  } else if (*cmd_ds) {
    Tensor<float> ref = read_mrt_f32(ds_ref);
    Tensor<float> art = read_mrt_f32(ds_art);
    DatasetBundle bundle;
    bundle.seed = ds_seed;
    bundle.extra_meta["source_ref_checksum"] = std::to_string(tensor_checksum(ref));
    bundle.extra_meta["source_art_checksum"] = std::to_string(tensor_checksum(art));
    bundle.scale = normalize_volume(art, ref);
    bundle.patches = extract_patches(ref, art, ds_patches, ds_seed);
    save_dataset(ds_out, bundle);
    std::cout << "dataset: " << ds_out << " (" << ds_patches << " patches, scale "
              << fmt6(bundle.scale) << ")\n";
  } else if (*cmd_train) {
    const DatasetBundle bundle = load_dataset(tr_data);
    const Index n = bundle.patches.artifact.dim(0);
    const int channels = static_cast<int>(bundle.patches.artifact.dim(1));
    MarcModel<float> model = build_marc<float>(tr_nconv, tr_filters, channels, tcfg.seed);

    std::vector<Index> train_idx, val_idx;
    split_train_val(n, tcfg.seed, train_idx, val_idx);
    const TrainReport rep = train(model, bundle.patches, train_idx, val_idx, tcfg);
    save_model(tr_out, model);
    write_train_report(tr_out + "/report.txt", rep);
    std::cout << "train: stopped at epoch " << rep.stopped_epoch << ", best epoch "
              << rep.best_epoch << ", best val L1 "
              << fmt6(rep.val_loss[static_cast<size_t>(rep.best_epoch) - 1]) << "\n";

    if (tr_kfold > 0) {
      const KFoldReport kf =
          kfold_validate<float>(bundle.patches, tr_nconv, tr_filters, tr_kfold, tcfg);
      std::ofstream out(tr_out + "/kfold.txt");
      out << "k = " << tr_kfold << "\n";
      for (size_t f = 0; f < kf.fold_losses.size(); ++f)
        out << "fold" << f << " = " << fmt6(kf.fold_losses[f]) << "\n";
      out << "mean = " << fmt6(kf.mean) << "\n";
      out << "sd = " << fmt6(kf.sd) << "\n";
      std::cout << "kfold: val L1 " << fmt6(kf.mean) << " +/- " << fmt6(kf.sd) << "\n";
    }
  } else if (*cmd_den) {
    MarcModel<float> model = load_model<float>(den_model);
    Tensor<float> vol = read_mrt_f32(den_in);
    vol.require_rank(4);
    float scale = static_cast<float>(den_scale);
    if (scale <= 0.0f) scale = vol.vec().maxCoeff();
    if (scale <= 0.0f) throw std::invalid_argument("denoise: all-zero input volume");
    vol.vec() /= scale;
    Tensor<float> den = denoise(model, vol);
    den.vec() *= scale;
    write_mrt(den_out, den);
    std::cout << "denoise: " << den_out << " (scale " << fmt6(scale) << ")\n";
  } else if (*cmd_eval) {
    const Tensor<float> ref = read_mrt_f32(ev_ref);
    const Tensor<float> art = read_mrt_f32(ev_art);
    const Tensor<float> den = read_mrt_f32(ev_den);
    const Tensor<float> masks = read_mrt_f32(ev_masks);
    const Evaluation eval = evaluate_volumes(ref, art, den, masks, ev_threshold);
    const std::string text = render_report(eval);
    std::ofstream out(ev_out);
    if (!out) throw MrtFileError(ev_out + ": cannot open for writing");
    out << text;
    if (!eval.empty) {
      write_ba_csv(ev_out + ".intensity.csv", eval.intensity_ba);
      write_ba_csv(ev_out + ".contrast.csv", eval.contrast_ba);
    }
    std::cout << text;
  } else if (*cmd_sweep) {
    const DatasetBundle bundle = load_dataset(sw_data);
    std::vector<int> candidates;
    std::stringstream ss(sw_list);
    std::string part;
    while (std::getline(ss, part, ',')) candidates.push_back(std::stoi(part));
    const SweepResult res = sweep_nconv<float>(candidates, bundle.patches, sw_filters, scfg);
    std::ostringstream table;
    table << "n_conv,ssim_mean,ssim_sd\n";
    for (const auto& e : res.table)
      table << e.n_conv << "," << fmt6(e.ssim_mean) << "," << fmt6(e.ssim_sd) << "\n";
    table << "# selected = " << res.selected << "\n";
    if (!sw_out.empty()) {
      std::ofstream out(sw_out);
      out << table.str();
    }
    std::cout << table.str();
  } else if (*cmd_pgm) {
    const Tensor<float> t = read_mrt_f32(pgm_in);
    auto slice_at = [&](Index p, Index s) {
      Tensor<float> img(Shape{t.dim(t.rank() - 2), t.dim(t.rank() - 1)});
      for (Index y = 0; y < img.dim(0); ++y)
        for (Index x = 0; x < img.dim(1); ++x)
          img(y, x) = t.rank() == 2 ? t(y, x) : (t.rank() == 3 ? t(s, y, x) : t(p, s, y, x));
      return img;
    };
    if (t.rank() == 2) {
      write_pgm16(pgm_out + ".pgm", slice_at(0, 0));
    } else if (t.rank() == 3) {
      for (Index s = 0; s < t.dim(0); ++s)
        write_pgm16(pgm_out + "_s" + std::to_string(s) + ".pgm", slice_at(0, s));
    } else if (t.rank() == 4) {
      for (Index p = 0; p < t.dim(0); ++p)
        for (Index s = 0; s < t.dim(1); ++s)
          write_pgm16(pgm_out + "_p" + std::to_string(p) + "_s" + std::to_string(s) + ".pgm",
                      slice_at(p, s));
    } else {
      throw std::invalid_argument("export-pgm: rank must be 2, 3 or 4");
    }
    std::cout << "export-pgm: " << pgm_out << "*\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const marc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
