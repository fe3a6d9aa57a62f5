#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <variant>

#include <CLI11.hpp>

#include "nfsense/config.hpp"
#include "nfsense/dataset.hpp"
#include "nfsense/diagnostics.hpp"
#include "nfsense/error.hpp"
#include "nfsense/parallel.hpp"
#include "nfsense/simulate.hpp"
#include "stages.hpp"

namespace nfsense::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  int threads = 0;
  std::uint64_t seed = 0;
  bool verbose = false;
  std::string memory_budget;
  std::string config;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kUsage;
    case ErrorKind::MissingFile:
    case ErrorKind::SizeMismatch:
    case ErrorKind::UnknownDtype:
    case ErrorKind::VersionMismatch:
    case ErrorKind::Io: return kDataError;
    case ErrorKind::Numerical: return kNumerical;
    case ErrorKind::MemoryBudget: return kMemoryBudget;
  }
  return kFailure;
}

std::size_t parse_bytes(std::string const& text) {
  if (text.empty()) return 0;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (std::exception const&) {
    fail(ErrorKind::InvalidArgument, "invalid --memory-budget '" + text + "'");
  }
  std::string const suffix = text.substr(used);
  double scale = 1.0;
  if (suffix == "K" || suffix == "k") scale = 1024.0;
  else if (suffix == "M") scale = 1024.0 * 1024.0;
  else if (suffix == "G") scale = 1024.0 * 1024.0 * 1024.0;
  else if (!suffix.empty()) fail(ErrorKind::InvalidArgument, "invalid --memory-budget suffix '" + suffix + "'");
  if (!(v > 0.0)) fail(ErrorKind::InvalidArgument, "--memory-budget must be positive");
  return static_cast<std::size_t>(v * scale);
}

std::string config_text(Config const& cfg, std::string const& key) {
  Config::Value const* v = cfg.find(key);
  if (auto const* b = std::get_if<bool>(v)) return *b ? "true" : "false";
  if (auto const* t = std::get_if<std::string>(v)) return *t;
  if (auto const* n = std::get_if<double>(v)) {
    std::ostringstream o;
    o << std::setprecision(17) << *n;
    return o.str();
  }
  fail(ErrorKind::InvalidArgument, "config key '" + key + "' cannot be used as a flag value");
}

// Fills options not given on the command line from "<section>.<name>" (or a
// top-level "<name>" when `section` is empty). Flags always win.
void apply_config(CLI::App& app, std::string const& section, Config const& cfg) {
  for (CLI::Option* opt : app.get_options()) {
    if (opt->count() != 0 || opt->get_positional()) continue;
    std::string const name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string const key = section.empty() ? name : section + "." + name;
    if (!cfg.has(key)) continue;
    opt->add_result(config_text(cfg, key));
    opt->run_callback();
  }
}

template <class T>
void set_if(std::optional<T> const& v, T& target) {
  if (v) target = *v;
}

SimulationConfig simulation_config(Config const& cfg, std::uint64_t seed, std::set<std::string> const& global_names) {
  static std::set<std::string> const known{
      "grid", "fov", "coils", "coil_decay", "order", "global_term", "noise", "beta",
      "phantom.kind", "phantom.smooth_phase",
      "trajectory.kind", "trajectory.samples", "trajectory.turns", "trajectory.k_max_fraction",
      "trajectory.undersample", "trajectory.axis", "trajectory.dwell",
      "b0.pattern", "b0.amplitude",
      "prescan.echoes", "prescan.te0", "prescan.delta_te", "prescan.noise"};
  static std::set<std::string> const sections{"phantom", "trajectory", "b0", "prescan"};
  for (auto const& key : cfg.keys()) {
    auto const dot = key.find('.');
    bool const ours = dot == std::string::npos || sections.count(key.substr(0, dot)) != 0;
    if (ours && !known.count(key) && !global_names.count(key))
      fail(ErrorKind::InvalidArgument, "unknown simulation config key '" + key + "'");
  }

  SimulationConfig s;
  s.seed = seed;
  auto const dims = cfg.get_numbers("grid");
  if (dims) {
    require(dims->size() == 2 || dims->size() == 3, "config grid must have 2 or 3 entries");
    for (std::size_t a = 0; a < 3; ++a)
      s.grid.dims[a] = a < dims->size() ? static_cast<Index>((*dims)[a]) : 1;
  }
  if (auto fov = cfg.get_numbers("fov")) {
    require(!fov->empty() && fov->size() <= 3, "config fov must have 1 to 3 entries");
    for (std::size_t a = 0; a < 3; ++a) s.grid.fov[a] = (*fov)[std::min(a, fov->size() - 1)];
  }
  if (auto v = cfg.get_integer("coils")) s.coils = static_cast<Index>(*v);
  set_if(cfg.get_number("coil_decay"), s.coil_decay);
  if (auto v = cfg.get_integer("order")) s.order = static_cast<int>(*v);
  set_if(cfg.get_bool("global_term"), s.global_term);
  set_if(cfg.get_number("noise"), s.noise_sd);
  set_if(cfg.get_number("beta"), s.beta);
  set_if(cfg.get_string("phantom.kind"), s.phantom);
  set_if(cfg.get_bool("phantom.smooth_phase"), s.smooth_phase);
  set_if(cfg.get_string("trajectory.kind"), s.trajectory);
  if (auto v = cfg.get_integer("trajectory.samples")) s.spiral_samples = static_cast<Index>(*v);
  set_if(cfg.get_number("trajectory.turns"), s.spiral_turns);
  set_if(cfg.get_number("trajectory.k_max_fraction"), s.k_max_fraction);
  if (auto v = cfg.get_integer("trajectory.undersample")) s.undersample = static_cast<Index>(*v);
  if (auto v = cfg.get_integer("trajectory.axis")) s.undersample_axis = static_cast<int>(*v);
  set_if(cfg.get_number("trajectory.dwell"), s.dwell);
  set_if(cfg.get_string("b0.pattern"), s.b0_pattern);
  set_if(cfg.get_number("b0.amplitude"), s.b0_amplitude);
  if (auto v = cfg.get_integer("prescan.echoes")) s.echoes = static_cast<Index>(*v);
  set_if(cfg.get_number("prescan.te0"), s.te0);
  set_if(cfg.get_number("prescan.delta_te"), s.delta_te);
  set_if(cfg.get_number("prescan.noise"), s.prescan_noise_sd);
  return s;
}

PreconditionerKind precond_from(std::string const& name) { return parse_preconditioner(name); }

// <dir>/<name>.<ext> inside a dataset.
struct ArrayRef {
  Dataset ds;
  std::string name;
};

ArrayRef open_array(std::string const& path) {
  fs::path const p(path);
  fs::path dir = p.parent_path();
  if (dir.empty()) dir = ".";
  Dataset ds = Dataset::open(dir);
  std::string const name = p.stem().string();
  if (!ds.has(name)) fail(ErrorKind::MissingFile, "'" + path + "' is not an array of the dataset in " + dir.string());
  return {std::move(ds), name};
}

} // namespace

int run(std::vector<std::string> args) {
  Globals g;
  CLI::App app{"Non-Fourier SENSE reconstruction toolkit", "nfsense"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--threads", g.threads, "Cap on internal parallelism (0 = runtime default)");
  app.add_option("--seed", g.seed, "Seed for all randomness");
  app.add_flag("--verbose", g.verbose, "Report stage progress on stderr");
  app.add_option("--memory-budget", g.memory_budget, "Bytes for the phase matrix (suffix K, M or G)");
  app.add_option("--config", g.config, "TOML-style configuration file; command-line flags take precedence");

  // simulate
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset with ground truth");
  sim->add_option("--out", sim_out, "Output dataset directory")->required();

  // masks
  std::string ds_path;
  stages::MaskOptions mask_opts;
  double mask_threshold = 0.0;
  auto* masks = app.add_subcommand("masks", "Trusted and reconstruction masks from the prescan");
  masks->add_option("dataset", ds_path)->required();
  masks->add_option("--bias-degree", mask_opts.bias_degree, "Polynomial degree of the bias field");
  masks->add_option("--dilate", mask_opts.dilate, "Dilation radius of the reconstruction mask (voxels)");
  auto* thr_opt = masks->add_option("--threshold", mask_threshold, "Explicit magnitude threshold");
  masks->add_option("--echo", mask_opts.echo, "Prescan echo used for the magnitude");
  masks->add_flag("--write-bias", mask_opts.write_bias, "Also store the bias field");

  // sensmaps
  stages::SensOptions sens_opts;
  double alpha_s = 0.0;
  std::string sens_precond = "ic0";
  auto* sens = app.add_subcommand("sensmaps", "Coil sensitivity maps");
  sens->add_option("dataset", ds_path)->required();
  auto* alpha_s_opt = sens->add_option("--alpha-s", alpha_s, "Smoothing weight (default 1e-2 h^4)");
  sens->add_option("--precond", sens_precond, "ic0 | jacobi | none");
  sens->add_option("--tol", sens_opts.tol, "PCG relative tolerance");

  // b0map
  stages::B0Options b0_opts;
  double alpha_b = 0.0;
  std::string b0_precond = "ic0";
  auto* b0 = app.add_subcommand("b0map", "Static off-resonance map");
  b0->add_option("dataset", ds_path)->required();
  auto* alpha_b_opt = b0->add_option("--alpha-b", alpha_b, "Smoothing weight (default h^2 / median eps^2)");
  b0->add_option("--precond", b0_precond, "ic0 | jacobi | none");
  b0->add_option("--tol", b0_opts.tol, "PCG relative tolerance");

  // kfilter
  stages::FilterOptions filt_opts;
  auto* kf = app.add_subcommand("kfilter", "Convex-hull k-space filter");
  kf->add_option("dataset", ds_path)->required();
  kf->add_option("--dilate", filt_opts.dilate, "Grow the filter by n grid points");
  kf->add_flag("--per-slice", filt_opts.per_slice, "Use the (kx, ky) hull on every kz plane");
  kf->add_flag("--conjugate-trajectory", filt_opts.conjugate_trajectory, "Negate the trajectory");

  // recon
  stages::ReconStageOptions rec_opts;
  int rec_order = 0;
  bool no_filter = false;
  auto add_recon_flags = [&](CLI::App* sub) {
    sub->add_option("--iters", rec_opts.iterations, "CG iterations")->check(CLI::NonNegativeNumber);
    sub->add_option("--split-block", rec_opts.split_block, "rows per block | auto | full");
    sub->add_option("--order", rec_order, "Field-model order used (<= stored order)")->check(CLI::Range(1, 3));
    sub->add_option("--log", rec_opts.log_csv, "CG log CSV (iter, res_norm, sol_norm)");
    sub->add_option("--timing", rec_opts.timing_csv, "Timing CSV (phase_label, seconds)");
    sub->add_flag("--conjugate-trajectory", rec_opts.conjugate_trajectory, "Data use the exp(-i k.r) convention");
    sub->add_flag("--no-filter", no_filter, "Skip the k-space filter");
  };
  auto* rec = app.add_subcommand("recon", "Iterative reconstruction");
  rec->add_option("dataset", ds_path)->required();
  add_recon_flags(rec);

  // metrics
  std::string test_path, ref_path, metric_mask;
  bool want_ssim = false, want_rmse = false;
  auto* met = app.add_subcommand("metrics", "Relative RMSE and SSIM between two images");
  met->add_option("test", test_path)->required();
  met->add_option("ref", ref_path)->required();
  met->add_option("--mask", metric_mask, "Mask array restricting the comparison");
  met->add_flag("--ssim", want_ssim);
  SsimOptions ssim_opts;
  met->add_option("--window", ssim_opts.window, "SSIM Gaussian window width")->check(CLI::PositiveNumber);
  met->add_option("--sigma", ssim_opts.sigma, "SSIM Gaussian window sigma")->check(CLI::PositiveNumber);
  met->add_option("--k1", ssim_opts.k1, "SSIM luminance constant");
  met->add_option("--k2", ssim_opts.k2, "SSIM contrast constant");
  met->add_flag("--rmse", want_rmse);

  // lcurve
  std::string log_path, curvature_out;
  auto* lc = app.add_subcommand("lcurve", "L-curve corner of a CG log");
  lc->add_option("log", log_path)->required();
  lc->add_option("--out", curvature_out, "Curvature CSV (default stdout)");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "masks -> sensmaps -> b0map -> kfilter -> recon");
  pipe->add_option("dataset", ds_path)->required();
  add_recon_flags(pipe);
  pipe->add_option("--bias-degree", mask_opts.bias_degree);
  pipe->add_option("--mask-dilate", mask_opts.dilate, "Dilation radius of the reconstruction mask");
  auto* pipe_thr = pipe->add_option("--threshold", mask_threshold);
  auto* pipe_alpha_s = pipe->add_option("--alpha-s", alpha_s);
  auto* pipe_alpha_b = pipe->add_option("--alpha-b", alpha_b);
  pipe->add_option("--precond", sens_precond, "ic0 | jacobi | none (both smoothers)");
  pipe->add_option("--filter-dilate", filt_opts.dilate);
  pipe->add_flag("--per-slice", filt_opts.per_slice);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  std::string stage = "nfsense";
  try {
    try {
      app.parse(reversed);
    } catch (CLI::CallForHelp const& e) {
      return app.exit(e) == 0 ? kOk : kUsage;
    } catch (CLI::CallForAllHelp const& e) {
      return app.exit(e) == 0 ? kOk : kUsage;
    } catch (CLI::ParseError const& e) {
      std::cerr << "nfsense: " << e.what() << "\n\n" << app.help();
      return kUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    stage = sub->get_name();

    Config cfg;
    if (!g.config.empty()) {
      cfg = Config::load(g.config);
      apply_config(app, "", cfg);
      apply_config(*sub, stage, cfg);
    }
    if (g.threads > 0) set_thread_count(g.threads);
    rec_opts.memory_budget = parse_bytes(g.memory_budget);
    if (thr_opt->count() || pipe_thr->count()) mask_opts.threshold = mask_threshold;
    if (alpha_s_opt->count() || pipe_alpha_s->count()) sens_opts.alpha = alpha_s;
    if (alpha_b_opt->count() || pipe_alpha_b->count()) b0_opts.alpha = alpha_b;
    if (rec_order > 0) rec_opts.order = rec_order;
    rec_opts.use_filter = !no_filter;

    auto note = [&](std::string const& name, stages::StageReport const& r) {
      std::cout << name << ": " << r.summary << '\n';
    };
    auto progress = [&](std::string const& name) {
      stage = name;
      if (g.verbose) std::cerr << "[nfsense] " << name << " ...\n";
    };

    if (stage == "simulate") {
      std::set<std::string> globals;
      for (auto const* o : app.get_options()) globals.insert(o->get_single_name());
      simulate_dataset(simulation_config(cfg, g.seed, globals), sim_out);
      std::cout << "simulate: wrote " << sim_out << '\n';
    } else if (stage == "masks") {
      Dataset ds = Dataset::open(ds_path);
      note(stage, stages::run_masks(ds, mask_opts));
    } else if (stage == "sensmaps") {
      sens_opts.precond = precond_from(sens_precond);
      Dataset ds = Dataset::open(ds_path);
      note(stage, stages::run_sensmaps(ds, sens_opts));
    } else if (stage == "b0map") {
      b0_opts.precond = precond_from(b0_precond);
      Dataset ds = Dataset::open(ds_path);
      note(stage, stages::run_b0map(ds, b0_opts));
    } else if (stage == "kfilter") {
      Dataset ds = Dataset::open(ds_path);
      note(stage, stages::run_kfilter(ds, filt_opts));
    } else if (stage == "recon") {
      Dataset ds = Dataset::open(ds_path);
      note(stage, stages::run_recon(ds, rec_opts));
    } else if (stage == "pipeline") {
      sens_opts.precond = b0_opts.precond = precond_from(sens_precond);
      filt_opts.conjugate_trajectory = rec_opts.conjugate_trajectory;
      Dataset ds = Dataset::open(ds_path);
      if (rec_opts.log_csv.empty()) rec_opts.log_csv = (fs::path(ds_path) / "cg_log.csv").string();
      if (rec_opts.timing_csv.empty()) rec_opts.timing_csv = (fs::path(ds_path) / "timing.csv").string();
      progress("masks");
      note(stage, stages::run_masks(ds, mask_opts));
      progress("sensmaps");
      note(stage, stages::run_sensmaps(ds, sens_opts));
      progress("b0map");
      note(stage, stages::run_b0map(ds, b0_opts));
      progress("kfilter");
      note(stage, stages::run_kfilter(ds, filt_opts));
      progress("recon");
      note(stage, stages::run_recon(ds, rec_opts));
    } else if (stage == "metrics") {
      ArrayRef const test = open_array(test_path);
      ArrayRef const ref = open_array(ref_path);
      ComplexVector const t = test.ds.read_complex(test.name);
      ComplexVector const r = ref.ds.read_complex(ref.name);
      std::optional<Mask> mask;
      if (!metric_mask.empty()) {
        ArrayRef const m = open_array(metric_mask);
        mask = m.ds.read_mask(m.name);
      }
      if (!want_ssim && !want_rmse) want_ssim = want_rmse = true;
      std::cout << std::setprecision(10);
      if (want_rmse) std::cout << "rmse," << rmse(t, r, mask ? &*mask : nullptr) << '\n';
      if (want_ssim)
        std::cout << "ssim," << ssim(test.ds.manifest().grid, t, r, ssim_opts, mask ? &*mask : nullptr).mean << '\n';
    } else if (stage == "lcurve") {
      stages::LogSeries const log = stages::read_cg_log(log_path);
      LCurveCorner const corner = lcurve_corner(log.residual_norm, log.solution_norm);
      std::cout << "corner_iter," << log.iteration[static_cast<std::size_t>(corner.index)] << '\n'
                << "max_curvature," << std::setprecision(10) << corner.max_curvature << '\n'
                << "low_confidence," << (corner.low_confidence ? 1 : 0) << '\n';
      std::ofstream file;
      if (!curvature_out.empty()) {
        file.open(curvature_out);
        if (!file) fail(ErrorKind::Io, "cannot write '" + curvature_out + "'");
      }
      std::ostream& out = curvature_out.empty() ? std::cout : file;
      out << "# nfsense lcurve v1\niter,curvature\n" << std::setprecision(17);
      for (Index i = 0; i < corner.curvature.size(); ++i)
        out << log.iteration[static_cast<std::size_t>(i)] << ',' << corner.curvature(i) << '\n';
    }
    if (g.verbose) std::cerr << "[nfsense] done\n";
    return kOk;
  } catch (Error const& e) {
    std::cerr << "nfsense " << stage << ": " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (std::exception const& e) {
    std::cerr << "nfsense " << stage << ": error: " << e.what() << '\n';
    return kFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

} // namespace nfsense::cli
