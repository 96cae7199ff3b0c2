#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "overlap_tomo/analytic.hpp"
#include "overlap_tomo/config.hpp"
#include "overlap_tomo/errors.hpp"
#include "overlap_tomo/estimator.hpp"
#include "overlap_tomo/io.hpp"
#include "overlap_tomo/montecarlo.hpp"
#include "overlap_tomo/so3.hpp"

namespace overlap_tomo::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kDomain = 3 };

/// Malformed command-line input.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

namespace detail {

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_double(v[i]);
  return s;
}

/// Accepts integers written as "1000000" or "1e6".
inline std::size_t parse_count(const std::string& text, const char* what) {
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError(std::string(what) + ": not a number: '" + text + "'");
  }
  if (used != text.size() || !(v >= 1.0) || v > 1e13 || v != std::floor(v))
    throw UsageError(std::string(what) + ": expected a positive integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

inline std::uint64_t parse_seed(const std::optional<std::string>& flag) {
  std::string text;
  if (flag) {
    text = *flag;
  } else if (const char* env = std::getenv("OVERLAP_TOMO_SEED")) {
    text = env;
  } else {
    return 0;
  }
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("seed must be a non-negative integer, got '" + text + "'");
  }
}

/// Three values give a qutrit spectrum, sorted ascending with a warning.
inline Spectrum qutrit_spectrum(const std::vector<double>& v, std::ostream& err) {
  if (v.size() != 3) throw UsageError("--lambda needs three comma-separated eigenvalues for this command");
  bool reordered = false;
  Spectrum s = Spectrum::from_unsorted(v[0], v[1], v[2], &reordered);
  if (reordered) err << "warning: eigenvalues reordered to " << join({s.lambda1(), s.lambda2(), s.lambda3()}) << "\n";
  return s;
}

/// Outputs of one command run, relative to its output directory.
struct Outputs {
  fs::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& content) {
    io::write_file(dir / name, content);
    files.push_back(name);
  }
};

/// Deterministic manifest plus a timing sidecar. Arguments that cannot
/// change the results (output directory, thread count) are left out so
/// that manifests compare bit-identical across machines and thread counts.
inline void write_manifest(const Outputs& o, const std::string& command, const std::vector<std::string>& args,
                           const json& config, std::optional<std::uint64_t> seed, double wall_time,
                           unsigned threads) {
  json m;
  m["command"] = command;
  m["args"] = args;
  m["config"] = config;
  m["seed"] = seed ? json(*seed) : json(nullptr);
  m["library_version"] = kLibraryVersion;
  json outputs = json::array();
  std::string digest;
  for (const auto& f : o.files) {
    const std::string h = io::file_hash(o.dir / f);
    outputs.push_back({{"path", f}, {"fnv1a64", h}});
    digest += f + ":" + h + "\n";
  }
  m["outputs"] = outputs;
  m["checksum"] = io::hex64(io::fnv1a64(digest));
  io::write_file(o.dir / "manifest.json", m.dump(2) + "\n");
  json t{{"wall_time_s", wall_time}, {"threads", threads == 0 ? default_thread_count() : threads}};
  io::write_file(o.dir / "timing.json", t.dump(2) + "\n");
}

/// Drops --out and --threads (with their values) from a token list.
inline std::vector<std::string> replayable(const std::vector<std::string>& tokens) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t == "--out" || t == "--threads") {
      ++i;
      continue;
    }
    if (t.rfind("--out=", 0) == 0 || t.rfind("--threads=", 0) == 0) continue;
    kept.push_back(t);
  }
  return kept;
}

inline std::string csv_string(const std::function<void(std::ostream&)>& fill) {
  std::ostringstream s;
  fill(s);
  return s.str();
}

inline Group parse_group(const std::string& g) {
  if (g == "su3") return Group::SU3;
  if (g == "so3" || g == "so3-uniform") return Group::SO3Uniform;
  if (g == "so3-haar") return Group::SO3Haar;
  throw UsageError("unknown group '" + g + "'");
}

inline Eigenbasis parse_eigenbasis(const std::string& b) {
  if (b == "identity") return Eigenbasis::Identity;
  if (b == "haar") return Eigenbasis::HaarRandom;
  if (b == "p13") return Eigenbasis::P13;
  if (b == "p12") return Eigenbasis::P12;
  if (b == "p23") return Eigenbasis::P23;
  throw UsageError("unknown eigenbasis '" + b + "'");
}

inline Permutation parse_permutation(const std::string& p) {
  if (p == "p13") return Permutation::P13;
  if (p == "p12") return Permutation::P12;
  if (p == "p23") return Permutation::P23;
  throw UsageError("unknown permutation '" + p + "'");
}

inline AngleSampling parse_sampling(const std::string& s) {
  if (s == "uniform") return AngleSampling::Uniform;
  if (s == "haar") return AngleSampling::Haar;
  throw UsageError("unknown angle sampling '" + s + "'");
}

inline json spectrum_json(const Spectrum& s) { return json::array({s.lambda1(), s.lambda2(), s.lambda3()}); }

// ---------------------------------------------------------------------------
// Figure presets
// ---------------------------------------------------------------------------

struct Preset {
  std::string name;
  std::string description;
  std::vector<std::vector<std::string>> runs;  ///< each run gets "--out <fig>/<index>"
  std::vector<std::string> run_names;
};

inline std::vector<Preset> presets() {
  const std::string reference = "0.05,0.3,0.65";
  const std::vector<std::string> fig4_seeds{"1", "2", "3", "4"};
  std::vector<Preset> p;

  p.push_back({"fig1a", "qubit overlap densities", {}, {}});
  for (const std::string l : {"0,1", "0.2,0.8", "0.3,0.7", "0.4,0.6"}) {
    p.back().runs.push_back({"pdf", "--lambda", l, "--resolution", "401"});
    p.back().run_names.push_back("lambda1_" + l.substr(0, l.find(',')));
  }

  p.push_back({"fig1b", "degenerate qutrit densities", {}, {}});
  for (const char* l : {"0,0,1", "0,0.5,0.5", "0.3333333333333333,0.3333333333333333,0.3333333333333333"}) {
    p.back().runs.push_back({"pdf", "--lambda", l, "--resolution", "401"});
  }
  p.back().run_names = {"pure", "half_half", "maximally_mixed"};

  const std::vector<std::pair<std::string, std::string>> fig2{
      {"fig2a", reference}, {"fig2b", "0.1,0.35,0.55"}, {"fig2c", "0.22,0.27,0.51"}};
  for (const auto& [name, l] : fig2) {
    p.push_back({name, "joint density of partial overlaps", {{"jpd", "--lambda", l, "--grid", "200"}}, {"jpd"}});
  }

  p.push_back({"fig2d", "overlap densities with Monte Carlo histograms", {}, {}});
  for (const auto& [name, l] : fig2) {
    p.back().runs.push_back({"pdf", "--lambda", l, "--resolution", "401"});
    p.back().run_names.push_back(name.substr(3) + "_pdf");
    p.back().runs.push_back({"sample", "--lambda", l, "--group", "su3", "--n", "1e6", "--seed", "11"});
    p.back().run_names.push_back(name.substr(3) + "_sample");
  }

  p.push_back({"fig3",
               "support limits of the reference spectrum",
               {{"pdf", "--lambda", reference, "--resolution", "401"}, {"jpd", "--lambda", reference, "--grid", "200"}},
               {"pdf", "jpd"}});

  p.push_back({"fig4", "SO(3) partial-overlap densities for random eigenbases", {}, {}});
  for (const auto& seed : fig4_seeds) {
    p.back().runs.push_back({"sample", "--lambda", reference, "--group", "so3-uniform", "--eigenbasis", "haar",
                             "--n", "1e6", "--jpd", "--seed", seed});
    p.back().run_names.push_back("seed_" + seed);
  }

  p.push_back({"fig5",
               "distribution of the SO(3) minimum",
               {{"qminw", "--lambda", reference, "--nu", "1000", "--budget", "10000", "--seed", "5"}},
               {"qminw"}});

  p.push_back({"fig6", "SO(3) overlap densities for random eigenbases", {}, {}});
  for (const auto& seed : fig4_seeds) {
    p.back().runs.push_back(
        {"sample", "--lambda", reference, "--group", "so3-uniform", "--eigenbasis", "haar", "--n", "1e6", "--seed", seed});
    p.back().run_names.push_back("seed_" + seed);
  }

  p.push_back({"fig7a", "permutation orbits", {}, {}});
  for (const char* perm : {"p13", "p12", "p23"}) {
    p.back().runs.push_back({"curve", "--perm", perm, "--lambda", reference, "--resolution", "721"});
    p.back().run_names.push_back(std::string("curve_") + perm);
    p.back().runs.push_back({"sample", "--lambda", reference, "--group", "so3-uniform", "--eigenbasis", perm, "--n",
                             "1e5", "--jpd", "--seed", "7"});
    p.back().run_names.push_back(std::string("sample_") + perm);
  }

  p.push_back({"fig7b",
               "worst-case minimum overlap over the eigenvalue simplex",
               {{"maximin", "--grid", "61"}, {"maximin", "--lambda", reference}},
               {"grid", "reference"}});
  return p;
}

}  // namespace detail

/// Runs the overlap_tomo command line. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Overlap statistics of mixed qutrit states: densities, sampling and spectrum estimation",
               "overlap_tomo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  // Shared option storage; each subcommand binds what it needs.
  std::vector<double> lambda;
  std::optional<std::string> seed_text;
  std::string n_text = "1e6";
  std::size_t bins = 100;
  std::size_t jpd_bins = 200;
  std::string group = "su3";
  std::string eigenbasis = "identity";
  std::string out_dir = "out";
  unsigned threads = 0;
  std::size_t grid = 0;
  std::size_t resolution = 1001;

  auto add_lambda = [&](CLI::App* c, bool required) {
    auto* o = c->add_option("--lambda", lambda, "Eigenvalues, comma separated")->delimiter(',');
    if (required) o->required();
  };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", out_dir, "Output directory")->capture_default_str(); };
  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", seed_text, "Random seed (falls back to OVERLAP_TOMO_SEED, then 0)");
  };
  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", threads, "Worker threads, 0 for all cores")->capture_default_str();
  };

  auto* pdf = app.add_subcommand("pdf", "Exact overlap density for a qubit (2 values) or qutrit (3 values)");
  add_lambda(pdf, true);
  pdf->add_option("--resolution", resolution, "Points in the sampled CSV")->capture_default_str()->check(CLI::Range(2, 100000000));
  add_out(pdf);

  auto* jpd_cmd = app.add_subcommand("jpd", "Joint density of the partial overlaps on a grid");
  add_lambda(jpd_cmd, true);
  jpd_cmd->add_option("--grid", grid, "Grid intervals per axis (nodes i/N)")->check(CLI::Range(2, 20000));
  add_out(jpd_cmd);

  bool want_jpd = false;
  bool save_samples = false;
  bool no_snap = false;
  auto* sample = app.add_subcommand("sample", "Monte Carlo overlap histogram");
  add_lambda(sample, false);
  add_seed(sample);
  sample->add_option("--n", n_text, "Number of samples (accepts 1e6)")->capture_default_str();
  sample->add_option("--bins", bins, "Histogram bins")->capture_default_str()->check(CLI::Range(2, 100000000));
  sample->add_option("--jpd-bins", jpd_bins, "Bins per axis of the (t1, t2) histogram")
      ->capture_default_str()
      ->check(CLI::Range(2, 100000));
  sample->add_option("--group", group, "su3, so3-uniform (alias so3) or so3-haar")->capture_default_str();
  sample->add_option("--eigenbasis", eigenbasis, "identity, haar, p13, p12 or p23")->capture_default_str();
  sample->add_flag("--jpd", want_jpd, "Also write the (t1, t2) histogram");
  sample->add_flag("--save-samples", save_samples, "Also write every overlap value");
  sample->add_flag("--no-snap", no_snap, "Histogram over [0, 1] even when the support is known");
  add_threads(sample);
  add_out(sample);

  std::string samples_file;
  std::optional<double> qmin, qmax, dq, dqmin, dqmax;
  std::string method = "tailfit";
  std::size_t k = 0;
  auto* estimate = app.add_subcommand("estimate", "Eigenvalues from support limits or overlap samples");
  estimate->add_option("--samples", samples_file, "CSV whose first column holds overlap samples");
  estimate->add_option("--qmin", qmin, "Measured lower support limit");
  estimate->add_option("--qmax", qmax, "Measured upper support limit");
  estimate->add_option("--dq", dq, "One-sigma uncertainty of both limits");
  estimate->add_option("--dqmin", dqmin, "One-sigma uncertainty of q_min");
  estimate->add_option("--dqmax", dqmax, "One-sigma uncertainty of q_max");
  estimate->add_option("--method", method, "minmax or tailfit (samples input only)")->capture_default_str();
  estimate->add_option("--k", k, "Extreme order statistics used per edge (0 for the default)");
  add_out(estimate);

  auto* maximin = app.add_subcommand("maximin", "Worst-case SO(3) minimum overlap");
  add_lambda(maximin, false);
  maximin->add_option("--grid", grid, "Evaluate delta q_min on an N x N eigenvalue grid")->check(CLI::Range(16, 100000));
  add_out(maximin);

  std::size_t n_u = 1000;
  std::size_t budget = 10000;
  std::string sampling = "uniform";
  std::size_t qbins = 50;
  auto* qminw = app.add_subcommand("qminw", "Distribution of the SO(3) minimum over random eigenbases");
  add_lambda(qminw, false);
  add_seed(qminw);
  qminw->add_option("--nu", n_u, "Number of random eigenbases")->capture_default_str();
  qminw->add_option("--budget", budget, "Random rotations per eigenbasis before refinement")->capture_default_str();
  qminw->add_option("--bins", qbins, "Histogram bins")->capture_default_str()->check(CLI::Range(1, 1000000));
  qminw->add_option("--sampling", sampling, "Euler angle law: uniform or haar")->capture_default_str();
  add_threads(qminw);
  add_out(qminw);

  std::string perm = "p13";
  auto* curve = app.add_subcommand("curve", "Closed-form orbit of a permutation eigenbasis");
  add_lambda(curve, false);
  curve->add_option("--perm", perm, "p13, p12 or p23")->capture_default_str();
  curve->add_option("--resolution", resolution, "Points in beta over [0, pi]")->capture_default_str()->check(CLI::Range(2, 100000000));
  add_out(curve);

  std::string figure;
  auto* repro = app.add_subcommand("repro", "Regenerate the data behind a figure (fig1a ... fig7b, or all)");
  repro->add_option("figure", figure, "Figure name, 'all' or 'list'")->required();
  add_threads(repro);
  add_out(repro);

  std::string manifest_path;
  auto* replay = app.add_subcommand("replay", "Rerun a manifest and compare output checksums");
  replay->add_option("manifest", manifest_path, "Path to manifest.json")->required();
  add_threads(replay);
  replay->add_option("--out", out_dir, "Directory for the rerun (default: <manifest dir>/replay)");

  std::vector<std::string> tokens = args;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << kLibraryVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  const std::string command = tokens.front();
  std::vector<std::string> rest(tokens.begin() + 1, tokens.end());
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  const Spectrum reference(0.05, 0.3, 0.65);
  auto spectrum_or_default = [&] { return lambda.empty() ? reference : detail::qutrit_spectrum(lambda, err); };

  try {
    detail::Outputs o{fs::path(out_dir), {}};
    std::vector<std::string> replay_args = detail::replayable(rest);
    std::optional<std::uint64_t> seed;
    json config;

    if (*pdf) {
      std::optional<PiecewisePolynomialDensity> density;
      if (lambda.size() == 1 || lambda.size() == 2) {
        const double l1 = lambda[0];
        const double l2 = lambda.size() == 2 ? lambda[1] : 1.0 - l1;
        if (std::abs(l1 + l2 - 1.0) > kTolerances.spectrum_sum)
          throw UsageError("qubit eigenvalues must sum to one");
        if (lambda.size() == 2 && l1 > l2) err << "warning: eigenvalues reordered to " << detail::join({l2, l1}) << "\n";
        density = special_case_pdf(SpecialCase::qubit(std::min(l1, l2)));
        config = {{"lambda", {std::min(l1, l2), std::max(l1, l2)}}, {"resolution", resolution}};
      } else {
        const Spectrum s = detail::qutrit_spectrum(lambda, err);
        density = overlap_pdf_any(s);
        config = {{"lambda", detail::spectrum_json(s)}, {"resolution", resolution}};
      }
      o.write("density.csv", detail::csv_string([&](std::ostream& s) { io::write_density_csv(s, *density, resolution); }));
      o.write("density.json", io::density_to_json(*density).dump(2) + "\n");
      out << "support [" << io::format_double(density->support_min()) << ", "
          << io::format_double(density->support_max()) << "], " << density->size() << " pieces\n";
    } else if (*jpd_cmd) {
      const Spectrum s = detail::qutrit_spectrum(lambda, err);
      overlap_tomo::detail::require_strict(s);
      const std::size_t n = grid == 0 ? 400 : grid;
      std::ostringstream csv_text;
      io::CsvWriter csv(csv_text, {"t1", "t2", "density"});
      double riemann = 0.0;
      for (std::size_t i = 0; i <= n; ++i) {
        const double t1 = static_cast<double>(i) / static_cast<double>(n);
        for (std::size_t j = 0; j <= n; ++j) {
          const double t2 = static_cast<double>(j) / static_cast<double>(n);
          const double v = jpd(s, t1, t2);
          if (i < n && j < n) riemann += v;
          csv.row({io::format_double(t1), io::format_double(t2), io::format_double(v)});
        }
      }
      riemann /= static_cast<double>(n * n);
      o.write("jpd.csv", csv_text.str());
      config = {{"lambda", detail::spectrum_json(s)}, {"grid", n}};
      out << "grid " << n << "x" << n << ", Riemann sum " << io::format_double(riemann) << "\n";
    } else if (*sample) {
      seed = detail::parse_seed(seed_text);
      ExperimentConfig cfg;
      cfg.seed = *seed;
      cfg.n_samples = detail::parse_count(n_text, "--n");
      cfg.group = detail::parse_group(group);
      cfg.eigenbasis = detail::parse_eigenbasis(eigenbasis);
      cfg.bins = bins;
      cfg.jpd_bins = jpd_bins;
      cfg.spectrum = spectrum_or_default();
      cfg.threads = threads;
      cfg.snap_range = !no_snap;
      cfg.keep_samples = save_samples;
      const auto r = sample_overlaps(cfg);
      o.write("histogram.csv", detail::csv_string([&](std::ostream& s) { io::write_histogram_csv(s, r.histogram); }));
      json summary{{"min", r.min},
                   {"max", r.max},
                   {"snapped", r.snapped},
                   {"range", {r.histogram.lo(), r.histogram.hi()}},
                   {"histogram", io::histogram_to_json(r.histogram)}};
      o.write("summary.json", summary.dump(2) + "\n");
      if (want_jpd) {
        const auto h2 = sample_jpd(cfg);
        o.write("jpd_histogram.csv", detail::csv_string([&](std::ostream& s) { io::write_histogram2d_csv(s, h2); }));
      }
      if (save_samples) {
        o.write("samples.csv", detail::csv_string([&](std::ostream& s) {
                  io::CsvWriter csv(s, {"q"});
                  for (double q : r.samples) csv.row({io::format_double(q)});
                }));
      }
      config = {{"n_samples", cfg.n_samples}, {"group", group == "so3" ? "so3-uniform" : group},
                {"eigenbasis", eigenbasis},    {"bins", cfg.bins},
                {"jpd_bins", cfg.jpd_bins},    {"lambda", detail::spectrum_json(cfg.spectrum)},
                {"snap_range", cfg.snap_range}};
      if (!seed_text) replay_args.insert(replay_args.end(), {"--seed", std::to_string(*seed)});
      out << "samples " << cfg.n_samples << ", min " << io::format_double(r.min) << ", max "
          << io::format_double(r.max) << "\n";
    } else if (*estimate) {
      LimitEstimate limits;
      std::string used = "limits";
      if (!samples_file.empty()) {
        if (qmin || qmax) throw UsageError("give either --samples or --qmin/--qmax, not both");
        const auto xs = io::read_samples_csv(samples_file);
        if (method == "minmax") {
          limits = estimate_limits_from_samples(xs, MinMaxMethod{k == 0 ? 10 : k});
        } else if (method == "tailfit") {
          limits = estimate_limits_from_samples(xs, TailFitMethod{k});
        } else {
          throw UsageError("unknown method '" + method + "'");
        }
        used = method;
        config["samples"] = samples_file;
        config["samples_fnv1a64"] = io::file_hash(samples_file);
      } else {
        if (!qmin || !qmax) throw UsageError("--qmin and --qmax are required without --samples");
        limits.q_min = *qmin;
        limits.q_max = *qmax;
        limits.dq_min = dqmin.value_or(dq.value_or(0.0));
        limits.dq_max = dqmax.value_or(dq.value_or(0.0));
      }
      const auto e = invert_limits(limits);
      o.write("estimate.json", io::estimate_to_json(e, used, limits).dump(2) + "\n");
      config["method"] = used;
      const auto& v = e.spectrum.values();
      out << "lambda " << detail::join({v[0], v[1], v[2]}) << " sigma "
          << detail::join({e.dlambda1, e.dlambda2, e.dlambda3});
      for (const auto& f : e.flags.names()) out << " [" << f << "]";
      out << "\n";
    } else if (*maximin) {
      if (grid != 0) {
        if (!lambda.empty()) throw UsageError("give either --lambda or --grid");
        const auto cells = delta_qmin_grid(grid);
        o.write("grid.csv", detail::csv_string([&](std::ostream& s) { io::write_grid_csv(s, cells); }));
        config = {{"grid", grid}};
        out << "grid " << grid << "x" << grid << "\n";
      } else {
        const Spectrum s = spectrum_or_default();
        const auto lim = support_limits(s);
        MaximinReport r;
        if (lim.q_max - lim.q_min <= 1e-12) {
          r.q_min = r.q_wc = r.q_min_w = r.q12 = r.q23 = lim.q_min;
        } else {
          r = maximin_overlap(s);
        }
        o.write("maximin.json", io::maximin_to_json(r).dump(2) + "\n");
        config = {{"lambda", detail::spectrum_json(s)}};
        out << "q_wc " << io::format_double(r.q_wc) << " via " << to_string(r.attaining) << ", delta_q_min "
            << io::format_double(r.delta_q_min) << "\n";
      }
    } else if (*qminw) {
      seed = detail::parse_seed(seed_text);
      QminWOptions opt;
      opt.n_u = n_u;
      opt.budget = budget;
      opt.seed = *seed;
      opt.bins = qbins;
      opt.sampling = detail::parse_sampling(sampling);
      opt.threads = threads;
      const Spectrum s = spectrum_or_default();
      const auto d = qminw_distribution(s, opt);
      o.write("minima.csv", detail::csv_string([&](std::ostream& os) {
                io::CsvWriter csv(os, {"index", "q_min_w"});
                for (std::size_t i = 0; i < d.minima.size(); ++i) csv.row({std::to_string(i), io::format_double(d.minima[i])});
              }));
      o.write("histogram.csv", detail::csv_string([&](std::ostream& os) { io::write_histogram_csv(os, d.histogram); }));
      json summary{{"q_min", d.q_min},
                   {"q_wc", d.q_wc},
                   {"percentiles", {{"p68", d.percentiles.p68}, {"p95", d.percentiles.p95}, {"p99.7", d.percentiles.p997}}},
                   {"observed_min", *std::min_element(d.minima.begin(), d.minima.end())},
                   {"observed_max", *std::max_element(d.minima.begin(), d.minima.end())},
                   {"violations", d.violations}};
      o.write("summary.json", summary.dump(2) + "\n");
      config = {{"lambda", detail::spectrum_json(s)}, {"n_u", n_u}, {"budget", budget}, {"bins", qbins},
                {"sampling", sampling}};
      if (!seed_text) replay_args.insert(replay_args.end(), {"--seed", std::to_string(*seed)});
      if (d.violations > 0) err << "finding: " << d.violations << " minima exceed q_wc by more than 1e-6\n";
      out << "q_wc " << io::format_double(d.q_wc) << ", p68 " << io::format_double(d.percentiles.p68) << ", p95 "
          << io::format_double(d.percentiles.p95) << ", p99.7 " << io::format_double(d.percentiles.p997) << "\n";
    } else if (*curve) {
      const Spectrum s = spectrum_or_default();
      const Permutation p = detail::parse_permutation(perm);
      std::ostringstream text;
      io::CsvWriter csv(text, {"beta", "t1", "t2", "q"});
      for (std::size_t i = 0; i < resolution; ++i) {
        const double beta = std::numbers::pi * static_cast<double>(i) / static_cast<double>(resolution - 1);
        const auto pt = permutation_curve(p, s, beta);
        csv.row({io::format_double(beta), io::format_double(pt.t.t1), io::format_double(pt.t.t2), io::format_double(pt.q)});
      }
      o.write("curve.csv", text.str());
      config = {{"lambda", detail::spectrum_json(s)}, {"perm", perm}, {"resolution", resolution}};
      if (p != Permutation::P13) config["closed_form_min"] = permutation_min(p, s);
    } else if (*repro) {
      const auto all = detail::presets();
      if (figure == "list") {
        for (const auto& p : all) out << p.name << "  " << p.description << "\n";
        return kOk;
      }
      std::vector<const detail::Preset*> chosen;
      for (const auto& p : all)
        if (figure == "all" || figure == p.name) chosen.push_back(&p);
      if (chosen.empty()) throw UsageError("unknown figure '" + figure + "' (try 'repro list')");
      for (const auto* p : chosen) {
        for (std::size_t i = 0; i < p->runs.size(); ++i) {
          std::vector<std::string> sub = p->runs[i];
          const fs::path dir = o.dir / p->name / p->run_names[i];
          sub.insert(sub.end(), {"--out", dir.string()});
          if (threads != 0 && (sub[0] == "sample" || sub[0] == "qminw"))
            sub.insert(sub.end(), {"--threads", std::to_string(threads)});
          std::ostringstream sub_out;
          const int code = run(sub, sub_out, err);
          if (code != kOk) {
            err << "error: " << p->name << "/" << p->run_names[i] << " failed with exit code " << code << "\n";
            return code;
          }
          out << p->name << "/" << p->run_names[i] << ": " << sub_out.str();
        }
      }
      // Every file below the figure directories, timing sidecars excepted.
      for (const auto* p : chosen) {
        std::vector<std::string> files;
        for (const auto& entry : fs::recursive_directory_iterator(o.dir / p->name)) {
          if (!entry.is_regular_file() || entry.path().filename() == "timing.json") continue;
          files.push_back(fs::relative(entry.path(), o.dir).generic_string());
        }
        std::sort(files.begin(), files.end());
        o.files.insert(o.files.end(), files.begin(), files.end());
      }
      config = {{"figure", figure}};
    } else if (*replay) {
      const fs::path mpath(manifest_path);
      const json m = json::parse(io::read_file(mpath));
      const fs::path dir = replay->count("--out") == 0 ? mpath.parent_path() / "replay" : fs::path(out_dir);
      std::vector<std::string> sub{m.at("command").get<std::string>()};
      for (const auto& a : m.at("args")) sub.push_back(a.get<std::string>());
      sub.insert(sub.end(), {"--out", dir.string()});
      if (threads != 0) sub.insert(sub.end(), {"--threads", std::to_string(threads)});
      std::ostringstream sub_out;
      const int code = run(sub, sub_out, err);
      if (code != kOk) return code;
      const json fresh = json::parse(io::read_file(dir / "manifest.json"));
      bool same = true;
      for (const auto& entry : m.at("outputs")) {
        const std::string path = entry.at("path").get<std::string>();
        const std::string want = entry.at("fnv1a64").get<std::string>();
        const std::string got = fs::exists(dir / path) ? io::file_hash(dir / path) : std::string("missing");
        const bool ok = got == want;
        same = same && ok;
        out << (ok ? "match    " : "MISMATCH ") << path << " " << want << " " << got << "\n";
      }
      same = same && fresh.at("checksum") == m.at("checksum");
      out << (same ? "replay reproduced checksum " : "replay checksum differs: ") << m.at("checksum").get<std::string>()
          << (same ? "" : " vs " + fresh.at("checksum").get<std::string>()) << "\n";
      return same ? kOk : kFailure;
    }

    detail::write_manifest(o, command, replay_args, config, seed, elapsed(), threads);
    out << "wrote " << o.dir.string() << "\n";
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kDomain;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

/// Entry point helper for main().
inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args));
}

}  // namespace overlap_tomo::cli
