#pragma once

// hyspec command-line front end. `run` is the whole program so tests can call
// it in-process.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hyspec/error.hpp"
#include "hyspec/estimators.hpp"
#include "hyspec/io.hpp"
#include "hyspec/lsd.hpp"
#include "hyspec/rng.hpp"
#include "hyspec/simgen.hpp"
#include "hyspec/spectral.hpp"
#include "hyspec/sync.hpp"
#include "hyspec/tickdata.hpp"

namespace hyspec::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInputError = 2, kContractError = 3, kNoConvergence = 4 };

using io::Json;

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Run record written next to every output set.
struct Manifest {
  std::string subcommand;
  Json params = Json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;

  Json to_json(double wall_seconds) const {
    Json j;
    j["subcommand"] = subcommand;
    j["params"] = params;
    Json digests = Json::array();
    for (const auto& path : inputs)
      digests.push_back({{"path", path}, {"sha256", sha256_hex(io::read_file(path))}});
    j["inputs"] = std::move(digests);
    j["outputs"] = outputs;
    j["seed"] = seed ? Json(*seed) : Json(nullptr);
    j["version"] = kVersion;
    j["rng"] = Rng::algorithm;
    j["wall_time_seconds"] = wall_seconds;
    return j;
  }
};

namespace detail {

inline std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
}

inline std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> f;
  std::size_t pos = 0;
  while (true) {
    const auto next = spec.find(':', pos);
    f.push_back(spec.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (f.size() != 3) throw ValidationError("--grid must be xmin:xmax:steps");
  const auto lo = hyspec::detail::parse_double(f[0]);
  const auto hi = hyspec::detail::parse_double(f[1]);
  const auto steps = hyspec::detail::parse_double(f[2]);
  if (!lo || !hi || !steps || !std::isfinite(*lo) || !std::isfinite(*hi))
    throw ValidationError("--grid: cannot parse '" + spec + "'");
  if (!(*hi > *lo)) throw ValidationError("--grid: xmax must exceed xmin");
  if (*steps < 2 || *steps != std::floor(*steps)) throw ValidationError("--grid: steps must be an integer >= 2");
  return linspace(*lo, *hi, static_cast<std::size_t>(*steps));
}

inline Matrix sigma_from_flag(const std::string& flag, std::size_t p, std::vector<std::string>& inputs) {
  if (flag == "identity") return Matrix::identity(p);
  inputs.push_back(flag);
  Matrix m = io::load_matrix_file(flag);
  if (m.rows() != p) throw ValidationError("sigma file is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                           ", expected " + std::to_string(p) + "x" + std::to_string(p));
  return m;
}

}  // namespace detail

/// Parsed flag values for every subcommand.
struct Options {
  std::string out;
  unsigned threads = 1;

  // simulate / study
  std::size_t p = 0;
  std::vector<std::size_t> n;
  double horizon = 1.0;
  std::string sigma = "identity";
  std::uint64_t seed = 0;
  std::size_t proxy_grid = 0;
  std::size_t reps = 10;
  std::size_t lsd_points = 4000;

  // estimate
  std::string in;
  std::string estimator;
  bool prices_raw = false;
  bool auto_open = false;
  std::optional<double> in_horizon;

  // spectrum
  std::optional<std::size_t> top_k;

  // lsd
  std::string model;
  std::string grid;
  double epsilon = 1e-3;
  std::string regime;
  SolverConfig solver;

  // compare
  std::string esd;
  std::string lsd;
};

// ---------------------------------------------------------------------------
// Subcommands. Each returns an exit code and writes into opts.out.

inline int cmd_simulate(const Options& o, Manifest& man, std::ostream& out) {
  if (o.p < 1) throw ValidationError("--p must be >= 1");
  std::vector<std::size_t> counts = o.n;
  if (counts.size() == 1) counts.assign(o.p, counts.front());
  if (counts.size() != o.p) throw ValidationError("--n takes one count or one per asset");
  SimConfig cfg;
  cfg.p = o.p;
  cfg.n_per_asset = counts;
  cfg.horizon = o.horizon;
  cfg.sigma = detail::sigma_from_flag(o.sigma, o.p, man.inputs);
  cfg.seed = o.seed;
  if (o.proxy_grid > 0) cfg.proxy_grid = o.proxy_grid;
  man.seed = o.seed;
  man.params = {{"p", o.p}, {"n", counts}, {"horizon", o.horizon}, {"sigma", o.sigma}, {"seed", o.seed},
                {"proxy_grid", o.proxy_grid}};

  const TickPanel panel = simulate_panel(cfg);
  detail::prepare_dir(o.out);
  write_ticks(detail::in_dir(o.out, "ticks.csv"), panel);
  man.outputs.push_back("ticks.csv");
  if (cfg.proxy_grid) {
    const CovMatrix proxy = proxy_icv(cfg);
    io::write_json(detail::in_dir(o.out, "proxy_icv.json"), io::to_json(proxy));
    io::write_file(detail::in_dir(o.out, "proxy_icv.csv"), io::matrix_csv(proxy.asset_ids, proxy.values));
    man.outputs.insert(man.outputs.end(), {"proxy_icv.json", "proxy_icv.csv"});
  }
  out << "simulated " << o.p << " assets, " << panel[0].num_returns() << "+ ticks each, into " << o.out << "\n";
  return kOk;
}

inline int cmd_estimate(const Options& o, Manifest& man, std::ostream& out) {
  TickCsvOptions csv;
  csv.prices_raw = o.prices_raw;
  csv.auto_prepend_open = o.auto_open;
  csv.horizon = o.in_horizon;
  man.inputs.push_back(o.in);
  man.params = {{"in", o.in}, {"estimator", o.estimator}, {"prices_raw", o.prices_raw}, {"auto_open", o.auto_open},
                {"horizon", o.in_horizon ? Json(*o.in_horizon) : Json(nullptr)}, {"threads", o.threads}};
  const TickPanel panel = load_ticks(o.in, csv);

  CovMatrix cov;
  switch (estimator_kind_from_string(o.estimator)) {
    case EstimatorKind::RCV: cov = rcv(panel); break;
    case EstimatorKind::HY: cov = hy_matrix(panel, o.threads); break;
    case EstimatorKind::SRCV: cov = srcv_matrix(panel, o.threads); break;
    default: throw ValidationError("--estimator must be rcv, hy or srcv");
  }
  detail::prepare_dir(o.out);
  io::write_json(detail::in_dir(o.out, "matrix.json"), io::to_json(cov));
  io::write_file(detail::in_dir(o.out, "matrix.csv"), io::matrix_csv(cov.asset_ids, cov.values));
  man.outputs.insert(man.outputs.end(), {"matrix.json", "matrix.csv"});
  if (cov.kind == EstimatorKind::HY) {
    io::write_file(detail::in_dir(o.out, "pair_counts.csv"), io::counts_csv(cov.asset_ids, cov.pair_counts));
    man.outputs.push_back("pair_counts.csv");
  }
  for (const auto& [a, b] : cov.flagged_pairs)
    out << "warning: pair (" << cov.asset_ids[a] << ", " << cov.asset_ids[b]
        << ") has fewer than 2 synchronized returns; HY value used\n";
  out << to_string(cov.kind) << " matrix (" << cov.dim() << "x" << cov.dim() << ") written to " << o.out << "\n";
  return kOk;
}

inline int cmd_spectrum(const Options& o, Manifest& man, std::ostream& out) {
  man.inputs.push_back(o.in);
  const CovMatrix cov = io::cov_from_json(io::parse_json_text(io::read_file(o.in), o.in));
  const std::size_t p = cov.dim();
  const std::size_t k = o.top_k.value_or(std::min<std::size_t>(3, p));
  if (k > p) throw ValidationError("--top-k " + std::to_string(k) + " exceeds dimension " + std::to_string(p));
  man.params = {{"in", o.in}, {"top_k", k}};

  const EigenSystem es = eigen_sym(cov.values);
  const ScreeModes modes = scree_and_modes(es, k);
  detail::prepare_dir(o.out);
  io::write_json(detail::in_dir(o.out, "spectrum.json"), io::spectrum_json(cov, es, modes));

  std::string ev = "rank,eigenvalue\n";
  for (std::size_t i = 0; i < es.values.size(); ++i) ev += std::to_string(i + 1) + "," + io::csv_number(es.values[i]) + "\n";
  io::write_file(detail::in_dir(o.out, "eigenvalues.csv"), ev);

  const SpectralMeasure m = esd(es.values);
  std::string cdf = "x,F\n";
  for (double x : m.atoms()) cdf += io::csv_number(x) + "," + io::csv_number(m.cdf(x)) + "\n";
  io::write_file(detail::in_dir(o.out, "esd_cdf.csv"), cdf);

  std::string vecs = "asset_id";
  for (std::size_t j = 0; j < k; ++j) vecs += ",v" + std::to_string(j + 1);
  vecs += "\n";
  for (std::size_t i = 0; i < p; ++i) {
    vecs += cov.asset_ids[i];
    for (std::size_t j = 0; j < k; ++j) vecs += "," + io::csv_number(modes.top_vectors[j][i]);
    vecs += "\n";
  }
  io::write_file(detail::in_dir(o.out, "top_vectors.csv"), vecs);
  man.outputs.insert(man.outputs.end(), {"spectrum.json", "eigenvalues.csv", "esd_cdf.csv", "top_vectors.csv"});

  char line[160];
  std::snprintf(line, sizeof line, "p = %zu, largest eigenvalue %.6g, smallest %.6g", p, es.values.front(),
                es.values.back());
  out << line;
  if (modes.gap_ratio) {
    std::snprintf(line, sizeof line, ", gap ratio %.6g", *modes.gap_ratio);
    out << line;
  }
  out << "\n";
  return kOk;
}

inline int cmd_lsd(const Options& o, Manifest& man, std::ostream& out, std::ostream& err) {
  man.inputs.push_back(o.model);
  const Json mj = io::parse_json_text(io::read_file(o.model), o.model);
  const std::string base = std::filesystem::path(o.model).parent_path().string();
  if (mj.is_object() && mj.contains("H") && mj["H"].is_object() && mj["H"].contains("matrix_file") &&
      mj["H"]["matrix_file"].is_string()) {
    std::filesystem::path f = mj["H"]["matrix_file"].get<std::string>();
    man.inputs.push_back((f.is_relative() ? std::filesystem::path(base) / f : f).string());
  }
  const AnyLsdModel model = io::lsd_model_from_json(mj, base, o.regime);
  const std::vector<double> grid = detail::parse_grid(o.grid);
  if (!(o.epsilon > 0.0)) throw ValidationError("--epsilon must be positive");
  if (!(o.solver.tol > 0.0) || o.solver.max_iters < 1) throw ValidationError("--tol and --max-iters must be positive");
  man.params = {{"model", o.model}, {"grid", o.grid}, {"epsilon", o.epsilon}, {"regime", o.regime},
                {"tol", o.solver.tol}, {"max_iters", o.solver.max_iters}, {"threads", o.threads}};

  for (const auto& w : validate_assumptions(model).warnings()) err << "warning: " << w << "\n";
  const LsdCurve curve = lsd_density(model, grid, o.epsilon, o.solver, GridOptions{true, 64, o.threads});
  const CdfSamples cdf = lsd_cdf(curve);
  detail::prepare_dir(o.out);
  io::write_json(detail::in_dir(o.out, "lsd.json"), io::lsd_output_json(model, curve, cdf));
  io::write_file(detail::in_dir(o.out, "lsd.csv"), io::lsd_csv(curve, cdf));
  man.outputs.insert(man.outputs.end(), {"lsd.json", "lsd.csv"});

  out << "solved " << grid.size() << " grid points, " << curve.failures << " not converged\n";
  if (static_cast<double>(curve.failures) > 0.01 * static_cast<double>(grid.size())) {
    err << "error: solver did not converge at " << curve.failures << " of " << grid.size()
        << " grid points (partial output kept)\n";
    return kNoConvergence;
  }
  return kOk;
}

inline int cmd_compare(const Options& o, Manifest& man, std::ostream& out) {
  man.inputs = {o.esd, o.lsd};
  man.params = {{"esd", o.esd}, {"lsd", o.lsd}};
  const Json ej = io::parse_json_text(io::read_file(o.esd), o.esd);
  const Json lj = io::parse_json_text(io::read_file(o.lsd), o.lsd);
  const SpectralMeasure emp = io::spectrum_measure_from_json(ej, o.esd);

  double ks = 0.0;
  std::vector<double> xs(emp.atoms());
  std::function<double(double)> reference;
  std::string reference_kind;
  std::optional<SpectralMeasure> other;
  std::optional<CdfSamples> curve;
  if (lj.is_object() && lj.contains("eigenvalues")) {
    other = io::spectrum_measure_from_json(lj, o.lsd);
    ks = ks_distance(emp, *other);
    xs.insert(xs.end(), other->atoms().begin(), other->atoms().end());
    reference = [&](double x) { return other->cdf(x); };
    reference_kind = "spectrum";
  } else {
    curve = io::lsd_cdf_from_json(lj, o.lsd);
    ks = ks_distance(emp, *curve);
    xs.insert(xs.end(), curve->x.begin(), curve->x.end());
    reference = [&](double x) { return (*curve)(x); };
    reference_kind = "lsd";
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  detail::prepare_dir(o.out);
  std::string overlay = "x,F_emp,F_lsd\n";
  for (double x : xs)
    overlay += io::csv_number(x) + "," + io::csv_number(emp.cdf(x)) + "," + io::csv_number(reference(x)) + "\n";
  io::write_file(detail::in_dir(o.out, "overlay.csv"), overlay);
  Json cj;
  cj["ks"] = ks;
  cj["reference"] = reference_kind;
  cj["points"] = xs.size();
  io::write_json(detail::in_dir(o.out, "compare.json"), cj);
  man.outputs.insert(man.outputs.end(), {"compare.json", "overlay.csv"});

  char line[64];
  std::snprintf(line, sizeof line, "KS distance %.6f\n", ks);
  out << line;
  return kOk;
}

inline int cmd_study(const Options& o, Manifest& man, std::ostream& out) {
  if (o.p < 1) throw ValidationError("--p must be >= 1");
  if (o.n.size() != 1) throw ValidationError("study takes a single --n");
  StudyConfig cfg;
  cfg.p = o.p;
  cfg.n = o.n.front();
  cfg.horizon = o.horizon;
  cfg.sigma = detail::sigma_from_flag(o.sigma, o.p, man.inputs);
  cfg.reps = o.reps;
  cfg.seed = o.seed;
  cfg.proxy_grid = o.proxy_grid > 0 ? o.proxy_grid : 10000;
  cfg.lsd_points = o.lsd_points;
  cfg.epsilon = o.epsilon;
  cfg.threads = o.threads;
  man.seed = o.seed;
  man.params = {{"p", cfg.p}, {"n", cfg.n}, {"horizon", cfg.horizon}, {"sigma", o.sigma}, {"reps", cfg.reps},
                {"seed", cfg.seed}, {"proxy_grid", cfg.proxy_grid}, {"lsd_points", cfg.lsd_points},
                {"epsilon", cfg.epsilon}, {"threads", cfg.threads}};
  const StudyResult r = replicate_study(cfg);
  detail::prepare_dir(o.out);
  io::write_json(detail::in_dir(o.out, "study.json"), io::study_json(r));
  man.outputs.push_back("study.json");
  char line[200];
  std::snprintf(line, sizeof line, "mean KS vs limit %.6f, vs proxy %.6f, negative eigenvalues %zu\n",
                r.mean_ks_lsd, r.mean_ks_proxy, r.total_negative);
  out << line;
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Spectral analysis of asynchronous high-frequency covariance estimators", "hyspec"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print version and RNG algorithm");

  Options o;
  auto add_threads = [&](CLI::App* s) {
    s->add_option("--threads", o.threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  };

  auto* sim = app.add_subcommand("simulate", "Simulate an asynchronous tick panel");
  sim->add_option("--p", o.p, "Number of assets")->required();
  sim->add_option("--n", o.n, "Ticks per asset (one value or a comma list)")->required()->delimiter(',');
  sim->add_option("--horizon", o.horizon, "Trading horizon D");
  sim->add_option("--sigma", o.sigma, "identity or a covariance-rate matrix file (JSON/CSV)");
  sim->add_option("--seed", o.seed, "64-bit seed");
  sim->add_option("--proxy-grid", o.proxy_grid, "Also write the fine-grid proxy ICV with this many steps");
  sim->add_option("--out", o.out, "Output directory")->required();

  auto* est = app.add_subcommand("estimate", "Covariance matrix from a tick CSV");
  est->add_option("--in", o.in, "Tick CSV")->required();
  est->add_option("--estimator", o.estimator, "rcv | hy | srcv")->required()->check(CLI::IsMember({"rcv", "hy", "srcv"}));
  est->add_flag("--prices-raw", o.prices_raw, "Value column holds prices, not log prices");
  est->add_flag("--auto-open", o.auto_open, "Insert an opening tick at time 0 when missing");
  est->add_option("--horizon", o.in_horizon, "Panel horizon (default: largest time)");
  est->add_option("--out", o.out, "Output directory")->required();
  add_threads(est);

  auto* spec = app.add_subcommand("spectrum", "Eigen-decomposition of a matrix JSON");
  spec->add_option("--in", o.in, "Matrix JSON")->required();
  spec->add_option("--top-k", o.top_k, "Number of leading eigenvectors to report");
  spec->add_option("--out", o.out, "Output directory")->required();

  auto* lsd = app.add_subcommand("lsd", "Limiting spectral density from a model JSON");
  lsd->add_option("--model", o.model, "Model JSON")->required();
  lsd->add_option("--grid", o.grid, "xmin:xmax:steps")->required();
  lsd->add_option("--epsilon", o.epsilon, "Imaginary offset for Stieltjes inversion");
  lsd->add_option("--regime", o.regime, "c_positive | c_zero")->check(CLI::IsMember({"c_positive", "c_zero"}));
  lsd->add_option("--tol", o.solver.tol, "Fixed-point residual tolerance (relative)");
  lsd->add_option("--max-iters", o.solver.max_iters, "Iteration cap per grid point");
  lsd->add_option("--out", o.out, "Output directory")->required();
  add_threads(lsd);

  auto* cmp = app.add_subcommand("compare", "KS distance between a spectrum and a limit (or another spectrum)");
  cmp->add_option("--esd", o.esd, "Spectrum JSON")->required();
  cmp->add_option("--lsd", o.lsd, "LSD JSON or a second spectrum JSON")->required();
  cmp->add_option("--out", o.out, "Output directory")->required();

  auto* study = app.add_subcommand("study", "Replicated simulation study of the HY spectrum");
  study->add_option("--p", o.p, "Number of assets")->required();
  study->add_option("--n", o.n, "Ticks per asset")->required();
  study->add_option("--horizon", o.horizon, "Trading horizon D");
  study->add_option("--sigma", o.sigma, "identity or a covariance-rate matrix file");
  study->add_option("--reps", o.reps, "Replications");
  study->add_option("--seed", o.seed, "Master seed");
  study->add_option("--proxy-grid", o.proxy_grid, "Fine-grid steps for the proxy (default 10000)");
  study->add_option("--lsd-points", o.lsd_points, "Grid points for the limiting CDF");
  study->add_option("--epsilon", o.epsilon, "Imaginary offset for Stieltjes inversion");
  study->add_option("--out", o.out, "Output directory")->required();
  add_threads(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  if (show_version) {
    out << "hyspec " << kVersion << " (rng: " << Rng::algorithm << ")\n";
    return kOk;
  }
  const auto subs = app.get_subcommands();
  if (subs.empty()) {
    out << app.help();
    return kInputError;
  }

  Manifest man;
  man.subcommand = subs.front()->get_name();
  const auto start = std::chrono::steady_clock::now();
  int code = kOk;
  try {
    if (man.subcommand == "simulate") code = cmd_simulate(o, man, out);
    else if (man.subcommand == "estimate") code = cmd_estimate(o, man, out);
    else if (man.subcommand == "spectrum") code = cmd_spectrum(o, man, out);
    else if (man.subcommand == "lsd") code = cmd_lsd(o, man, out, err);
    else if (man.subcommand == "compare") code = cmd_compare(o, man, out);
    else if (man.subcommand == "study") code = cmd_study(o, man, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNoConvergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kContractError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kContractError;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    io::write_json(detail::in_dir(o.out, "manifest.json"), man.to_json(wall));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return code;
}

}  // namespace hyspec::cli
