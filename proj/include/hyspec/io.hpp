#pragma once

// JSON and CSV exchange formats. JSON floats use the shortest text that
// round-trips to the same double; CSV floats use 17 significant digits.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyspec/error.hpp"
#include "hyspec/estimators.hpp"
#include "hyspec/lsd.hpp"
#include "hyspec/matrix.hpp"
#include "hyspec/simgen.hpp"
#include "hyspec/spectral.hpp"
#include "hyspec/tickdata.hpp"

namespace hyspec::io {

using Json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

inline std::string csv_number(double v) { return detail::format_double(v); }

// Checked JSON accessors that turn type errors into ParseError.
inline const Json& require(const Json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

inline double as_number(const Json& j, const std::string& ctx) {
  if (!j.is_number()) throw ParseError(ctx + ": expected a number");
  return j.get<double>();
}

inline std::vector<double> as_numbers(const Json& j, const std::string& ctx) {
  if (!j.is_array()) throw ParseError(ctx + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(as_number(v, ctx));
  return out;
}

inline Matrix matrix_from_rows(const Json& rows, const std::string& ctx) {
  if (!rows.is_array() || rows.empty()) throw ParseError(ctx + ": 'rows' must be a non-empty array");
  const std::size_t p = rows.size();
  Matrix m(p, rows[0].is_array() ? rows[0].size() : 0);
  for (std::size_t i = 0; i < p; ++i) {
    const auto row = as_numbers(rows[i], ctx);
    if (row.size() != m.cols()) throw ParseError(ctx + ": ragged matrix rows");
    for (std::size_t j = 0; j < row.size(); ++j) m(i, j) = row[j];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Covariance matrices.

inline Json to_json(const CovMatrix& cov) {
  Json j;
  j["kind"] = std::string(to_string(cov.kind));
  j["p"] = cov.dim();
  j["asset_ids"] = cov.asset_ids;
  Json rows = Json::array();
  for (std::size_t i = 0; i < cov.dim(); ++i) rows.push_back(std::vector<double>(cov.values.row(i).begin(), cov.values.row(i).end()));
  j["rows"] = std::move(rows);
  if (!cov.pair_counts.empty()) j["pair_counts"] = cov.pair_counts;
  if (!cov.flagged_pairs.empty()) {
    Json flagged = Json::array();
    for (const auto& [a, b] : cov.flagged_pairs) flagged.push_back({cov.asset_ids[a], cov.asset_ids[b]});
    j["flagged_pairs"] = std::move(flagged);
  }
  return j;
}

inline CovMatrix cov_from_json(const Json& j) {
  const std::string ctx = "matrix JSON";
  CovMatrix cov;
  const auto& kind = require(j, "kind", ctx);
  if (!kind.is_string()) throw ParseError(ctx + ": 'kind' must be a string");
  cov.kind = estimator_kind_from_string(kind.get<std::string>());
  cov.values = matrix_from_rows(require(j, "rows", ctx), ctx);
  if (!cov.values.square()) throw ParseError(ctx + ": matrix is not square");
  const std::size_t p = cov.values.rows();
  if (j.contains("p") && (!j["p"].is_number_unsigned() || j["p"].get<std::size_t>() != p))
    throw ParseError(ctx + ": 'p' does not match the number of rows");
  if (j.contains("asset_ids")) {
    const auto& ids = j["asset_ids"];
    if (!ids.is_array() || ids.size() != p) throw ParseError(ctx + ": 'asset_ids' must list p names");
    for (const auto& id : ids) {
      if (!id.is_string()) throw ParseError(ctx + ": asset ids must be strings");
      cov.asset_ids.push_back(id.get<std::string>());
    }
  } else {
    for (std::size_t i = 0; i < p; ++i) cov.asset_ids.push_back("X" + std::to_string(i + 1));
  }
  return cov;
}

inline std::string matrix_csv(const std::vector<std::string>& ids, const Matrix& m) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << ids[i];
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << csv_number(m(i, j));
    out << '\n';
  }
  return out.str();
}

inline std::string counts_csv(const std::vector<std::string>& ids, const std::vector<std::vector<std::size_t>>& counts) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << ids[i];
  out << '\n';
  for (const auto& row : counts) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
  return out.str();
}

/// Square numeric CSV; a first line that does not parse as numbers is a header.
inline Matrix parse_matrix_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    std::vector<double> row;
    bool numeric = true;
    for (auto f : fields) {
      const auto v = detail::parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;
      throw ParseError("matrix CSV: non-numeric field", line_no);
    }
    if (!rows.empty() && row.size() != rows[0].size()) throw ParseError("matrix CSV: ragged rows", line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("matrix CSV: no numeric rows");
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  if (!m.square()) throw ParseError("matrix CSV: matrix is not square");
  return m;
}

/// Matrix from a JSON file (matrix object or bare array of rows) or a CSV file.
inline Matrix load_matrix_file(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
    const Json j = parse_json_text(text, path);
    const Matrix m = j.is_array() ? matrix_from_rows(j, path) : matrix_from_rows(require(j, "rows", path), path);
    if (!m.square()) throw ParseError(path + ": matrix is not square");
    return m;
  }
  return parse_matrix_csv(text);
}

// ---------------------------------------------------------------------------
// Spectra.

inline Json esd_cdf_points(const SpectralMeasure& m) {
  Json pts = Json::array();
  for (double x : m.atoms()) pts.push_back({x, m.cdf(x)});
  return pts;
}

inline Json spectrum_json(const CovMatrix& cov, const EigenSystem& es, const ScreeModes& modes) {
  Json j;
  j["kind"] = std::string(to_string(cov.kind));
  j["p"] = cov.dim();
  j["asset_ids"] = cov.asset_ids;
  j["eigenvalues"] = es.values;
  j["esd_cdf"] = esd_cdf_points(esd(es.values));
  j["top_vectors"] = modes.top_vectors;
  j["gap_ratio"] = modes.gap_ratio ? Json(*modes.gap_ratio) : Json(nullptr);
  j["trace"] = cov.values.trace();
  j["negative_eigenvalues"] =
      static_cast<std::size_t>(std::count_if(es.values.begin(), es.values.end(), [](double v) { return v < 0.0; }));
  j["sweeps"] = es.sweeps;
  return j;
}

inline SpectralMeasure spectrum_measure_from_json(const Json& j, const std::string& ctx) {
  const auto ev = as_numbers(require(j, "eigenvalues", ctx), ctx + " eigenvalues");
  if (ev.empty()) throw ParseError(ctx + ": empty eigenvalue list");
  return esd(ev);
}

// ---------------------------------------------------------------------------
// LSD models and outputs.

/// Model JSON: {regime, c?, tau_bar?, H: {atoms, weights} | {matrix_file}, tau?}.
/// A relative matrix_file resolves against `base_dir`.
inline AnyLsdModel lsd_model_from_json(const Json& j, const std::string& base_dir, const std::string& regime_flag = "") {
  const std::string ctx = "model JSON";
  if (!j.is_object()) throw ParseError(ctx + ": expected an object");
  std::string regime = regime_flag;
  if (j.contains("regime")) {
    if (!j["regime"].is_string()) throw ParseError(ctx + ": 'regime' must be a string");
    const std::string r = j["regime"].get<std::string>();
    if (!regime.empty() && regime != r)
      throw ValidationError("regime flag '" + regime + "' contradicts model regime '" + r + "'");
    regime = r;
  }
  if (regime != "c_positive" && regime != "c_zero")
    throw ParseError(ctx + ": regime must be 'c_positive' or 'c_zero'");

  const Json& h = require(j, "H", ctx);
  SpectralMeasure H = SpectralMeasure::point_mass(1.0);
  if (h.contains("matrix_file")) {
    if (!h["matrix_file"].is_string()) throw ParseError(ctx + ": 'matrix_file' must be a string");
    std::filesystem::path file = h["matrix_file"].get<std::string>();
    if (file.is_relative()) file = std::filesystem::path(base_dir) / file;
    H = esd(load_matrix_file(file.string()));
  } else {
    auto atoms = as_numbers(require(h, "atoms", ctx + " H"), ctx + " H.atoms");
    auto weights = as_numbers(require(h, "weights", ctx + " H"), ctx + " H.weights");
    try {
      H = SpectralMeasure(std::move(atoms), std::move(weights));
    } catch (const Error& e) {
      throw ValidationError(ctx + ": " + e.what());
    }
  }

  if (regime == "c_zero") {
    ZeroCModel m;
    m.H = std::move(H);
    m.tau_bar = j.contains("tau_bar") ? as_number(j["tau_bar"], ctx + " tau_bar") : 1.0;
    if (!(m.tau_bar > 0.0)) throw ValidationError(ctx + ": tau_bar must be positive");
    return m;
  }
  LsdModel m;
  m.H = std::move(H);
  m.c = as_number(require(j, "c", ctx), ctx + " c");
  if (!(m.c > 0.0) || !std::isfinite(m.c)) throw ValidationError(ctx + ": c must be positive");
  if (j.contains("tau")) {
    m.tau.breakpoints = as_numbers(require(j["tau"], "breakpoints", ctx + " tau"), ctx + " tau.breakpoints");
    m.tau.values = as_numbers(require(j["tau"], "values", ctx + " tau"), ctx + " tau.values");
  }
  if (!m.tau.well_formed() || !m.tau.nonnegative())
    throw ValidationError(ctx + ": tau breakpoints must partition [0, 1] with nonnegative values");
  return m;
}

inline Json lsd_output_json(const AnyLsdModel& model, const LsdCurve& curve, const CdfSamples& cdf) {
  Json j;
  j["regime"] = std::holds_alternative<LsdModel>(model) ? "c_positive" : "c_zero";
  j["epsilon"] = curve.epsilon;
  j["grid"] = curve.x;
  std::vector<double> re, im, res;
  std::vector<int> iters;
  std::vector<bool> conv;
  for (const auto& pt : curve.points) {
    re.push_back(pt.s.real());
    im.push_back(pt.s.imag());
    res.push_back(pt.residual);
    iters.push_back(pt.iterations);
    conv.push_back(pt.converged);
  }
  j["s_re"] = re;
  j["s_im"] = im;
  j["density"] = curve.density;
  j["cdf"] = cdf.F;
  j["residuals"] = res;
  j["iters"] = iters;
  j["converged"] = conv;
  j["failures"] = curve.failures;
  j["assumption_warnings"] = validate_assumptions(model).warnings();
  return j;
}

inline CdfSamples lsd_cdf_from_json(const Json& j, const std::string& ctx) {
  CdfSamples c;
  c.x = as_numbers(require(j, "grid", ctx), ctx + " grid");
  c.F = as_numbers(require(j, "cdf", ctx), ctx + " cdf");
  if (c.x.size() != c.F.size() || c.x.empty()) throw ParseError(ctx + ": grid and cdf lengths differ");
  for (std::size_t i = 1; i < c.x.size(); ++i)
    if (!(c.x[i] > c.x[i - 1])) throw ParseError(ctx + ": grid must be strictly increasing");
  return c;
}

inline std::string lsd_csv(const LsdCurve& curve, const CdfSamples& cdf) {
  std::ostringstream out;
  out << "x,density,cdf,s_re,s_im,residual,iters,converged\n";
  for (std::size_t i = 0; i < curve.x.size(); ++i) {
    const auto& pt = curve.points[i];
    out << csv_number(curve.x[i]) << ',' << csv_number(curve.density[i]) << ',' << csv_number(cdf.F[i]) << ','
        << csv_number(pt.s.real()) << ',' << csv_number(pt.s.imag()) << ',' << csv_number(pt.residual) << ','
        << pt.iterations << ',' << (pt.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Study.

inline Json study_json(const StudyResult& r) {
  Json params;
  params["p"] = r.config.p;
  params["n"] = r.config.n;
  params["horizon"] = r.config.horizon;
  params["reps"] = r.config.reps;
  params["seed"] = r.config.seed;
  params["proxy_grid"] = r.config.proxy_grid;
  params["lsd_points"] = r.config.lsd_points;
  params["epsilon"] = r.config.epsilon;
  params["c"] = r.c;
  Json j;
  j["params"] = std::move(params);
  Json per_rep = Json::array();
  Json samples = Json::array();
  for (const auto& rep : r.reps) {
    Json e;
    e["seed"] = rep.seed;
    e["ks_lsd"] = rep.ks_lsd;
    e["ks_proxy"] = rep.ks_proxy;
    e["negative_eigenvalues"] = rep.negative_eigenvalues;
    e["width_5_95"] = rep.width_5_95;
    per_rep.push_back(std::move(e));
    samples.push_back(rep.eigenvalues);
  }
  j["per_rep_ks"] = std::move(per_rep);
  j["mean_ks"] = {{"lsd", r.mean_ks_lsd}, {"proxy", r.mean_ks_proxy}};
  j["total_negative_eigenvalues"] = r.total_negative;
  j["lsd_failures"] = r.lsd_failures;
  j["eigenvalue_samples"] = std::move(samples);
  return j;
}

}  // namespace hyspec::io
