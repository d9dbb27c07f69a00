#ifndef BAL_IO_HPP
#define BAL_IO_HPP

// Run configuration files, CSV artifacts, reference comparison and batch
// reports. Configs are JSON objects whose keys are the ALConfig field names,
// with the GA settings nested under "ga".

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bal/bal.hpp"

namespace bal {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Round-trippable decimal form.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Config

inline nlohmann::json to_json(const ALConfig& c) {
  return {{"N", c.N},
          {"n0", c.n0},
          {"rho1", c.rho1},
          {"rho2", c.rho2},
          {"h", c.h},
          {"p", c.p},
          {"lambda", c.lambda},
          {"epsilon", c.epsilon},
          {"consecutive_required", c.consecutive_required},
          {"max_iterations", c.max_iterations},
          {"seed", c.seed},
          {"scramble", c.scramble},
          {"gp_restarts", c.gp_restarts},
          {"ga",
           {{"population", c.ga.population},
            {"generations", c.ga.generations},
            {"crossover_rate", c.ga.crossover_rate},
            {"mutation_rate", c.ga.mutation_rate},
            {"elitism", c.ga.elitism},
            {"restarts", c.ga.restarts},
            {"tournament", c.ga.tournament},
            {"sbx_eta", c.ga.sbx_eta},
            {"mutation_scale", c.ga.mutation_scale},
            {"screening_points", c.ga.screening_points}}}};
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const std::string& key, T& out) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError("");
      out = j.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      // Accept 1e5 and 100000.0 but not 2.5.
      if (!j.is_number()) throw ConfigError("");
      const double v = j.get<double>();
      if (v != std::floor(v)) throw ConfigError("");
      if (std::is_unsigned_v<T> && v < 0) throw ConfigError("");
      out = static_cast<T>(v);
    } else {
      if (!j.is_number()) throw ConfigError("");
      out = j.get<T>();
    }
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': bad value " + j.dump());
  }
}

}  // namespace detail

/// Fields absent from `j` keep their defaults. Unknown keys are errors.
inline ALConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ALConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "N") detail::read_field(v, key, c.N);
    else if (key == "n0") detail::read_field(v, key, c.n0);
    else if (key == "rho1") detail::read_field(v, key, c.rho1);
    else if (key == "rho2") detail::read_field(v, key, c.rho2);
    else if (key == "h") detail::read_field(v, key, c.h);
    else if (key == "p") detail::read_field(v, key, c.p);
    else if (key == "lambda") detail::read_field(v, key, c.lambda);
    else if (key == "epsilon") detail::read_field(v, key, c.epsilon);
    else if (key == "consecutive_required") detail::read_field(v, key, c.consecutive_required);
    else if (key == "max_iterations") detail::read_field(v, key, c.max_iterations);
    else if (key == "seed") detail::read_field(v, key, c.seed);
    else if (key == "scramble") detail::read_field(v, key, c.scramble);
    else if (key == "gp_restarts") detail::read_field(v, key, c.gp_restarts);
    else if (key == "ga") {
      if (!v.is_object()) throw ConfigError("config field 'ga' must be an object");
      for (const auto& [gk, gv] : v.items()) {
        const std::string name = "ga." + gk;
        if (gk == "population") detail::read_field(gv, name, c.ga.population);
        else if (gk == "generations") detail::read_field(gv, name, c.ga.generations);
        else if (gk == "crossover_rate") detail::read_field(gv, name, c.ga.crossover_rate);
        else if (gk == "mutation_rate") detail::read_field(gv, name, c.ga.mutation_rate);
        else if (gk == "elitism") detail::read_field(gv, name, c.ga.elitism);
        else if (gk == "restarts") detail::read_field(gv, name, c.ga.restarts);
        else if (gk == "tournament") detail::read_field(gv, name, c.ga.tournament);
        else if (gk == "sbx_eta") detail::read_field(gv, name, c.ga.sbx_eta);
        else if (gk == "mutation_scale") detail::read_field(gv, name, c.ga.mutation_scale);
        else if (gk == "screening_points") detail::read_field(gv, name, c.ga.screening_points);
        else throw ConfigError("unknown config field '" + name + "'");
      }
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

/// Applies `key=value` to a config object. Dotted keys address nested
/// objects ("ga.population=200"). The value is parsed as JSON.
inline void apply_override(nlohmann::json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw ConfigError("override '" + key + "': cannot parse value '" + text + "'");
  }
  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + key + "': empty key component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + key + "': '" + part + "' is not an object");
      *node = nlohmann::json::object();
    }
    start = dot + 1;
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

inline const std::vector<std::string>& curves_columns() {
  static const std::vector<std::string> cols = {"y",         "mean_cdf",   "mean_ccdf",
                                                "mean_pdf",  "sigma_bar",  "cov_cdf",
                                                "cov_ccdf",  "var_mean_cdf", "var_sigma_bar"};
  return cols;
}

inline void write_curves_csv(std::ostream& os, const CurveEstimate& c) {
  const auto& cols = curves_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (Eigen::Index t = 0; t < c.grid.y.size(); ++t) {
    os << fmt17(c.grid.y(t)) << ',' << fmt17(c.mean_cdf(t)) << ',' << fmt17(c.mean_ccdf(t)) << ','
       << fmt17(c.mean_pdf(t)) << ',' << fmt17(c.sigma_bar(t)) << ',' << fmt17(c.cov_cdf(t)) << ','
       << fmt17(c.cov_ccdf(t)) << ',' << fmt17(c.var_mean_cdf(t)) << ',' << fmt17(c.var_sigma_bar(t))
       << '\n';
  }
}

inline void write_trace_csv(std::ostream& os, const RunTrace& tr, int dimension) {
  os << "iteration,n,y_star,max_H";
  for (int j = 0; j < dimension; ++j) os << ",x" << (j + 1);
  os << ",acquired_y,wall_time_ms\n";
  for (std::size_t i = 0; i < tr.iterations.size(); ++i) {
    const auto& it = tr.iterations[i];
    os << i << ',' << it.n << ',' << fmt17(it.y_star) << ',' << fmt17(it.max_H);
    for (int j = 0; j < dimension; ++j) os << ',' << (it.acquired_x ? fmt17((*it.acquired_x)(j)) : "");
    os << ',' << (it.acquired_x ? fmt17(it.acquired_y) : "") << ',' << fmt17(it.wall_time_ms) << '\n';
  }
}

/// A curves.csv file read back: column name -> values.
struct CurvesTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // values[column][row]

  std::size_t rows() const { return values.empty() ? 0 : values.front().size(); }
  const std::vector<double>& column(std::string_view name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return values[k];
    throw CsvError("missing column '" + std::string(name) + "'");
  }
  bool has(std::string_view name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
  }
};

inline CurvesTable read_curves_csv(std::istream& is) {
  CurvesTable t;
  std::string line;
  if (!std::getline(is, line)) throw CsvError("empty curves file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  t.values.resize(t.columns.size());
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++row;
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= t.columns.size()) throw CsvError("row " + std::to_string(row) + ": too many cells");
      try {
        std::size_t used = 0;
        t.values[k].push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw CsvError("row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
      ++k;
    }
    if (k != t.columns.size()) throw CsvError("row " + std::to_string(row) + ": too few cells");
  }
  if (t.rows() == 0) throw CsvError("curves file has no data rows");
  const auto& y = t.column("y");
  for (std::size_t i = 1; i < y.size(); ++i)
    if (!(y[i] > y[i - 1])) throw CsvError("y column is not strictly increasing");
  return t;
}

inline CurvesTable read_curves_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  return read_curves_csv(in);
}

// ---------------------------------------------------------------------------
// Comparison against a reference distribution

/// Linear interpolation of (xs, ys) at x; NaN outside [xs.front(), xs.back()].
inline double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (xs.empty() || x < xs.front() || x > xs.back()) return NAN;
  const auto it = std::lower_bound(xs.begin(), xs.end(), x);
  const auto i = static_cast<std::size_t>(it - xs.begin());
  if (xs[i] == x) return ys[i];
  const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return (1.0 - w) * ys[i - 1] + w * ys[i];
}

struct Comparison {
  std::vector<double> y;
  std::vector<double> cdf_error;  // estimate minus reference
  std::vector<double> ccdf_error;
  std::vector<double> pdf_error;
  std::vector<double> reference_cdf;
  double max_abs_cdf_band = 0.0;  // over reference F in [band, 1 - band]
  double ks = 0.0;                // max |F_hat - F| over all grid points
  double max_abs_pdf = 0.0;
  std::size_t points = 0;
};

using ReferenceCurve = std::function<CurvePoint(double)>;

inline Comparison compare_curves(const CurvesTable& est, const ReferenceCurve& ref, double band = 1e-3) {
  Comparison c;
  const auto& y = est.column("y");
  const auto& F = est.column("mean_cdf");
  const auto& S = est.column("mean_ccdf");
  const auto& f = est.column("mean_pdf");
  for (std::size_t i = 0; i < y.size(); ++i) {
    const CurvePoint r = ref(y[i]);
    if (std::isnan(r.cdf)) continue;
    c.y.push_back(y[i]);
    c.reference_cdf.push_back(r.cdf);
    c.cdf_error.push_back(F[i] - r.cdf);
    c.ccdf_error.push_back(S[i] - r.ccdf);
    c.pdf_error.push_back(f[i] - r.pdf);
    const double e = std::abs(F[i] - r.cdf);
    c.ks = std::max(c.ks, e);
    if (r.cdf >= band && r.cdf <= 1.0 - band) c.max_abs_cdf_band = std::max(c.max_abs_cdf_band, e);
    c.max_abs_pdf = std::max(c.max_abs_pdf, std::abs(f[i] - r.pdf));
  }
  c.points = c.y.size();
  if (c.points == 0) throw CsvError("reference does not overlap the curve grid");
  return c;
}

/// Another curves table used as the reference, interpolated linearly onto
/// the estimate's grid; points outside its range are skipped.
inline ReferenceCurve table_reference(const CurvesTable& ref) {
  return [&ref](double y) {
    const auto& ys = ref.column("y");
    return CurvePoint{interpolate(ys, ref.column("mean_cdf"), y),
                      interpolate(ys, ref.column("mean_ccdf"), y),
                      interpolate(ys, ref.column("mean_pdf"), y)};
  };
}

/// Empirical reference. The histogram bin width is the spacing of `grid_y`.
inline ReferenceCurve empirical_reference(const EmpiricalDistribution& ed, const std::vector<double>& grid_y) {
  const double width =
      grid_y.size() > 1 ? (grid_y.back() - grid_y.front()) / static_cast<double>(grid_y.size() - 1) : 1.0;
  return [&ed, width](double y) { return CurvePoint{ed.cdf(y), ed.ccdf(y), ed.histogram_pdf(y, width)}; };
}

inline void write_comparison_csv(std::ostream& os, const Comparison& c) {
  os << "y,reference_cdf,cdf_error,ccdf_error,pdf_error\n";
  for (std::size_t i = 0; i < c.points; ++i) {
    os << fmt17(c.y[i]) << ',' << fmt17(c.reference_cdf[i]) << ',' << fmt17(c.cdf_error[i]) << ','
       << fmt17(c.ccdf_error[i]) << ',' << fmt17(c.pdf_error[i]) << '\n';
  }
}

inline CurvesTable to_table(const CurveEstimate& c) {
  std::stringstream ss;
  write_curves_csv(ss, c);
  return read_curves_csv(ss);
}

// ---------------------------------------------------------------------------
// Batch reports

struct EnsembleCurves {
  std::vector<std::string> columns;  // curve columns other than y
  std::vector<double> y;
  std::vector<std::vector<double>> mean;  // mean[column][point]
  std::vector<std::vector<double>> stddev;
};

/// Pointwise mean and sample std-dev across runs on a uniform grid over the
/// intersection of the runs' ranges (each run interpolated linearly).
inline EnsembleCurves ensemble_curves(const std::vector<CurvesTable>& runs, int points) {
  if (runs.empty()) throw std::invalid_argument("ensemble_curves: no runs");
  double lo = -INFINITY, hi = INFINITY;
  for (const auto& r : runs) {
    lo = std::max(lo, r.column("y").front());
    hi = std::min(hi, r.column("y").back());
  }
  EnsembleCurves e;
  if (!(hi > lo) || points < 2) return e;
  e.columns.assign(curves_columns().begin() + 1, curves_columns().end());
  for (int t = 0; t < points; ++t) e.y.push_back(lo + (hi - lo) * t / (points - 1));
  e.mean.assign(e.columns.size(), std::vector<double>(e.y.size(), 0.0));
  e.stddev = e.mean;
  const double R = static_cast<double>(runs.size());
  for (std::size_t k = 0; k < e.columns.size(); ++k) {
    for (std::size_t t = 0; t < e.y.size(); ++t) {
      double s = 0.0, s2 = 0.0;
      for (const auto& r : runs) {
        const double v = interpolate(r.column("y"), r.column(e.columns[k]), e.y[t]);
        s += v;
        s2 += v * v;
      }
      const double m = s / R;
      e.mean[k][t] = m;
      e.stddev[k][t] = runs.size() > 1 ? std::sqrt(std::max(0.0, (s2 - R * m * m) / (R - 1.0))) : 0.0;
    }
  }
  return e;
}

inline void write_ensemble_csv(std::ostream& os, const EnsembleCurves& e) {
  os << 'y';
  for (const auto& c : e.columns) os << ',' << c << "_mean," << c << "_std";
  os << '\n';
  for (std::size_t t = 0; t < e.y.size(); ++t) {
    os << fmt17(e.y[t]);
    for (std::size_t k = 0; k < e.columns.size(); ++k) os << ',' << fmt17(e.mean[k][t]) << ',' << fmt17(e.stddev[k][t]);
    os << '\n';
  }
}

struct RunSummary {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::MaxIterations;
  std::string message;
  int total_calls = 0;
  int iterations = 0;
  double final_max_H = NAN;
  double wall_time_s = 0.0;
  std::optional<Comparison> comparison;
};

struct CallStatistics {
  std::size_t runs = 0;
  double mean = NAN;
  double cov = NAN;  // sample std-dev / mean
};

/// Statistics of total_calls over runs that produced curves (any status
/// other than a failure before the first fit).
inline CallStatistics call_statistics(const std::vector<RunSummary>& runs) {
  CallStatistics s;
  std::vector<double> v;
  for (const auto& r : runs)
    if (r.status == RunStatus::Converged || r.status == RunStatus::MaxIterations) v.push_back(r.total_calls);
  s.runs = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.cov = std::sqrt(ss / static_cast<double>(v.size() - 1)) / s.mean;
  } else {
    s.cov = 0.0;
  }
  return s;
}

inline void write_report(std::ostream& os, const std::string& problem, const ALConfig& cfg,
                         const std::vector<RunSummary>& runs, const std::string& reference_name) {
  os << "problem: " << problem << '\n';
  os << "config: " << to_json(cfg).dump() << '\n';
  os << "runs: " << runs.size() << "\n\n";
  os << "run  seed                  status          calls  iters  final_max_H          time_s";
  if (!reference_name.empty()) os << "   max_cdf_err(band)    ks                   max_pdf_err";
  os << '\n';
  char buf[512];
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    std::snprintf(buf, sizeof buf, "%-4zu %-21llu %-15s %-6d %-6d %-20.6g %-8.2f", i + 1,
                  static_cast<unsigned long long>(r.seed), std::string(to_string(r.status)).c_str(),
                  r.total_calls, r.iterations, r.final_max_H, r.wall_time_s);
    os << buf;
    if (r.comparison) {
      std::snprintf(buf, sizeof buf, " %-20.6g %-20.6g %-20.6g", r.comparison->max_abs_cdf_band,
                    r.comparison->ks, r.comparison->max_abs_pdf);
      os << buf;
    }
    os << '\n';
    if (!r.message.empty()) os << "     " << r.message << '\n';
  }
  const auto s = call_statistics(runs);
  os << '\n';
  if (s.runs == 0) {
    os << "total_calls: no completed runs\n";
  } else {
    os << "total_calls: mean " << fmt17(s.mean) << ", CoV " << fmt17(s.cov) << " over " << s.runs
       << " completed run(s)\n";
  }
  std::size_t converged = 0;
  for (const auto& r : runs) converged += r.status == RunStatus::Converged;
  os << "converged: " << converged << " of " << runs.size() << '\n';
  if (!reference_name.empty()) {
    double worst_cdf = 0.0, worst_ks = 0.0, worst_pdf = 0.0;
    for (const auto& r : runs) {
      if (!r.comparison) continue;
      worst_cdf = std::max(worst_cdf, r.comparison->max_abs_cdf_band);
      worst_ks = std::max(worst_ks, r.comparison->ks);
      worst_pdf = std::max(worst_pdf, r.comparison->max_abs_pdf);
    }
    os << "reference: " << reference_name << '\n';
    os << "worst max_cdf_err(band) " << fmt17(worst_cdf) << ", worst ks " << fmt17(worst_ks)
       << ", worst max_pdf_err " << fmt17(worst_pdf) << '\n';
  }
}

}  // namespace bal

#endif  // BAL_IO_HPP
