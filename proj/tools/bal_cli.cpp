// bal: command-line front end.
//
//   bal run --problem toy_min --runs 20 --seed 7 --out-dir out/
//   bal run --external-sim ./model --marginal normal,0,1 --marginal uniform,-1,1
//   bal compare out/curves.csv --problem toy_min --reference analytical
//   bal problems
//
// Exit codes: 0 success, 1 usage, 2 a run hit max_iterations, 3 unknown
// problem, 4 invalid config, 5 simulator failure or protocol violation,
// 6 a run failed in fitting or grid calibration, 7 file I/O or CSV error.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bal/bal.hpp"
#include "bal/external_simulator.hpp"
#include "bal/io.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kMaxIterations = 2,
  kUnknownProblem = 3,
  kInvalidConfig = 4,
  kSimulatorError = 5,
  kRunFailed = 6,
  kIoError = 7,
};

struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw Failure{code, msg}; }

bal::Marginal parse_marginal(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string p;
  while (std::getline(ss, p, ',')) parts.push_back(p);
  if (parts.size() != 3) fail(kInvalidConfig, "--marginal expects kind,param1,param2 (got '" + text + "')");
  double a = 0, b = 0;
  try {
    a = std::stod(parts[1]);
    b = std::stod(parts[2]);
  } catch (const std::exception&) {
    fail(kInvalidConfig, "--marginal '" + text + "': bad number");
  }
  try {
    if (parts[0] == "normal") return bal::Marginal::normal(a, b);
    if (parts[0] == "lognormal") return bal::Marginal::lognormal(a, b);
    if (parts[0] == "uniform") return bal::Marginal::uniform(a, b);
  } catch (const std::invalid_argument& e) {
    fail(kInvalidConfig, "--marginal '" + text + "': " + e.what());
  }
  fail(kInvalidConfig, "--marginal '" + text + "': kind must be normal, lognormal or uniform");
}

bal::ProblemSpec builtin_problem(const std::string& name) {
  auto p = bal::find_problem(name);
  if (!p) {
    std::string known;
    for (const auto& n : bal::problem_names()) known += (known.empty() ? "" : ", ") + n;
    fail(kUnknownProblem, "unknown problem '" + name + "' (known: " + known + ")");
  }
  return *p;
}

bal::ALConfig build_config(const std::string& config_path, const std::vector<std::string>& overrides,
                           std::optional<std::uint64_t> seed) {
  try {
    nlohmann::json j = config_path.empty() ? nlohmann::json::object() : bal::read_json_file(config_path);
    for (const auto& o : overrides) bal::apply_override(j, o);
    if (seed) j["seed"] = *seed;
    return bal::config_from_json(j);
  } catch (const bal::ConfigError& e) {
    fail(kInvalidConfig, e.what());
  }
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) fail(kIoError, "cannot write '" + path.string() + "'");
  body(out);
  if (!out) fail(kIoError, "error writing '" + path.string() + "'");
}

// Accepts 1e6 as well as 1000000.
void sample_count_option(CLI::App* app, std::int64_t& out) {
  app->add_option_function<double>(
      "--mcs-samples",
      [&out](const double& v) {
        if (!(v >= 1.0 && v <= 9e15) || v != std::floor(v))
          throw CLI::ValidationError("--mcs-samples", "must be a positive integer");
        out = static_cast<std::int64_t>(v);
      },
      "Sample size of the MCS reference");
}

struct RunOptions {
  std::string problem;
  std::string external_sim;
  std::vector<std::string> sim_args;
  std::vector<std::string> marginals;
  std::string config;
  std::vector<std::string> overrides;
  int runs = 1;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out_dir = ".";
  std::string reference = "auto";
  std::int64_t mcs_samples = 1000000;
  std::uint64_t mcs_seed = 20240501;
  double band = 1e-3;
};

int run_command(const RunOptions& o) {
  bal::ProblemSpec problem;
  bool builtin = false;
  if (!o.external_sim.empty()) {
    if (!o.problem.empty()) fail(kUsage, "--problem and --external-sim are mutually exclusive");
    if (o.marginals.empty()) fail(kInvalidConfig, "--external-sim needs at least one --marginal");
    for (const auto& m : o.marginals) problem.marginals.push_back(parse_marginal(m));
    problem.name = fs::path(o.external_sim).filename().string();
    try {
      problem.simulator = bal::ExternalSimulator::make(o.external_sim, o.sim_args);
    } catch (const bal::SimulatorError& e) {
      fail(kSimulatorError, e.what());
    }
  } else {
    if (o.problem.empty()) fail(kUsage, "one of --problem or --external-sim is required");
    problem = builtin_problem(o.problem);
    builtin = true;
  }

  const bal::ALConfig base = build_config(o.config, o.overrides, o.seed);
  if (o.runs < 1) fail(kUsage, "--runs must be >= 1");
  if (o.jobs < 1) fail(kUsage, "--jobs must be >= 1");

  // Reference distribution for the report.
  std::string reference_name;
  std::optional<bal::EmpiricalDistribution> mcs;
  std::string ref = o.reference;
  if (ref == "auto") ref = problem.reference ? "analytical" : (builtin ? "mcs" : "none");
  if (ref == "analytical") {
    if (!problem.reference) fail(kUsage, "problem '" + problem.name + "' has no analytical reference");
    reference_name = "analytical";
  } else if (ref == "mcs") {
    if (o.mcs_samples < 1) fail(kUsage, "--mcs-samples must be >= 1");
    std::cerr << "computing MCS reference (" << o.mcs_samples << " samples)\n";
    try {
      mcs.emplace(bal::mcs_reference(problem, static_cast<std::size_t>(o.mcs_samples), o.mcs_seed));
    } catch (const bal::SimulatorError& e) {
      fail(kSimulatorError, e.what());
    }
    reference_name = "mcs (" + std::to_string(o.mcs_samples) + " samples, seed " + std::to_string(o.mcs_seed) + ")";
  } else if (ref != "none") {
    fail(kUsage, "--reference must be auto, analytical, mcs or none");
  }

  const fs::path out_dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(kIoError, "cannot create '" + out_dir.string() + "': " + ec.message());

  // With scrambling off every run integrates over the same pool.
  std::optional<bal::Matrix> shared_pool;
  if (!base.scramble) shared_pool = bal::make_pool(problem.marginals, base.N, false, 0);

  std::vector<bal::RunTrace> traces(static_cast<std::size_t>(o.runs));
  std::vector<bal::RunSummary> summaries(traces.size());
  std::atomic<int> next{0};
  std::mutex log_mu;
  bal::warning_sink() = [&log_mu](const std::string& msg) {
    std::lock_guard lock(log_mu);
    std::cerr << "warning: " << msg << '\n';
  };

  auto worker = [&]() {
    for (int r; (r = next++) < o.runs;) {
      bal::ALConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(r);
      const auto t0 = std::chrono::steady_clock::now();
      bal::RunTrace tr;
      try {
        tr = bal::run(problem, cfg, shared_pool ? &*shared_pool : nullptr);
      } catch (const std::exception& e) {
        tr.status = bal::RunStatus::FitFailed;
        tr.message = e.what();
      }
      auto& s = summaries[static_cast<std::size_t>(r)];
      s.seed = cfg.seed;
      s.status = tr.status;
      s.message = tr.message;
      s.total_calls = tr.total_calls;
      s.iterations = static_cast<int>(tr.iterations.size());
      s.final_max_H = tr.iterations.empty() ? NAN : tr.iterations.back().max_H;
      s.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      {
        std::lock_guard lock(log_mu);
        std::cerr << "run " << (r + 1) << "/" << o.runs << ": " << bal::to_string(tr.status) << ", "
                  << tr.total_calls << " calls, " << s.wall_time_s << " s\n";
      }
      traces[static_cast<std::size_t>(r)] = std::move(tr);
    }
  };
  {
    std::vector<std::thread> pool;
    const int jobs = std::min(o.jobs, o.runs);
    for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  // Artifacts, assembled sequentially.
  std::vector<bal::CurvesTable> tables;
  for (std::size_t r = 0; r < traces.size(); ++r) {
    const auto& tr = traces[r];
    const fs::path dir = o.runs == 1 ? out_dir : out_dir / ("run_" + std::to_string(r + 1));
    fs::create_directories(dir, ec);
    if (ec) fail(kIoError, "cannot create '" + dir.string() + "': " + ec.message());
    write_file(dir / "trace.csv", [&](std::ostream& os) { bal::write_trace_csv(os, tr, problem.dimension()); });
    if (tr.final_curves.grid.y.size() == 0) continue;
    write_file(dir / "curves.csv", [&](std::ostream& os) { bal::write_curves_csv(os, tr.final_curves); });
    tables.push_back(bal::to_table(tr.final_curves));
    if (!reference_name.empty()) {
      const auto& t = tables.back();
      summaries[r].comparison = mcs ? bal::compare_curves(t, bal::empirical_reference(*mcs, t.column("y")), o.band)
                                    : bal::compare_curves(t, problem.reference, o.band);
    }
  }
  if (o.runs > 1 && !tables.empty()) {
    const auto ens = bal::ensemble_curves(tables, base.h);
    write_file(out_dir / "ensemble.csv", [&](std::ostream& os) { bal::write_ensemble_csv(os, ens); });
  }
  write_file(out_dir / "report.txt",
             [&](std::ostream& os) { bal::write_report(os, problem.name, base, summaries, reference_name); });
  {
    std::ifstream in(out_dir / "report.txt");
    std::cout << in.rdbuf();
  }

  int code = kOk;
  for (const auto& s : summaries) {
    switch (s.status) {
      case bal::RunStatus::Converged: break;
      case bal::RunStatus::MaxIterations: code = std::max(code, +kMaxIterations); break;
      case bal::RunStatus::SimulatorFailed: code = std::max(code, +kSimulatorError); break;
      case bal::RunStatus::FitFailed:
      case bal::RunStatus::DegenerateGrid: code = std::max(code, +kRunFailed); break;
    }
  }
  // A simulator failure outranks a fit failure.
  for (const auto& s : summaries)
    if (s.status == bal::RunStatus::SimulatorFailed) code = kSimulatorError;
  return code;
}

struct CompareOptions {
  std::string curves;
  std::string reference = "analytical";
  std::string problem;
  std::int64_t mcs_samples = 1000000;
  std::uint64_t mcs_seed = 20240501;
  double band = 1e-3;
  std::string out;
};

int compare_command(const CompareOptions& o) {
  bal::CurvesTable est;
  try {
    est = bal::read_curves_csv(o.curves);
    for (const char* col : {"y", "mean_cdf", "mean_ccdf", "mean_pdf"}) (void)est.column(col);
  } catch (const bal::CsvError& e) {
    fail(kIoError, o.curves + ": " + e.what());
  }

  bal::Comparison cmp;
  try {
    if (o.reference == "analytical" || o.reference == "mcs") {
      if (o.problem.empty()) fail(kUsage, "--problem is required for an analytical or mcs reference");
      const auto problem = builtin_problem(o.problem);
      if (o.reference == "analytical") {
        if (!problem.reference) fail(kUsage, "problem '" + o.problem + "' has no analytical reference");
        cmp = bal::compare_curves(est, problem.reference, o.band);
      } else {
        if (o.mcs_samples < 1) fail(kUsage, "--mcs-samples must be >= 1");
        const auto ed = bal::mcs_reference(problem, static_cast<std::size_t>(o.mcs_samples), o.mcs_seed);
        cmp = bal::compare_curves(est, bal::empirical_reference(ed, est.column("y")), o.band);
      }
    } else {
      const auto ref = bal::read_curves_csv(o.reference);
      cmp = bal::compare_curves(est, bal::table_reference(ref), o.band);
    }
  } catch (const bal::CsvError& e) {
    fail(kIoError, e.what());
  }

  std::cout << "metric,value\n"
            << "max_abs_cdf_band," << bal::fmt17(cmp.max_abs_cdf_band) << '\n'
            << "ks," << bal::fmt17(cmp.ks) << '\n'
            << "max_abs_pdf," << bal::fmt17(cmp.max_abs_pdf) << '\n'
            << "points," << cmp.points << '\n';
  if (o.out.empty()) {
    std::cout << '\n';
    bal::write_comparison_csv(std::cout, cmp);
  } else {
    write_file(o.out, [&](std::ostream& os) { bal::write_comparison_csv(os, cmp); });
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian active learning of response distributions with GP surrogates"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run the active-learning loop");
  run->add_option("--problem", ro.problem, "Built-in problem name");
  run->add_option("--external-sim", ro.external_sim, "Simulator executable (line protocol on stdin/stdout)");
  run->add_option("--sim-arg", ro.sim_args, "Argument passed to the external simulator (repeatable)");
  run->add_option("--marginal", ro.marginals, "Input marginal kind,param1,param2 for --external-sim (repeatable)");
  run->add_option("--config", ro.config, "JSON config file");
  run->add_option("--set", ro.overrides, "Config override key=value (repeatable)");
  run->add_option("--runs", ro.runs, "Number of independent runs");
  run->add_option("--seed", ro.seed, "Base seed; run r uses seed + r");
  run->add_option("--jobs", ro.jobs, "Runs executed in parallel");
  run->add_option("--out-dir", ro.out_dir, "Output directory");
  run->add_option("--reference", ro.reference, "auto, analytical, mcs or none");
  sample_count_option(run, ro.mcs_samples);
  run->add_option("--mcs-seed", ro.mcs_seed, "Seed of the MCS reference");
  run->add_option("--band", ro.band, "CDF error band: reference F in [band, 1 - band]");

  CompareOptions co;
  auto* cmp = app.add_subcommand("compare", "Compare a curves.csv with a reference distribution");
  cmp->add_option("curves", co.curves, "curves.csv to evaluate")->required();
  cmp->add_option("--reference", co.reference, "analytical, mcs, or another curves.csv");
  cmp->add_option("--problem", co.problem, "Built-in problem for analytical/mcs references");
  sample_count_option(cmp, co.mcs_samples);
  cmp->add_option("--mcs-seed", co.mcs_seed, "Seed of the MCS reference");
  cmp->add_option("--band", co.band, "CDF error band: reference F in [band, 1 - band]");
  cmp->add_option("--out", co.out, "Write per-point errors here instead of stdout");

  auto* list = app.add_subcommand("problems", "List built-in problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (run->parsed()) return run_command(ro);
    if (cmp->parsed()) return compare_command(co);
    if (list->parsed()) {
      for (const auto& n : bal::problem_names()) {
        const auto p = *bal::find_problem(n);
        std::cout << n << " (d=" << p.dimension() << (p.reference ? ", analytical reference" : "") << ")\n";
      }
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const bal::SimulatorError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSimulatorError;
  }
  return kUsage;
}
