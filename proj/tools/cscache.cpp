// Command-line front end: generate, solve, sweep, report.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cscache/harness.hpp"

namespace fs = std::filesystem;
using namespace cscache;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

struct SolveArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t caches = 4;
  std::size_t m = 10;
  std::size_t q = 25;
  std::string strategy = "pairwise-union";
  std::string method = kMethodCosrAa;
  std::size_t end_time = 0;  // 0: last instant of the horizon
  std::string trace;
  std::string messages;
};

json solve_one(const SolveArgs& a) {
  const auto cfg = config_or_default(a.config);
  cfg.validate();
  const auto scenario = generate_scenario(cfg.n_sensors, cfg.sources, cfg.horizon, a.seed);
  const auto layout = assign_coverage(scenario.field, a.caches);
  const auto basis = std::make_shared<const SparsifyingBasis>(cfg.n_sensors, cfg.window);
  const std::size_t end = a.end_time == 0 ? cfg.horizon - 1 : a.end_time;
  const DataMatrix data = window_of(scenario.series, end, cfg.window);
  const auto meas = measure_window(sample_schedule(layout, cfg.horizon, a.m, a.seed), data);
  const double energy = data.values.squaredNorm();
  auto err = [&](const Eigen::MatrixXd& est) { return (est - data.values).squaredNorm() / energy; };

  json out{{"method", a.method}, {"seed", a.seed},     {"n_caches", a.caches},
           {"m", a.m},           {"end_time", end},    {"window", cfg.window}};
  std::vector<double> per_cache;
  ConvergenceReport report;
  if (a.method == kMethodCosrAa) {
    const auto plan = select_anchors(layout, parse_strategy(a.strategy), a.q, a.seed);
    const auto problem = make_problem(basis, meas, layout, plan);
    SyncNetwork net(problem.neighbor_lists(), problem.dimension(), !a.messages.empty());
    std::vector<std::vector<double>> trace_nmse;
    SolveOptions opts;
    opts.network = &net;
    opts.keep_trace = !a.trace.empty();
    if (opts.keep_trace)
      opts.observer = [&](const AdmmState& st) {
        std::vector<double> row;
        for (const auto& cs : st.caches) row.push_back(err(reconstruct(*basis, cs.z)));
        trace_nmse.push_back(std::move(row));
      };
    const auto res = solve_cosr_aa(problem, cfg.solver, opts);
    for (const auto& z : res.z) per_cache.push_back(err(reconstruct(*basis, z)));
    report = res.report;
    out["q"] = a.q;
    out["strategy"] = a.strategy;
    out["comm"] = {{"scalars_per_round", report.comm.per_round_scalars},
                   {"total_scalars", report.comm.total_scalars},
                   {"total_bytes", report.comm.total_bytes},
                   {"full_consensus_scalars", report.comm.full_consensus_scalars},
                   {"reduction_ratio", report.comm.reduction_ratio}};
    if (!a.trace.empty()) {
      auto os = open_out(a.trace);
      write_trace(os, report.trace, trace_nmse);
    }
    if (!a.messages.empty()) {
      auto os = open_out(a.messages);
      write_message_log(os, net.log());
    }
  } else if (a.method == kMethodCentralized) {
    const auto res = solve_centralized(meas, basis, cfg.solver);
    per_cache.push_back(err(reconstruct(*basis, res.z.front())));
    report = res.report;
  } else if (a.method == kMethodNoncollab || a.method == kMethodAverage ||
             a.method == kMethodPartition) {
    std::vector<Eigen::MatrixXd> ests;
    report.converged = true;
    for (const auto& r : solve_noncollaborative(meas, basis, cfg.solver)) {
      ests.push_back(reconstruct(*basis, r.z.front()));
      report.converged &= r.report.converged;
      report.iterations = std::max(report.iterations, r.report.iterations);
    }
    if (a.method == kMethodNoncollab)
      for (const auto& e : ests) per_cache.push_back(err(e));
    else if (a.method == kMethodAverage)
      per_cache.push_back(err(baseline_average(ests)));
    else
      per_cache.push_back(err(baseline_partition(ests, layout)));
  } else {
    throw std::invalid_argument("unknown method '" + a.method + "'");
  }
  double mean = 0.0;
  for (double v : per_cache) mean += v;
  out["nmse"] = mean / static_cast<double>(per_cache.size());
  out["nmse_per_cache"] = per_cache;
  out["converged"] = report.converged;
  out["iterations"] = report.iterations;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative compressive sensing recovery across edge caches"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the default experiment config as JSON and exit");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a sensor field or a learning dataset");
  gen->require_subcommand(1);
  auto* gen_field = gen->add_subcommand("field", "Deployment, source trajectories and sensor series");
  std::string field_config, field_out = "field";
  std::uint64_t field_seed = 1;
  std::size_t field_caches = 4;
  gen_field->add_option("--config", field_config, "Experiment config (JSON)");
  gen_field->add_option("--seed", field_seed, "Scenario seed");
  gen_field->add_option("--caches", field_caches, "Number of caches for the coverage file");
  gen_field->add_option("--out", field_out, "Output directory");

  auto* gen_data = gen->add_subcommand("dataset", "Windowed recovery instances with train/validation/test split");
  std::string data_config, data_out = "dataset";
  std::size_t deployments = 40;
  DatasetSplit split;
  gen_data->add_option("--config", data_config, "Experiment config (JSON); first entry of each axis is used");
  gen_data->add_option("--deployments", deployments, "Deployment scenarios (400 for full scale)");
  gen_data->add_option("--train", split.train, "Training windows per deployment");
  gen_data->add_option("--validation", split.validation, "Validation windows per deployment");
  gen_data->add_option("--test", split.test, "Test windows per deployment");
  gen_data->add_option("--out", data_out, "Output directory");

  // solve
  auto* solve = app.add_subcommand("solve", "Recover one window with one method and print a JSON summary");
  SolveArgs sa;
  solve->add_option("--config", sa.config, "Experiment config (JSON) for field and solver settings");
  solve->add_option("--seed", sa.seed, "Scenario seed");
  solve->add_option("--caches", sa.caches, "Number of caches C");
  solve->add_option("-m,--measurements", sa.m, "Measurements per cache per instant M");
  solve->add_option("-q,--anchors", sa.q, "Anchor nodes per cache pair Q");
  solve->add_option("--strategy", sa.strategy, "global | pairwise-global | pairwise-union");
  solve->add_option("--method", sa.method, "cosr-aa | centralized | noncollab | avg | partition");
  solve->add_option("--end-time", sa.end_time, "Last instant of the window (default: end of horizon)");
  solve->add_option("--trace", sa.trace, "Write the per-iteration residual trace (cosr-aa)");
  solve->add_option("--messages", sa.messages, "Write the per-message log (cosr-aa)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep and write results.csv and summary.json");
  std::string sweep_config, sweep_out;
  std::size_t sweep_workers = 0;
  sweep->add_option("--config", sweep_config, "Experiment config (JSON)")->required();
  sweep->add_option("--out", sweep_out, "Output directory (overrides output_dir)");
  sweep->add_option("--workers", sweep_workers, "Worker threads (overrides workers)");

  // report
  auto* report = app.add_subcommand("report", "Seed-average a results CSV into a JSON summary");
  std::string report_in, report_out;
  report->add_option("csv", report_in, "results.csv from a sweep")->required();
  report->add_option("--out", report_out, "Write the summary here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_config) {
      std::cout << json(ExperimentConfig{}).dump(2) << '\n';
      return 0;
    }
    if (gen_field->parsed()) {
      const auto cfg = config_or_default(field_config);
      const auto sc = generate_scenario(cfg.n_sensors, cfg.sources, cfg.horizon, field_seed);
      const fs::path dir(field_out);
      auto dep = open_out(dir / "deployment.tsv");
      write_deployment(dep, sc.field);
      auto traj = open_out(dir / "series.tsv");
      write_trajectory(traj, sc.series);
      auto src = open_out(dir / "sources.tsv");
      write_trajectory(src, sc.trajectories.values);
      auto cov = open_out(dir / "coverage.tsv");
      write_coverage(cov, assign_coverage(sc.field, field_caches));
      std::cout << "wrote " << dir.string() << '\n';
    } else if (gen_data->parsed()) {
      const auto ex = export_dataset(config_or_default(data_config), deployments, split, data_out);
      for (const auto& f : ex.files) std::cout << "wrote " << f.string() << '\n';
    } else if (solve->parsed()) {
      std::cout << solve_one(sa).dump(2) << '\n';
    } else if (sweep->parsed()) {
      auto cfg = load_config(sweep_config);
      if (!sweep_out.empty()) cfg.output_dir = sweep_out;
      if (sweep_workers > 0) cfg.workers = sweep_workers;
      const auto records = run_sweep(cfg);
      const fs::path dir(cfg.output_dir);
      auto csv = open_out(dir / "results.csv");
      write_csv(csv, records);
      auto summary = open_out(dir / "summary.json");
      summary << summary_json(records).dump(2) << '\n';
      auto used = open_out(dir / "config.json");
      used << json(cfg).dump(2) << '\n';
      std::cout << records.size() << " records, config " << config_hash(cfg) << ", wrote "
                << dir.string() << '\n';
    } else if (report->parsed()) {
      std::ifstream is(report_in);
      if (!is) throw std::runtime_error("cannot read " + report_in);
      const auto summary = summary_json(read_csv(is)).dump(2);
      if (report_out.empty()) {
        std::cout << summary << '\n';
      } else {
        auto os = open_out(report_out);
        os << summary << '\n';
      }
    } else {
      std::cout << app.help();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
