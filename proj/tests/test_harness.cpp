#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cscache/harness.hpp"

using namespace cscache;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.n_sensors = 16;
  cfg.window = 2;
  cfg.horizon = 4;
  cfg.m_values = {2, 3};
  cfg.q_values = {3};
  cfg.seeds = {1, 2, 3};
  return cfg;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cscache_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Nmse, PerfectAndZeroEstimates) {
  Eigen::MatrixXd x(2, 2);
  x << 1, -2, 0.5, 3;
  EXPECT_EQ(nmse({{x}, {x}}, {x}), 0.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_EQ(nmse({{zero}, {zero}}, {x}), 1.0);
}

TEST(Nmse, TwoCachesHandComputed) {
  Eigen::MatrixXd x(2, 2), a(2, 2), b(2, 2);
  x << 1, 2, 3, 4;   // energy 30
  a << 1, 2, 3, 5;   // error 1
  b << 0, 2, 3, 2;   // error 1 + 4
  EXPECT_NEAR(nmse({{a}, {b}}, {x}), (1.0 / 30.0 + 5.0 / 30.0) / 2.0, 1e-15);
}

TEST(Nmse, ZeroEnergyFramesAreSkipped) {
  Eigen::MatrixXd x(1, 1), z(1, 1), est(1, 1);
  x << 2;
  z << 0;
  est << 1;
  EXPECT_NEAR(nmse({{est, est}}, {x, z}), 0.25, 1e-15);
  EXPECT_THROW(nmse({{est}}, {x, z}), std::invalid_argument);
}

TEST(Config, JsonRoundTripAndHash) {
  const ExperimentConfig cfg = tiny_config();
  const ExperimentConfig back = json(cfg).get<ExperimentConfig>();
  EXPECT_EQ(json(back), json(cfg));
  EXPECT_EQ(config_hash(back), config_hash(cfg));

  auto changed = cfg;
  changed.solver.eps_pri = 0.005;
  EXPECT_NE(config_hash(changed), config_hash(cfg));
  changed = cfg;
  changed.seeds.push_back(4);
  EXPECT_NE(config_hash(changed), config_hash(cfg));
  changed = cfg;
  changed.sources.correlation_length = 400.0;
  EXPECT_NE(config_hash(changed), config_hash(cfg));
  changed = cfg;
  changed.output_dir = "elsewhere";
  changed.workers = 4;
  EXPECT_EQ(config_hash(changed), config_hash(cfg));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(json::parse(R"({"n_sensor": 100})").get<ExperimentConfig>(), std::invalid_argument);
  auto cfg = tiny_config();
  cfg.seeds.clear();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.methods = {"deep-cosr-aa"};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Config, LoadFromFile) {
  const auto dir = scratch_dir("config");
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "c.json");
    os << R"({"n_sensors": 16, "window": 2, "horizon": 5, "strategies": ["global"]})";
  }
  const auto cfg = load_config(dir / "c.json");
  EXPECT_EQ(cfg.horizon, 5u);
  EXPECT_EQ(cfg.strategies.front(), AnchorStrategy::kGlobal);
  {
    std::ofstream os(dir / "bad.json");
    os << "{ not json";
  }
  EXPECT_THROW(load_config(dir / "bad.json"), std::runtime_error);
  EXPECT_THROW(load_config(dir / "missing.json"), std::runtime_error);
}

TEST(Sweep, RecordsPerSeedPointMethodAndReproducible) {
  const auto cfg = tiny_config();
  const auto a = run_sweep(cfg);
  EXPECT_EQ(a.size(), 3u * 2u * 5u);
  for (const auto& r : a) {
    EXPECT_GE(r.nmse, 0.0);
    EXPECT_EQ(r.config_hash, config_hash(cfg));
  }
  auto threaded = cfg;
  threaded.workers = 3;
  const auto b = run_sweep(threaded);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].method, b[i].method);
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_EQ(a[i].nmse, b[i].nmse);
    EXPECT_EQ(a[i].iterations, b[i].iterations);
  }
}

TEST(Sweep, AnchorProportionAxis) {
  auto cfg = tiny_config();
  cfg.seeds = {1};
  cfg.m_values = {2};
  cfg.anchor_proportions = {0.5, 1.0};
  cfg.methods = {kMethodCosrAa};
  const auto recs = run_sweep(cfg);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].point.q, 4u);  // half of |N_0 u N_1| = 8
  EXPECT_EQ(recs[1].point.q, 8u);
}

TEST(Sweep, SummaryAveragesSeeds) {
  std::vector<ResultRecord> recs(2);
  recs[0].method = recs[1].method = kMethodCosrAa;
  recs[0].seed = 1;
  recs[1].seed = 2;
  recs[0].nmse = 0.1;
  recs[1].nmse = 0.3;
  const auto rows = summarize(recs);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].mean_nmse, 0.2, 1e-15);
  EXPECT_EQ(rows[0].n_seeds, 2u);
  EXPECT_NEAR(summary_json(recs)["curves"][0]["mean_nmse"].get<double>(), 0.2, 1e-15);
}

TEST(Csv, RoundTrip) {
  auto cfg = tiny_config();
  cfg.seeds = {1};
  const auto recs = run_sweep(cfg);
  std::stringstream ss;
  write_csv(ss, recs);
  const auto back = read_csv(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].method, recs[i].method);
    EXPECT_EQ(back[i].point, recs[i].point);
    EXPECT_EQ(back[i].nmse, recs[i].nmse);
    EXPECT_EQ(back[i].comm_scalars, recs[i].comm_scalars);
  }
  std::stringstream bad("nope\n");
  EXPECT_THROW(read_csv(bad), std::runtime_error);
}

TEST(Trace, HeaderAndRows) {
  std::ostringstream os;
  write_trace(os, {{1, 2.0, 3.0, 10.0}}, {{0.5, 0.25}});
  EXPECT_NE(os.str().find("nmse_cache1"), std::string::npos);
  EXPECT_NE(os.str().find("1\t2\t3\t10\t0.5\t0.25"), std::string::npos);
}

TEST(Dataset, WindowCountsPerDeployment) {
  auto cfg = tiny_config();
  cfg.window = 4;
  const auto dir = scratch_dir("dataset_small");
  // 7 windows per deployment: a 10-instant horizon with W = 4
  const auto ex = export_dataset(cfg, 2, {3, 2, 2}, dir);
  EXPECT_EQ(ex.train.samples.size(), 6u);
  EXPECT_EQ(ex.validation.samples.size(), 4u);
  EXPECT_EQ(ex.test.samples.size(), 4u);
  EXPECT_EQ(ex.test.samples.back().end_time, 9u);
  EXPECT_EQ(ex.files.size(), 4u);
}

TEST(Dataset, DefaultSplitCounts) {
  auto cfg = tiny_config();
  const auto ex = export_dataset(cfg, 1, {}, scratch_dir("dataset_split"));
  EXPECT_EQ(ex.train.samples.size(), 80u);
  EXPECT_EQ(ex.validation.samples.size(), 20u);
  EXPECT_EQ(ex.test.samples.size(), 25u);
}

TEST(Dataset, ReadBackIsBitExact) {
  auto cfg = tiny_config();
  const auto dir = scratch_dir("dataset_roundtrip");
  const auto ex = export_dataset(cfg, 2, {2, 1, 1}, dir);
  EXPECT_EQ(read_dataset(dir / "train.json"), ex.train);
  EXPECT_EQ(read_dataset(dir / "validation.json"), ex.validation);
  EXPECT_EQ(read_dataset(dir / "test.json"), ex.test);
}

TEST(Dataset, MeasurementsMatchGroundTruth) {
  auto cfg = tiny_config();
  const auto ex = export_dataset(cfg, 1, {2, 1, 1}, scratch_dir("dataset_consistency"));
  for (const auto& s : ex.train.samples) {
    ASSERT_EQ(s.caches.size(), 4u);
    for (const auto& c : s.caches) {
      ASSERT_EQ(c.rows.size(), c.y.size());
      for (std::size_t i = 0; i < c.rows.size(); ++i) EXPECT_EQ(c.y[i], s.x[c.rows[i]]);
    }
    EXPECT_EQ(s.anchors.size(), 6u);
  }
}

TEST(Dataset, UnwritableDirectoryReportsPath) {
  const auto file = scratch_dir("dataset_blocker");
  std::ofstream(file.string()) << "x";
  try {
    export_dataset(tiny_config(), 1, {1, 1, 1}, file / "sub");
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("cscache_test_dataset_blocker"), std::string::npos);
  }
}

TEST(Config, ShippedSweepConfigsAreRunnable) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(CSCACHE_SOURCE_DIR "/configs")) {
    const auto cfg = load_config(entry.path());
    const auto field = generate_deployment(cfg.n_sensors, 1);
    for (std::size_t c : cfg.n_caches) {
      const auto layout = assign_coverage(field, c);
      const auto points = sweep_points(cfg, c, layout);
      EXPECT_FALSE(points.empty()) << entry.path();
      for (const auto& pt : points) {
        EXPECT_NO_THROW(sample_schedule(layout, cfg.horizon, pt.m, 1)) << entry.path();
        EXPECT_NO_THROW(select_anchors(layout, pt.strategy, pt.q, 1)) << entry.path();
      }
    }
    ++n;
  }
  EXPECT_EQ(n, 4u);
}
