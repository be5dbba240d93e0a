#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wpan/commands.hpp"

namespace fs = std::filesystem;
using namespace wpan;
using namespace wpan::cli;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("wpansim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path put(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }
  static std::string slurp(const fs::path& p) { return read_file(p); }

  static int exe(const std::string& args) {
    const std::string cmd = std::string(WPANSIM_EXE) + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }

  fs::path dir_;
};

const char* kMinimal = R"({"kind":"star","duration_intervals":20,"bo":4,"so":2,"node_count":3,
  "workload":[{"src":1,"dst":0,"kind":"bernoulli","p":0.5}]})";

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string l;
  while (std::getline(in, l))
    if (!l.empty() && l[0] != '#') out.push_back(l);
  return out;
}

int count_fields(const std::string& line) { return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1; }

}  // namespace

TEST_F(Cli, SimulateWritesHeaderNodesAndSummary) {
  const auto sc = put("s.json", kMinimal);
  EXPECT_EQ(exe("simulate --scenario " + sc.string() + " --seed 4 --out " + (dir_ / "m.csv").string()), 0);
  const auto csv = slurp(dir_ / "m.csv");
  const auto lines = data_lines(csv);
  ASSERT_EQ(lines.size(), 1u + 3u + 1u);
  EXPECT_EQ(lines[0].rfind("node_id,role,sync_mode,t_tx_ms,t_rx_ms,t_idle_ms,t_sleep_ms,q_tx_uc,q_rx_uc,q_idle_uc,"
                           "q_sleep_uc,frames_tx,frames_rx,caf_count,generated,delivered,expired,failed,collisions,"
                           "redundant_tx,mean_latency_ms,p95_latency_ms,effective_throughput_bps,gts_waste_ms",
                           0),
            0u);
  for (const auto& l : lines) EXPECT_EQ(count_fields(l), count_fields(lines[0])) << l;
  EXPECT_EQ(lines.back().rfind("all,summary", 0), 0u);
  EXPECT_NE(csv.find("# tool=wpansim"), std::string::npos);
  EXPECT_NE(csv.find("# seed=4"), std::string::npos);
  EXPECT_NE(csv.find("# scenario_hash="), std::string::npos);
  // Locale-independent numbers, '\n' endings.
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(csv.find(';'), std::string::npos);
}

TEST_F(Cli, SoAboveBoIsConfigError) {
  const auto sc = put("s.json", R"({"kind":"star","duration_intervals":5,"bo":3,"so":4,"node_count":2})");
  std::ostringstream err;
  EXPECT_EQ(cmd_simulate({sc.string(), std::nullopt, (dir_ / "m.csv").string(), ""}, err), kConfig);
  EXPECT_NE(err.str().find("so ≤ bo"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(dir_ / "m.csv"));
  EXPECT_EQ(exe("simulate --scenario " + sc.string() + " --out " + (dir_ / "m.csv").string()), 2);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(exe("simulate --scenario " + (dir_ / "missing.json").string() + " --out x.csv"), 2);
  EXPECT_EQ(exe("simulate --out x.csv"), 2);  // required flag
  EXPECT_EQ(exe("frobnicate"), 2);
  const auto bad = put("bad.json", "{not json");
  EXPECT_EQ(exe("simulate --scenario " + bad.string() + " --out " + (dir_ / "x.csv").string()), 2);
  const auto unk = put("u.json", R"({"duration_intervals":5,"colour":"red"})");
  std::ostringstream err;
  EXPECT_EQ(cmd_simulate({unk.string(), std::nullopt, (dir_ / "m.csv").string(), ""}, err), kConfig);
  EXPECT_NE(err.str().find("colour"), std::string::npos);
}

TEST_F(Cli, InternalErrorIsOne) {
  const auto sc = put("s.json", kMinimal);
  // Output path under a regular file cannot be created.
  put("blocker", "x");
  std::ostringstream err;
  EXPECT_EQ(cmd_simulate({sc.string(), 1, (dir_ / "blocker" / "m.csv").string(), ""}, err), kInternal);
}

TEST_F(Cli, SimulateIsByteIdentical) {
  const auto sc = put("s.json", kMinimal);
  for (const char* n : {"a", "b"})
    ASSERT_EQ(exe("simulate --scenario " + sc.string() + " --seed 9 --out " + (dir_ / (std::string(n) + ".csv")).string() +
                  " --trace " + (dir_ / (std::string(n) + ".trace")).string()),
              0);
  EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));
  EXPECT_EQ(slurp(dir_ / "a.trace"), slurp(dir_ / "b.trace"));
  EXPECT_FALSE(slurp(dir_ / "a.trace").empty());
}

TEST_F(Cli, SeedFallsBackToScenarioThenOne) {
  const auto with = put("w.json", R"({"kind":"star","duration_intervals":5,"bo":3,"so":3,"node_count":2,"seed":42})");
  const auto without = put("n.json", R"({"kind":"star","duration_intervals":5,"bo":3,"so":3,"node_count":2})");
  ASSERT_EQ(exe("simulate --scenario " + with.string() + " --out " + (dir_ / "w.csv").string()), 0);
  ASSERT_EQ(exe("simulate --scenario " + without.string() + " --out " + (dir_ / "n.csv").string()), 0);
  EXPECT_NE(slurp(dir_ / "w.csv").find("# seed=42"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "n.csv").find("# seed=1\n"), std::string::npos);
}

TEST_F(Cli, AnalyzeSinglePointMatchesFormulas) {
  const auto params = put("p.json", R"({"t_b_us":544,"t_d_us":4256,"t_a_us":544,"t_i_us":1120})");
  ASSERT_EQ(exe("analyze --params " + params.string() + " --bo 6..6 --so 2..2 --rates 400 --out " +
                (dir_ / "a.csv").string()),
            0);
  const auto lines = data_lines(slurp(dir_ / "a.csv"));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "bo,so,duty_cycle,rate_bps,p,e_tracked_uc,e_untracked_uc,mode");
  auto s = parse_sync_params(nlohmann::json::parse(slurp(params)));
  const auto rows = sweep(s, {6, 6}, {2, 2}, {400.0});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(lines[1], data_lines(analysis_csv(rows))[1]);
  std::istringstream f(lines[1]);
  std::vector<std::string> cells;
  for (std::string c; std::getline(f, c, ',');) cells.push_back(c);
  s.bi_us = phy_2450mhz().to_us(beacon_interval(6, phy_2450mhz()));
  const auto& r = rows[0];
  EXPECT_NEAR(r.e_tracked, energy_tracked(s, r.p), 1e-9);
  EXPECT_NEAR(r.e_untracked, energy_untracked(s, r.p), 1e-9);
  EXPECT_NEAR(std::stod(cells[5]), r.e_tracked, 1e-6);
  EXPECT_NEAR(std::stod(cells[6]), r.e_untracked, 1e-6);
}

TEST_F(Cli, AnalyzeBoSweepHasFifteenRows) {
  const auto params = put("p.json", "{}");
  ASSERT_EQ(exe("analyze --params " + params.string() + " --bo 0..14 --so 0..0 --rates 1 --out " +
                (dir_ / "a.csv").string()),
            0);
  const auto lines = data_lines(slurp(dir_ / "a.csv"));
  ASSERT_EQ(lines.size(), 16u);
}

TEST_F(Cli, AnalyzeEmptyRatesIsHeaderOnly) {
  const auto params = put("p.json", "{}");
  EXPECT_EQ(exe("analyze --params " + params.string() + " --out " + (dir_ / "a.csv").string()), 0);
  EXPECT_EQ(data_lines(slurp(dir_ / "a.csv")).size(), 1u);
}

TEST_F(Cli, AnalyzeBadRangeIsConfigError) {
  const auto params = put("p.json", "{}");
  EXPECT_EQ(exe("analyze --params " + params.string() + " --bo 5..2 --rates 1 --out " + (dir_ / "a.csv").string()), 2);
  EXPECT_EQ(exe("analyze --params " + params.string() + " --bo 0..15 --rates 1 --out " + (dir_ / "a.csv").string()), 2);
  EXPECT_EQ(exe("analyze --params " + params.string() + " --so 3..1 --rates 1 --out " + (dir_ / "a.csv").string()), 2);
  EXPECT_EQ(exe("analyze --params " + params.string() + " --rates 1,x --out " + (dir_ / "a.csv").string()), 2);
  EXPECT_EQ(exe("analyze --params " + params.string() + " --rates 1 --rate-unit kbps --out " + (dir_ / "a.csv").string()), 2);
}

TEST_F(Cli, SweepCountsFilesAndAggregateRows) {
  const auto sc = put("s.json", R"({"kind":"star","duration_intervals":10,"bo":3,"so":0,"node_count":3,
    "workload":[{"src":1,"dst":0,"kind":"poisson","rate_pps":2}]})");
  const auto out = dir_ / "sweep";
  ASSERT_EQ(exe("sweep --scenario " + sc.string() + " --vary so=0..3 --seeds 10 --jobs 4 --out " + out.string()), 0);
  int csvs = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().filename() != "aggregate.csv") ++csvs;
  EXPECT_EQ(csvs, 40);
  EXPECT_TRUE(fs::exists(out / "so=2_seed=7.csv"));
  const auto agg = data_lines(slurp(out / "aggregate.csv"));
  ASSERT_EQ(agg.size(), 5u);
  EXPECT_EQ(agg[0].rfind("so,runs,mean_generated,std_generated", 0), 0u);
  EXPECT_EQ(agg[1].rfind("0,10,", 0), 0u);
}

TEST_F(Cli, SweepIsIndependentOfParallelism) {
  const auto sc = put("s.json", kMinimal);
  ASSERT_EQ(exe("sweep --scenario " + sc.string() + " --vary so=1,2 --seeds 3 --jobs 1 --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(exe("sweep --scenario " + sc.string() + " --vary so=1,2 --seeds 3 --jobs 6 --out " + (dir_ / "b").string()), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "aggregate.csv"), slurp(dir_ / "b" / "aggregate.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "so=2_seed=3.csv"), slurp(dir_ / "b" / "so=2_seed=3.csv"));
}

TEST_F(Cli, SweepWithoutVaryRepeatsSeeds) {
  const auto sc = put("s.json", kMinimal);
  ASSERT_EQ(exe("sweep --scenario " + sc.string() + " --seeds 3 --out " + (dir_ / "r").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "r" / "seed=1.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "r" / "seed=3.csv"));
  EXPECT_EQ(data_lines(slurp(dir_ / "r" / "aggregate.csv")).size(), 2u);
}

TEST_F(Cli, SweepUnknownKeyIsConfigError) {
  const auto sc = put("s.json", kMinimal);
  EXPECT_EQ(exe("sweep --scenario " + sc.string() + " --vary nonsense=1..2 --out " + (dir_ / "x").string()), 2);
  EXPECT_FALSE(fs::exists(dir_ / "x" / "aggregate.csv"));
}

TEST_F(Cli, SweepOutDirFromEnvironment) {
  const auto sc = put("s.json", kMinimal);
  const auto target = dir_ / "env";
  const std::string cmd = "WPANSIM_OUT_DIR=" + target.string() + " WPANSIM_JOBS=2 " + std::string(WPANSIM_EXE) +
                          " sweep --scenario " + sc.string() + " --seeds 2 >/dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(target / "aggregate.csv"));
}

TEST(CliParse, OrderRange) {
  const auto r = parse_order_range("2..5", "bo");
  EXPECT_EQ(r.lo, 2);
  EXPECT_EQ(r.hi, 5);
  EXPECT_THROW(parse_order_range("x", "bo"), ConfigError);
}

TEST(CliParse, VaryForms) {
  const auto a = parse_vary("so=0..3");
  EXPECT_EQ(a.key, "so");
  EXPECT_EQ(a.values.size(), 4u);
  const auto b = parse_vary("power.i_rx_ma=19.7,20.5");
  EXPECT_EQ(b.values.size(), 2u);
  EXPECT_THROW(parse_vary("so"), ConfigError);
}
