#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gpcalib/data_io.hpp"
#include "gpcalib/sim_harness.hpp"
#include "json.hpp"

namespace gpcalib {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("gpcalib_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(run("simulate --out " + (dir_ / "sim").string()).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static CliRun run(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string(GPCALIB_CLI_PATH) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string sim(const std::string& name) { return (dir_ / "sim" / name).string(); }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static std::vector<std::pair<double, double>> read_curve(const std::string& text) {
    std::vector<std::pair<double, double>> rows;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "delay_s,cost_m2_per_s2");
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      rows.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    }
    return rows;
  }

  static inline fs::path dir_;
};

TEST_F(Cli, HelpListsEveryFlagWithUnits) {
  const CliRun r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* flag :
       {"--anchor", "--qc", "--init-delay", "--search-halfwidth", "--search-step", "--max-iters",
        "--noise-sigma", "--sample-interval", "--start-offset", "--runs", "--seed", "--grid-min",
        "--grid-max", "--grid-step", "--out", "--cost-out"}) {
    // an entry is the option line plus its deeply indented continuation lines
    const std::string needle = std::string("\n    ") + flag;
    const auto at = r.out.find(needle);
    ASSERT_NE(at, std::string::npos) << flag;
    std::size_t end = r.out.find('\n', at + 1);
    while (end != std::string::npos && r.out.compare(end + 1, 12, std::string(12, ' ')) == 0) {
      end = r.out.find('\n', end + 1);
    }
    std::string entry = r.out.substr(at, end - at);
    while (!entry.empty() && std::isspace(static_cast<unsigned char>(entry.back()))) entry.pop_back();
    EXPECT_EQ(entry.back(), ']') << flag << " lacks a unit: " << entry;
  }
}

TEST_F(Cli, SimulateWritesDatasetAndSidecar) {
  const auto sidecar = nlohmann::json::parse(slurp(sim("ground_truth.json")));
  EXPECT_EQ(sidecar["true_delay_s"].get<double>(), 0.125);
  std::ifstream s1(sim("sensor1.csv"));
  const MeasurementSet m1 = parse_trajectory(s1, "s1", 0.01);
  EXPECT_EQ(m1.size(), 1200u);
}

TEST_F(Cli, NoiselessSimulationLiesOnAnalyticTrajectory) {
  ASSERT_EQ(run("simulate --noise-sigma 0 --seed 4 --out " + path("clean")).code, 0);
  const SinusoidTrajectory traj = generate_trajectory(run_seed(4, 0), 60.0);
  std::ifstream s1(path("clean/sensor1.csv"));
  const MeasurementSet m1 = parse_trajectory(s1, "s1", 1.0);
  for (const Measurement& m : m1.measurements()) {
    EXPECT_EQ(m.position, traj.position(m.time));
  }
  // sensor 2 reports in its own frame at its own clock
  const RigidTransform truth = default_ground_truth();
  std::ifstream s2(path("clean/sensor2.csv"));
  const MeasurementSet m2 = parse_trajectory(s2, "s2", 1.0);
  for (const Measurement& m : m2.measurements()) {
    EXPECT_LE((apply(truth, m.position) - traj.position(m.time + 0.125)).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST_F(Cli, MonteCarloReportIsByteIdentical) {
  ASSERT_EQ(run("simulate --runs 50 --seed 9 --out " + path("mc_a")).code, 0);
  ASSERT_EQ(run("simulate --runs 50 --seed 9 --out " + path("mc_b")).code, 0);
  const std::string a = slurp(path("mc_a/monte_carlo.json"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(path("mc_b/monte_carlo.json")));
  EXPECT_EQ(slurp(path("mc_a/monte_carlo_runs.csv")), slurp(path("mc_b/monte_carlo_runs.csv")));
  EXPECT_EQ(nlohmann::json::parse(a)["runs"].size(), 50u);
}

TEST_F(Cli, CalibrateSimulatedPair) {
  const CliRun r = run("calibrate " + sim("sensor1.csv") + " " + sim("sensor2.csv") + " --out " +
                    path("report.json") + " --cost-out " + path("coarse.csv"));
  EXPECT_EQ(r.code, 0) << r.err;
  const CalibrationReport rep = parse_report(slurp(path("report.json")));
  EXPECT_EQ(rep.status, "ok");
  EXPECT_LT(std::abs(rep.delay_s - 0.125), 1.5e-3);
  ASSERT_TRUE(rep.extrinsic);
  EXPECT_LE((rep.extrinsic->euler_zyx - Vec3(45, 20, 0)).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(rep.provenance.sensor1_file, sim("sensor1.csv"));
  EXPECT_EQ(rep.provenance.config_hash.size(), 16u);
  EXPECT_NE(r.err.find("regression:"), std::string::npos);
  EXPECT_NE(r.err.find("optimization:"), std::string::npos);
  EXPECT_EQ(read_curve(slurp(path("coarse.csv"))).size(), 41u);
}

TEST_F(Cli, CalibrateReportToStdout) {
  const CliRun r = run("calibrate " + sim("sensor1.csv") + " " + sim("sensor2.csv"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(parse_report(r.out).status, "ok");
}

TEST_F(Cli, SameFileTwice) {
  const CliRun r = run("calibrate " + sim("sensor1.csv") + " " + sim("sensor1.csv") + " --out -");
  EXPECT_EQ(r.code, 0) << r.err;
  const CalibrationReport rep = parse_report(r.out);
  EXPECT_LE(std::abs(rep.delay_s), 1e-6);
  ASSERT_TRUE(rep.extrinsic);
  EXPECT_LE((rep.extrinsic->transform.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(rep.extrinsic->transform.translation.norm(), 1e-9);
}

TEST_F(Cli, ConstantVelocityIsUnobservable) {
  std::vector<Measurement> ms;
  for (int k = 0; k < 400; ++k) {
    const double t = 0.05 * k;
    ms.push_back({t, Vec3(0.5 * t, -0.2 * t, 1.0), 1e-4 * Mat3::Identity()});
  }
  write_trajectory_file(path("const.csv"), MeasurementSet("c", ms));
  const CliRun r = run("calibrate " + path("const.csv") + " " + path("const.csv") + " --out " +
                    path("const.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unobservable"), std::string::npos) << r.err;
  EXPECT_EQ(parse_report(slurp(path("const.json"))).status, "unobservable");
}

TEST_F(Cli, InsufficientOverlapExitsTwo) {
  const CliRun r = run("calibrate " + sim("sensor1.csv") + " " + sim("sensor2.csv") +
                    " --init-delay 100 --out " + path("far.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(parse_report(slurp(path("far.json"))).status, "insufficient_overlap");
}

TEST_F(Cli, InputErrorsExitOne) {
  EXPECT_EQ(run("calibrate /nonexistent.csv " + sim("sensor2.csv")).code, 1);
  {
    std::ofstream bad(path("bad.csv"));
    bad << "timestamp_s,x_m,y_m,z_m\n0,0,0,0\n0.1,zz,0,0\n";
  }
  const CliRun r = run("calibrate " + path("bad.csv") + " " + sim("sensor2.csv"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_EQ(run("calibrate " + sim("sensor1.csv") + " " + sim("sensor2.csv") + " --bogus").code, 1);
  EXPECT_EQ(run("calibrate " + sim("sensor1.csv") + " " + sim("sensor2.csv") + " --qc -1").code, 1);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("simulate").code, 1);  // --out is required
  EXPECT_EQ(run("simulate --noise-sigma -1 --out " + path("neg")).code, 1);
}

TEST_F(Cli, CostCurveWideGrid) {
  const CliRun r = run("cost-curve " + sim("sensor1.csv") + " " + sim("sensor2.csv") +
                    " --grid-min -5 --grid-max 5 --grid-step 0.1 --out -");
  EXPECT_EQ(r.code, 0) << r.err;
  const auto rows = read_curve(r.out);
  EXPECT_EQ(rows.size(), 101u);
  const auto best = std::min_element(rows.begin(), rows.end(),
                                     [](auto& a, auto& b) { return a.second < b.second; });
  EXPECT_LE(std::abs(best->first - 0.125), 0.1);
}

TEST_F(Cli, CostCurveSinglePoint) {
  const CliRun r = run("cost-curve " + sim("sensor1.csv") + " " + sim("sensor2.csv") +
                    " --grid-min 0.125 --grid-max 0.125 --cost-out " + path("one.csv"));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_curve(slurp(path("one.csv"))).size(), 1u);
}

TEST_F(Cli, CostCurveIdenticalFiles) {
  const CliRun r = run("cost-curve " + sim("sensor1.csv") + " " + sim("sensor1.csv") +
                    " --grid-min -1 --grid-max 1 --grid-step 0.05");
  EXPECT_EQ(r.code, 0) << r.err;
  const auto rows = read_curve(r.out);
  for (const auto& [d, c] : rows) {
    if (std::abs(d) < 1e-12) {
      EXPECT_EQ(c, 0.0);
    } else {
      EXPECT_GT(c, 0.0) << d;
    }
  }
}

TEST_F(Cli, CostCurveBadGrid) {
  EXPECT_EQ(run("cost-curve " + sim("sensor1.csv") + " " + sim("sensor2.csv") +
                " --grid-min 1 --grid-max -1")
                .code,
            1);
}

}  // namespace
}  // namespace gpcalib
