// gpcalib command-line front end.
//
// Exit status: 0 converged / written, 2 calibration ran but the result is not
// trustworthy (not converged, unobservable delay, insufficient overlap,
// degenerate geometry; the report is still written), 1 file, parse or flag
// errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gpcalib/data_io.hpp"
#include "gpcalib/errors.hpp"
#include "gpcalib/pipeline.hpp"
#include "gpcalib/sim_harness.hpp"

namespace {

using namespace gpcalib;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitCalibration = 2;

struct Options {
  // pipeline
  std::string anchor = "auto";
  double qc = MotionPrior::kDefaultQc;
  double init_delay = 0.0;
  double search_halfwidth = DelayConfig{}.coarse_search_halfwidth;
  double search_step = DelayConfig{}.coarse_search_step;
  int max_iters = DelayConfig{}.max_iterations;
  // files / simulation
  double noise_sigma = 0.01;
  double sample_interval = SimConfig{}.sample_interval;
  double start_offset = SimConfig{}.sensor2_start_offset;
  double duration = SimConfig{}.duration;
  bool no_counter_phase = false;
  int runs = 0;
  std::uint64_t seed = 1;
  // cost curve
  std::optional<double> grid_min, grid_max;
  double grid_step = 0.01;
  // inputs / outputs
  std::string sensor1, sensor2;
  std::string out;
  std::string cost_out;
};

PipelineConfig pipeline_config(const Options& o) {
  PipelineConfig cfg;
  cfg.qc = o.qc;
  cfg.anchor = anchor_from_string(o.anchor);
  cfg.delay.initial_delay = o.init_delay;
  cfg.delay.coarse_search_halfwidth = o.search_halfwidth;
  cfg.delay.coarse_search_step = o.search_step;
  cfg.delay.max_iterations = o.max_iters;
  if (!(cfg.qc > 0.0)) throw InvalidArgument("--qc must be positive");
  cfg.delay.validate();
  return cfg;
}

// Writes to `path`, or standard output when path is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  write(f);
  if (!f) throw Error("write error on '" + path + "'");
}

void add_pipeline_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--anchor", o.anchor,
                  "Anchor sensor: auto (lower mean sample rate), sensor1, sensor2 [choice]")
      ->check(CLI::IsMember({"auto", "sensor1", "sensor2"}))
      ->capture_default_str();
  cmd->add_option("--qc", o.qc, "Jerk power spectral density, isotropic [m^2/s^5]")
      ->capture_default_str();
  cmd->add_option("--init-delay", o.init_delay,
                  "Initial delay, sensor-1 stamp = sensor-2 stamp + delay [s]")
      ->capture_default_str();
  cmd->add_option("--search-halfwidth", o.search_halfwidth,
                  "Coarse grid half-width around the initial delay [s]")
      ->capture_default_str();
  cmd->add_option("--search-step", o.search_step, "Coarse grid spacing [s]")
      ->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters,
                  "Levenberg-Marquardt iteration limit [count]")
      ->capture_default_str();
}

Provenance provenance_for(const Options& o, const PipelineConfig& cfg) {
  Provenance p;
  p.sensor1_file = o.sensor1;
  p.sensor2_file = o.sensor2;
  p.config_hash = fnv1a_hex(canonical_config(cfg, o.noise_sigma));
  return p;
}

int cmd_calibrate(const Options& o) {
  const PipelineConfig cfg = pipeline_config(o);
  const MeasurementSet s1 = parse_trajectory_file(o.sensor1, o.noise_sigma);
  const MeasurementSet s2 = parse_trajectory_file(o.sensor2, o.noise_sigma);

  const CalibrationResult result = calibrate(s1, s2, cfg);
  std::fprintf(stderr, "regression: %.6f s, optimization: %.6f s\n",
               result.regression_seconds, result.optimization_seconds);

  const CalibrationReport report = make_report(result, provenance_for(o, cfg));
  emit(o.out, [&](std::ostream& os) { write_report(os, report); });

  if (!o.cost_out.empty()) {
    const auto grid = symmetric_grid(o.init_delay, o.search_halfwidth, o.search_step);
    const auto curve = sensor_cost_curve(s1, s2, cfg, grid);
    emit(o.cost_out, [&](std::ostream& os) { write_cost_curve(os, curve); });
  }

  if (result.status != CalibrationStatus::kOk) {
    std::cerr << "gpcalib: " << to_string(result.status) << ": " << result.message
              << '\n';
    return kExitCalibration;
  }
  return kExitOk;
}

int cmd_cost_curve(const Options& o) {
  if (!o.grid_min || !o.grid_max) {
    throw InvalidArgument("cost-curve requires --grid-min and --grid-max");
  }
  const PipelineConfig cfg = pipeline_config(o);
  const MeasurementSet s1 = parse_trajectory_file(o.sensor1, o.noise_sigma);
  const MeasurementSet s2 = parse_trajectory_file(o.sensor2, o.noise_sigma);
  const auto grid = range_grid(*o.grid_min, *o.grid_max, o.grid_step);
  std::vector<CostSample> curve;
  try {
    curve = sensor_cost_curve(s1, s2, cfg, grid);
  } catch (const InsufficientOverlap& e) {
    std::cerr << "gpcalib: insufficient_overlap: " << e.what() << '\n';
    return kExitCalibration;
  }
  emit(o.out, [&](std::ostream& os) { write_cost_curve(os, curve); });
  return kExitOk;
}

int cmd_simulate(const Options& o) {
  if (o.out.empty()) throw InvalidArgument("simulate requires --out DIR");
  if (o.runs < 0) throw InvalidArgument("--runs must be non-negative");

  SimConfig cfg;
  cfg.duration = o.duration;
  cfg.sample_interval = o.sample_interval;
  cfg.sensor2_start_offset = o.start_offset;
  cfg.counter_phase = !o.no_counter_phase;
  cfg.noise_sigma = o.noise_sigma;
  cfg.trajectory_seed = o.seed;
  cfg.n_runs = o.runs > 0 ? o.runs : 1;
  cfg.pipeline = pipeline_config(o);
  cfg.validate();

  const std::filesystem::path dir(o.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + o.out + "': " + ec.message());

  // The exported dataset is run 0 of the Monte-Carlo sequence.
  const std::uint64_t seed = run_seed(cfg.trajectory_seed, 0);
  const SinusoidTrajectory traj =
      generate_trajectory(seed, cfg.duration, cfg.amplitude_scale);
  const SimDataset data = sample_sensors(traj, cfg, seed);
  write_trajectory_file((dir / "sensor1.csv").string(), data.sensor1);
  write_trajectory_file((dir / "sensor2.csv").string(), data.sensor2);
  emit((dir / "ground_truth.json").string(),
       [&](std::ostream& os) { write_sim_sidecar(os, cfg, data, seed); });

  if (o.runs > 0) {
    const MonteCarloReport report = run_monte_carlo(cfg);
    emit((dir / "monte_carlo.json").string(),
         [&](std::ostream& os) { write_monte_carlo_report(os, report); });
    emit((dir / "monte_carlo_runs.csv").string(),
         [&](std::ostream& os) { write_monte_carlo_runs(os, report); });
    std::fprintf(stderr,
                 "%d runs, %zu failed, delay error mean %.3e s, stddev %.3e s, "
                 "max |error| %.3e s\n",
                 o.runs, report.n_failed, report.delay_error.mean,
                 report.delay_error.stddev, report.delay_error.max_abs);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Temporal and extrinsic calibration of two 3D position sensors "
               "from GP trajectory regression.",
               "gpcalib"};
  app.set_version_flag("--version", kToolVersion);
  // top-level help expands every subcommand so all flags and units are listed
  app.set_help_flag();
  app.set_help_all_flag("-h,--help", "Print help for all subcommands and exit");
  app.require_subcommand(1);
  app.footer(
      "Exit status: 0 converged; 2 not converged, unobservable or insufficient\n"
      "overlap (report still written); 1 file, parse or flag error.");

  auto* calibrate_cmd = app.add_subcommand(
      "calibrate", "Estimate delay and sensor-2 -> sensor-1 transform from two files");
  calibrate_cmd->add_option("sensor1", o.sensor1, "Sensor-1 trajectory file (CSV)")
      ->required();
  calibrate_cmd->add_option("sensor2", o.sensor2, "Sensor-2 trajectory file (CSV)")
      ->required();
  add_pipeline_flags(calibrate_cmd, o);
  calibrate_cmd->add_option("--noise-sigma", o.noise_sigma,
                            "Position noise std for rows without sigma_m [m]")
      ->capture_default_str();
  calibrate_cmd->add_option("--out", o.out, "Report path, '-' for stdout [JSON]");
  calibrate_cmd->add_option("--cost-out", o.cost_out,
                            "Also write the cost over the coarse grid [CSV: s, m^2/s^2]");

  auto* curve_cmd = app.add_subcommand(
      "cost-curve", "Tabulate the temporal cost over a delay grid");
  curve_cmd->add_option("sensor1", o.sensor1, "Sensor-1 trajectory file (CSV)")
      ->required();
  curve_cmd->add_option("sensor2", o.sensor2, "Sensor-2 trajectory file (CSV)")
      ->required();
  curve_cmd->add_option("--grid-min", o.grid_min,
                        "First delay, sensor-1 stamp = sensor-2 stamp + delay [s]");
  curve_cmd->add_option("--grid-max", o.grid_max, "Last delay [s]");
  curve_cmd->add_option("--grid-step", o.grid_step, "Delay spacing [s]")
      ->capture_default_str();
  curve_cmd->add_option("--anchor", o.anchor,
                        "Anchor sensor: auto (lower mean sample rate), sensor1, sensor2 [choice]")
      ->check(CLI::IsMember({"auto", "sensor1", "sensor2"}))
      ->capture_default_str();
  curve_cmd->add_option("--qc", o.qc, "Jerk power spectral density, isotropic [m^2/s^5]")
      ->capture_default_str();
  curve_cmd->add_option("--noise-sigma", o.noise_sigma,
                        "Position noise std for rows without sigma_m [m]")
      ->capture_default_str();
  curve_cmd->add_option("--out,--cost-out", o.out,
                        "Table path, '-' for stdout [CSV: s, m^2/s^2]");

  auto* sim_cmd = app.add_subcommand(
      "simulate", "Write a synthetic sensor pair and optionally a Monte-Carlo report");
  sim_cmd->add_option("--noise-sigma", o.noise_sigma, "Position noise std [m]")
      ->capture_default_str();
  sim_cmd->add_option("--sample-interval", o.sample_interval,
                      "Sampling interval of both sensors [s]")
      ->capture_default_str();
  sim_cmd->add_option("--start-offset", o.start_offset,
                      "Sensor-2 start offset before the half-interval shift [s]")
      ->capture_default_str();
  sim_cmd->add_option("--duration", o.duration, "Trajectory length [s]")
      ->capture_default_str();
  sim_cmd->add_flag("--no-counter-phase", o.no_counter_phase,
                    "Do not shift sensor 2 by half a sampling interval");
  sim_cmd->add_option("--seed", o.seed, "Trajectory seed [integer]")->capture_default_str();
  sim_cmd->add_option("--runs", o.runs,
                      "Monte-Carlo runs; 0 writes only the dataset [count]")
      ->capture_default_str();
  add_pipeline_flags(sim_cmd, o);
  sim_cmd->add_option("--out", o.out, "Output directory [path]")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*calibrate_cmd) return cmd_calibrate(o);
    if (*curve_cmd) return cmd_cost_curve(o);
    return cmd_simulate(o);
  } catch (const ParseError& e) {
    std::cerr << "gpcalib: parse error: " << e.what() << '\n';
  } catch (const Error& e) {
    std::cerr << "gpcalib: " << e.what() << '\n';
  }
  return kExitInputError;
}
