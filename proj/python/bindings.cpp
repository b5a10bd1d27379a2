#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpcalib/data_io.hpp"
#include "gpcalib/errors.hpp"
#include "gpcalib/gp_trajectory.hpp"
#include "gpcalib/pipeline.hpp"
#include "gpcalib/registration.hpp"
#include "gpcalib/sim_harness.hpp"
#include "gpcalib/temporal_align.hpp"

namespace py = pybind11;
using namespace gpcalib;

namespace {

using Rows = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> points_from(const Rows& a, const char* name) {
  if (a.ndim() != 2 || a.shape(1) != 3) {
    throw InvalidArgument(std::string(name) + " must have shape (N, 3)");
  }
  auto r = a.unchecked<2>();
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

py::array_t<double> points_to(const std::vector<Vec3>& pts) {
  py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < 3; ++k) w(i, k) = pts[i](k);
  }
  return out;
}

// times (N,), positions (N, 3), sigma scalar or (N,) in metres
MeasurementSet make_measurements(const std::string& sensor_id, const Rows& times,
                                 const Rows& positions, const py::object& sigma) {
  if (times.ndim() != 1) throw InvalidArgument("times must be one-dimensional");
  const std::vector<Vec3> pos = points_from(positions, "positions");
  if (pos.size() != static_cast<std::size_t>(times.shape(0))) {
    throw InvalidArgument("times and positions differ in length");
  }
  const Rows s = Rows::ensure(sigma);
  if (!s || (s.ndim() != 0 && (s.ndim() != 1 || s.shape(0) != times.shape(0)))) {
    throw InvalidArgument("sigma must be a scalar or match times");
  }
  std::vector<Measurement> ms(pos.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const double si = s.ndim() == 0 ? *s.data() : s.data()[i];
    ms[i] = {times.data()[i], pos[i], si * si * Mat3::Identity()};
  }
  return MeasurementSet(sensor_id, std::move(ms));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GP trajectory regression for temporal and extrinsic sensor calibration";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", error);
  py::register_exception<OutOfSupport>(m, "OutOfSupport", error);
  py::register_exception<InsufficientOverlap>(m, "InsufficientOverlap", error);
  py::register_exception<InsufficientCorrespondences>(m, "InsufficientCorrespondences", error);
  py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", error);
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<ValidationError>(m, "ValidationError", error);

  py::class_<TrajectoryState>(m, "TrajectoryState")
      .def(py::init<>())
      .def_readwrite("time", &TrajectoryState::time)
      .def_readwrite("position", &TrajectoryState::position)
      .def_readwrite("velocity", &TrajectoryState::velocity)
      .def_readwrite("acceleration", &TrajectoryState::acceleration)
      .def("stacked", &TrajectoryState::stacked)
      .def("__repr__", [](const TrajectoryState& s) {
        return "TrajectoryState(time=" + std::to_string(s.time) + ")";
      });

  py::class_<MeasurementSet>(m, "MeasurementSet")
      .def(py::init(&make_measurements), py::arg("sensor_id"), py::arg("times"),
           py::arg("positions"), py::arg("sigma") = 0.01)
      .def_property_readonly("sensor_id", &MeasurementSet::sensor_id)
      .def_property_readonly("times",
                             [](const MeasurementSet& d) {
                               std::vector<double> t;
                               for (const Measurement& x : d.measurements()) t.push_back(x.time);
                               return py::array_t<double>(t.size(), t.data());
                             })
      .def_property_readonly("positions",
                             [](const MeasurementSet& d) {
                               std::vector<Vec3> p;
                               for (const Measurement& x : d.measurements()) p.push_back(x.position);
                               return points_to(p);
                             })
      .def("__len__", &MeasurementSet::size)
      .def_property_readonly("start_time", &MeasurementSet::start_time)
      .def_property_readonly("end_time", &MeasurementSet::end_time)
      .def_property_readonly("mean_sample_rate", &MeasurementSet::mean_sample_rate);

  py::class_<MotionPrior>(m, "MotionPrior")
      .def(py::init<>())
      .def_readwrite("qc", &MotionPrior::qc)
      .def_readwrite("initial_mean", &MotionPrior::initial_mean)
      .def_readwrite("initial_cov", &MotionPrior::initial_cov)
      .def_static("for_measurements", &MotionPrior::for_measurements, py::arg("data"),
                  py::arg("qc") = MotionPrior::kDefaultQc);

  m.def("transition", &transition, py::arg("dt"));
  m.def("process_noise", &process_noise, py::arg("dt"), py::arg("qc"));
  m.def("process_noise_inverse", &process_noise_inverse, py::arg("dt"), py::arg("qc"));

  py::class_<GPTrajectory>(m, "GPTrajectory")
      .def_property_readonly("times", &GPTrajectory::times)
      .def_property_readonly("posterior_means", &GPTrajectory::posterior_means)
      .def_property_readonly("start_time", &GPTrajectory::start_time)
      .def_property_readonly("end_time", &GPTrajectory::end_time)
      .def("__len__", &GPTrajectory::size)
      .def("contains", &GPTrajectory::contains, py::arg("tau"))
      .def("interpolate", &GPTrajectory::interpolate, py::arg("tau"));

  m.def(
      "regress",
      [](const MeasurementSet& data, const std::optional<MotionPrior>& prior, double qc) {
        return regress(data, prior ? *prior : MotionPrior::for_measurements(data, qc));
      },
      py::arg("data"), py::arg("prior") = py::none(), py::arg("qc") = MotionPrior::kDefaultQc,
      py::call_guard<py::gil_scoped_release>());
  m.def("interpolate", &interpolate, py::arg("trajectory"), py::arg("tau"));

  py::class_<DelayConfig>(m, "DelayConfig")
      .def(py::init<>())
      .def_readwrite("initial_delay", &DelayConfig::initial_delay)
      .def_readwrite("coarse_search_halfwidth", &DelayConfig::coarse_search_halfwidth)
      .def_readwrite("coarse_search_step", &DelayConfig::coarse_search_step)
      .def_readwrite("max_iterations", &DelayConfig::max_iterations)
      .def_readwrite("cost_tolerance", &DelayConfig::cost_tolerance)
      .def_readwrite("parameter_tolerance", &DelayConfig::parameter_tolerance)
      .def_readwrite("lm_initial_damping", &DelayConfig::lm_initial_damping);

  py::class_<DelayEstimate>(m, "DelayEstimate")
      .def_readonly("delay", &DelayEstimate::delay)
      .def_readonly("final_cost", &DelayEstimate::final_cost)
      .def_readonly("rms_residual", &DelayEstimate::rms_residual)
      .def_readonly("iterations", &DelayEstimate::iterations)
      .def_readonly("converged", &DelayEstimate::converged)
      .def_readonly("observability", &DelayEstimate::observability)
      .def_readonly("unobservable", &DelayEstimate::unobservable)
      .def_readonly("n_correspondences", &DelayEstimate::n_correspondences)
      .def_readonly("n_excluded", &DelayEstimate::n_excluded);

  py::class_<CorrespondencePair>(m, "CorrespondencePair")
      .def_readonly("anchor_state", &CorrespondencePair::anchor_state)
      .def_readonly("other_state", &CorrespondencePair::other_state);

  m.def("temporal_cost", &temporal_cost, py::arg("anchor"), py::arg("other"), py::arg("delay"));
  m.def(
      "cost_curve",
      [](const GPTrajectory& a, const GPTrajectory& o, const std::vector<double>& delays) {
        std::vector<double> costs;
        for (const CostSample& c : cost_curve(a, o, delays)) costs.push_back(c.cost);
        return costs;
      },
      py::arg("anchor"), py::arg("other"), py::arg("delays"));
  m.def("estimate_delay", &estimate_delay, py::arg("anchor"), py::arg("other"),
        py::arg("config") = DelayConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("refine_delay", &refine_delay, py::arg("anchor"), py::arg("other"), py::arg("start"),
        py::arg("config") = DelayConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("build_correspondences", &build_correspondences, py::arg("anchor"), py::arg("other"),
        py::arg("delay"));

  py::class_<RigidTransform>(m, "RigidTransform")
      .def(py::init<>())
      .def(py::init([](const Mat3& r, const Vec3& t) { return RigidTransform{r, t}; }),
           py::arg("rotation"), py::arg("translation"))
      .def_readwrite("rotation", &RigidTransform::rotation)
      .def_readwrite("translation", &RigidTransform::translation)
      .def_static("from_euler_zyx_deg", &RigidTransform::from_euler_zyx_deg, py::arg("zyx_deg"),
                  py::arg("translation"))
      .def("inverse", &RigidTransform::inverse)
      .def("euler_zyx_deg", &RigidTransform::euler_zyx_deg)
      .def("is_valid", &RigidTransform::is_valid, py::arg("tol") = 1e-10)
      .def("apply", [](const RigidTransform& t, const Rows& pts) {
        std::vector<Vec3> p = points_from(pts, "points");
        for (Vec3& x : p) x = apply(t, x);
        return points_to(p);
      });

  py::class_<RegistrationResult>(m, "RegistrationResult")
      .def_readonly("transform", &RegistrationResult::transform)
      .def_readonly("euler_zyx", &RegistrationResult::euler_zyx)
      .def_readonly("rms_residual", &RegistrationResult::rms_residual)
      .def_readonly("n_pairs", &RegistrationResult::n_pairs)
      .def_readonly("collinearity", &RegistrationResult::collinearity);

  m.def(
      "register_points",
      [](const Rows& target, const Rows& source) {
        return register_points(points_from(target, "target"), points_from(source, "source"));
      },
      py::arg("target"), py::arg("source"));
  m.def(
      "register_pairs",
      [](const std::vector<CorrespondencePair>& pairs) { return register_pairs(pairs); },
      py::arg("pairs"));
  m.def(
      "refine_points",
      [](const Rows& target, const Rows& source, const RigidTransform& init) {
        return refine_points(points_from(target, "target"), points_from(source, "source"), init);
      },
      py::arg("target"), py::arg("source"), py::arg("init"));

  py::enum_<AnchorChoice>(m, "AnchorChoice")
      .value("AUTO", AnchorChoice::kAuto)
      .value("SENSOR1", AnchorChoice::kSensor1)
      .value("SENSOR2", AnchorChoice::kSensor2);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("qc", &PipelineConfig::qc)
      .def_readwrite("delay", &PipelineConfig::delay)
      .def_readwrite("anchor", &PipelineConfig::anchor);

  py::class_<CalibrationResult>(m, "CalibrationResult")
      .def_property_readonly("status",
                             [](const CalibrationResult& r) { return to_string(r.status); })
      .def_readonly("message", &CalibrationResult::message)
      .def_readonly("anchor_sensor", &CalibrationResult::anchor_sensor)
      .def_readonly("delay_s", &CalibrationResult::delay_s)
      .def_readonly("estimate", &CalibrationResult::estimate)
      .def_readonly("extrinsic", &CalibrationResult::extrinsic)
      .def_readonly("regression_seconds", &CalibrationResult::regression_seconds)
      .def_readonly("optimization_seconds", &CalibrationResult::optimization_seconds);

  m.def("calibrate", &calibrate, py::arg("sensor1"), py::arg("sensor2"),
        py::arg("config") = PipelineConfig{}, py::call_guard<py::gil_scoped_release>());

  m.def("read_trajectory", &parse_trajectory_file, py::arg("path"),
        py::arg("default_sigma") = 0.01);
  m.def("write_trajectory", &write_trajectory_file, py::arg("path"), py::arg("data"));
  m.def(
      "report_json",
      [](const CalibrationResult& r, const std::string& s1, const std::string& s2,
         const PipelineConfig& cfg, double default_sigma) {
        Provenance p;
        p.sensor1_file = s1;
        p.sensor2_file = s2;
        p.config_hash = fnv1a_hex(canonical_config(cfg, default_sigma));
        return write_report(make_report(r, std::move(p)));
      },
      py::arg("result"), py::arg("sensor1_file"), py::arg("sensor2_file"),
      py::arg("config") = PipelineConfig{}, py::arg("default_sigma") = 0.01);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("duration", &SimConfig::duration)
      .def_readwrite("sample_interval", &SimConfig::sample_interval)
      .def_readwrite("sensor2_start_offset", &SimConfig::sensor2_start_offset)
      .def_readwrite("counter_phase", &SimConfig::counter_phase)
      .def_readwrite("noise_sigma", &SimConfig::noise_sigma)
      .def_readwrite("ground_truth_transform", &SimConfig::ground_truth_transform)
      .def_readwrite("trajectory_seed", &SimConfig::trajectory_seed)
      .def_readwrite("n_runs", &SimConfig::n_runs)
      .def_readwrite("amplitude_scale", &SimConfig::amplitude_scale)
      .def_readwrite("pipeline", &SimConfig::pipeline)
      .def_property_readonly("true_delay", &SimConfig::true_delay);

  py::class_<SimDataset>(m, "SimDataset")
      .def_readonly("sensor1", &SimDataset::sensor1)
      .def_readonly("sensor2", &SimDataset::sensor2)
      .def_readonly("true_delay", &SimDataset::true_delay)
      .def_readonly("true_transform", &SimDataset::true_transform);

  // one run of the harness: run 0 uses the same seeds as the CLI simulate command
  m.def(
      "simulate",
      [](const SimConfig& cfg, int run) {
        cfg.validate();
        const std::uint64_t seed = run_seed(cfg.trajectory_seed, static_cast<std::uint64_t>(run));
        return sample_sensors(generate_trajectory(seed, cfg.duration, cfg.amplitude_scale), cfg,
                              seed);
      },
      py::arg("config") = SimConfig{}, py::arg("run") = 0);

  py::class_<SummaryStats>(m, "SummaryStats")
      .def_readonly("mean", &SummaryStats::mean)
      .def_readonly("stddev", &SummaryStats::stddev)
      .def_readonly("min", &SummaryStats::min)
      .def_readonly("max", &SummaryStats::max)
      .def_readonly("max_abs", &SummaryStats::max_abs)
      .def_readonly("count", &SummaryStats::count);

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("run", &RunRecord::run)
      .def_readonly("seed", &RunRecord::seed)
      .def_readonly("status", &RunRecord::status)
      .def_readonly("delay_estimate", &RunRecord::delay_estimate)
      .def_readonly("delay_error", &RunRecord::delay_error)
      .def_readonly("euler_error", &RunRecord::euler_error)
      .def_readonly("translation_error", &RunRecord::translation_error);

  py::class_<MonteCarloReport>(m, "MonteCarloReport")
      .def_readonly("runs", &MonteCarloReport::runs)
      .def_readonly("n_failed", &MonteCarloReport::n_failed)
      .def_readonly("delay_error", &MonteCarloReport::delay_error)
      .def_readonly("euler_error", &MonteCarloReport::euler_error)
      .def_readonly("translation_error", &MonteCarloReport::translation_error);

  m.def("run_monte_carlo", &run_monte_carlo, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
}
