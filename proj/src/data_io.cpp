#include "gpcalib/data_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "gpcalib/errors.hpp"
#include "json_writer.hpp"

namespace gpcalib {
namespace {

using detail::JsonWriter;
using nlohmann::json;

constexpr std::string_view kReportFormat = "gpcalib-calibration-report";
constexpr int kReportVersion = 1;

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_real(std::string_view field, std::size_t line, std::size_t column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": '" + std::string(field) +
                         "' is not a finite decimal number",
                     line, column);
  }
  return v;
}

std::string fmt_real(double v) { return JsonWriter::real("value", v); }

void write_estimate(JsonWriter& w, const CalibrationReport& r) {
  const DelayEstimate& d = r.delay;
  w.begin_object("delay");
  w.field("anchor_sensor", r.anchor_sensor);
  w.field("delay_s", r.delay_s);
  w.field("anchor_relative_delay_s", d.delay);
  w.field("final_cost_m2_per_s2", d.final_cost);
  w.field("rms_residual_m_per_s", d.rms_residual);
  w.field("iterations", d.iterations);
  w.field("converged", d.converged);
  w.field("observability_m_per_s2", d.observability);
  w.field("unobservable", d.unobservable);
  w.field("n_correspondences", d.n_correspondences);
  w.field("n_excluded", d.n_excluded);
  w.end_object();
}

void write_extrinsic(JsonWriter& w, const std::optional<RegistrationResult>& e) {
  if (!e) {
    w.null_field("extrinsic");
    return;
  }
  w.begin_object("extrinsic");
  w.begin_array("rotation");
  for (int r = 0; r < 3; ++r) {
    w.vector_field({}, Vec3(e->transform.rotation.row(r).transpose()));
  }
  w.end_array();
  w.vector_field("translation_m", e->transform.translation);
  w.vector_field("euler_zyx_deg", e->euler_zyx);
  w.field("rms_residual_m", e->rms_residual);
  w.field("n_pairs", e->n_pairs);
  w.field("collinearity", e->collinearity);
  w.end_object();
}

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ValidationError("report: expected an array of 3 numbers");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void write_stats(JsonWriter& w, std::string_view key, const SummaryStats& s) {
  w.begin_object(key);
  w.field("count", s.count);
  w.field("mean", s.mean);
  w.field("stddev", s.stddev);
  w.field("min", s.min);
  w.field("max", s.max);
  w.field("max_abs", s.max_abs);
  w.end_object();
}

void write_transform(JsonWriter& w, const RigidTransform& t) {
  w.begin_array("rotation");
  for (int r = 0; r < 3; ++r) w.vector_field({}, Vec3(t.rotation.row(r).transpose()));
  w.end_array();
  w.vector_field("translation_m", t.translation);
  w.vector_field("euler_zyx_deg", t.euler_zyx_deg());
}

bool same_registration(const RegistrationResult& a, const RegistrationResult& b) {
  return a.transform.rotation == b.transform.rotation &&
         a.transform.translation == b.transform.translation &&
         a.euler_zyx == b.euler_zyx && a.rms_residual == b.rms_residual &&
         a.n_pairs == b.n_pairs && a.collinearity == b.collinearity;
}

}  // namespace

MeasurementSet parse_trajectory(std::istream& in, const std::string& sensor_id,
                                double default_sigma) {
  std::string raw;
  std::size_t line_no = 0;
  std::size_t n_columns = 0;
  std::vector<Measurement> rows;
  std::vector<std::size_t> row_lines;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_fields(line);
    if (n_columns == 0) {
      static constexpr std::string_view kExpected[] = {"timestamp_s", "x_m",
                                                       "y_m", "z_m", "sigma_m"};
      if (fields.size() != 4 && fields.size() != 5) {
        throw ParseError("line " + std::to_string(line_no) +
                             ": header must be timestamp_s,x_m,y_m,z_m[,sigma_m]",
                         line_no, 0);
      }
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (fields[c] != kExpected[c]) {
          throw ParseError("line " + std::to_string(line_no) + ", column " +
                               std::to_string(c + 1) + ": expected header '" +
                               std::string(kExpected[c]) + "', found '" +
                               std::string(fields[c]) + "'",
                           line_no, c + 1);
        }
      }
      n_columns = fields.size();
      continue;
    }

    if (fields.size() != n_columns) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(n_columns) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no, 0);
    }
    Measurement m;
    m.time = parse_real(fields[0], line_no, 1);
    for (int a = 0; a < 3; ++a) {
      m.position(a) = parse_real(fields[a + 1], line_no, a + 2);
    }
    double sigma = default_sigma;
    if (n_columns == 5) sigma = parse_real(fields[4], line_no, 5);
    if (!(sigma > 0.0)) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": sigma must be positive");
    }
    m.noise_cov = sigma * sigma * Mat3::Identity();

    if (!rows.empty() && !(m.time > rows.back().time)) {
      throw ValidationError("timestamps must be strictly increasing: line " +
                            std::to_string(row_lines.back()) + " and line " +
                            std::to_string(line_no));
    }
    rows.push_back(m);
    row_lines.push_back(line_no);
  }
  if (in.bad()) throw Error("read error in trajectory input");
  if (n_columns == 0) throw ParseError("trajectory input has no header line", line_no, 0);
  return MeasurementSet(sensor_id, std::move(rows));
}

MeasurementSet parse_trajectory_file(const std::string& path,
                                     double default_sigma) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory file '" + path + "'");
  try {
    return parse_trajectory(in, path, default_sigma);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line(), e.column());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_trajectory(std::ostream& out, const MeasurementSet& data) {
  out << "timestamp_s,x_m,y_m,z_m,sigma_m\n";
  for (const Measurement& m : data.measurements()) {
    const double var = m.noise_cov(0, 0);
    if (!(m.noise_cov - var * Mat3::Identity()).isZero(0.0)) {
      throw ValidationError("only isotropic noise can be written to a trajectory file");
    }
    out << fmt_real(m.time) << ',' << fmt_real(m.position.x()) << ','
        << fmt_real(m.position.y()) << ',' << fmt_real(m.position.z()) << ','
        << fmt_real(std::sqrt(var)) << '\n';
  }
}

void write_trajectory_file(const std::string& path, const MeasurementSet& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_trajectory(out, data);
  if (!out) throw Error("write error on '" + path + "'");
}

bool CalibrationReport::operator==(const CalibrationReport& o) const {
  if (status != o.status || message != o.message ||
      anchor_sensor != o.anchor_sensor || delay_s != o.delay_s ||
      !(delay == o.delay) || !(provenance == o.provenance) ||
      extrinsic.has_value() != o.extrinsic.has_value()) {
    return false;
  }
  return !extrinsic || same_registration(*extrinsic, *o.extrinsic);
}

CalibrationReport make_report(const CalibrationResult& result,
                              Provenance provenance) {
  CalibrationReport r;
  r.status = to_string(result.status);
  r.message = result.message;
  r.anchor_sensor = result.anchor_sensor;
  r.delay_s = result.delay_s;
  r.delay = result.estimate;
  r.extrinsic = result.extrinsic;
  r.provenance = std::move(provenance);
  return r;
}

void write_report(std::ostream& out, const CalibrationReport& report) {
  // Render fully before emitting so a refused value leaves `out` untouched.
  std::ostringstream buf;
  JsonWriter w(buf);
  w.begin_object();
  w.field("format", kReportFormat);
  w.field("format_version", kReportVersion);
  w.field("status", report.status);
  w.field("message", report.message);
  write_estimate(w, report);
  write_extrinsic(w, report.extrinsic);
  w.begin_object("provenance");
  w.field("sensor1_file", report.provenance.sensor1_file);
  w.field("sensor2_file", report.provenance.sensor2_file);
  w.field("config_hash", report.provenance.config_hash);
  w.field("tool_version", report.provenance.tool_version);
  w.end_object();
  w.end_object();
  w.finish();
  out << buf.str();
}

std::string write_report(const CalibrationReport& report) {
  std::ostringstream out;
  write_report(out, report);
  return out.str();
}

CalibrationReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to line/column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(std::string("report: ") + e.what(), line, col);
  }

  try {
    if (j.at("format").get<std::string>() != kReportFormat) {
      throw ValidationError("report: unexpected format tag");
    }
    CalibrationReport r;
    r.status = j.at("status").get<std::string>();
    r.message = j.at("message").get<std::string>();
    const json& d = j.at("delay");
    r.anchor_sensor = d.at("anchor_sensor").get<int>();
    r.delay_s = d.at("delay_s").get<double>();
    r.delay.delay = d.at("anchor_relative_delay_s").get<double>();
    r.delay.final_cost = d.at("final_cost_m2_per_s2").get<double>();
    r.delay.rms_residual = d.at("rms_residual_m_per_s").get<double>();
    r.delay.iterations = d.at("iterations").get<int>();
    r.delay.converged = d.at("converged").get<bool>();
    r.delay.observability = d.at("observability_m_per_s2").get<double>();
    r.delay.unobservable = d.at("unobservable").get<bool>();
    r.delay.n_correspondences = d.at("n_correspondences").get<std::size_t>();
    r.delay.n_excluded = d.at("n_excluded").get<std::size_t>();

    const json& e = j.at("extrinsic");
    if (!e.is_null()) {
      RegistrationResult reg;
      const json& rot = e.at("rotation");
      if (!rot.is_array() || rot.size() != 3) {
        throw ValidationError("report: rotation must be a 3x3 array");
      }
      for (int row = 0; row < 3; ++row) {
        reg.transform.rotation.row(row) = vec3_from(rot[row]).transpose();
      }
      reg.transform.translation = vec3_from(e.at("translation_m"));
      reg.euler_zyx = vec3_from(e.at("euler_zyx_deg"));
      reg.rms_residual = e.at("rms_residual_m").get<double>();
      reg.n_pairs = e.at("n_pairs").get<std::size_t>();
      reg.collinearity = e.at("collinearity").get<double>();
      r.extrinsic = reg;
    }

    const json& p = j.at("provenance");
    r.provenance.sensor1_file = p.at("sensor1_file").get<std::string>();
    r.provenance.sensor2_file = p.at("sensor2_file").get<std::string>();
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.tool_version = p.at("tool_version").get<std::string>();
    return r;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("report: ") + ex.what());
  }
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string canonical_config(const PipelineConfig& cfg, double default_sigma) {
  std::ostringstream s;
  const DelayConfig& d = cfg.delay;
  s << "qc=" << fmt_real(cfg.qc) << ";anchor=" << to_string(cfg.anchor)
    << ";init_delay=" << fmt_real(d.initial_delay)
    << ";halfwidth=" << fmt_real(d.coarse_search_halfwidth)
    << ";step=" << fmt_real(d.coarse_search_step)
    << ";max_iters=" << d.max_iterations
    << ";cost_tol=" << fmt_real(d.cost_tolerance)
    << ";param_tol=" << fmt_real(d.parameter_tolerance)
    << ";damping=" << fmt_real(d.lm_initial_damping)
    << ";default_sigma=" << fmt_real(default_sigma);
  return s.str();
}

void write_cost_curve(std::ostream& out, std::span<const CostSample> samples) {
  out << "delay_s,cost_m2_per_s2\n";
  for (const CostSample& c : samples) {
    out << fmt_real(c.delay) << ',' << fmt_real(c.cost) << '\n';
  }
}

void write_sim_sidecar(std::ostream& out, const SimConfig& cfg,
                       const SimDataset& data, std::uint64_t seed) {
  JsonWriter w(out);
  w.begin_object();
  w.field("format", "gpcalib-sim-ground-truth");
  w.field("true_delay_s", data.true_delay);
  write_transform(w, data.true_transform);
  w.field("seed", std::to_string(seed));
  w.field("duration_s", cfg.duration);
  w.field("sample_interval_s", cfg.sample_interval);
  w.field("start_offset_s", cfg.sensor2_start_offset);
  w.field("counter_phase", cfg.counter_phase);
  w.field("noise_sigma_m", cfg.noise_sigma);
  w.field("sensor1_samples", data.sensor1.size());
  w.field("sensor2_samples", data.sensor2.size());
  w.end_object();
  w.finish();
}

void write_monte_carlo_report(std::ostream& out, const MonteCarloReport& report) {
  const SimConfig& cfg = report.config;
  std::ostringstream buf;
  JsonWriter w(buf);
  w.begin_object();
  w.field("format", "gpcalib-monte-carlo-report");
  w.field("tool_version", kToolVersion);
  w.begin_object("config");
  w.field("duration_s", cfg.duration);
  w.field("sample_interval_s", cfg.sample_interval);
  w.field("start_offset_s", cfg.sensor2_start_offset);
  w.field("counter_phase", cfg.counter_phase);
  w.field("noise_sigma_m", cfg.noise_sigma);
  w.field("trajectory_seed", std::to_string(cfg.trajectory_seed));
  w.field("n_runs", cfg.n_runs);
  w.field("qc", cfg.pipeline.qc);
  w.field("true_delay_s", cfg.true_delay());
  write_transform(w, cfg.ground_truth_transform);
  w.end_object();
  w.field("n_failed", report.n_failed);
  w.begin_object("summary");
  write_stats(w, "delay_error_s", report.delay_error);
  static constexpr const char* kEuler[] = {"euler_z_error_deg", "euler_y_error_deg",
                                           "euler_x_error_deg"};
  static constexpr const char* kTrans[] = {"translation_x_error_m",
                                           "translation_y_error_m",
                                           "translation_z_error_m"};
  for (int a = 0; a < 3; ++a) write_stats(w, kEuler[a], report.euler_error[a]);
  for (int a = 0; a < 3; ++a) write_stats(w, kTrans[a], report.translation_error[a]);
  w.end_object();
  w.begin_array("runs");
  for (const RunRecord& r : report.runs) {
    w.begin_object();
    w.field("run", r.run);
    w.field("seed", std::to_string(r.seed));
    w.field("status", r.status);
    w.field("message", r.message);
    w.field("delay_estimate_s", r.delay_estimate);
    w.field("delay_error_s", r.delay_error);
    w.vector_field("euler_error_deg", r.euler_error);
    w.vector_field("translation_error_m", r.translation_error);
    w.field("n_correspondences", r.n_correspondences);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  w.finish();
  out << buf.str();
}

void write_monte_carlo_runs(std::ostream& out, const MonteCarloReport& report) {
  out << "run,seed,status,delay_estimate_s,delay_error_s,euler_z_error_deg,"
         "euler_y_error_deg,euler_x_error_deg,translation_x_error_m,"
         "translation_y_error_m,translation_z_error_m,n_correspondences\n";
  for (const RunRecord& r : report.runs) {
    out << r.run << ',' << r.seed << ',' << r.status << ','
        << fmt_real(r.delay_estimate) << ',' << fmt_real(r.delay_error);
    for (int a = 0; a < 3; ++a) out << ',' << fmt_real(r.euler_error(a));
    for (int a = 0; a < 3; ++a) out << ',' << fmt_real(r.translation_error(a));
    out << ',' << r.n_correspondences << '\n';
  }
}

}  // namespace gpcalib
