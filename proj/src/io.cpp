#include "lcplan/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace lcplan {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string where(const std::string& source, const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  if (m.line < 0) return source;
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

// Map node reader that remembers which keys were consumed so leftovers can
// be reported as unknown.
class MapReader {
 public:
  MapReader(YAML::Node node, std::string path, const std::string& source)
      : node_(std::move(node)), path_(std::move(path)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ConfigError(where(source_, node_) + ": '" + path_ + "' must be a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  template <typename T>
  void get(const std::string& key, T& out) {
    known_.insert(key);
    if (!has(key)) return;
    const YAML::Node v = node_[key];
    try {
      if constexpr (std::is_same_v<T, bool>) {
        out = v.as<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        const double d = v.as<double>();
        if (d != std::floor(d)) throw YAML::BadConversion(v.Mark());
        if constexpr (std::is_signed_v<T>)
          out = static_cast<T>(v.as<long long>());
        else
          out = static_cast<T>(v.as<unsigned long long>());
      } else {
        out = v.as<T>();
      }
    } catch (const YAML::Exception&) {
      throw ConfigError(where(source_, v) + ": bad value for '" + qualified(key) + "'");
    }
    if constexpr (std::is_floating_point_v<T>)
      if (!std::isfinite(out)) throw ConfigError(where(source_, v) + ": '" + qualified(key) + "' must be finite");
  }

  template <int N>
  void getVector(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    known_.insert(key);
    if (!has(key)) return;
    const YAML::Node v = node_[key];
    if (!v.IsSequence() || v.size() != static_cast<std::size_t>(N))
      throw ConfigError(where(source_, v) + ": '" + qualified(key) + "' needs " + std::to_string(N) + " numbers");
    for (std::size_t i = 0; i < static_cast<std::size_t>(N); ++i) {
      try {
        out(static_cast<int>(i)) = v[i].as<double>();
      } catch (const YAML::Exception&) {
        throw ConfigError(where(source_, v[i]) + ": bad value in '" + qualified(key) + "'");
      }
    }
  }

  MapReader child(const std::string& key) {
    known_.insert(key);
    return MapReader(has(key) ? node_[key] : YAML::Node(), qualified(key), source_);
  }

  YAML::Node raw(const std::string& key) {
    known_.insert(key);
    return has(key) ? node_[key] : YAML::Node();
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& source() const { return source_; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (known_.count(key)) continue;
      std::string msg = where(source_, kv.first) + ": unknown key '" + qualified(key) + "'";
      for (const auto& k : known_)
        if (k.rfind(key + "_", 0) == 0) {
          msg += " (did you mean '" + k + "'? keys carry unit suffixes)";
          break;
        }
      throw ConfigError(msg);
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> known_;
};

void readLcm(MapReader r, LcmParams& p) {
  r.get("max_accel_mps2", p.max_accel);
  r.get("own_decel_mps2", p.own_decel);
  r.get("leader_decel_mps2", p.leader_decel);
  r.get("reaction_time_s", p.reaction_time);
  r.get("desired_speed_mps", p.desired_speed);
  r.get("leader_length_m", p.leader_length);
  r.finish();
}

void readScenario(MapReader r, Scenario& s) {
  r.get("name", s.name);
  r.get("step_s", s.step_s);
  r.get("duration_s", s.duration_s);
  r.get("lc_start_s", s.lc_start_s);
  r.get("av_initial_speed_mps", s.av_initial_speed_mps);
  r.get("av_target_speed_mps", s.av_target_speed_mps);
  r.get("av_desired_speed_mps", s.av_desired_speed_mps);
  r.get("av_gap_m", s.av_gap_m);
  r.get("lane_width_m", s.lane_width_m);
  r.get("hv_loss_settle_s", s.hv_loss_settle_s);
  std::string handoff = s.handoff == HandoffMode::LcStart ? "lc_start" : "lateral_boundary";
  r.get("handoff", handoff);
  if (handoff == "lateral_boundary")
    s.handoff = HandoffMode::LateralBoundary;
  else if (handoff == "lc_start")
    s.handoff = HandoffMode::LcStart;
  else
    throw ConfigError(where(r.source(), r.raw("handoff")) + ": handoff must be lateral_boundary or lc_start");

  {
    MapReader h = r.child("hvs");
    h.get("count", s.hv_count);
    h.get("initial_spacing_m", s.hv_initial_spacing_m);
    h.get("initial_speed_mps", s.hv_initial_speed_mps);
    readLcm(h.child("params"), s.hv_params);
    const YAML::Node per = h.raw("per_vehicle");
    s.hv_params_per_vehicle.clear();
    if (per && !per.IsNull()) {
      if (!per.IsSequence()) throw ConfigError(where(r.source(), per) + ": hvs.per_vehicle must be a list");
      for (std::size_t i = 0; i < per.size(); ++i) {
        LcmParams p = s.hv_params;
        readLcm(MapReader(per[i], "hvs.per_vehicle[" + std::to_string(i) + "]", r.source()), p);
        s.hv_params_per_vehicle.push_back(p);
      }
    }
    h.finish();
  }
  {
    const YAML::Node tl = r.raw("target_leader");
    if (tl && !tl.IsNull()) {
      TargetLeader leader;
      MapReader t(tl, "scenario.target_leader", r.source());
      t.get("spacing_m", leader.spacing_m);
      t.get("speed_mps", leader.speed_mps);
      t.finish();
      s.target_leader = leader;
    } else {
      s.target_leader.reset();
    }
  }
  readLcm(r.child("av_follow_params"), s.av_follow_params);
  {
    MapReader l = r.child("limits");
    l.get("v_max_mps", s.limits.v_max);
    l.get("a_min_mps2", s.limits.a_min);
    l.get("a_max_mps2", s.limits.a_max);
    l.finish();
  }
  {
    MapReader c = r.child("collision");
    c.get("vehicle_length_m", s.collision.vehicle_length);
    c.get("vehicle_width_m", s.collision.vehicle_width);
    c.get("semi_major_m", s.collision.semi_major);
    c.get("semi_minor_m", s.collision.semi_minor);
    c.finish();
  }
  r.finish();
}

void readWeights(MapReader r, CostWeights& w) {
  r.get("omega_av", w.omega_av);
  r.get("av_comfort", w.av_comfort);
  r.get("av_efficiency", w.av_efficiency);
  r.get("hv_comfort", w.hv_comfort);
  r.get("hv_efficiency", w.hv_efficiency);
  r.get("norm_comfort_mps3", w.norm_comfort);
  r.get("norm_efficiency_mps", w.norm_efficiency);
  r.finish();
}

void readPlanner(MapReader r, PlannerConfig& p) {
  r.get("t_min_s", p.t_min);
  r.get("t_max_s", p.t_max);
  r.get("t_step_s", p.t_step);
  r.get("xf_factor_min", p.xf_factor_min);
  r.get("xf_factor_max", p.xf_factor_max);
  r.get("xf_step_m", p.xf_step);
  r.get("v_min_mps", p.v_min);
  r.get("v_max_mps", p.v_max);
  r.get("a_min_mps2", p.a_min);
  r.get("a_max_mps2", p.a_max);
  r.get("j_min_mps3", p.j_min);
  r.get("j_max_mps3", p.j_max);
  r.get("clearance_margin_m", p.clearance_margin);
  r.get("refine", p.refine);
  r.get("refine_tol", p.refine_tol);
  r.get("refine_max_iter", p.refine_max_iter);
  r.get("refine_restarts", p.refine_restarts);
  r.get("infeasible_penalty", p.infeasible_penalty);
  r.finish();
}

void readTracker(MapReader r, MpcConfig& c) {
  r.get("np", c.np);
  r.get("nc", c.nc);
  r.getVector("q", c.q);
  r.getVector("r", c.r);
  r.get("rho", c.rho);
  r.get("v_min_mps", c.v_min);
  r.get("v_max_mps", c.v_max);
  r.get("delta_max_rad", c.delta_max);
  r.get("dv_max_mps", c.dv_max);
  r.get("ddelta_max_rad", c.ddelta_max);
  r.get("step_s", c.step);
  r.get("wheelbase_m", c.wheelbase);
  {
    MapReader q = r.child("qp");
    q.get("tolerance", c.qp.tolerance);
    q.get("max_iterations", c.qp.max_iterations);
    q.get("polish", c.qp.polish);
    q.finish();
  }
  r.finish();
}

const char* clipName(EdieClip c) { return c == EdieClip::Step ? "step" : "interp"; }

void readMetrics(MapReader r, MetricsConfig& m) {
  std::string clip = clipName(m.clip);
  r.get("edie_clip", clip);
  if (clip == "interp")
    m.clip = EdieClip::Interp;
  else if (clip == "step")
    m.clip = EdieClip::Step;
  else
    throw ConfigError(where(r.source(), r.raw("edie_clip")) + ": edie_clip must be interp or step");
  r.get("region_length_m", m.region_length_m);
  r.get("region_duration_s", m.region_duration_s);
  r.get("cross_section_offset_m", m.cross_section_offset_m);
  r.finish();
}

const char* objectiveName(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::SpacingRmse:
      return "spacing_rmse";
    case ObjectiveKind::SpeedRmse:
      return "speed_rmse";
    default:
      return "relative_spacing";
  }
}

void readCalibration(MapReader r, CalibrationConfig& c) {
  r.get("population", c.population);
  r.get("generations", c.generations);
  r.get("crossover_prob", c.crossover_prob);
  r.get("mutation_prob", c.mutation_prob);
  r.get("tournament_size", c.tournament_size);
  r.get("blend_alpha", c.blend_alpha);
  r.get("elitism", c.elitism);
  r.get("seed", c.seed);
  std::string obj = objectiveName(c.objective);
  r.get("objective", obj);
  if (obj == "relative_spacing")
    c.objective = ObjectiveKind::RelativeSpacing;
  else if (obj == "spacing_rmse")
    c.objective = ObjectiveKind::SpacingRmse;
  else if (obj == "speed_rmse")
    c.objective = ObjectiveKind::SpeedRmse;
  else
    throw ConfigError(where(r.source(), r.raw("objective")) +
                      ": objective must be relative_spacing, spacing_rmse or speed_rmse");
  {
    MapReader b = r.child("bounds");
    for (std::size_t i = 0; i < kGeneNames.size(); ++i) {
      Eigen::Vector2d lohi(c.bounds[i].lo, c.bounds[i].hi);
      b.getVector(kGeneNames[i], lohi);
      c.bounds[i] = {lohi(0), lohi(1)};
    }
    b.finish();
  }
  r.finish();
}

template <typename F>
void validated(const std::string& source, const char* what, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + what + ": " + e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(source + ": " + what + ": " + e.what());
  }
}

// Emitter helpers.
void kv(YAML::Emitter& e, const char* key, double v) { e << YAML::Key << key << YAML::Value << fmt(v); }
void kv(YAML::Emitter& e, const char* key, int v) { e << YAML::Key << key << YAML::Value << v; }
void kv(YAML::Emitter& e, const char* key, bool v) { e << YAML::Key << key << YAML::Value << v; }
void kv(YAML::Emitter& e, const char* key, const std::string& v) {
  e << YAML::Key << key << YAML::Value << YAML::DoubleQuoted << v;
}

template <typename Vec>
void seq(YAML::Emitter& e, const char* key, const Vec& v) {
  e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < v.size(); ++i) e << fmt(v(i));
  e << YAML::EndSeq;
}

void emitLcm(YAML::Emitter& e, const char* key, const LcmParams& p) {
  if (key) e << YAML::Key << key << YAML::Value;
  e << YAML::BeginMap;
  kv(e, "max_accel_mps2", p.max_accel);
  kv(e, "own_decel_mps2", p.own_decel);
  kv(e, "leader_decel_mps2", p.leader_decel);
  kv(e, "reaction_time_s", p.reaction_time);
  kv(e, "desired_speed_mps", p.desired_speed);
  kv(e, "leader_length_m", p.leader_length);
  e << YAML::EndMap;
}

std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parseNumber(const std::string& cell, const std::string& ctx) {
  T v{};
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last) throw ConfigError(ctx + ": cannot parse '" + cell + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw ConfigError(ctx + ": non-finite value");
  return v;
}

std::ofstream openOut(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

ScenarioFile parseScenarioFile(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError(source + ": expected a mapping at the top level");

  ScenarioFile f;
  MapReader top(root, "", source);
  int version = kSchemaVersion;
  top.get("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError(where(source, root["schema_version"]) + ": unsupported schema_version " +
                      std::to_string(version));
  readScenario(top.child("scenario"), f.scenario);
  readWeights(top.child("weights"), f.scenario.weights);
  readPlanner(top.child("planner"), f.planner);
  readTracker(top.child("tracker"), f.tracker);
  readMetrics(top.child("metrics"), f.metrics);
  readCalibration(top.child("calibration"), f.calibration);
  top.finish();

  validated(source, "scenario", [&] { f.scenario.validate(); });
  validated(source, "planner", [&] { f.planner.validate(); });
  validated(source, "tracker", [&] { f.tracker.validate(); });
  validated(source, "calibration", [&] { f.calibration.validate(); });
  if (!(f.metrics.region_length_m > 0) || !(f.metrics.region_duration_s > 0))
    throw ConfigError(source + ": metrics: region length and duration must be > 0");
  return f;
}

ScenarioFile loadScenarioFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parseScenarioFile(ss.str(), path.string());
}

std::string serializeScenarioFile(const ScenarioFile& f) {
  const Scenario& s = f.scenario;
  YAML::Emitter e;
  e << YAML::BeginMap;
  kv(e, "schema_version", kSchemaVersion);

  e << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  kv(e, "name", s.name);
  kv(e, "step_s", s.step_s);
  kv(e, "duration_s", s.duration_s);
  kv(e, "lc_start_s", s.lc_start_s);
  kv(e, "av_initial_speed_mps", s.av_initial_speed_mps);
  kv(e, "av_target_speed_mps", s.av_target_speed_mps);
  kv(e, "av_desired_speed_mps", s.av_desired_speed_mps);
  kv(e, "av_gap_m", s.av_gap_m);
  kv(e, "lane_width_m", s.lane_width_m);
  kv(e, "handoff", std::string(s.handoff == HandoffMode::LcStart ? "lc_start" : "lateral_boundary"));
  kv(e, "hv_loss_settle_s", s.hv_loss_settle_s);
  e << YAML::Key << "hvs" << YAML::Value << YAML::BeginMap;
  kv(e, "count", s.hv_count);
  kv(e, "initial_spacing_m", s.hv_initial_spacing_m);
  kv(e, "initial_speed_mps", s.hv_initial_speed_mps);
  emitLcm(e, "params", s.hv_params);
  if (!s.hv_params_per_vehicle.empty()) {
    e << YAML::Key << "per_vehicle" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : s.hv_params_per_vehicle) emitLcm(e, nullptr, p);
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;
  if (s.target_leader) {
    e << YAML::Key << "target_leader" << YAML::Value << YAML::BeginMap;
    kv(e, "spacing_m", s.target_leader->spacing_m);
    kv(e, "speed_mps", s.target_leader->speed_mps);
    e << YAML::EndMap;
  }
  emitLcm(e, "av_follow_params", s.av_follow_params);
  e << YAML::Key << "limits" << YAML::Value << YAML::BeginMap;
  kv(e, "v_max_mps", s.limits.v_max);
  kv(e, "a_min_mps2", s.limits.a_min);
  kv(e, "a_max_mps2", s.limits.a_max);
  e << YAML::EndMap;
  e << YAML::Key << "collision" << YAML::Value << YAML::BeginMap;
  kv(e, "vehicle_length_m", s.collision.vehicle_length);
  kv(e, "vehicle_width_m", s.collision.vehicle_width);
  kv(e, "semi_major_m", s.collision.semi_major);
  kv(e, "semi_minor_m", s.collision.semi_minor);
  e << YAML::EndMap;
  e << YAML::EndMap;

  const CostWeights& w = s.weights;
  e << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
  kv(e, "omega_av", w.omega_av);
  kv(e, "av_comfort", w.av_comfort);
  kv(e, "av_efficiency", w.av_efficiency);
  kv(e, "hv_comfort", w.hv_comfort);
  kv(e, "hv_efficiency", w.hv_efficiency);
  kv(e, "norm_comfort_mps3", w.norm_comfort);
  kv(e, "norm_efficiency_mps", w.norm_efficiency);
  e << YAML::EndMap;

  const PlannerConfig& p = f.planner;
  e << YAML::Key << "planner" << YAML::Value << YAML::BeginMap;
  kv(e, "t_min_s", p.t_min);
  kv(e, "t_max_s", p.t_max);
  kv(e, "t_step_s", p.t_step);
  kv(e, "xf_factor_min", p.xf_factor_min);
  kv(e, "xf_factor_max", p.xf_factor_max);
  kv(e, "xf_step_m", p.xf_step);
  kv(e, "v_min_mps", p.v_min);
  kv(e, "v_max_mps", p.v_max);
  kv(e, "a_min_mps2", p.a_min);
  kv(e, "a_max_mps2", p.a_max);
  kv(e, "j_min_mps3", p.j_min);
  kv(e, "j_max_mps3", p.j_max);
  kv(e, "clearance_margin_m", p.clearance_margin);
  kv(e, "refine", p.refine);
  kv(e, "refine_tol", p.refine_tol);
  kv(e, "refine_max_iter", p.refine_max_iter);
  kv(e, "refine_restarts", p.refine_restarts);
  kv(e, "infeasible_penalty", p.infeasible_penalty);
  e << YAML::EndMap;

  const MpcConfig& t = f.tracker;
  e << YAML::Key << "tracker" << YAML::Value << YAML::BeginMap;
  kv(e, "np", t.np);
  kv(e, "nc", t.nc);
  seq(e, "q", t.q);
  seq(e, "r", t.r);
  kv(e, "rho", t.rho);
  kv(e, "v_min_mps", t.v_min);
  kv(e, "v_max_mps", t.v_max);
  kv(e, "delta_max_rad", t.delta_max);
  kv(e, "dv_max_mps", t.dv_max);
  kv(e, "ddelta_max_rad", t.ddelta_max);
  kv(e, "step_s", t.step);
  kv(e, "wheelbase_m", t.wheelbase);
  e << YAML::Key << "qp" << YAML::Value << YAML::BeginMap;
  kv(e, "tolerance", t.qp.tolerance);
  kv(e, "max_iterations", t.qp.max_iterations);
  kv(e, "polish", t.qp.polish);
  e << YAML::EndMap;
  e << YAML::EndMap;

  const MetricsConfig& m = f.metrics;
  e << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
  kv(e, "edie_clip", std::string(clipName(m.clip)));
  kv(e, "region_length_m", m.region_length_m);
  kv(e, "region_duration_s", m.region_duration_s);
  kv(e, "cross_section_offset_m", m.cross_section_offset_m);
  e << YAML::EndMap;

  const CalibrationConfig& c = f.calibration;
  e << YAML::Key << "calibration" << YAML::Value << YAML::BeginMap;
  kv(e, "population", c.population);
  kv(e, "generations", c.generations);
  kv(e, "crossover_prob", c.crossover_prob);
  kv(e, "mutation_prob", c.mutation_prob);
  kv(e, "tournament_size", c.tournament_size);
  kv(e, "blend_alpha", c.blend_alpha);
  kv(e, "elitism", c.elitism);
  e << YAML::Key << "seed" << YAML::Value << std::to_string(c.seed);
  kv(e, "objective", std::string(objectiveName(c.objective)));
  e << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
  for (std::size_t i = 0; i < kGeneNames.size(); ++i)
    seq(e, kGeneNames[i], Eigen::Vector2d(c.bounds[i].lo, c.bounds[i].hi));
  e << YAML::EndMap;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

TrajectoryCsv parseTrajectoryCsv(std::istream& in, const std::string& source) {
  static const std::vector<std::string> kColumns{"time_s", "vehicle_id", "lane_id",   "x_m",     "y_m",
                                                 "vx_mps", "ax_mps2",    "leader_id", "length_m"};
  std::string line;
  long lineno = 0;
  std::vector<int> col(kColumns.size(), -1);
  bool header = false;
  TrajectoryCsv csv;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = splitCsv(line);
    const std::string ctx = source + ":" + std::to_string(lineno);
    if (!header) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto it = std::find(kColumns.begin(), kColumns.end(), cells[c]);
        if (it == kColumns.end()) throw ConfigError(ctx + ": unknown column '" + cells[c] + "'");
        col[static_cast<std::size_t>(it - kColumns.begin())] = static_cast<int>(c);
      }
      for (std::size_t k = 0; k < kColumns.size(); ++k)
        if (col[k] < 0) throw ConfigError(ctx + ": missing column '" + kColumns[k] + "'");
      header = true;
      continue;
    }
    auto cell = [&](std::size_t k) -> const std::string& {
      const auto c = static_cast<std::size_t>(col[k]);
      if (c >= cells.size()) throw ConfigError(ctx + ": missing cell '" + kColumns[k] + "'");
      return cells[c];
    };
    TrajectoryRow r;
    r.t = parseNumber<double>(cell(0), ctx);
    r.vehicle_id = parseNumber<int>(cell(1), ctx);
    r.lane_id = parseNumber<int>(cell(2), ctx);
    r.x = parseNumber<double>(cell(3), ctx);
    r.y = parseNumber<double>(cell(4), ctx);
    r.vx = parseNumber<double>(cell(5), ctx);
    r.ax = parseNumber<double>(cell(6), ctx);
    r.leader_id = parseNumber<int>(cell(7), ctx);
    r.length = parseNumber<double>(cell(8), ctx);
    if (!(r.length > 0)) throw ConfigError(ctx + ": length_m must be > 0");
    csv.rows.push_back(r);
  }
  if (!header) throw ConfigError(source + ": empty trajectory file");

  std::map<int, std::vector<double>> times;
  for (const auto& r : csv.rows) times[r.vehicle_id].push_back(r.t);
  for (auto& [id, ts] : times) {
    for (std::size_t k = 1; k < ts.size(); ++k) {
      const double d = ts[k] - ts[k - 1];
      if (!(d > 0))
        throw ConfigError(source + ": vehicle " + std::to_string(id) + ": time must increase row by row");
      if (csv.step == 0.0) csv.step = d;
      if (std::abs(d - csv.step) > 1e-6 * csv.step)
        throw ConfigError(source + ": vehicle " + std::to_string(id) + ": non-uniform time step at t=" +
                          fmt(ts[k]));
    }
  }
  if (csv.step == 0.0) throw ConfigError(source + ": cannot infer a time step (one sample per vehicle)");
  return csv;
}

TrajectoryCsv loadTrajectoryCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  return parseTrajectoryCsv(in, path.string());
}

CfExtraction extractCfPairs(const TrajectoryCsv& csv, std::size_t min_samples) {
  CfExtraction out;
  if (csv.rows.empty()) return out;
  if (!(csv.step > 0)) throw ConfigError("extractCfPairs: step must be > 0");
  double t_min = csv.rows.front().t;
  for (const auto& r : csv.rows) t_min = std::min(t_min, r.t);
  auto frame = [&](double t) { return std::lround((t - t_min) / csv.step); };

  std::map<int, std::vector<const TrajectoryRow*>> by_vehicle;
  std::map<std::pair<int, long>, const TrajectoryRow*> at;
  for (const auto& r : csv.rows) {
    by_vehicle[r.vehicle_id].push_back(&r);
    at[{r.vehicle_id, frame(r.t)}] = &r;
  }
  std::set<int> dangling;

  for (auto& [id, rows] : by_vehicle) {
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->t < b->t; });
    TrajectoryRecord cur;
    int cur_leader = 0, cur_lane = 0;
    long last_frame = 0;
    int episode = 0;
    auto flush = [&] {
      if (cur.size() >= min_samples) {
        cur.name = "f" + std::to_string(id) + "_l" + std::to_string(cur.leader_id) + "_" + std::to_string(episode++);
        out.records.push_back(std::move(cur));
      }
      cur = TrajectoryRecord{};
      cur_leader = 0;
    };
    for (const auto* r : rows) {
      if (r->leader_id == r->vehicle_id)
        throw ConfigError("vehicle " + std::to_string(id) + " lists itself as leader at t=" + fmt(r->t));
      const long f = frame(r->t);
      const TrajectoryRow* lead = nullptr;
      if (r->leader_id > 0) {
        if (!by_vehicle.count(r->leader_id)) {
          if (dangling.insert(r->leader_id).second)
            out.warnings.push_back("leader " + std::to_string(r->leader_id) + " of vehicle " + std::to_string(id) +
                                   " never appears; skipped");
        } else if (auto it = at.find({r->leader_id, f}); it != at.end()) {
          lead = it->second;
        }
      }
      const bool ok = lead && lead->x - r->x > 0;
      const bool continues = ok && cur_leader == r->leader_id && cur_lane == r->lane_id && f == last_frame + 1;
      if (!continues) flush();
      if (ok) {
        if (cur.size() == 0) {
          cur.leader_id = r->leader_id;
          cur.follower_id = id;
          cur.t0 = r->t;
          cur.step = csv.step;
          cur.leader_length = lead->length;
          cur.follower_length = r->length;
          cur_leader = r->leader_id;
          cur_lane = r->lane_id;
        }
        cur.leader_x.push_back(lead->x);
        cur.leader_v.push_back(lead->vx);
        cur.follower_x.push_back(r->x);
        cur.follower_v.push_back(r->vx);
        last_frame = f;
      }
    }
    flush();
  }
  return out;
}

void writeLogCsv(const SimulationLog& log, const std::filesystem::path& path) {
  auto out = openOut(path);
  out << "# step " << fmt(log.step) << "\n";
  for (const auto& e : log.events) out << "# event " << e.kind << " " << fmt(e.t) << "\n";
  out << "t_s,id,lane,x_m,y_m,v_mps,a_mps2,jerk_mps3,heading_rad,headway_s,spacing_m\n";
  for (const auto& r : log.records)
    out << fmt(r.t) << ',' << r.id << ',' << r.lane << ',' << fmt(r.x) << ',' << fmt(r.y) << ',' << fmt(r.v) << ','
        << fmt(r.a) << ',' << fmt(r.jerk) << ',' << fmt(r.heading) << ',' << fmt(r.headway) << ','
        << fmt(r.spacing) << '\n';
}

SimulationLog readLogCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  SimulationLog log;
  std::string line;
  long lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tag;
      ss >> tag;
      if (tag == "step") {
        std::string v;
        ss >> v;
        log.step = parseNumber<double>(v, ctx);
      } else if (tag == "event") {
        SimulationEvent e;
        std::string v;
        ss >> e.kind >> v;
        e.t = parseNumber<double>(v, ctx);
        log.events.push_back(e);
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const auto c = splitCsv(line);
    if (c.size() != 11) throw ConfigError(ctx + ": expected 11 cells");
    VehicleRecord r;
    r.t = parseNumber<double>(c[0], ctx);
    r.id = parseNumber<int>(c[1], ctx);
    r.lane = parseNumber<int>(c[2], ctx);
    r.x = parseNumber<double>(c[3], ctx);
    r.y = parseNumber<double>(c[4], ctx);
    r.v = parseNumber<double>(c[5], ctx);
    r.a = parseNumber<double>(c[6], ctx);
    r.jerk = parseNumber<double>(c[7], ctx);
    r.heading = parseNumber<double>(c[8], ctx);
    r.headway = parseNumber<double>(c[9], ctx);
    r.spacing = parseNumber<double>(c[10], ctx);
    log.records.push_back(r);
  }
  if (!header) throw ConfigError(path.string() + ": not a simulation log");
  return log;
}

void writeHeatmapCsv(const std::vector<HeatmapRow>& rows, const std::filesystem::path& path,
                     const char* value_column) {
  auto out = openOut(path);
  out << "t_s,id,x_m," << value_column << "\n";
  for (const auto& r : rows) out << fmt(r.t) << ',' << r.id << ',' << fmt(r.x) << ',' << fmt(r.v) << '\n';
}

void writeTrackedCsv(const TrackingResult& result, const std::filesystem::path& path) {
  auto out = openOut(path);
  out << "t_s,x_ref_m,y_ref_m,x_m,y_m,heading_rad,v_cmd_mps,delta_cmd_rad,e_lat_m,e_lon_m,e_v_mps,epsilon\n";
  for (const auto& s : result.samples)
    out << fmt(s.t) << ',' << fmt(s.x_ref) << ',' << fmt(s.y_ref) << ',' << fmt(s.x) << ',' << fmt(s.y) << ','
        << fmt(s.heading) << ',' << fmt(s.v_cmd) << ',' << fmt(s.delta_cmd) << ',' << fmt(s.e_lat) << ','
        << fmt(s.e_lon) << ',' << fmt(s.e_v) << ',' << fmt(s.epsilon) << '\n';
}

void writeSweepCsv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  auto out = openOut(path);
  out << "omega_av,duration_s,x_final_m,feasible,av_comfort,av_efficiency,av_total,hv_comfort,hv_efficiency,"
         "hv_total,joint_total,reported_av,reported_hv,reported_joint\n";
  for (const auto& r : rows) {
    const auto& l = r.best.loss;
    out << fmt(r.omega_av) << ',' << fmt(r.best.duration) << ',' << fmt(r.best.x_final) << ','
        << (r.best.feasible ? 1 : 0) << ',' << fmt(l.av_comfort) << ',' << fmt(l.av_efficiency) << ','
        << fmt(l.av_total) << ',' << fmt(l.hv_comfort) << ',' << fmt(l.hv_efficiency) << ',' << fmt(l.hv_total)
        << ',' << fmt(l.joint_total) << ',' << fmt(l.reported_av) << ',' << fmt(l.reported_hv) << ','
        << fmt(l.reported_joint) << '\n';
  }
}

nlohmann::json toJson(const LossBreakdown& l) {
  return {{"av_comfort", l.av_comfort},   {"av_efficiency", l.av_efficiency}, {"av_total", l.av_total},
          {"hv_comfort", l.hv_comfort},   {"hv_efficiency", l.hv_efficiency}, {"hv_total", l.hv_total},
          {"joint_total", l.joint_total}, {"reported_av", l.reported_av},     {"reported_hv", l.reported_hv},
          {"reported_joint", l.reported_joint}};
}

nlohmann::json toJson(const CostWeights& w) {
  return {{"omega_av", w.omega_av},           {"omega_hv", w.omegaHv()},
          {"av_comfort", w.av_comfort},       {"av_efficiency", w.av_efficiency},
          {"hv_comfort", w.hv_comfort},       {"hv_efficiency", w.hv_efficiency},
          {"norm_comfort_mps3", w.norm_comfort}, {"norm_efficiency_mps", w.norm_efficiency}};
}

nlohmann::json toJson(const CandidateEvaluation& e) {
  return {{"duration_s", e.duration},
          {"x_final_m", e.x_final},
          {"feasible", e.feasible},
          {"violation_magnitude", e.violation_magnitude},
          {"violations", e.violations},
          {"min_clearance_m", e.min_clearance},
          {"loss", toJson(e.loss)}};
}

nlohmann::json toJson(const MetricsReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : r.per_vehicle) per.push_back({{"id", v.id}, {"time_s", v.time}, {"distance_m", v.distance}});
  return {{"flow_vph", r.flow_vph},         {"speed_kmh", r.speed_kmh},   {"density_vpkm", r.density_vpkm},
          {"total_time_s", r.total_time},   {"total_distance_m", r.total_distance},
          {"area_m_s", r.area},             {"empty", r.empty},           {"per_vehicle", per}};
}

nlohmann::json toJson(const TttResult& t) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& [id, d] : t.per_vehicle) per.push_back({{"id", id}, {"delay_s", d}});
  return {{"total_s", t.total}, {"per_vehicle", per}, {"missing", t.missing}};
}

nlohmann::json planToJson(const PlanResult& plan, const Scenario& scenario) {
  const Trajectory& tr = plan.trajectory;
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : tr.samples)
    samples.push_back({{"t", s.t},
                       {"x", s.x},
                       {"y", s.y},
                       {"vx", s.vx},
                       {"vy", s.vy},
                       {"ax", s.ax},
                       {"ay", s.ay},
                       {"jx", s.jx},
                       {"jy", s.jy},
                       {"heading", s.heading}});
  auto vec = [](const Eigen::Matrix<double, 6, 1>& v) { return std::vector<double>(v.data(), v.data() + 6); };
  return {{"schema_version", kSchemaVersion},
          {"scenario", scenario.name},
          {"weights", toJson(plan.weights)},
          {"best", toJson(plan.best)},
          {"grid_best", toJson(plan.grid_best)},
          {"grid_size", plan.grid.size()},
          {"refine_iterations", plan.refine_iterations},
          {"lc_start_s", plan.rollout.lc_start},
          {"origin", {{"x_m", plan.rollout.av_x0}, {"y_m", 0.0}}},
          {"trajectory",
           {{"duration_s", tr.duration},
            {"sample_step_s", tr.sample_step},
            {"coeffs", {{"lon", vec(tr.coeffs.lon)}, {"lat", vec(tr.coeffs.lat)}}},
            {"samples", samples}}}};
}

StoredPlan planFromJson(const nlohmann::json& j) {
  try {
    const auto& t = j.at("trajectory");
    Coeffs c;
    const auto lon = t.at("coeffs").at("lon").get<std::vector<double>>();
    const auto lat = t.at("coeffs").at("lat").get<std::vector<double>>();
    if (lon.size() != 6 || lat.size() != 6) throw ConfigError("plan: coefficient vectors need 6 entries");
    for (int i = 0; i < 6; ++i) {
      c.lon(i) = lon[static_cast<std::size_t>(i)];
      c.lat(i) = lat[static_cast<std::size_t>(i)];
    }
    StoredPlan p;
    p.trajectory = makeTrajectory(c, t.at("duration_s").get<double>(), t.at("sample_step_s").get<double>());
    p.lc_start_s = j.at("lc_start_s").get<double>();
    p.x0 = j.at("origin").at("x_m").get<double>();
    p.y0 = j.at("origin").at("y_m").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
}

void writeJson(const nlohmann::json& j, const std::filesystem::path& path) {
  auto out = openOut(path);
  out << j.dump(2) << '\n';
}

nlohmann::json readJson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace lcplan
