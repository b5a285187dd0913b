// lcplan: command-line front end for planning, simulation, tracking,
// traffic metrics and car-following calibration.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "lcplan/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lcplan;

#ifndef LCPLAN_VERSION
#define LCPLAN_VERSION "0.0.0"
#endif

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kValidation = 2, kInfeasible = 3, kControllerFault = 4 };

fs::path defaultOutDir() {
  if (const char* env = std::getenv("LCPLAN_OUT_DIR"); env && *env) return env;
  return "lcplan_out";
}

std::vector<double> parseList(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": cannot parse '" + cell + "'");
    }
  }
  return out;
}

std::string readText(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(p.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// FNV-1a, enough to tell whether an input changed between runs.
std::string digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Collects what a run read and wrote; turned into the manifest at the end.
struct Run {
  std::string subcommand;
  std::vector<std::string> args;  // replayable flags without --out and the config flag
  std::string config_yaml;
  std::optional<std::uint64_t> seed;
  json inputs = json::array();
  json outputs = json::array();
  json summary = json::object();

  void input(const fs::path& p) { inputs.push_back({{"path", p.string()}, {"fnv1a", digest(readText(p))}}); }
  void output(const fs::path& p) { outputs.push_back({{"path", p.string()}, {"fnv1a", digest(readText(p))}}); }

  json manifest(const std::string& out_name) const {
    return {{"tool", "lcplan"},
            {"version", LCPLAN_VERSION},
            {"libraries",
             {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"cli11", CLI11_VERSION}}},
            {"subcommand", subcommand},
            {"args", args},
            {"out_name", out_name},
            {"config", config_yaml},
            {"seed", seed ? json(*seed) : json(nullptr)},
            {"inputs", inputs},
            {"outputs", outputs},
            {"summary", summary}};
  }
};

ScenarioFile loadConfig(const std::string& path, Run& run) {
  ScenarioFile f = path.empty() ? ScenarioFile{} : loadScenarioFile(path);
  if (!path.empty()) run.input(path);
  run.config_yaml = serializeScenarioFile(f);
  return f;
}

void writeGridCsv(const std::vector<CandidateEvaluation>& grid, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "duration_s,x_final_m,feasible,violation_magnitude,min_clearance_m,av_total,hv_total,joint_total,"
         "reported_av,reported_hv,reported_joint\n";
  out.precision(17);
  for (const auto& e : grid)
    out << e.duration << ',' << e.x_final << ',' << (e.feasible ? 1 : 0) << ',' << e.violation_magnitude << ','
        << e.min_clearance << ',' << e.loss.av_total << ',' << e.loss.hv_total << ',' << e.loss.joint_total << ','
        << e.loss.reported_av << ',' << e.loss.reported_hv << ',' << e.loss.reported_joint << '\n';
}

void writeHvPrediction(const Rollout& rollout, const fs::path& path) {
  std::ofstream out(path);
  out << "t_s,id,x_m,v_mps,a_mps2,jerk_mps3,spacing_m,headway_s\n";
  out.precision(17);
  for (const auto& step : rollout.steps)
    for (const auto& r : step)
      if (r.id != kAvId && r.id != kTargetLeaderId)
        out << r.t << ',' << r.id << ',' << r.x << ',' << r.v << ',' << r.a << ',' << r.jerk << ',' << r.spacing
            << ',' << r.headway << '\n';
}

std::vector<double> defaultOmegas() {
  std::vector<double> w;
  for (int k = 1; k <= 10; ++k) w.push_back(k / 10.0);
  return w;
}

// Subcommand options.
struct PlanOpts {
  std::string scenario, sweep;
  std::optional<double> omega;
};
struct SimOpts {
  std::string scenario, plan;
  bool baseline = false;
};
struct TrackOpts {
  std::string plan, scenario;
  double lateral_offset = 0.0;
};
struct MetricsOpts {
  std::string log, baseline, region, totals, clip = "interp";
  std::optional<double> cross_section, horizon;
};
struct CalibOpts {
  std::string data, config;
  std::optional<std::uint64_t> seed;
  std::size_t min_samples = 50;
};
struct SweepOpts {
  std::string scenario, omegas;
};

void cmdPlan(const PlanOpts& o, const fs::path& out, Run& run) {
  ScenarioFile f = loadConfig(o.scenario, run);
  if (o.omega) f.scenario.weights.omega_av = *o.omega;
  f.scenario.weights.validate();
  const LaneChangeProblem problem(f.scenario);
  const PlanResult plan = optimize(problem, f.scenario.weights, f.planner);
  writeJson(planToJson(plan, f.scenario), out / "plan.json");
  writeGridCsv(plan.grid, out / "grid.csv");
  writeHvPrediction(plan.rollout, out / "hv_prediction.csv");
  for (const char* n : {"plan.json", "grid.csv", "hv_prediction.csv"}) run.output(out / n);
  if (!o.sweep.empty()) {
    const auto omegas = parseList(o.sweep, "--sweep");
    writeSweepCsv(sweepOmega(problem, omegas, f.scenario.weights, f.planner), out / "sweep.csv");
    run.output(out / "sweep.csv");
  }
  run.summary = {{"duration_s", plan.best.duration},
                 {"x_final_m", plan.best.x_final},
                 {"joint_total", plan.best.loss.joint_total}};
  std::cout << "plan: T=" << plan.best.duration << " s, x_final=" << plan.best.x_final
            << " m, joint_total=" << plan.best.loss.joint_total << "\n";
}

void cmdSweep(const SweepOpts& o, const fs::path& out, Run& run) {
  const ScenarioFile f = loadConfig(o.scenario, run);
  const auto omegas = o.omegas.empty() ? defaultOmegas() : parseList(o.omegas, "--omegas");
  const LaneChangeProblem problem(f.scenario);
  const auto rows = sweepOmega(problem, omegas, f.scenario.weights, f.planner);
  writeSweepCsv(rows, out / "sweep.csv");
  run.output(out / "sweep.csv");
  run.summary = {{"rows", rows.size()}};
  std::cout << "sweep: " << rows.size() << " rows\n";
}

void cmdSimulate(const SimOpts& o, const fs::path& out, Run& run) {
  const ScenarioFile f = loadConfig(o.scenario, run);
  std::optional<Trajectory> traj;
  if (!o.plan.empty()) {
    run.input(o.plan);
    const StoredPlan p = planFromJson(readJson(o.plan));
    if (std::abs(p.lc_start_s - f.scenario.lc_start_s) > 1e-9)
      throw ConfigError(o.plan + ": plan starts at " + std::to_string(p.lc_start_s) + " s but the scenario at " +
                        std::to_string(f.scenario.lc_start_s) + " s");
    traj = p.trajectory;
  }
  const SimulationLog log = runScenario(f.scenario, traj);
  writeLogCsv(log, out / "log.csv");
  writeHeatmapCsv(heatmapRows(log), out / "heatmap.csv");
  run.output(out / "log.csv");
  run.output(out / "heatmap.csv");
  if (o.baseline) {
    writeLogCsv(runScenario(f.scenario), out / "baseline.csv");
    run.output(out / "baseline.csv");
  }
  run.summary = {{"records", log.records.size()}};
  std::cout << "simulate: " << log.records.size() << " records\n";
}

void cmdTrack(const TrackOpts& o, const fs::path& out_file, Run& run) {
  const ScenarioFile f = loadConfig(o.scenario, run);
  run.input(o.plan);
  const StoredPlan p = planFromJson(readJson(o.plan));
  const KinematicState init{p.x0, p.y0 + o.lateral_offset, 0.0};
  const TrackingResult res = track(p.trajectory, init, f.tracker, p.x0, p.y0);
  writeTrackedCsv(res, out_file);
  run.output(out_file);
  const double final_y = res.final_state.y - p.y0;
  run.summary = {{"max_lateral_error_m", res.max_lateral_error},
                 {"max_kkt_residual", res.max_kkt_residual},
                 {"final_lateral_m", final_y}};
  std::cout << "track: max lateral error " << res.max_lateral_error << " m, final lateral " << final_y << " m\n";
}

std::optional<EdieRegion> parseRegion(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto v = parseList(text, "--region");
  if (v.size() != 4) throw ConfigError("--region needs x0,L,t0,Tw");
  EdieRegion r{v[0], v[1], v[2], v[3]};
  try {
    r.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--region: ") + e.what());
  }
  return r;
}

json regionJson(const EdieRegion& r) {
  return {{"x0_m", r.x0}, {"length_m", r.length}, {"t0_s", r.t0}, {"duration_s", r.duration}};
}

// id,time_s,distance_m rows (per-vehicle totals inside a region).
MetricsReport metricsFromTotals(const fs::path& path, const EdieRegion& region) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::string line;
  std::getline(in, line);
  MetricsReport acc;
  double t = 0.0, d = 0.0;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string id, ts, ds;
    std::getline(ss, id, ',');
    std::getline(ss, ts, ',');
    std::getline(ss, ds, ',');
    try {
      VehicleRegionTotals v{std::stoi(id), std::stod(ts), std::stod(ds)};
      acc.per_vehicle.push_back(v);
      t += v.time;
      d += v.distance;
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected id,time_s,distance_m");
    }
  }
  MetricsReport m = edieFromTotals(t, d, region.area());
  m.per_vehicle = std::move(acc.per_vehicle);
  return m;
}

void cmdMetrics(const MetricsOpts& o, const fs::path& out, Run& run) {
  EdieClip clip;
  if (o.clip == "interp")
    clip = EdieClip::Interp;
  else if (o.clip == "step")
    clip = EdieClip::Step;
  else
    throw ConfigError("--clip must be interp or step");
  const auto region_arg = parseRegion(o.region);
  json j;

  if (!o.totals.empty()) {
    if (!region_arg) throw ConfigError("--totals needs --region for the area");
    run.input(o.totals);
    j["region"] = regionJson(*region_arg);
    j["edie"] = toJson(metricsFromTotals(o.totals, *region_arg));
  } else {
    if (o.log.empty()) throw ConfigError("metrics needs --log or --totals");
    run.input(o.log);
    const SimulationLog log = readLogCsv(o.log);
    if (!region_arg && !log.eventTime("lc_start"))
      throw ConfigError(o.log + ": no lc_start event; pass --region explicitly");
    const EdieRegion region = region_arg ? *region_arg : defaultEdieRegion(log);
    j["region"] = regionJson(region);
    j["clip"] = o.clip;
    j["edie"] = toJson(edieMetrics(log, region, clip));
    if (!o.baseline.empty()) {
      run.input(o.baseline);
      const SimulationLog base = readLogCsv(o.baseline);
      j["baseline_edie"] = toJson(edieMetrics(base, region, clip));
      double cross = 0.0;
      if (o.cross_section)
        cross = *o.cross_section;
      else if (log.eventTime("lc_start"))
        cross = defaultCrossSection(log);
      else
        throw ConfigError(o.log + ": no lc_start event; pass --cross-section explicitly");
      const double horizon = o.horizon ? *o.horizon : log.records.empty() ? 0.0 : log.records.back().t;
      j["cross_section_m"] = cross;
      j["ttt"] = toJson(tttDifference(log, base, cross, horizon));
      writeHeatmapCsv(heatmapDifference(log, base), out / "heatmap.csv", "dv_mps");
    } else {
      writeHeatmapCsv(heatmapRows(log), out / "heatmap.csv");
    }
    run.output(out / "heatmap.csv");
  }
  writeJson(j, out / "metrics.json");
  run.output(out / "metrics.json");
  run.summary = j["edie"];
  run.summary.erase("per_vehicle");
  std::cout << "metrics: q=" << j["edie"]["flow_vph"] << " veh/h, v=" << j["edie"]["speed_kmh"]
            << " km/h, k=" << j["edie"]["density_vpkm"] << " veh/km\n";
}

json paramsJson(const LcmParams& p) {
  json j;
  const Genome g = toGenome(p);
  for (std::size_t i = 0; i < g.size(); ++i) j[kGeneNames[i]] = g[i];
  return j;
}

void cmdCalibrate(const CalibOpts& o, const fs::path& out_file, Run& run) {
  ScenarioFile f = loadConfig(o.config, run);
  if (o.seed) f.calibration.seed = *o.seed;
  run.config_yaml = serializeScenarioFile(f);
  run.seed = f.calibration.seed;
  if (!fs::is_directory(o.data)) throw ConfigError(o.data + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.data))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(o.data + ": no .csv files");

  std::vector<TrajectoryRecord> records;
  json warnings = json::array();
  for (const auto& p : files) {
    run.input(p);
    CfExtraction ex = extractCfPairs(loadTrajectoryCsv(p), o.min_samples);
    for (auto& r : ex.records) {
      r.name = p.stem().string() + "/" + r.name;
      records.push_back(std::move(r));
    }
    for (auto& w : ex.warnings) warnings.push_back(p.filename().string() + ": " + w);
  }
  if (records.empty()) throw ConfigError(o.data + ": no car-following episodes found");

  json per = json::array();
  std::vector<LcmParams> fits;
  for (const auto& r : records) {
    const CalibrationResult res = geneticCalibrate(std::span(&r, 1), f.calibration);
    fits.push_back(res.best);
    per.push_back({{"record", r.name},
                   {"leader_id", r.leader_id},
                   {"follower_id", r.follower_id},
                   {"samples", r.size()},
                   {"objective", res.objective},
                   {"params", paramsJson(res.best)}});
  }
  json table = json::array();
  for (const auto& q : summarizeParameters(fits, f.calibration))
    table.push_back({{"parameter", q.name},
                     {"lower", q.lo},
                     {"upper", q.hi},
                     {"q25", q.q25},
                     {"q50", q.q50},
                     {"q75", q.q75},
                     {"mean", q.mean}});
  const json j = {{"records", per},
                  {"record_count", records.size()},
                  {"quantiles", table},
                  {"seed", f.calibration.seed},
                  {"warnings", warnings}};
  writeJson(j, out_file);
  run.output(out_file);
  run.summary = {{"record_count", records.size()}};
  std::cout << "calibrate: " << records.size() << " records\n";
}

void printError(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}}.dump() << "\n";
}

int run(std::vector<std::string> argv);

int replay(const std::string& manifest_path, const fs::path& out) {
  const json m = readJson(manifest_path);
  std::vector<std::string> args;
  try {
    args.push_back(m.at("subcommand").get<std::string>());
    for (const auto& a : m.at("args")) args.push_back(a.get<std::string>());
    fs::create_directories(out);
    const fs::path cfg = out / "replay_config.yaml";
    std::ofstream(cfg) << m.at("config").get<std::string>();
    if (args[0] != "metrics") {
      args.push_back(args[0] == "calibrate" ? "--config" : "--scenario");
      args.push_back(cfg.string());
    }
    if (args[0] == "calibrate" && m.at("seed").is_number()) {
      args.push_back("--seed");
      args.push_back(std::to_string(m.at("seed").get<std::uint64_t>()));
    }
    const std::string name = m.at("out_name").get<std::string>();
    args.push_back("--out");
    args.push_back((name.empty() ? out : out / name).string());
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path + ": " + e.what());
  }
  return run(args);
}

int run(std::vector<std::string> argv) {
  CLI::App app{"Lane-change trajectory planning, tracking and traffic impact", "lcplan"};
  app.set_version_flag("--version", LCPLAN_VERSION);
  app.require_subcommand(1);

  const std::string out_help = "output directory (default: $LCPLAN_OUT_DIR or ./lcplan_out)";
  std::string out_arg;

  PlanOpts plan;
  auto* p = app.add_subcommand("plan", "optimize the lane-change trajectory");
  p->add_option("--scenario", plan.scenario, "scenario YAML")->required()->check(CLI::ExistingFile);
  p->add_option("--omega-av", plan.omega, "AV weight in the joint objective");
  p->add_option("--sweep", plan.sweep, "also sweep these AV weights (comma separated)");
  p->add_option("--out", out_arg, out_help);

  SweepOpts sweep;
  auto* sw = app.add_subcommand("sweep", "optimize once per AV weight");
  sw->add_option("--scenario", sweep.scenario, "scenario YAML")->required()->check(CLI::ExistingFile);
  sw->add_option("--omegas", sweep.omegas, "comma separated weights (default 0.1,...,1.0)");
  sw->add_option("--out", out_arg, out_help);

  SimOpts sim;
  auto* s = app.add_subcommand("simulate", "run the traffic scenario");
  s->add_option("--scenario", sim.scenario, "scenario YAML")->required()->check(CLI::ExistingFile);
  s->add_option("--plan", sim.plan, "plan.json; without one the AV keeps its lane")->check(CLI::ExistingFile);
  s->add_flag("--baseline", sim.baseline, "also write baseline.csv without the lane change");
  s->add_option("--out", out_arg, out_help);

  TrackOpts trk;
  auto* t = app.add_subcommand("track", "follow a plan with the MPC controller");
  t->add_option("--plan", trk.plan, "plan.json")->required()->check(CLI::ExistingFile);
  t->add_option("--scenario", trk.scenario, "YAML with a tracker section")->check(CLI::ExistingFile);
  t->add_option("--lateral-offset", trk.lateral_offset, "initial lateral offset from the reference, m");
  t->add_option("--out", out_arg, "tracked CSV path (default: <out dir>/tracked.csv)");

  MetricsOpts met;
  auto* mt = app.add_subcommand("metrics", "region flow/speed/density and travel-time delay");
  mt->add_option("--log", met.log, "simulation log.csv")->check(CLI::ExistingFile);
  mt->add_option("--baseline", met.baseline, "log without the lane change")->check(CLI::ExistingFile);
  mt->add_option("--region", met.region, "x0,L,t0,Tw (default: from the lc_start event)");
  mt->add_option("--cross-section", met.cross_section, "travel-time cross-section position, m");
  mt->add_option("--horizon", met.horizon, "last time considered for crossings, s");
  mt->add_option("--totals", met.totals, "per-vehicle totals CSV (id,time_s,distance_m)")->check(CLI::ExistingFile);
  mt->add_option("--clip", met.clip, "region clipping: interp or step");
  mt->add_option("--out", out_arg, out_help);

  CalibOpts cal;
  auto* c = app.add_subcommand("calibrate", "fit car-following parameters to trajectory data");
  c->add_option("--data", cal.data, "directory of trajectory CSV files")->required();
  c->add_option("--config", cal.config, "YAML with a calibration section")->check(CLI::ExistingFile);
  c->add_option("--seed", cal.seed, "override the configured seed");
  c->add_option("--min-samples", cal.min_samples, "shortest episode kept");
  c->add_option("--out", out_arg, "calibration JSON path (default: <out dir>/calib.json)");

  std::string manifest;
  auto* r = app.add_subcommand("replay", "re-run a recorded manifest");
  r->add_option("--manifest", manifest, "manifest JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--out", out_arg, out_help);

  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    printError(kValidation, "usage", e.what());
    return kValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "replay") return replay(manifest, out_arg.empty() ? defaultOutDir() : fs::path(out_arg));

  // Replayable arguments: everything except --out and the config file.
  Run run;
  run.subcommand = name;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string flag = opt->get_name();
    if (opt->count() == 0 || flag == "--out" || flag == "--scenario" || flag == "--config" || flag == "--help")
      continue;
    if (opt->get_expected_min() == 0) {
      run.args.push_back(flag);
      continue;
    }
    for (const auto& v : opt->results()) {
      run.args.push_back(flag);
      run.args.push_back(v);
    }
  }

  const bool file_out = name == "track" || name == "calibrate";
  fs::path out_dir, out_file;
  if (file_out) {
    out_file = out_arg.empty() ? defaultOutDir() / (name == "track" ? "tracked.csv" : "calib.json") : fs::path(out_arg);
    out_dir = out_file.has_parent_path() ? out_file.parent_path() : fs::path(".");
  } else {
    out_dir = out_arg.empty() ? defaultOutDir() : fs::path(out_arg);
  }
  fs::create_directories(out_dir);

  if (name == "plan")
    cmdPlan(plan, out_dir, run);
  else if (name == "sweep")
    cmdSweep(sweep, out_dir, run);
  else if (name == "simulate")
    cmdSimulate(sim, out_dir, run);
  else if (name == "track")
    cmdTrack(trk, out_file, run);
  else if (name == "metrics")
    cmdMetrics(met, out_dir, run);
  else if (name == "calibrate")
    cmdCalibrate(cal, out_file, run);

  const fs::path manifest_path =
      file_out ? out_dir / (out_file.stem().string() + ".manifest.json") : out_dir / "manifest.json";
  writeJson(run.manifest(file_out ? out_file.filename().string() : ""), manifest_path);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const ConfigError& e) {
    printError(kValidation, "validation", e.what());
    return kValidation;
  } catch (const std::invalid_argument& e) {
    printError(kValidation, "validation", e.what());
    return kValidation;
  } catch (const std::domain_error& e) {
    printError(kValidation, "validation", e.what());
    return kValidation;
  } catch (const NoFeasibleCandidate& e) {
    printError(kInfeasible, "infeasible", e.what());
    return kInfeasible;
  } catch (const ControllerFault& e) {
    printError(kControllerFault, "controller_fault", e.what());
    return kControllerFault;
  } catch (const std::exception& e) {
    printError(kFailure, "internal", e.what());
    return kFailure;
  }
}
