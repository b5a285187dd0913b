#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcplan/calibration.hpp"
#include "lcplan/engine.hpp"
#include "lcplan/planner.hpp"
#include "lcplan/simulation.hpp"
#include "lcplan/tracker.hpp"

namespace lcplan {

/// Bad input files or values; message carries source and line where known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kSchemaVersion = 1;

/// Everything a run needs, as stored in one YAML document.
struct ScenarioFile {
  Scenario scenario;
  PlannerConfig planner;
  MpcConfig tracker;
  MetricsConfig metrics;
  CalibrationConfig calibration;
  bool operator==(const ScenarioFile&) const = default;
};

ScenarioFile parseScenarioFile(const std::string& text, const std::string& source = "<string>");
ScenarioFile loadScenarioFile(const std::filesystem::path& path);
std::string serializeScenarioFile(const ScenarioFile& file);
inline Scenario loadScenario(const std::filesystem::path& path) { return loadScenarioFile(path).scenario; }

// Trajectory data in a HighD-like per-row CSV.
struct TrajectoryRow {
  double t = 0.0;
  int vehicle_id = 0;
  int lane_id = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double ax = 0.0;
  int leader_id = 0;  // <= 0: no leader
  double length = 0.0;
};

struct TrajectoryCsv {
  double step = 0.0;
  std::vector<TrajectoryRow> rows;
};

/// Columns time_s, vehicle_id, lane_id, x_m, y_m, vx_mps, ax_mps2, leader_id,
/// length_m in any order. Checks per-vehicle increasing time and a uniform step.
TrajectoryCsv parseTrajectoryCsv(std::istream& in, const std::string& source = "<stream>");
TrajectoryCsv loadTrajectoryCsv(const std::filesystem::path& path);

struct CfExtraction {
  std::vector<TrajectoryRecord> records;
  std::vector<std::string> warnings;
};

/// Contiguous leader-follower episodes: same leader, same follower lane,
/// leader present every step, positive spacing. Dangling leader ids are
/// skipped with a warning; a vehicle leading itself is a ConfigError.
CfExtraction extractCfPairs(const TrajectoryCsv& csv, std::size_t min_samples = 2);

// Artifacts.
void writeLogCsv(const SimulationLog& log, const std::filesystem::path& path);
SimulationLog readLogCsv(const std::filesystem::path& path);
void writeHeatmapCsv(const std::vector<HeatmapRow>& rows, const std::filesystem::path& path,
                     const char* value_column = "v_mps");
void writeTrackedCsv(const TrackingResult& result, const std::filesystem::path& path);
void writeSweepCsv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

nlohmann::json toJson(const LossBreakdown& loss);
nlohmann::json toJson(const CostWeights& weights);
nlohmann::json toJson(const CandidateEvaluation& eval);
nlohmann::json toJson(const MetricsReport& report);
nlohmann::json toJson(const TttResult& ttt);

/// plan.json: the chosen trajectory (coefficients and sampling), its losses,
/// the grid optimum and the weights.
nlohmann::json planToJson(const PlanResult& plan, const Scenario& scenario);

/// Trajectory stored in plan.json, with its origin-lane start position.
struct StoredPlan {
  Trajectory trajectory;
  double lc_start_s = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
};
StoredPlan planFromJson(const nlohmann::json& j);

void writeJson(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json readJson(const std::filesystem::path& path);

}  // namespace lcplan
