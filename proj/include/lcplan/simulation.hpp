#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lcplan/engine.hpp"
#include "lcplan/trajectory.hpp"

namespace lcplan {

struct SimulationEvent {
  std::string kind;  // lc_start, handoff, lc_end
  double t = 0.0;
  bool operator==(const SimulationEvent&) const = default;
};

/// Records for every vehicle at every step, time-major.
struct SimulationLog {
  double step = 0.1;
  std::vector<VehicleRecord> records;
  std::vector<SimulationEvent> events;

  std::optional<double> eventTime(const std::string& kind) const;
  /// Records of one vehicle in time order.
  std::vector<VehicleRecord> vehicle(int id) const;
  std::vector<int> vehicleIds() const;
};

/// Runs the whole scenario. Without a plan the AV stays in its lane.
/// Throws CollisionError when any spacing collapses.
SimulationLog runScenario(const Scenario& scenario, const std::optional<Trajectory>& plan = std::nullopt);

/// Space-time rectangle [x0, x0 + length] x [t0, t0 + duration].
struct EdieRegion {
  double x0 = 0.0;
  double length = 225.0;
  double t0 = 0.0;
  double duration = 15.0;
  double area() const { return length * duration; }
  void validate() const;
};

enum class EdieClip { Interp, Step };

struct MetricsConfig {
  EdieClip clip = EdieClip::Interp;
  double region_length_m = 225.0;
  double region_duration_s = 15.0;
  double cross_section_offset_m = 200.0;
  bool operator==(const MetricsConfig&) const = default;
};

struct VehicleRegionTotals {
  int id = 0;
  double time = 0.0;
  double distance = 0.0;
};

struct MetricsReport {
  double flow_vph = 0.0;
  double speed_kmh = 0.0;
  double density_vpkm = 0.0;
  double total_time = 0.0;
  double total_distance = 0.0;
  double area = 0.0;
  bool empty = false;
  std::vector<VehicleRegionTotals> per_vehicle;
};

/// q = d/|A|, v = d/t, k = t/|A| in veh/h, km/h and veh/km.
MetricsReport edieFromTotals(double total_time_s, double total_distance_m, double area_m_s);

/// Target-lane HV trajectories clipped to the region. Interp clips each
/// step segment at the region edges; Step counts whole steps whose start
/// lies inside.
MetricsReport edieMetrics(const SimulationLog& log, const EdieRegion& region, EdieClip clip = EdieClip::Interp);

/// Region the AV cuts into: from its position at the LC start, starting at
/// the LC start.
EdieRegion defaultEdieRegion(const SimulationLog& log, double length = 225.0, double duration = 15.0);

struct TttResult {
  double total = 0.0;
  std::vector<std::pair<int, double>> per_vehicle;  // id, delay
  std::vector<int> missing;                         // never crossed in one of the logs
};

/// Sum over HVs of (crossing time with LC - crossing time without).
TttResult tttDifference(const SimulationLog& with_lc, const SimulationLog& without_lc, double cross_section,
                        double horizon);

/// AV position at the LC start plus `offset`.
double defaultCrossSection(const SimulationLog& log, double offset = 200.0);

struct HeatmapRow {
  double t = 0.0;
  int id = 0;
  double x = 0.0;
  double v = 0.0;
};

/// Target-lane HV samples.
std::vector<HeatmapRow> heatmapRows(const SimulationLog& log);

/// v_a - v_b for samples present in both logs (same vehicle and time), at a's position.
std::vector<HeatmapRow> heatmapDifference(const SimulationLog& a, const SimulationLog& b);

}  // namespace lcplan
