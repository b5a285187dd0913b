#include "lcplan/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace lcplan {

std::optional<double> SimulationLog::eventTime(const std::string& kind) const {
  for (const auto& e : events)
    if (e.kind == kind) return e.t;
  return std::nullopt;
}

std::vector<VehicleRecord> SimulationLog::vehicle(int id) const {
  std::vector<VehicleRecord> out;
  for (const auto& r : records)
    if (r.id == id) out.push_back(r);
  return out;
}

std::vector<int> SimulationLog::vehicleIds() const {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.id);
  return {ids.begin(), ids.end()};
}

SimulationLog runScenario(const Scenario& scenario, const std::optional<Trajectory>& plan) {
  TrafficEngine engine(scenario);
  SimulationLog log;
  log.step = scenario.step_s;
  const auto n = static_cast<long>(std::llround(scenario.duration_s / scenario.step_s));
  const auto lc_step = static_cast<long>(std::llround(scenario.lc_start_s / scenario.step_s));
  for (long k = 0; k < n; ++k) {
    if (plan && k == lc_step) {
      engine.beginLaneChange(*plan);
      log.events.push_back({"lc_start", engine.laneChangeStart()});
      log.events.push_back({"handoff", engine.handoffTime()});
      log.events.push_back({"lc_end", engine.laneChangeEnd()});
    }
    auto recs = engine.step();
    log.records.insert(log.records.end(), recs.begin(), recs.end());
  }
  return log;
}

void EdieRegion::validate() const {
  if (!(length > 0) || !(duration > 0)) throw std::invalid_argument("EdieRegion: length and duration must be > 0");
}

MetricsReport edieFromTotals(double total_time_s, double total_distance_m, double area_m_s) {
  if (!(area_m_s > 0)) throw std::invalid_argument("edieFromTotals: area must be > 0");
  MetricsReport m;
  m.area = area_m_s;
  m.total_time = total_time_s;
  m.total_distance = total_distance_m;
  if (!(total_time_s > 0)) {
    m.empty = true;
    return m;
  }
  m.flow_vph = total_distance_m / area_m_s * 3600.0;
  m.speed_kmh = total_distance_m / total_time_s * 3.6;
  m.density_vpkm = total_time_s / area_m_s * 1000.0;
  return m;
}

namespace {

bool isHv(int id) { return id != kAvId && id != kTargetLeaderId; }

std::map<int, std::vector<VehicleRecord>> hvTracks(const SimulationLog& log) {
  std::map<int, std::vector<VehicleRecord>> tracks;
  for (const auto& r : log.records)
    if (isHv(r.id)) tracks[r.id].push_back(r);
  return tracks;
}

}  // namespace

MetricsReport edieMetrics(const SimulationLog& log, const EdieRegion& region, EdieClip clip) {
  region.validate();
  const double t1 = region.t0 + region.duration, x1 = region.x0 + region.length;
  double total_t = 0.0, total_d = 0.0;
  std::vector<VehicleRegionTotals> per;
  for (const auto& [id, track] : hvTracks(log)) {
    VehicleRegionTotals v{id, 0.0, 0.0};
    for (std::size_t k = 0; k + 1 < track.size(); ++k) {
      const auto& a = track[k];
      const auto& b = track[k + 1];
      const double dt = b.t - a.t, dx = b.x - a.x;
      if (clip == EdieClip::Step) {
        if (a.t >= region.t0 && a.t < t1 && a.x >= region.x0 && a.x <= x1) {
          v.time += dt;
          v.distance += dx;
        }
        continue;
      }
      // parameter interval u in [0, 1] where the segment lies inside the rectangle
      double lo = std::max(0.0, (region.t0 - a.t) / dt), hi = std::min(1.0, (t1 - a.t) / dt);
      if (dx > 0) {
        lo = std::max(lo, (region.x0 - a.x) / dx);
        hi = std::min(hi, (x1 - a.x) / dx);
      } else if (a.x < region.x0 || a.x > x1) {
        continue;
      }
      if (hi > lo) {
        v.time += (hi - lo) * dt;
        v.distance += (hi - lo) * dx;
      }
    }
    total_t += v.time;
    total_d += v.distance;
    per.push_back(v);
  }
  MetricsReport m = edieFromTotals(total_t, total_d, region.area());
  m.per_vehicle = std::move(per);
  return m;
}

namespace {

const VehicleRecord* avAt(const SimulationLog& log, double t) {
  const VehicleRecord* best = nullptr;
  for (const auto& r : log.records)
    if (r.id == kAvId && (!best || std::abs(r.t - t) < std::abs(best->t - t))) best = &r;
  return best;
}

double lcStart(const SimulationLog& log) {
  const auto t = log.eventTime("lc_start");
  if (!t) throw std::invalid_argument("log has no lane change");
  return *t;
}

}  // namespace

EdieRegion defaultEdieRegion(const SimulationLog& log, double length, double duration) {
  const double t0 = lcStart(log);
  const VehicleRecord* av = avAt(log, t0);
  if (!av) throw std::invalid_argument("log has no AV records");
  return {av->x, length, t0, duration};
}

double defaultCrossSection(const SimulationLog& log, double offset) {
  const VehicleRecord* av = avAt(log, lcStart(log));
  if (!av) throw std::invalid_argument("log has no AV records");
  return av->x + offset;
}

namespace {

std::optional<double> crossingTime(const std::vector<VehicleRecord>& track, double section, double horizon) {
  if (track.empty()) return std::nullopt;
  if (track.front().x >= section)
    throw std::invalid_argument("tttDifference: cross-section must lie downstream of every initial position");
  for (std::size_t k = 0; k + 1 < track.size(); ++k) {
    const auto& a = track[k];
    const auto& b = track[k + 1];
    if (a.t > horizon) break;
    if (a.x < section && b.x >= section) {
      const double t = a.t + (section - a.x) / (b.x - a.x) * (b.t - a.t);
      return t <= horizon ? std::optional<double>(t) : std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

TttResult tttDifference(const SimulationLog& with_lc, const SimulationLog& without_lc, double cross_section,
                        double horizon) {
  TttResult res;
  const auto a = hvTracks(with_lc), b = hvTracks(without_lc);
  for (const auto& [id, track] : a) {
    const auto it = b.find(id);
    if (it == b.end()) {
      res.missing.push_back(id);
      continue;
    }
    const auto ta = crossingTime(track, cross_section, horizon);
    const auto tb = crossingTime(it->second, cross_section, horizon);
    if (!ta || !tb) {
      res.missing.push_back(id);
      continue;
    }
    res.per_vehicle.emplace_back(id, *ta - *tb);
    res.total += *ta - *tb;
  }
  return res;
}

std::vector<HeatmapRow> heatmapRows(const SimulationLog& log) {
  std::vector<HeatmapRow> out;
  for (const auto& r : log.records)
    if (isHv(r.id)) out.push_back({r.t, r.id, r.x, r.v});
  return out;
}

std::vector<HeatmapRow> heatmapDifference(const SimulationLog& a, const SimulationLog& b) {
  std::map<std::pair<long, int>, double> speed_b;
  const double dt = b.step;
  for (const auto& r : b.records)
    if (isHv(r.id)) speed_b[{std::lround(r.t / dt), r.id}] = r.v;
  std::vector<HeatmapRow> out;
  for (const auto& r : a.records) {
    if (!isHv(r.id)) continue;
    const auto it = speed_b.find({std::lround(r.t / dt), r.id});
    if (it != speed_b.end()) out.push_back({r.t, r.id, r.x, r.v - it->second});
  }
  return out;
}

}  // namespace lcplan
