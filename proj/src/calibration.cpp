#include "lcplan/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lcplan {

const std::array<const char*, 6> kGeneNames{"desired_speed_mps", "max_accel_mps2", "reaction_time_s",
                                            "leader_length_m", "own_decel_mps2",  "leader_decel_mps2"};

void TrajectoryRecord::validate() const {
  const std::size_t n = leader_x.size();
  if (n < 2) throw std::invalid_argument("record " + name + ": needs at least two samples");
  if (leader_v.size() != n || follower_x.size() != n || follower_v.size() != n)
    throw std::invalid_argument("record " + name + ": series lengths differ");
  if (!(step > 0)) throw std::invalid_argument("record " + name + ": step must be > 0");
  for (std::size_t k = 0; k < n; ++k)
    if (!(spacing(k) > 0)) throw std::invalid_argument("record " + name + ": spacing must stay positive");
}

FollowerSimulation simulateFollower(const LcmParams& params, const TrajectoryRecord& record,
                                    const MotionLimits& limits) {
  record.validate();
  const std::size_t n = record.size();
  const double dt = record.step;
  StateHistory leader;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k + 1 < n ? (record.leader_v[k + 1] - record.leader_v[k]) / dt : 0.0;
    leader.push(record.t0 + static_cast<double>(k) * dt, record.leader_x[k], record.leader_v[k], a);
  }

  FollowerSimulation sim;
  sim.x.reserve(n);
  sim.v.reserve(n);
  sim.a.reserve(n);
  VehicleState self{record.follower_id, record.follower_x[0], record.follower_v[0], 0.0, 0};
  StateHistory hist;
  hist.seedSteady(record.t0, self.x, self.v, params.reaction_time + 2 * dt, dt);
  hist.push(record.t0, self.x, self.v, 0.0);
  sim.x.push_back(self.x);
  sim.v.push_back(self.v);

  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double t = record.t0 + static_cast<double>(k) * dt;
    const double tq = t - params.reaction_time;
    VehicleState me = params.reaction_time > 0 ? hist.at(tq) : self;
    if (params.reaction_time == 0) me.a = hist.latest().a;
    me.id = record.follower_id;
    VehicleState lead = leader.at(tq);
    lead.id = record.leader_id;
    double a = 0.0;
    try {
      a = std::clamp(lcmAccelerationRaw(me, lead, params), limits.a_min, limits.a_max);
    } catch (const CollisionError&) {
      sim.collided = true;
      break;
    }
    hist.setLatestAccel(a);
    sim.a.push_back(a);
    self.v = std::clamp(self.v + a * dt, 0.0, limits.v_max);
    self.x += self.v * dt;
    hist.push(t + dt, self.x, self.v, a);
    hist.trimBefore(t + dt - params.reaction_time - 2 * dt);
    sim.x.push_back(self.x);
    sim.v.push_back(self.v);
    if (record.leader_x[k + 1] - self.x <= record.leader_length) {
      sim.collided = true;
      break;
    }
  }
  if (!sim.collided) sim.a.push_back(sim.a.empty() ? 0.0 : sim.a.back());
  return sim;
}

double relativeRms(std::span<const double> sim, std::span<const double> obs) {
  if (sim.size() != obs.size() || sim.empty()) throw std::invalid_argument("relativeRms: series must match");
  double acc = 0.0;
  for (std::size_t k = 0; k < sim.size(); ++k) {
    const double e = (sim[k] - obs[k]) / obs[k];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(sim.size()));
}

double rmse(std::span<const double> sim, std::span<const double> obs) {
  if (sim.size() != obs.size() || sim.empty()) throw std::invalid_argument("rmse: series must match");
  double acc = 0.0;
  for (std::size_t k = 0; k < sim.size(); ++k) acc += (sim[k] - obs[k]) * (sim[k] - obs[k]);
  return std::sqrt(acc / static_cast<double>(sim.size()));
}

double calibrationObjective(const LcmParams& params, const TrajectoryRecord& record, ObjectiveKind kind) {
  const FollowerSimulation sim = simulateFollower(params, record);
  if (sim.collided) return kCollisionPenalty;
  const std::size_t n = record.size();
  if (kind == ObjectiveKind::SpeedRmse) return rmse(sim.v, record.follower_v);
  std::vector<double> s_sim(n), s_obs(n);
  for (std::size_t k = 0; k < n; ++k) {
    s_sim[k] = record.leader_x[k] - sim.x[k];
    s_obs[k] = record.spacing(k);
  }
  return kind == ObjectiveKind::RelativeSpacing ? relativeRms(s_sim, s_obs) : rmse(s_sim, s_obs);
}

Genome toGenome(const LcmParams& p) {
  return {p.desired_speed, p.max_accel, p.reaction_time, p.leader_length, p.own_decel, p.leader_decel};
}

LcmParams fromGenome(const Genome& g) {
  LcmParams p;
  p.desired_speed = g[0];
  p.max_accel = g[1];
  p.reaction_time = g[2];
  p.leader_length = g[3];
  p.own_decel = g[4];
  p.leader_decel = g[5];
  return p;
}

void CalibrationConfig::validate() const {
  for (const auto& b : bounds)
    if (!(b.lo <= b.hi)) throw std::invalid_argument("calibration: bounds must be ordered");
  if (bounds[0].lo <= 0 || bounds[1].lo <= 0 || bounds[2].lo < 0 || bounds[3].lo <= 0 || bounds[4].lo <= 0 ||
      bounds[5].lo <= 0)
    throw std::invalid_argument("calibration: bounds must keep parameters valid");
  if (population < 2 || generations < 0) throw std::invalid_argument("calibration: population >= 2, generations >= 0");
  if (crossover_prob < 0 || crossover_prob > 1 || mutation_prob < 0 || mutation_prob > 1)
    throw std::invalid_argument("calibration: probabilities must lie in [0, 1]");
  if (tournament_size < 1 || blend_alpha < 0 || elitism < 0 || elitism >= population)
    throw std::invalid_argument("calibration: invalid operator settings");
}

CalibrationResult geneticCalibrate(std::span<const TrajectoryRecord> records, const CalibrationConfig& config,
                                   const std::function<void(const Genome&)>& on_evaluate,
                                   std::span<const Genome> initial_population) {
  config.validate();
  if (records.empty()) throw std::invalid_argument("geneticCalibrate: need at least one record");
  for (const auto& r : records) r.validate();

  CalibrationResult res;
  auto fitness = [&](const Genome& g) {
    if (on_evaluate) on_evaluate(g);
    ++res.evaluations;
    const LcmParams p = fromGenome(g);
    double sum = 0.0;
    for (const auto& r : records) sum += calibrationObjective(p, r, config.objective);
    return sum / static_cast<double>(records.size());
  };
  auto clampGene = [&](double v, std::size_t i) { return std::clamp(v, config.bounds[i].lo, config.bounds[i].hi); };

  const auto n = static_cast<std::size_t>(config.population);
  std::vector<Genome> pop;
  {
    std::seed_seq seq{config.seed, std::uint64_t{0}};
    std::mt19937_64 rng(seq);
    for (std::size_t k = 0; k < n; ++k) {
      Genome g;
      if (k < initial_population.size()) {
        g = initial_population[k];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = clampGene(g[i], i);
      } else {
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] = std::uniform_real_distribution<double>(config.bounds[i].lo, config.bounds[i].hi)(rng);
      }
      pop.push_back(g);
    }
  }
  std::vector<double> fit(n);
  for (std::size_t k = 0; k < n; ++k) fit[k] = fitness(pop[k]);

  std::vector<std::size_t> order(n);
  auto sortOrder = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
  };
  sortOrder();
  res.best_curve.push_back(fit[order[0]]);

  for (int gen = 1; gen <= config.generations; ++gen) {
    std::seed_seq seq{config.seed, static_cast<std::uint64_t>(gen)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    auto tournament = [&]() -> const Genome& {
      std::size_t best = pick(rng);
      for (int k = 1; k < config.tournament_size; ++k) {
        const std::size_t c = pick(rng);
        if (fit[c] < fit[best]) best = c;
      }
      return pop[best];
    };
    auto mutate = [&](Genome& g) {
      for (std::size_t i = 0; i < g.size(); ++i)
        if (unit(rng) < config.mutation_prob)
          g[i] = config.bounds[i].lo + unit(rng) * (config.bounds[i].hi - config.bounds[i].lo);
    };

    std::vector<Genome> next;
    std::vector<double> next_fit;
    for (int e = 0; e < config.elitism; ++e) {
      next.push_back(pop[order[static_cast<std::size_t>(e)]]);
      next_fit.push_back(fit[order[static_cast<std::size_t>(e)]]);
    }
    while (next.size() < n) {
      Genome c1 = tournament(), c2 = tournament();
      if (unit(rng) < config.crossover_prob) {
        for (std::size_t i = 0; i < c1.size(); ++i) {
          // BLX-alpha: both children drawn from the widened parent interval
          const double lo = std::min(c1[i], c2[i]), hi = std::max(c1[i], c2[i]);
          const double d = config.blend_alpha * (hi - lo);
          const double a = lo - d, w = hi - lo + 2 * d;
          c1[i] = clampGene(a + unit(rng) * w, i);
          c2[i] = clampGene(a + unit(rng) * w, i);
        }
      }
      mutate(c1);
      mutate(c2);
      for (Genome* c : {&c1, &c2}) {
        if (next.size() >= n) break;
        next.push_back(*c);
        next_fit.push_back(fitness(*c));
      }
    }
    pop = std::move(next);
    fit = std::move(next_fit);
    sortOrder();
    res.best_curve.push_back(fit[order[0]]);
  }
  res.best = fromGenome(pop[order[0]]);
  res.objective = fit[order[0]];
  return res;
}

namespace {

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<QuantileRow> summarizeParameters(std::span<const LcmParams> fits, const CalibrationConfig& config) {
  if (fits.empty()) throw std::invalid_argument("summarizeParameters: no fits");
  std::vector<QuantileRow> rows;
  for (std::size_t i = 0; i < kGeneNames.size(); ++i) {
    std::vector<double> v;
    for (const auto& p : fits) v.push_back(toGenome(p)[i]);
    QuantileRow r;
    r.name = kGeneNames[i];
    r.lo = config.bounds[i].lo;
    r.hi = config.bounds[i].hi;
    r.q25 = quantile(v, 0.25);
    r.q50 = quantile(v, 0.50);
    r.q75 = quantile(v, 0.75);
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    rows.push_back(r);
  }
  return rows;
}

}  // namespace lcplan
