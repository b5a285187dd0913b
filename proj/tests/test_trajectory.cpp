#include <doctest.h>

#include <random>

#include "lcplan/trajectory.hpp"

using namespace lcplan;

TEST_SUITE("trajectory") {

TEST_CASE("symmetric quintic meets its endpoint conditions") {
  const double v = 25, T = 5, xf = 125, D = 3.5;
  const Coeffs c = symmetricCoeffs(v, T, xf, D);
  const Sample s0 = evaluate(c, 0.0), s1 = evaluate(c, T);
  CHECK(s0.x == doctest::Approx(0).epsilon(1e-9));
  CHECK(s0.vx == doctest::Approx(v).epsilon(1e-9));
  CHECK(std::abs(s0.ax) < 1e-9);
  CHECK(std::abs(s0.y) < 1e-9);
  CHECK(std::abs(s0.vy) < 1e-9);
  CHECK(std::abs(s0.ay) < 1e-9);
  CHECK(std::abs(s1.x - xf) < 1e-9);
  CHECK(std::abs(s1.vx - v) < 1e-9);
  CHECK(std::abs(s1.ax) < 1e-9);
  CHECK(std::abs(s1.y - D) < 1e-9);
  CHECK(std::abs(s1.vy) < 1e-9);
  CHECK(std::abs(s1.ay) < 1e-9);
}

TEST_CASE("general solver matches the closed form when entry and exit states agree") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> speed(5, 30), dur(1.5, 10), fac(0.6, 1.4);
  for (int k = 0; k < 50; ++k) {
    const double v = speed(rng), T = dur(rng), xf = fac(rng) * v * T;
    const Coeffs closed = symmetricCoeffs(v, T, xf, 3.5);
    const Coeffs general = buildGeneralTrajectory(BoundaryConditions{v, 0, v, 0, xf, 3.5, T});
    for (double t = 0; t <= T; t += T / 17) {
      const Sample a = evaluate(closed, t), b = evaluate(general, t);
      CHECK(std::abs(a.x - b.x) < 1e-7);
      CHECK(std::abs(a.y - b.y) < 1e-9);
      CHECK(std::abs(a.jx - b.jx) < 1e-7);
    }
  }
}

TEST_CASE("general solver honours arbitrary boundary conditions") {
  const BoundaryConditions bc{20, 1.0, 24, -0.5, 110, 3.5, 5};
  const Coeffs c = buildGeneralTrajectory(bc);
  const Sample s0 = evaluate(c, 0.0), s1 = evaluate(c, bc.duration);
  CHECK(std::abs(s0.vx - 20) < 1e-9);
  CHECK(std::abs(s0.ax - 1.0) < 1e-9);
  CHECK(std::abs(s1.x - 110) < 1e-9);
  CHECK(std::abs(s1.vx - 24) < 1e-9);
  CHECK(std::abs(s1.ax + 0.5) < 1e-9);
  CHECK(std::abs(s1.y - 3.5) < 1e-9);
  CHECK_THROWS_AS(buildGeneralTrajectory(BoundaryConditions{20, 0, 20, 0, 100, 3.5, 0}), std::domain_error);
}

TEST_CASE("shape function is point-symmetric about the midpoint") {
  const double T = 6.5;
  for (int k = 0; k <= 100; ++k) {
    const double t = T * k / 100.0;
    CHECK(std::abs(shapeFunction(t, T) + shapeFunction(T - t, T) - 1.0) < 1e-12);
  }
  CHECK(shapeFunction(T / 2, T) == doctest::Approx(0.5));
  CHECK_THROWS_AS(shapeFunction(-0.1, T), std::domain_error);
  CHECK_THROWS_AS(shapeFunction(1.0, 0.0), std::domain_error);
}

TEST_CASE("analytic derivatives agree with finite differences") {
  const Coeffs c = symmetricCoeffs(22.0, 4.0, 92.0, 3.5);
  const double h = 1e-4;
  for (double t = 0.2; t < 3.9; t += 0.37) {
    const Sample m = evaluate(c, t - h), p = evaluate(c, t + h), s = evaluate(c, t);
    CHECK(std::abs((p.ax - m.ax) / (2 * h) - s.jx) < 1e-3);
    CHECK(std::abs((p.ay - m.ay) / (2 * h) - s.jy) < 1e-3);
    CHECK(std::abs((p.x - m.x) / (2 * h) - s.vx) < 1e-3);
    CHECK(std::abs((p.vy - m.vy) / (2 * h) - s.ay) < 1e-3);
  }
}

TEST_CASE("zero lateral offset and exact nominal distance give straight constant-speed motion") {
  const Trajectory tr = buildSymmetricTrajectory(25.0, 5.0, 125.0, 0.0);
  for (const auto& s : tr.samples) {
    CHECK(std::abs(s.y) < 1e-12);
    CHECK(std::abs(s.vx - 25) < 1e-9);
    CHECK(std::abs(s.jx) < 1e-9);
  }
}

TEST_CASE("sampling includes the final instant") {
  const auto ts = sampleTimes(1.05, 0.1);
  REQUIRE(ts.size() == 12);
  CHECK(ts.back() == 1.05);
  CHECK(sampleTimes(1.0, 0.1).size() == 11);
  const Trajectory tr = buildSymmetricTrajectory(25.0, 5.0, 125.0, 3.5, 0.1);
  CHECK(tr.samples.size() == 51);
  CHECK(sampleAt(tr, 2.5).y == doctest::Approx(1.75));
  CHECK_THROWS_AS(sampleAt(tr, 5.1), std::domain_error);
  CHECK_THROWS_AS(buildSymmetricTrajectory(25.0, 5.0, -1.0, 3.5), std::domain_error);
}

TEST_CASE("scalar type is a template parameter") {
  const auto cf = symmetricCoeffs<float>(25.0f, 5.0f, 125.0f, 3.5f);
  const auto sf = evaluate(cf, 5.0f);
  CHECK(sf.y == doctest::Approx(3.5f).epsilon(1e-5));
  const auto cl = symmetricCoeffs<long double>(25.0L, 5.0L, 125.0L, 3.5L);
  CHECK(std::abs(static_cast<double>(evaluate(cl, 5.0L).x) - 125.0) < 1e-12);
}

}
