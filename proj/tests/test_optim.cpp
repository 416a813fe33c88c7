#include <doctest.h>

#include <random>

#include "smal/optim/gradcheck.hpp"
#include "smal/optim/lbfgs.hpp"
#include "smal/optim/robust.hpp"

using namespace smal;

TEST_CASE("geman-mcclure values") {
  auto [v0, d0] = geman_mcclure(0.0, 2.0);
  CHECK(v0 == 0.0);
  CHECK(d0 == 1.0);

  const double sigma = 0.7, s2 = sigma * sigma;
  auto [vsat, dsat] = geman_mcclure(1e12 * s2, sigma);
  CHECK(vsat == doctest::Approx(s2).epsilon(1e-6));
  CHECK(dsat < 1e-20);

  auto [vhalf, dhalf] = geman_mcclure(s2, sigma);
  CHECK(vhalf == doctest::Approx(s2 / 2));
  CHECK(dhalf == doctest::Approx(0.25));

  CHECK_THROWS_AS(geman_mcclure(1.0, 0.0), Error);
  CHECK_THROWS_AS(geman_mcclure(1.0, -1.0), Error);
}

TEST_CASE("geman-mcclure derivative matches finite differences") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  const GemanMcClure kernel(0.8);
  for (int i = 0; i < 100; ++i) {
    const double e = u(rng);
    const double eps = 1e-7;
    const double fd =
        (kernel.value(e + eps) - kernel.value(std::max(0.0, e - eps))) /
        (e < eps ? eps : 2 * eps);
    CHECK(std::abs(fd - kernel.derivative(e)) < 1e-6);
  }
}

TEST_CASE("geman-mcclure monotone and bounded") {
  const GemanMcClure kernel(1.3);
  double prev = 0.0;
  for (double e = 0.0; e < 50.0; e += 0.25) {
    const double v = kernel.value(e);
    CHECK(v >= prev);
    CHECK(v <= kernel.sigma_squared());
    prev = v;
  }
}

TEST_CASE("minimize quadratic bowl") {
  const Vec3 target(1.5, -2.0, 0.25);
  EnergyFunction f = make_energy(3, [&](const VecX& x, VecX& g) {
    g = 2.0 * (x - target.matrix());
    return (x - target.matrix()).squaredNorm();
  });
  const MinimizeResult res = minimize(f, VecX::Zero(3), SolverConfig{});
  CHECK((res.x - target.matrix()).norm() < 1e-8);
  CHECK(res.value <= 1e-15);
}

TEST_CASE("minimize rosenbrock") {
  EnergyFunction f = make_energy(2, [](const VecX& x, VecX& g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  });
  VecX x0(2);
  x0 << -1.2, 1.0;
  SolverConfig cfg;
  cfg.max_iterations = 2000;
  const MinimizeResult res = minimize(f, x0, cfg);
  CHECK(std::abs(res.x[0] - 1.0) < 1e-4);
  CHECK(std::abs(res.x[1] - 1.0) < 1e-4);
}

TEST_CASE("minimize early exit when already converged") {
  EnergyFunction f = make_energy(2, [](const VecX& x, VecX& g) {
    g = VecX::Zero(2);
    return 3.0;
  });
  const MinimizeResult res = minimize(f, VecX::Ones(2), SolverConfig{});
  CHECK(res.iterations == 0);
  CHECK(res.value == 3.0);
  CHECK((res.x - VecX::Ones(2)).norm() == 0.0);
}

TEST_CASE("minimize never increases the objective") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    MatX a = MatX::Random(6, 6);
    MatX spd = a.transpose() * a + MatX::Identity(6, 6);
    VecX b = VecX::Random(6);
    EnergyFunction f = make_energy(6, [&](const VecX& x, VecX& grad) {
      grad = spd * x - b + 0.3 * x.array().sin().matrix();
      return 0.5 * x.dot(spd * x) - b.dot(x) -
             0.3 * x.array().cos().sum();
    });
    VecX x0(6);
    for (int i = 0; i < 6; ++i) x0[i] = g(rng);
    VecX dummy(6);
    const double f0 = f.evaluate(x0, dummy);
    const MinimizeResult res = minimize(f, x0, SolverConfig{});
    CHECK(res.value <= f0);
    // Log values are non-increasing.
    for (size_t i = 1; i < res.log.size(); ++i)
      CHECK(res.log[i].value <= res.log[i - 1].value + 1e-15);
  }
}

TEST_CASE("minimize aborts on non-finite energy") {
  EnergyFunction f = make_energy(1, [](const VecX& x, VecX& g) {
    g.resize(1);
    g[0] = -1.0;
    return x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : -x[0];
  });
  VecX x0(1);
  x0 << 0.49;
  CHECK_THROWS_AS(minimize(f, x0, SolverConfig{}), Error);
}

TEST_CASE("minimize invariant to appended constant parameters") {
  EnergyFunction base = make_energy(2, [](const VecX& x, VecX& g) {
    g = 2.0 * x;
    return x.squaredNorm();
  });
  EnergyFunction padded = make_energy(4, [](const VecX& x, VecX& g) {
    g = VecX::Zero(4);
    g.head(2) = 2.0 * x.head(2);
    return x.head(2).squaredNorm();
  });
  VecX x0(2);
  x0 << 3.0, -4.0;
  VecX x0p(4);
  x0p << 3.0, -4.0, 7.0, -1.0;
  const MinimizeResult a = minimize(base, x0, SolverConfig{});
  const MinimizeResult b = minimize(padded, x0p, SolverConfig{});
  CHECK((a.x - b.x.head(2)).norm() < 1e-12);
  CHECK(b.x[2] == 7.0);
  CHECK(b.x[3] == -1.0);
}

TEST_CASE("gradient check on exact quadratic") {
  EnergyFunction f = make_energy(4, [](const VecX& x, VecX& g) {
    g = 2.0 * x;
    return x.squaredNorm();
  });
  VecX x = VecX::Random(4) * 3.0;
  CHECK(check_gradient(f, x, 1e-5) < 1e-9);
}

TEST_CASE("gradient check detects a planted scale bug") {
  EnergyFunction f = make_energy(3, [](const VecX& x, VecX& g) {
    g = 2.2 * x;  // should be 2.0 * x
    return x.squaredNorm();
  });
  VecX x = VecX::Ones(3) * 2.0;
  const double err = check_gradient(f, x, 1e-5);
  CHECK(err > 0.05);
  CHECK(err < 0.15);
}

TEST_CASE("iteration log serializes as json lines") {
  std::vector<IterationRecord> log = {{0, 1.5, 0.2, 0.0}, {1, 1.0, 0.1, 0.5}};
  const std::string s = iteration_log_jsonl(log);
  CHECK(s.find("\"iter\": 0") != std::string::npos);
  CHECK(s.find("\"grad_norm\": 0.1") != std::string::npos);
  CHECK(std::count(s.begin(), s.end(), '\n') == 2);
}
