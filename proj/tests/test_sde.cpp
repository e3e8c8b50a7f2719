#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "foliated/sde.hpp"
#include "foliated/verify.hpp"

using namespace foliated;

namespace {

const Geometry& su2() {
  static Geometry g = Geometry::build(GroupModel::su2_hopf());
  return g;
}
const Geometry& heis() {
  static Geometry g = Geometry::build(GroupModel::heisenberg(1));
  return g;
}
const Geometry& flat() {
  static Geometry g = Geometry::build(GroupModel::flat_product(2, 1));
  return g;
}

SmoothPath circle_path(double r) {
  SmoothPath p;
  p.value = [r](double s) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
    v(0) = r * (std::cos(2 * M_PI * s) - 1.0);
    v(1) = r * std::sin(2 * M_PI * s);
    return v;
  };
  p.deriv = [r](double s) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
    v(0) = -2 * M_PI * r * std::sin(2 * M_PI * s);
    v(1) = 2 * M_PI * r * std::cos(2 * M_PI * s);
    return v;
  };
  return p;
}

}  // namespace

TEST_CASE("noise sampling is a pure function of (seed, path, step, component)") {
  const Eigen::MatrixXd a = sample_noise(2, 64, 1.0 / 64, 7, 3);
  const Eigen::MatrixXd b = sample_noise(2, 64, 1.0 / 64, 7, 3);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd c = sample_noise(2, 64, 1.0 / 64, 7, 4);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  // moments sanity at scale sqrt(dt)
  CHECK(std::abs(a.mean()) < 0.1);
}

TEST_CASE("zero noise keeps the path and frame constant") {
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(128, 2);
  for (const Geometry* g : {&su2(), &heis(), &flat()}) {
    PathSample path = drive_path(g->model, g->bott, g->model.identity(), zero, 1.0 / 128);
    for (int k = 0; k <= path.N; ++k) {
      CHECK((path.states[k].point - g->model.identity()).cwiseAbs().maxCoeff() == 0.0);
      CHECK((path.states[k].frame - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("flat product integrates to the cumulative sum of increments") {
  PathSample path = simulate_horizontal_bm(flat().model, flat().bott, flat().model.identity(), 256,
                                           1.0 / 256, 5, 1);
  Eigen::Vector2d run = Eigen::Vector2d::Zero();
  for (int k = 0; k < path.N; ++k) {
    run += path.noise.row(k).transpose();
    CHECK((path.states[k + 1].point.head(2) - run).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(path.states[k + 1].point(2) == 0.0);
  }
}

TEST_CASE("heisenberg geometric scheme coincides with the closed-form sampler") {
  // The group exponential step reproduces the closed-form increment exactly on
  // a nilpotent group, so the two schemes agree pathwise on a common grid.
  const Eigen::MatrixXd noise = sample_noise(2, 512, 1.0 / 512, 9, 2);
  PathSample a = drive_path(heis().model, heis().bott, heis().model.identity(), noise, 1.0 / 512,
                            Scheme::geometric);
  PathSample b = drive_path(heis().model, heis().bott, heis().model.identity(), noise, 1.0 / 512,
                            Scheme::heisenberg_exact);
  for (int k = 0; k <= a.N; ++k)
    CHECK((a.states[k].point - b.states[k].point).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("su2 points stay on the unit sphere") {
  PathSample path =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), 512, 1.0 / 512, 3, 0);
  for (int k = 0; k <= path.N; ++k)
    CHECK(std::abs(path.states[k].point.norm() - 1.0) <= 1e-12);
}

TEST_CASE("transport orthogonality and block structure") {
  PathSample path =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), 512, 1.0 / 512, 3, 1);
  bott_transport(path, su2().bott);
  for (int k = 0; k <= path.N; ++k) {
    const Eigen::MatrixXd& th = path.theta_bott[k];
    CHECK((th.transpose() * th - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(th.topRightCorner(2, 1).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(th.bottomLeftCorner(1, 2).cwiseAbs().maxCoeff() <= 1e-10);
  }
  // heisenberg: trivial bott connection, transport is the identity
  PathSample hp = simulate_horizontal_bm(heis().model, heis().bott, heis().model.identity(), 128,
                                         1.0 / 128, 3, 1, Scheme::heisenberg_exact);
  bott_transport(hp, heis().bott);
  for (int k = 0; k <= hp.N; ++k)
    CHECK((hp.theta_bott[k] - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("damped transport: g_eps orthogonality and inverse consistency") {
  for (const Geometry* g : {&su2(), &heis()}) {
    for (double eps : {0.5, 2.0}) {
      CAPTURE(g->model.name);
      CAPTURE(eps);
      PathSample path = simulate_horizontal_bm(g->model, g->bott, g->model.identity(), 256,
                                               1.0 / 256, 13, 2);
      bott_transport(path, g->bott);
      damped_transport(path, *g, eps);
      Eigen::Vector3d geps(1.0, 1.0, 1.0 / eps);
      const Eigen::Matrix3d G = geps.asDiagonal();
      for (int k = 0; k <= path.N; ++k) {
        const Eigen::MatrixXd& th = path.theta_eps[k];
        CHECK((th.transpose() * G * th - G).cwiseAbs().maxCoeff() <= 1e-10);
        // m_eps_inv integrates the inverse flow; products must agree
        CHECK((path.m_eps[k] * path.m_eps_inv[k] - Eigen::Matrix3d::Identity())
                  .cwiseAbs()
                  .maxCoeff() <= 1e-4);
        // determinant of the multiplicative functional stays positive
        CHECK(path.m_eps[k].determinant() > 0.0);
      }
      // tau_eps_inv_apply really inverts tau_eps
      const Eigen::Vector3d x(0.3, -0.7, 0.2);
      const Eigen::VectorXd y = path.tau_eps_inv_apply(path.N, path.tau_eps(path.N) * x);
      CHECK((y - x).cwiseAbs().maxCoeff() <= 1e-4);
    }
  }
}

TEST_CASE("flat damped transport is the identity") {
  PathSample path = simulate_horizontal_bm(flat().model, flat().bott, flat().model.identity(), 128,
                                           1.0 / 128, 3, 0);
  bott_transport(path, flat().bott);
  damped_transport(path, flat(), 1.0);
  for (int k = 0; k <= path.N; ++k)
    CHECK((path.tau_eps(k) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("anti-development inverts the discrete development exactly") {
  for (const Geometry* g : {&su2(), &heis(), &flat()}) {
    CAPTURE(g->model.name);
    PathSample path = simulate_horizontal_bm(g->model, g->bott, g->model.identity(), 256,
                                             1.0 / 256, 21, 5);
    bott_transport(path, g->bott);
    CHECK((anti_develop(path) - path.noise).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("deterministic development: circle levy area on heisenberg") {
  const double r = 0.7;
  PathSample path = develop_smooth(heis().model, heis().bott, circle_path(r), 2048);
  const double area = std::abs(path.states.back().point(2)) / 2.0;
  CHECK(area == doctest::Approx(M_PI * r * r).epsilon(1e-6));
  // horizontal input stays horizontal in the horizontal coordinates' sense:
  // endpoint returns to the fiber over the start
  CHECK(path.states.back().point.head(2).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("deterministic development: straight line on flat product") {
  SmoothPath line;
  line.value = [](double s) { return Eigen::Vector3d(s, 0, 0); };
  line.deriv = [](double) { return Eigen::Vector3d(1, 0, 0); };
  PathSample path = develop_smooth(flat().model, flat().bott, line, 64);
  for (int k = 0; k <= path.N; ++k) {
    CHECK(path.states[k].point(0) == doctest::Approx(k / 64.0).epsilon(1e-12));
    CHECK(std::abs(path.states[k].point(1)) <= 1e-14);
  }
}

TEST_CASE("development round trip converges at second order") {
  // anti-development (midpoint) of an RK4 development: disagreement is the
  // scheme difference, O(dt^2)
  std::vector<double> errs;
  for (int N : {256, 512, 1024}) {
    PathSample path = develop_smooth(su2().model, su2().bott, circle_path(0.4), N);
    const Eigen::MatrixXd rec = anti_develop(path);
    double worst = 0;
    for (int k = 0; k < N; ++k) {
      const Eigen::VectorXd truth =
          circle_path(0.4).value((k + 1.0) / N) - circle_path(0.4).value(static_cast<double>(k) / N);
      worst = std::max(worst, (rec.row(k).transpose() - truth.head(2)).cwiseAbs().maxCoeff());
    }
    errs.push_back(worst);
  }
  const double slope = std::log2(errs[0] / errs[2]) / 2.0;
  CAPTURE(errs[0]);
  CAPTURE(errs[2]);
  CHECK(slope >= 1.8);
}

TEST_CASE("identical seeds give bit-identical paths") {
  PathSample a =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), 128, 1.0 / 128, 99, 7);
  PathSample b =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), 128, 1.0 / 128, 99, 7);
  CHECK((a.noise - b.noise).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k <= a.N; ++k)
    CHECK((a.states[k].point - b.states[k].point).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("invalid simulation parameters are rejected") {
  CHECK_THROWS_AS(
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), 0, 0.1, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), 64, -1.0, 1),
      std::invalid_argument);
  PathSample path =
      simulate_horizontal_bm(su2().model, su2().bott, su2().model.identity(), 64, 1.0 / 64, 1);
  bott_transport(path, su2().bott);
  CHECK_THROWS_AS(damped_transport(path, su2(), 0.0), std::invalid_argument);
}
