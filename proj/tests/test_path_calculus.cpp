#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "foliated/path_calculus.hpp"
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

PathSample sample(const Geometry& g, int N, uint64_t pi, double eps = -1.0) {
  PathSample p = simulate_horizontal_bm(g.model, g.bott, g.model.identity(), N, 1.0 / N, 17, pi);
  bott_transport(p, g.bott);
  if (eps > 0) damped_transport(p, g, eps);
  return p;
}

CameronMartinPath test_h() {
  Eigen::MatrixXd amps(2, 2);
  amps << 0.4, -0.3, 0.2, 0.1;
  return CameronMartinPath::trig(amps);
}

}  // namespace

TEST_CASE("partition times snap to the grid or fail loudly") {
  const CylinderFunction F = CylinderFunction::coordinate(flat().model, 0, 0.5);
  CHECK(partition_indices(F, 64, 1.0 / 64)[0] == 32);

  CylinderFunction off = F;
  off.times = {0.5, 0.5 + 0.2 / 64};  // both snap to the same grid step
  CHECK_THROWS_AS(partition_indices(off, 64, 1.0 / 64), std::invalid_argument);

  CylinderFunction zero = F;
  zero.times = {1e-9};  // snaps to step 0
  CHECK_THROWS_AS(partition_indices(zero, 64, 1.0 / 64), std::invalid_argument);
}

TEST_CASE("cylinder evaluation: flat coordinate and heisenberg fiber coordinate") {
  PathSample p = sample(flat(), 128, 0);
  const CylinderFunction F = CylinderFunction::coordinate(flat().model, 0, 1.0);
  CHECK(eval_cylinder(F, p, flat().model) ==
        doctest::Approx(p.noise.col(0).sum()).epsilon(1e-12));

  // z(1) on heisenberg is the accumulated midpoint levy area
  PathSample ph = sample(heis(), 128, 1);
  double levy = 0;
  Eigen::Vector2d run = Eigen::Vector2d::Zero();
  for (int k = 0; k < ph.N; ++k) {
    const Eigen::Vector2d db = ph.noise.row(k).transpose();
    levy += (run(0) + db(0) / 2) * db(1) - (run(1) + db(1) / 2) * db(0);
    run += db;
  }
  const CylinderFunction Fz = CylinderFunction::coordinate(heis().model, 2, 1.0);
  CHECK(eval_cylinder(Fz, ph, heis().model) == doctest::Approx(levy).epsilon(1e-10));
}

TEST_CASE("analytic frame differentials match finite differences") {
  for (const Geometry* g : {&heis(), &su2()}) {
    CAPTURE(g->model.name);
    PathSample p = sample(*g, 64, 2);
    const int c2 = g->model.coord_dim - 1;
    const CylinderFunction F = CylinderFunction::product_two(g->model, 0, 0.5, c2, 1.0);
    const std::vector<int> idx = partition_indices(F, p.N, p.dt);
    const auto df = frame_differentials(F, p, g->model);
    const double delta = 1e-6;
    for (size_t i = 0; i < idx.size(); ++i) {
      for (int a = 0; a < g->model.d(); ++a) {
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(g->model.d());
        dir(a) = 1.0;
        auto shifted = [&](double t) {
          std::vector<Eigen::VectorXd> pts;
          for (size_t j = 0; j < idx.size(); ++j) {
            Eigen::VectorXd pt = p.states[idx[j]].point;
            if (j == i) pt = g->model.flow(pt, dir, t);
            pts.push_back(pt);
          }
          return F.f(pts);
        };
        const double fd = (shifted(delta) - shifted(-delta)) / (2 * delta);
        CHECK(df[i](a) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("tangent process: zero direction, flat triviality, heisenberg closed form") {
  PathSample pf = sample(flat(), 64, 3);
  const TangentProcess v0 = make_tangent_process(pf, flat(), CameronMartinPath::zero(2));
  CHECK(v0.v.cwiseAbs().maxCoeff() == 0.0);

  const CameronMartinPath h = test_h();
  const TangentProcess vf = make_tangent_process(pf, flat(), h);
  for (int k = 0; k <= pf.N; ++k) {
    CHECK((vf.v.row(k).head(2).transpose() - h.value(k * pf.dt)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(vf.v(k, 2) == 0.0);
  }

  // heisenberg: vertical part is 2 int (h1 dbeta - h2 dB) with h at midpoints
  PathSample ph = sample(heis(), 256, 4);
  const TangentProcess vh = make_tangent_process(ph, heis(), h);
  double acc = 0;
  for (int k = 0; k < ph.N; ++k) {
    const Eigen::Vector2d hm = h.value((k + 0.5) * ph.dt).head(2);
    acc += 2.0 * (hm(0) * ph.noise(k, 1) - hm(1) * ph.noise(k, 0));
    CHECK(vh.v(k + 1, 2) == doctest::Approx(acc).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("tangent process ignores the damping parameter entirely") {
  // same path with different damped transports: bitwise identical v
  PathSample a = sample(su2(), 128, 5, 0.5);
  PathSample b = sample(su2(), 128, 5, 2.0);
  const Eigen::MatrixXd va = make_tangent_process(a, su2(), test_h()).v;
  const Eigen::MatrixXd vb = make_tangent_process(b, su2(), test_h()).v;
  CHECK((va - vb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("directional derivative: flat exactness and linearity") {
  PathSample p = sample(flat(), 128, 6);
  const CameronMartinPath h = test_h();
  const TangentProcess v = make_tangent_process(p, flat(), h);
  const CylinderFunction F = CylinderFunction::coordinate(flat().model, 0, 1.0);
  CHECK(directional_derivative(F, p, flat().model, v) ==
        doctest::Approx(h.value(1.0)(0)).epsilon(1e-12));

  // linearity in v
  PathSample ps = sample(su2(), 128, 6);
  const TangentProcess v1 = make_tangent_process(ps, su2(), test_h());
  TangentProcess v2 = v1;
  v2.v *= -2.5;
  const CylinderFunction Fs = CylinderFunction::square(su2().model, 1, 1.0);
  const double d1 = directional_derivative(Fs, ps, su2().model, v1);
  const double d2 = directional_derivative(Fs, ps, su2().model, v2);
  CHECK(d2 == doctest::Approx(-2.5 * d1).epsilon(1e-12));
}

TEST_CASE("damped malliavin derivative on the flat model is the indicator sum") {
  PathSample p = sample(flat(), 64, 7, 1.0);
  const CylinderFunction F =
      CylinderFunction::product_two(flat().model, 0, 0.5, 1, 0.75);
  const auto idx = partition_indices(F, p.N, p.dt);
  const auto df = frame_differentials(F, p, flat().model);
  const auto D = damped_malliavin_derivative(F, p, flat().model);
  for (int k = 0; k <= p.N; ++k) {
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(3);
    for (size_t i = 0; i < idx.size(); ++i)
      if (k <= idx[i]) expect += df[i];
    CHECK((D[k] - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK(D[p.N].cwiseAbs().maxCoeff() == 0.0);  // past the last partition time
}

TEST_CASE("p decomposition: heisenberg bott reduces to the cameron-martin shift") {
  PathSample p = sample(heis(), 256, 8);
  const CameronMartinPath h = test_h();
  const TangentProcess v = make_tangent_process(p, heis(), h);
  const PDecomposition pqr = p_decomposition(p, heis(), h, v, DChoice::bott());
  for (int k = 0; k < p.N; ++k) {
    CHECK(pqr.q[k].cwiseAbs().maxCoeff() == 0.0);
    CHECK((pqr.r.row(k).transpose() - h.deriv(k * p.dt)).cwiseAbs().maxCoeff() == 0.0);
  }
  // p integrates r: left-endpoint Euler of h'
  Eigen::Vector2d run = Eigen::Vector2d::Zero();
  for (int k = 0; k < p.N; ++k) {
    run += h.deriv(k * p.dt) * p.dt;
    CHECK((pqr.p.row(k + 1).transpose() - run).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("p decomposition: q is exactly skew for the adjoint choice on su2") {
  PathSample p = sample(su2(), 256, 9, 1.0);
  const CameronMartinPath h = test_h();
  const TangentProcess v = make_tangent_process(p, su2(), h);
  const PDecomposition pqr = p_decomposition(p, su2(), h, v, DChoice::adjoint_eps(1.0));
  for (int k = 0; k < p.N; ++k)
    CHECK((pqr.q[k] + pqr.q[k].transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("variation rho: identity at t = 0, cameron-martin shift on heisenberg") {
  PathSample p = sample(heis(), 128, 10);
  const CameronMartinPath h = test_h();
  CHECK((variation_rho(p, heis(), h, 0.0, DChoice::bott()) - p.noise).cwiseAbs().maxCoeff() ==
        0.0);
  const double t = 0.3;
  const Eigen::MatrixXd moved = variation_rho(p, heis(), h, t, DChoice::bott());
  for (int k = 0; k < p.N; ++k) {
    const Eigen::Vector2d expect =
        p.noise.row(k).transpose() + t * h.deriv(k * p.dt) * p.dt;
    CHECK((moved.row(k).transpose() - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("girsanov density: heisenberg bott equals the cameron-martin density") {
  PathSample p = sample(heis(), 256, 11);
  const CameronMartinPath h = test_h();
  const TangentProcess v = make_tangent_process(p, heis(), h);
  const PDecomposition pqr = p_decomposition(p, heis(), h, v, DChoice::bott());
  for (double t : {0.1, 0.5}) {
    const double G = girsanov_density(p, pqr, t);
    double ito = 0, l2 = 0;
    for (int k = 0; k < p.N; ++k) {
      const Eigen::Vector2d hp = h.deriv(k * p.dt);
      ito += hp.dot(p.noise.row(k).transpose());
      l2 += hp.squaredNorm() * p.dt;
    }
    CHECK(std::abs(G - std::exp(t * ito - 0.5 * t * t * l2)) <= 1e-10);
  }
}

TEST_CASE("variation flow: identity at t = 0 and affine flow on heisenberg") {
  PathSample p = sample(heis(), 128, 12);
  const CameronMartinPath h = test_h();
  const auto traj = variation_flow_nu(p, heis(), h, 0.4, 4, DChoice::bott());
  CHECK(traj.size() == 5);
  CHECK((traj[0] - p.noise).cwiseAbs().maxCoeff() == 0.0);
  for (int j = 1; j <= 4; ++j) {
    const double t = 0.4 * j / 4;
    for (int k = 0; k < p.N; ++k) {
      const Eigen::Vector2d expect =
          p.noise.row(k).transpose() + t * h.deriv(k * p.dt) * p.dt;
      CHECK((traj[j].row(k).transpose() - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("tangency check: constructed tangents accepted, horizontal lift rejected") {
  // omega' = (1, 2s): vertical forcing 2 int (omega2' h1 - omega1' h2)
  SmoothPath omega;
  omega.value = [](double s) { return Eigen::Vector3d(s, s * s, 0); };
  omega.deriv = [](double s) { return Eigen::Vector3d(1, 2 * s, 0); };
  auto h = [](double s) { return Eigen::Vector2d(s, s); };
  auto v_good = [&](double s) {
    // 2 int_0^s (2u*u - 1*u) du = (4/3)s^3 - s^2
    return Eigen::Vector3d(s, s, 4.0 / 3.0 * s * s * s - s * s).eval();
  };
  auto v_flat = [&](double s) { return Eigen::Vector3d(s, s, 0).eval(); };

  const TangencyResult good =
      tangency_check_smooth(heis().model, heis(), omega, v_good, 512);
  CHECK(good.tangent);
  CHECK(good.residual <= 1e-8);

  const TangencyResult bad =
      tangency_check_smooth(heis().model, heis(), omega, v_flat, 512);
  CHECK_FALSE(bad.tangent);
  CHECK(bad.residual > 1e-3);

  // flat model: every horizontal path is tangent
  const Geometry& fg = flat();
  const TangencyResult triv = tangency_check_smooth(fg.model, fg, omega, v_flat, 128);
  CHECK(triv.tangent);
  CHECK(triv.residual == 0.0);
}

TEST_CASE("matrix exponential of skew matrices is orthogonal and matches series") {
  Eigen::Matrix3d A;
  A << 0, 0.3, -0.1, -0.3, 0, 0.7, 0.1, -0.7, 0;
  const Eigen::MatrixXd E = matrix_exp(A);
  CHECK((E * E.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::Matrix3d series = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k <= 20; ++k) {
    term = (term * A / k).eval();
    series += term;
  }
  CHECK((E - series).cwiseAbs().maxCoeff() <= 1e-12);
}
