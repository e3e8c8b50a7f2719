#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "foliated/connection.hpp"
#include "foliated/group_model.hpp"
#include "foliated/verify.hpp"
#include "oracles.hpp"

using namespace foliated;

namespace {
std::vector<GroupModel> oracle_models() {
  return {GroupModel::heisenberg(1), GroupModel::heisenberg(2), GroupModel::su2_hopf(),
          GroupModel::flat_product(2, 1), GroupModel::flat_product(3, 2)};
}
}  // namespace

TEST_CASE("structure constants: antisymmetry, jacobi, foliation pattern") {
  for (const auto& model : oracle_models()) {
    CAPTURE(model.name);
    CHECK(oracles::jacobi_defect(model.c) == 0.0);
    for (int i = 0; i < model.d(); ++i)
      for (int j = 0; j < model.d(); ++j)
        for (int k = 0; k < model.d(); ++k) {
          CHECK(model.c(i, j, k) == -model.c(j, i, k));
          if (i >= model.n && j >= model.n) CHECK(model.c(i, j, k) == 0.0);
        }
  }
}

TEST_CASE("frozen brackets: heisenberg and su2") {
  const GroupModel h = GroupModel::heisenberg(1);
  CHECK(h.c(0, 1, 2) == 2.0);  // [X,Y] = 2Z and nothing else
  int nonzero = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        if (h.c(i, j, k) != 0.0) ++nonzero;
  CHECK(nonzero == 2);

  const GroupModel s = GroupModel::su2_hopf();
  CHECK(s.c(0, 1, 2) == 2.0);
  CHECK(s.c(1, 2, 0) == 2.0);
  CHECK(s.c(2, 0, 1) == 2.0);
}

TEST_CASE("bott connection matches the definitional four-case oracle") {
  for (const auto& model : oracle_models()) {
    CAPTURE(model.name);
    const ConnectionData bott = bott_connection(model);
    const Tensor3 gamma_ref = oracles::bott_gamma(model);
    CHECK(oracles::max_diff(bott.gamma, gamma_ref) <= 1e-12);
    CHECK(oracles::max_diff(bott.torsion, oracles::torsion_of(gamma_ref, model.c)) <= 1e-12);
    CHECK(oracles::max_diff(bott.curvature, oracles::curvature_of(gamma_ref, model.c)) <= 1e-12);
  }
}

TEST_CASE("bott connection: totally geodesic foliation properties") {
  for (const auto& model : oracle_models()) {
    CAPTURE(model.name);
    const ConnectionData bott = bott_connection(model);
    const int n = model.n, d = model.d();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          // metric compatibility: skew in the last two slots
          CHECK(std::abs(bott.gamma(i, j, k) + bott.gamma(i, k, j)) <= 1e-12);
          // nabla preserves the splitting
          if ((j < n) != (k < n)) CHECK(bott.gamma(i, j, k) == 0.0);
          // T vanishes unless both arguments are horizontal, and is then vertical
          const bool hh = i < n && j < n;
          if (!hh) CHECK(bott.torsion(i, j, k) == 0.0);
          if (hh && k < n) CHECK(bott.torsion(i, j, k) == 0.0);
        }
  }
}

TEST_CASE("frozen bott values: heisenberg trivial, su2 vertical rotation") {
  const ConnectionData h = bott_connection(GroupModel::heisenberg(1));
  CHECK(h.gamma.max_abs() == 0.0);
  CHECK(h.torsion(0, 1, 2) == -2.0);
  CHECK(h.curvature.max_abs() == 0.0);
  CHECK(h.ric_h.cwiseAbs().maxCoeff() == 0.0);
  CHECK(h.delta_h_t.cwiseAbs().maxCoeff() == 0.0);

  const ConnectionData s = bott_connection(GroupModel::su2_hopf());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(s.gamma(i, j, 0) == 0.0);  // horizontal block flat
  CHECK(s.gamma(2, 0, 1) == 2.0);   // nabla_Z X = 2Y
  CHECK(s.gamma(2, 1, 0) == -2.0);  // nabla_Z Y = -2X
  CHECK(s.torsion(0, 1, 2) == -2.0);
  CHECK((s.ric_h - 4.0 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(s.delta_h_t.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("j map solves its defining identity; frozen values") {
  for (const auto& model : oracle_models()) {
    CAPTURE(model.name);
    const ConnectionData bott = bott_connection(model);
    const Tensor3 J = j_map(model, bott);
    CHECK(oracles::max_diff(J, oracles::j_map_of(model, bott.torsion)) <= 1e-12);
  }
  const GroupModel h = GroupModel::heisenberg(1);
  const Tensor3 Jh = j_map(h, bott_connection(h));
  CHECK(Jh(2, 0, 1) == -2.0);  // J_Z X = -2Y
  CHECK(Jh(2, 1, 0) == 2.0);   // J_Z Y = 2X

  const Eigen::MatrixXd J2h = j_squared_from(Jh, h.n, h.d());
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  expected(0, 0) = expected(1, 1) = -4.0;
  CHECK((J2h - expected).cwiseAbs().maxCoeff() <= 1e-12);

  const GroupModel s = GroupModel::su2_hopf();
  const Eigen::MatrixXd J2s = j_squared_from(j_map(s, bott_connection(s)), s.n, s.d());
  CHECK((J2s - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("epsilon connection: oracle match and g_eps metric compatibility") {
  for (const auto& model : oracle_models()) {
    for (double eps : {0.1, 1.0, 10.0}) {
      CAPTURE(model.name);
      CAPTURE(eps);
      const ConnectionData conn = epsilon_connection(model, eps);
      const Tensor3 ref = oracles::epsilon_gamma(model, eps);
      CHECK(oracles::max_diff(conn.gamma, ref) <= 1e-12);
      CHECK(oracles::max_diff(conn.torsion, oracles::torsion_of(ref, model.c)) <= 1e-12);
      // skew-symmetry in the g_eps inner product
      auto w = [&](int a) { return a < model.n ? 1.0 : 1.0 / eps; };
      for (int i = 0; i < model.d(); ++i)
        for (int j = 0; j < model.d(); ++j)
          for (int k = 0; k < model.d(); ++k)
            CHECK(std::abs(conn.gamma(i, j, k) * w(k) + conn.gamma(i, k, j) * w(j)) <= 1e-12);
    }
  }
}

TEST_CASE("adjoint connection: oracle match, horizontality, driver skew torsion") {
  for (const auto& model : oracle_models()) {
    for (double eps : {0.1, 1.0, 10.0}) {
      CAPTURE(model.name);
      CAPTURE(eps);
      const ConnectionData conn = adjoint_connection(model, eps);
      const Tensor3 ref = oracles::adjoint_gamma(model, eps);
      CHECK(oracles::max_diff(conn.gamma, ref) <= 1e-12);
      CHECK(oracles::max_diff(conn.torsion, oracles::torsion_of(ref, model.c)) <= 1e-12);
      CHECK(oracles::driver_skew_defect(model, conn.torsion, eps) <= 1e-15);
      // preserves the horizontal bundle
      for (int i = 0; i < model.d(); ++i)
        for (int j = 0; j < model.n; ++j)
          for (int k = model.n; k < model.d(); ++k) CHECK(conn.gamma(i, j, k) == 0.0);
    }
  }
  const GroupModel h = GroupModel::heisenberg(1);
  for (double eps : {0.5, 1.0, 2.0}) {
    const ConnectionData conn = adjoint_connection(h, eps);
    CHECK(conn.gamma(2, 0, 1) == doctest::Approx(-2.0 / eps));
    CHECK(conn.gamma(2, 1, 0) == doctest::Approx(2.0 / eps));
  }
}

TEST_CASE("adjoint curvature equals the definitional curvature of its christoffels") {
  for (const auto& model : oracle_models()) {
    for (double eps : {0.1, 1.0, 10.0}) {
      CAPTURE(model.name);
      CAPTURE(eps);
      const Tensor4 R = adjoint_curvature(model, eps);
      const Tensor4 ref = oracles::curvature_of(oracles::adjoint_gamma(model, eps), model.c);
      CHECK(oracles::max_diff(R, ref) <= 1e-12);
    }
  }
}

TEST_CASE("adjoint ricci: horizontal trace cross-check and frozen values") {
  for (const auto& model : oracle_models()) {
    for (double eps : {0.1, 1.0, 10.0}) {
      CAPTURE(model.name);
      CAPTURE(eps);
      const Eigen::MatrixXd ric = adjoint_ricci(model, eps);  // throws on trace mismatch
      const Tensor4 R = adjoint_curvature(model, eps);
      Eigen::MatrixXd tr = Eigen::MatrixXd::Zero(model.n, model.n);
      for (int a = 0; a < model.n; ++a)
        for (int b = 0; b < model.n; ++b)
          for (int i = 0; i < model.n; ++i) tr(a, b) += R(i, a, b, i);
      CHECK((ric - tr).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  CHECK((adjoint_ricci(GroupModel::heisenberg(1), 1.0) + 4.0 * Eigen::Matrix2d::Identity())
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
  CHECK(adjoint_ricci(GroupModel::su2_hopf(), 1.0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(adjoint_ricci(GroupModel::flat_product(2, 1), 0.5).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(epsilon_connection(GroupModel::heisenberg(1), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(adjoint_connection(GroupModel::su2_hopf(), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(GroupModel::heisenberg(0), std::invalid_argument);
  CHECK_THROWS_AS(GroupModel::flat_product(0, 1), std::invalid_argument);
}

TEST_CASE("custom model validation names the violated invariant") {
  // antisymmetric completion makes simple duplicates fine; heisenberg clone ok
  const GroupModel ok = GroupModel::custom(2, 1, {{1, 2, 3, 2.0}});
  CHECK(ok.n == 2);
  CHECK(oracles::max_diff(bott_connection(ok).torsion,
                          bott_connection(GroupModel::heisenberg(1)).torsion) <= 1e-12);

  // [vertical, vertical] with a horizontal component
  CHECK_THROWS_WITH_AS(GroupModel::custom(1, 2, {{2, 3, 1, 1.0}}),
                       doctest::Contains("foliation_compatibility"), std::invalid_argument);
  // jacobi failure
  CHECK_THROWS_WITH_AS(
      GroupModel::custom(2, 1, {{1, 2, 3, 2.0}, {2, 3, 2, 1.0}}),
      doctest::Contains("jacobi"), std::invalid_argument);
  // horizontal frame must bracket-generate
  CHECK_THROWS_AS(GroupModel::custom(2, 1, {}), std::invalid_argument);

  nlohmann::json j = {{"name", "custom"}, {"n", 2}, {"m", 1}, {"c", {{1, 2, 3, 2.0}}}};
  CHECK(GroupModel::from_json(j).d() == 3);
  j["c"] = {{1, 2, 2.0}};
  CHECK_THROWS_AS(GroupModel::from_json(j), std::invalid_argument);
}

TEST_CASE("weitzenbock residual: analytic fields, eps independence, fd fallback") {
  for (const auto& model : {GroupModel::heisenberg(1), GroupModel::su2_hopf()}) {
    CAPTURE(model.name);
    Eigen::VectorXd x = model.identity();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(model.d());
    a(0) = 0.23;
    a(model.d() - 1) = -0.31;
    x = model.product(x, model.exp_alg(a));
    for (const auto& [fname, field] : builtin_scalar_fields(model)) {
      CAPTURE(fname);
      std::vector<double> res;
      for (double eps : {0.5, 1.0, 2.0}) res.push_back(weitzenbock_residual(model, eps, field, x));
      for (double r : res) CHECK(r < 1e-8);
      CHECK(std::abs(res[0] - res[1]) <= 1e-10);
      CHECK(std::abs(res[1] - res[2]) <= 1e-10);

      // same field with numeric differentials only
      const ScalarField numeric = ScalarField::numeric(field.eval);
      CHECK(weitzenbock_residual(model, 1.0, numeric, x) < 1e-5);
    }
  }
  // flat linear field: exactly zero
  const GroupModel flat = GroupModel::flat_product(2, 1);
  const ScalarField lin = builtin_scalar_fields(flat)[0].second;
  CHECK(weitzenbock_residual(flat, 1.0, lin, flat.identity()) == 0.0);
}
