#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "foliated/verify.hpp"

using namespace foliated;

TEST_CASE("streaming moments match two-pass statistics") {
  std::vector<double> xs = {0.3, -1.2, 4.7, 0.0, 2.2, -0.9, 1.5};
  Accum a;
  for (double x : xs) a.add(x);
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (xs.size() - 1);
  CHECK(a.count == static_cast<long>(xs.size()));
  CHECK(a.mean == doctest::Approx(mean).epsilon(1e-14));
  CHECK(a.std_error() == doctest::Approx(std::sqrt(var / xs.size())).epsilon(1e-12));

  // merging two halves reproduces the single pass
  Accum l, r;
  for (size_t i = 0; i < xs.size(); ++i) (i < 3 ? l : r).add(xs[i]);
  const Accum m = Accum::merge(l, r);
  CHECK(m.count == a.count);
  CHECK(m.mean == doctest::Approx(a.mean).epsilon(1e-14));
  // merging with an empty accumulator is the identity
  const Accum me = Accum::merge(a, Accum{});
  CHECK(me.mean == a.mean);
  CHECK(me.m2 == a.m2);
}

TEST_CASE("path reduction is independent of the thread count") {
  auto fn = [](uint64_t idx, std::vector<double>& out) {
    out[0] = std::sin(0.001 * static_cast<double>(idx));
    out[1] = static_cast<double>(idx % 97);
  };
  const auto one = run_paths(5000, 2, 1, fn);
  for (int threads : {2, 4, 8}) {
    const auto many = run_paths(5000, 2, threads, fn);
    for (int k = 0; k < 2; ++k) {
      CHECK(many[k].mean == one[k].mean);
      CHECK(many[k].m2 == one[k].m2);
      CHECK(many[k].count == one[k].count);
    }
  }
}

TEST_CASE("report serialization carries every verdict ingredient") {
  VerificationReport r;
  r.identity_name = "demo";
  r.model = "flat_product(2x1)";
  r.estimate = 0.002;
  r.stderr_ = 0.001;
  r.n_paths = 1000;
  r.dt = 1.0 / 64;
  r.epsilon = 1.0;
  r.bias_c = 0.5;
  r.bias_budget = 0.5 / 64;
  r.verdict = true;
  r.seed = 42;
  r.extra["slope"] = 1.9;

  const auto j = r.to_json();
  CHECK(j.at("identity").get<std::string>() == "demo");
  CHECK(j.at("verdict").get<std::string>() == "pass");
  CHECK(j.at("extra").at("slope").get<double>() == 1.9);
  // verdict recomputable from stored fields
  CHECK((std::abs(j.at("estimate").get<double>()) <=
         3 * j.at("stderr").get<double>() + j.at("bias_budget").get<double>()) ==
        (j.at("verdict").get<std::string>() == "pass"));

  const std::string row = r.csv_row();
  const std::string header = VerificationReport::csv_header();
  CHECK(std::count(row.begin(), row.end(), ',') ==
        std::count(header.begin(), header.end(), ','));
}

TEST_CASE("weitzenbock verification passes on every builtin model") {
  for (const auto& model : {GroupModel::heisenberg(1), GroupModel::heisenberg(2),
                            GroupModel::su2_hopf(), GroupModel::flat_product(2, 1)}) {
    for (double eps : {0.5, 1.0, 2.0}) {
      const VerificationReport r = verify_weitzenbock(model, eps);
      CAPTURE(model.name);
      CAPTURE(eps);
      CHECK(r.verdict);
      CHECK(r.estimate < 1e-8);
    }
  }
}

TEST_CASE("small statistical smoke: ibp bundle on the flat model") {
  Geometry geom = Geometry::build(GroupModel::flat_product(2, 1));
  McParams mc;
  mc.n_paths = 1000;
  mc.dt = 1.0 / 64;
  mc.threads = 1;
  const auto reports = verify_ibp_bundle(geom, default_cylinder_functions(geom.model),
                                         default_cm_paths(2), 1.0, mc);
  CHECK(reports.size() > 0);
  for (const auto& r : reports) {
    CAPTURE(r.identity_name);
    CHECK(r.verdict);
    CHECK(r.n_paths == 1000);
  }
}

TEST_CASE("heisenberg flow verification reports its three sub-checks") {
  McParams mc;
  mc.n_paths = 200;
  mc.dt = 1.0 / 128;
  mc.threads = 1;
  const auto hs = default_cm_paths(2);
  const VerificationReport r = verify_heisenberg_flow(1, hs.back(), 0.2, mc);
  CHECK(r.verdict);
  CHECK(r.extra.count("fd_slope") == 1);
  CHECK(r.extra.count("projection_dev") == 1);
  CHECK(r.extra.count("tangent_dev") == 1);
  CHECK(r.extra.at("projection_dev") <= 1e-10);
}

TEST_CASE("gradient representation rejects inconsistent evaluation times") {
  Geometry geom = Geometry::build(GroupModel::heisenberg(1));
  McParams mc;
  mc.n_paths = 100;
  mc.dt = 1.0 / 64;
  const CylinderFunction f =
      CylinderFunction::sum_of_squares(geom.model, {0, 1}, 0.5);
  CHECK_THROWS_AS(
      verify_gradient_representation(geom, f, geom.model.identity(), 1.0, 1.0, mc),
      std::invalid_argument);
}
