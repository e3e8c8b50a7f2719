#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "foliated/polynomial.hpp"
#include "foliated/tensors.hpp"

namespace foliated {

enum class ModelKind { heisenberg, su2_hopf, flat_product, custom };

// A model foliated Lie group: structure constants in a global orthonormal
// adapted frame (first n basis vectors horizontal, last m vertical), plus a
// global chart with group product and exponential map.  The frame is declared
// orthonormal, so both restricted metrics are identities in frame components.
class GroupModel {
public:
  ModelKind kind = ModelKind::flat_product;
  std::string name;
  int n = 0;  // horizontal frame count
  int m = 0;  // vertical frame count
  Tensor3 c;  // [e_i,e_j] = sum_k c(i,j,k) e_k
  int coord_dim = 0;

  int d() const { return n + m; }
  bool has_chart() const { return kind != ModelKind::custom; }

  Eigen::VectorXd identity() const;
  Eigen::VectorXd product(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& a) const;
  // Lie-algebra exponential, algebra coordinates in the adapted frame.
  Eigen::VectorXd exp_alg(const Eigen::VectorXd& v) const;
  Eigen::VectorXd log_alg(const Eigen::VectorXd& p) const;
  void normalize(Eigen::VectorXd& p) const;  // unit-quaternion projection on su2
  // Row i = coefficients of frame field e_i in the coordinate basis at p,
  // i.e. (e_i f)(p) = sum_c frame_coeffs(p)(i,c) * df/dcoord_c.
  Eigen::MatrixXd frame_coeffs(const Eigen::VectorXd& p) const;
  // Frame fields as exact polynomial differential operators in the chart.
  std::vector<PolyVectorField> frame_fields() const;
  // One step along a one-parameter subgroup: p * exp(t * e_i-direction v).
  Eigen::VectorXd flow(const Eigen::VectorXd& p, const Eigen::VectorXd& v, double t) const;

  // Throws std::invalid_argument naming the violated invariant.
  void validate() const;

  static GroupModel heisenberg(int nh);
  static GroupModel su2_hopf();
  static GroupModel flat_product(int n, int m);
  // triples are 1-based (i, j, k, value); antisymmetric completion applied.
  static GroupModel custom(int n, int m, const std::vector<std::array<double, 4>>& triples);
  static GroupModel from_json(const nlohmann::json& j);
};

// Quaternion helpers (components ordered w, x, y, z).
Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b);
Eigen::Vector4d quat_exp(const Eigen::Vector3d& v);
Eigen::Vector3d quat_log(const Eigen::Vector4d& q);

}  // namespace foliated
