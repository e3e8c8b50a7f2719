#pragma once

#include <Eigen/Dense>
#include <functional>

#include "foliated/group_model.hpp"
#include "foliated/polynomial.hpp"
#include "foliated/tensors.hpp"

namespace foliated {

// Frame-constant tensors of a connection on a model group.  Operator matrices
// act on vector components by plain matrix product; by the orthonormal-frame
// duality convention, the same tensors act on one-form components through the
// transpose.
struct ConnectionData {
  Tensor3 gamma;              // nabla_{e_i} e_j = sum_k gamma(i,j,k) e_k
  Tensor3 torsion;            // T(e_i,e_j) = sum_k torsion(i,j,k) e_k
  Tensor4 curvature;          // R(e_i,e_j)e_k = sum_l curvature(i,j,k,l) e_l
  Eigen::MatrixXd ric_h;      // n x n horizontal Ricci
  Eigen::MatrixXd delta_h_t;  // d x d, horizontal divergence of torsion as (1,1)
  Eigen::MatrixXd j_squared;  // d x d, zero on vertical directions
};

Tensor3 torsion_from(const Tensor3& gamma, const Tensor3& c);
Tensor4 curvature_from(const Tensor3& gamma, const Tensor3& c);
// Covariant derivative of a (1,2)-tensor S(e_j,e_k) = sum_l S(j,k,l) e_l in
// direction e_i, for frame-constant components.
Tensor3 covariant_derivative_12(const Tensor3& gamma, const Tensor3& S, int i);
// ric(a,b) = sum_{i<n} R(i,a,b,i); square n x n if extended=false, else n+m
// columns (rows beyond the horizontal block stay zero either way).
Eigen::MatrixXd horizontal_ricci(const Tensor4& R, int n, bool extended = false);

ConnectionData bott_connection(const GroupModel& model);
// J[z][x][y] with J_{e_z} e_x = sum_y J(z,x,y) e_y; nonzero only for z
// vertical and x, y horizontal.  Defined by g_H(J_Z X, Y) = g_V(Z, T(X,Y)).
Tensor3 j_map(const GroupModel& model, const ConnectionData& bott);
Eigen::MatrixXd j_squared_from(const Tensor3& J, int n, int d);

ConnectionData epsilon_connection(const GroupModel& model, double eps);
ConnectionData adjoint_connection(const GroupModel& model, double eps);
// Curvature of the adjoint connection assembled from the Bott pieces
// (R, J_{T(X,Y)}, [J_X,J_Y], the two nabla-J terms); matches the definitional
// curvature of adjoint_connection.
Tensor4 adjoint_curvature(const GroupModel& model, double eps);
// Horizontal block Ric_H - (1/eps) (delta_H T)^* + (1/eps) J^2; throws if it
// disagrees with the horizontal trace of the definitional adjoint curvature.
Eigen::MatrixXd adjoint_ricci(const GroupModel& model, double eps);

// Everything the path machinery needs about a model, built once.
struct Geometry {
  GroupModel model;
  ConnectionData bott;
  Tensor3 J;
  static Geometry build(const GroupModel& model);
};

// A scalar function on the group; polynomial fields carry exact frame
// derivatives, generic fields fall back to finite differences along
// one-parameter subgroups.
struct ScalarField {
  std::function<double(const Eigen::VectorXd&)> eval;
  bool has_poly = false;
  Polynomial poly;

  static ScalarField from_poly(const GroupModel& model, const Polynomial& p);
  static ScalarField numeric(std::function<double(const Eigen::VectorXd&)> fn);
};

// max over frame components of |dLf(x) - box_eps df(x)| with
// L = sum_i X_i^2 + X_0 and box_eps the one-form Weitzenboeck operator.
double weitzenbock_residual(const GroupModel& model, double eps, const ScalarField& f,
                            const Eigen::VectorXd& x, double fd_step = 1e-4);

}  // namespace foliated
