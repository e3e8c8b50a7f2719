#pragma once

#include <Eigen/Dense>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "foliated/connection.hpp"
#include "foliated/sde.hpp"

namespace foliated {

// F(w) = f(w_{s_1}, ..., w_{s_k}) with analytic chart gradients per slot.
struct CylinderFunction {
  std::string name;
  std::vector<double> times;  // strictly increasing, in (0, 1]
  std::function<double(const std::vector<Eigen::VectorXd>&)> f;
  // gradient of f with respect to the chart coordinates of point slot i
  std::function<Eigen::VectorXd(int, const std::vector<Eigen::VectorXd>&)> chart_grad;

  static CylinderFunction coordinate(const GroupModel& model, int coord, double time);
  static CylinderFunction product_two(const GroupModel& model, int c1, double t1, int c2, double t2);
  static CylinderFunction sum_of_squares(const GroupModel& model, const std::vector<int>& coords,
                                         double time);
  static CylinderFunction square(const GroupModel& model, int coord, double time);
  // {"kind": "coordinate"|"square"|"product"|"sum_of_squares", "times": [...],
  //  "coords": [...]}  (coords 1-based in JSON)
  static CylinderFunction from_json(const GroupModel& model, const nlohmann::json& j);
};

struct CameronMartinPath {
  std::string name;
  int n = 0;
  std::function<Eigen::VectorXd(double)> value;  // h, h(0) = 0
  std::function<Eigen::VectorXd(double)> deriv;  // h'
  double l2sq = 0;  // exact int_0^1 |h'|^2

  // knots: K x n values of h at s = 1/K, 2/K, ..., 1 (h(0) = 0 implied)
  static CameronMartinPath piecewise_linear(const Eigen::MatrixXd& knots);
  // amps: J x n, h_i'(s) = sum_j amps(j,i) cos((j+1) pi s)
  static CameronMartinPath trig(const Eigen::MatrixXd& amps);
  static CameronMartinPath zero(int n);
  static CameronMartinPath from_json(int n, const nlohmann::json& j);
};

// Euclidean-side tangent process: horizontal part h, vertical part forced by
// the torsion integral.  Rows are grid values of v in the transported frame.
struct TangentProcess {
  Eigen::MatrixXd v;  // (N+1) x d
};

// Snap partition times to the grid; throws if any time is off-grid by more
// than dt/2 or snaps to step 0 or beyond N.
std::vector<int> partition_indices(const CylinderFunction& F, int N, double dt);

double eval_cylinder(const CylinderFunction& F, const PathSample& path, const GroupModel& model);
// d_i f in frame components at each partition point (covectors at W_{s_i}).
std::vector<Eigen::VectorXd> frame_differentials(const CylinderFunction& F, const PathSample& path,
                                                 const GroupModel& model);

TangentProcess make_tangent_process(const PathSample& path, const Geometry& geom,
                                    const CameronMartinPath& h);
// Several h against one path, sharing the per-step midpoint transport solves.
std::vector<TangentProcess> make_tangent_processes(const PathSample& path, const Geometry& geom,
                                                   const std::vector<CameronMartinPath>& hs);

double directional_derivative(const CylinderFunction& F, const PathSample& path,
                              const GroupModel& model, const TangentProcess& v);

// D-tilde_s F per grid point (covector at W_s); requires damped_transport.
std::vector<Eigen::VectorXd> damped_malliavin_derivative(const CylinderFunction& F,
                                                         const PathSample& path,
                                                         const GroupModel& model);

struct DChoice {
  bool adjoint = false;  // false = Bott
  double eps = 1.0;
  static DChoice bott() { return {false, 1.0}; }
  static DChoice adjoint_eps(double e) { return {true, e}; }
};

// p_v(s) = int q_v domega + int r_v dr with q adapted so(n)-valued; q and r
// stored at left endpoints of each step.
struct PDecomposition {
  Eigen::MatrixXd p;               // (N+1) x n
  std::vector<Eigen::MatrixXd> q;  // N, n x n exactly skew
  Eigen::MatrixXd r;               // N x n
};

PDecomposition p_decomposition(const PathSample& path, const Geometry& geom,
                               const CameronMartinPath& h, const TangentProcess& v,
                               const DChoice& D);

// (rho_t^h omega): increments e^{t q_k} domega_k + t r_k dt.
Eigen::MatrixXd variation_rho(const PathSample& path, const Geometry& geom,
                              const CameronMartinPath& h, double t, const DChoice& D);

// Girsanov density G_t = exp(t sum <r, e^{tq} domega> - t^2/2 sum |r|^2 dt).
double girsanov_density(const PathSample& path, const PDecomposition& pqr, double t);

// Forward-Euler flow nu_t on driving increments; returns t_steps+1 increment
// matrices starting from the path's own noise.  Throws on divergence.
std::vector<Eigen::MatrixXd> variation_flow_nu(const PathSample& path, const Geometry& geom,
                                               const CameronMartinPath& h, double t_max,
                                               int t_steps, const DChoice& D);

struct TangencyResult {
  bool tangent = false;
  double residual = 0;
};

// Deterministic tangency test: develops omega (horizontal smooth path) and
// checks that v(s) - int Theta^{-1} T(Theta domega, Theta v) stays horizontal.
TangencyResult tangency_check_smooth(const GroupModel& model, const Geometry& geom,
                                     const SmoothPath& omega,
                                     const std::function<Eigen::VectorXd(double)>& v, int N,
                                     double tol = 1e-8);

// Skew matrix exponential (scaling and squaring with Pade(6), plenty at d<=5).
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A);

}  // namespace foliated
