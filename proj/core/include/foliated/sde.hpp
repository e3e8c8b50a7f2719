#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "foliated/connection.hpp"
#include "foliated/group_model.hpp"

namespace foliated {

struct FrameState {
  Eigen::VectorXd point;  // chart coordinates
  Eigen::MatrixXd frame;  // current frame in the left-invariant basis, d x d orthogonal
};

// One discretized horizontal Brownian path on [0,1].  Transports are stored as
// vector-component transports from the start point: a parallel field with
// components v0 at s=0 has components theta[k] * v0 at step k.  The damped
// transport on one-forms is tau(k) = m_eps[k] * theta_eps[k]^T, mapping form
// components at W_{s_k} to form components at the start point.
struct PathSample {
  int n = 0, m = 0, N = 0;
  double dt = 0;
  uint64_t seed = 0;
  uint64_t path_index = 0;
  double epsilon = -1;  // set by damped_transport

  Eigen::MatrixXd noise;                    // N x n Brownian increments
  std::vector<FrameState> states;           // N+1
  std::vector<Eigen::VectorXd> increments;  // N Stratonovich algebra increments per step
  std::vector<Eigen::MatrixXd> theta_bott;  // N+1, orthogonal, block-preserving
  std::vector<Eigen::MatrixXd> theta_eps;   // N+1, g_eps-orthogonal
  std::vector<Eigen::MatrixXd> m_eps;       // N+1
  std::vector<Eigen::MatrixXd> m_eps_inv;   // N+1, RK4 flow of the inverse ODE

  int d() const { return n + m; }
  Eigen::MatrixXd tau_eps(int k) const { return m_eps[k] * theta_eps[k].transpose(); }

  // theta_eps^{-1} through g_eps-orthogonality (theta^T G theta = G with
  // G = diag(I_n, eps^{-1} I_m)): theta^{-1} = G^{-1} theta^T G.
  Eigen::VectorXd theta_eps_inv_apply(int k, const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = x;
    y.tail(m) /= epsilon;
    y = theta_eps[k].transpose() * y;
    y.tail(m) *= epsilon;
    return y;
  }
  // tau^{-1} = theta^{-T} M^{-1} acting on form components at the start point
  Eigen::VectorXd tau_eps_inv_apply(int k, const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = m_eps_inv[k] * x;
    y.tail(m) *= epsilon;
    y = theta_eps[k] * y;
    y.tail(m) /= epsilon;
    return y;
  }
  // (tau^*)^{-1} = tau^{-T} = M^{-T} theta^{-1} acting on vectors
  Eigen::VectorXd tau_eps_inv_T_apply(int k, const Eigen::VectorXd& x) const {
    return m_eps_inv[k].transpose() * theta_eps_inv_apply(k, x);
  }
};

enum class Scheme { geometric, heisenberg_exact };

// Brownian increments for one path: entry (k, c) is N(0, dt), a pure function
// of (seed, path_index, k, c).
Eigen::MatrixXd sample_noise(int n, int N, double dt, uint64_t seed, uint64_t path_index);

// Stratonovich midpoint (Heun) integration of the frame-bundle SDE reduced to
// the group: point steps along the group exponential of the averaged algebra
// increment, frame follows the Bott Christoffel ODE with re-orthonormalization.
PathSample simulate_horizontal_bm(const GroupModel& model, const ConnectionData& bott,
                                  const Eigen::VectorXd& x0, int N, double dt, uint64_t seed,
                                  uint64_t path_index = 0, Scheme scheme = Scheme::geometric);

// Same integration from caller-supplied increments (used for paired tests and
// redeveloping modified noise).
PathSample drive_path(const GroupModel& model, const ConnectionData& bott,
                      const Eigen::VectorXd& x0, const Eigen::MatrixXd& noise, double dt,
                      Scheme scheme = Scheme::geometric);

void bott_transport(PathSample& path, const ConnectionData& bott);

// theta_eps from the nabla^eps transport ODE (generalized Cayley step, exactly
// g_eps-orthogonal), m_eps by RK4 of dM/ds = -1/2 M Theta K Theta^{-1} with
// K = (1/eps) J^2 - (1/eps) delta_H T + Ric_H acting on one-forms.
void damped_transport(PathSample& path, const Geometry& geom, double eps);

// Recovered driving increments (anti-development through the Bott transport).
Eigen::MatrixXd anti_develop(const PathSample& path);

struct SmoothPath {
  std::function<Eigen::VectorXd(double)> value;  // R^d valued, value(0) = 0
  std::function<Eigen::VectorXd(double)> deriv;
};

// Deterministic development (rolling map) of a smooth path by RK4; fills
// states, increments and theta_bott on a uniform N-step grid.
PathSample develop_smooth(const GroupModel& model, const ConnectionData& bott,
                          const SmoothPath& omega, int N);

}  // namespace foliated
