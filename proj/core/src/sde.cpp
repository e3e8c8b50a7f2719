#include "foliated/sde.hpp"

#include <cmath>
#include <stdexcept>

#include "foliated/rng.hpp"

namespace foliated {

namespace {

// Modified Gram-Schmidt on columns; block structure of a block-diagonal input
// is preserved since the sweep never mixes zero patterns.
void mgs(Eigen::MatrixXd& U) {
  const int d = static_cast<int>(U.cols());
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < j; ++i) U.col(j) -= U.col(i).dot(U.col(j)) * U.col(i);
    U.col(j) /= U.col(j).norm();
  }
}

// One transport step for dX = -C X with total increment C over the step:
// implicit midpoint, X_{k+1} = (I + C/2)^{-1} (I - C/2) X_k.  Exactly
// D-orthogonal whenever C is skew in the D inner product.
Eigen::MatrixXd cayley_step(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X) {
  const int d = static_cast<int>(C.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  return (I + 0.5 * C).partialPivLu().solve((I - 0.5 * C) * X);
}

Eigen::VectorXd embed_horizontal(const Eigen::VectorXd& db, int d) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  w.head(db.size()) = db;
  return w;
}

// Fixed-size variants of the per-step kernels; the hot loops below are
// instantiated at D = 3 (all built-in nonabelian models) and at runtime size.
template <int D>
using MatD = Eigen::Matrix<double, D, D>;
template <int D>
using VecD = Eigen::Matrix<double, D, 1>;

template <int D>
MatD<D> conn_matrix(const Tensor3& gamma, const VecD<D>& w) {
  const int d = static_cast<int>(w.size());
  MatD<D> C = MatD<D>::Zero(d, d);
  for (int a = 0; a < d; ++a) {
    if (w(a) == 0.0) continue;
    for (int b = 0; b < d; ++b)
      for (int k = 0; k < d; ++k) C(k, b) += w(a) * gamma(a, b, k);
  }
  return C;
}

template <int D>
void mgs_d(MatD<D>& U) {
  const int d = static_cast<int>(U.cols());
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < j; ++i) U.col(j) -= U.col(i).dot(U.col(j)) * U.col(i);
    U.col(j) /= U.col(j).norm();
  }
}

template <int D>
MatD<D> cayley_d(const MatD<D>& C, const MatD<D>& X) {
  const int d = static_cast<int>(C.rows());
  const MatD<D> I = MatD<D>::Identity(d, d);
  if constexpr (D == Eigen::Dynamic)
    return (I + 0.5 * C).partialPivLu().solve((I - 0.5 * C) * X);
  else
    return (I + 0.5 * C).inverse() * ((I - 0.5 * C) * X);
}

template <int D>
void drive_geometric(const GroupModel& model, const ConnectionData& bott, PathSample& path,
                     const Eigen::MatrixXd& noise) {
  const int N = path.N, d = model.d();
  VecD<D> w = VecD<D>::Zero(d);
  for (int k = 0; k < N; ++k) {
    w.head(model.n) = noise.row(k).transpose();
    const MatD<D> U = path.states[k].frame;
    const VecD<D> w1 = U * w;
    MatD<D> Upred = U - conn_matrix<D>(bott.gamma, w1) * U;
    mgs_d<D>(Upred);
    const VecD<D> w2 = Upred * w;
    const VecD<D> wbar = 0.5 * (w1 + w2);
    path.increments[k] = wbar;
    MatD<D> Unext = cayley_d<D>(conn_matrix<D>(bott.gamma, wbar), U);
    mgs_d<D>(Unext);
    path.states[k + 1].frame = Unext;
    Eigen::VectorXd p = model.product(path.states[k].point, model.exp_alg(wbar));
    model.normalize(p);
    path.states[k + 1].point = p;
  }
}

template <int D>
void damped_loop(PathSample& path, const Tensor3& eps_gamma, const Eigen::MatrixXd& Kdyn,
                 double eps) {
  const int N = path.N, d = path.d(), n = path.n, m = d - n;
  const MatD<D> K = Kdyn;

  for (int k = 0; k < N; ++k) {
    const VecD<D> w = path.increments[k];
    const MatD<D> Th = path.theta_eps[k];
    path.theta_eps[k + 1] = cayley_d<D>(conn_matrix<D>(eps_gamma, w), Th);
  }

  auto coeff = [&](const MatD<D>& theta) {
    MatD<D> Finv = theta;  // theta^{-T} = G theta G^{-1}, G = diag(I_n, (1/eps) I_m)
    Finv.rightCols(m) *= eps;
    Finv.bottomRows(m) /= eps;
    return MatD<D>(theta.transpose() * K * Finv);
  };

  MatD<D> A0 = coeff(path.theta_eps[0]);
  for (int k = 0; k < N; ++k) {
    const MatD<D> Am = coeff(MatD<D>(0.5 * (path.theta_eps[k] + path.theta_eps[k + 1])));
    const MatD<D> A1 = coeff(path.theta_eps[k + 1]);
    const MatD<D> M = path.m_eps[k];
    const double h = path.dt;
    const MatD<D> k1 = -0.5 * M * A0;
    const MatD<D> k2 = -0.5 * (M + 0.5 * h * k1) * Am;
    const MatD<D> k3 = -0.5 * (M + 0.5 * h * k2) * Am;
    const MatD<D> k4 = -0.5 * (M + h * k3) * A1;
    path.m_eps[k + 1] = M + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    // inverse by its own ODE dM^{-1}/ds = +1/2 A M^{-1}; avoids a solve per
    // step everywhere tau^{-1} is applied downstream
    const MatD<D> W = path.m_eps_inv[k];
    const MatD<D> j1 = 0.5 * A0 * W;
    const MatD<D> j2 = 0.5 * Am * (W + 0.5 * h * j1);
    const MatD<D> j3 = 0.5 * Am * (W + 0.5 * h * j2);
    const MatD<D> j4 = 0.5 * A1 * (W + h * j3);
    path.m_eps_inv[k + 1] = W + (h / 6.0) * (j1 + 2 * j2 + 2 * j3 + j4);
    A0 = A1;
  }
}

}  // namespace

Eigen::MatrixXd sample_noise(int n, int N, double dt, uint64_t seed, uint64_t path_index) {
  CounterRng rng(seed, path_index);
  Eigen::MatrixXd noise(N, n);
  const double s = std::sqrt(dt);
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < n; ++c) noise(k, c) = s * rng.normal(static_cast<uint64_t>(k), static_cast<uint64_t>(c));
  return noise;
}

PathSample drive_path(const GroupModel& model, const ConnectionData& bott,
                      const Eigen::VectorXd& x0, const Eigen::MatrixXd& noise, double dt,
                      Scheme scheme) {
  if (dt <= 0) throw std::invalid_argument("drive_path requires dt > 0");
  const int N = static_cast<int>(noise.rows());
  if (N == 0) throw std::invalid_argument("drive_path requires N > 0");
  const int n = model.n, d = model.d();

  PathSample path;
  path.n = n;
  path.m = model.m;
  path.N = N;
  path.dt = dt;
  path.noise = noise;
  path.states.resize(N + 1);
  path.increments.resize(N);
  path.states[0].point = x0;
  path.states[0].frame = Eigen::MatrixXd::Identity(d, d);

  if (scheme == Scheme::heisenberg_exact) {
    if (model.kind != ModelKind::heisenberg)
      throw std::invalid_argument("heisenberg_exact scheme requires a heisenberg model");
    // Closed form W = x0 * (B, beta, sum int B dbeta - beta dB) with midpoint
    // Levy-area accumulation; in these coordinates that is exactly the product
    // of per-step group exponentials of the raw increments, frame constant.
    for (int k = 0; k < N; ++k) {
      const Eigen::VectorXd w = embed_horizontal(noise.row(k), d);
      path.increments[k] = w;
      path.states[k + 1].point = model.product(path.states[k].point, w);
      path.states[k + 1].frame = path.states[0].frame;
    }
    return path;
  }

  // With vanishing Christoffels the frame never moves and the midpoint
  // correction cancels; the step is a bare group exponential.
  if (bott.gamma.is_zero()) {
    for (int k = 0; k < N; ++k) {
      const Eigen::VectorXd w = embed_horizontal(noise.row(k), d);
      path.increments[k] = w;
      Eigen::VectorXd p = model.product(path.states[k].point, model.exp_alg(w));
      model.normalize(p);
      path.states[k + 1].point = p;
      path.states[k + 1].frame = path.states[0].frame;
    }
    return path;
  }

  if (d == 3)
    drive_geometric<3>(model, bott, path, noise);
  else
    drive_geometric<Eigen::Dynamic>(model, bott, path, noise);
  return path;
}

PathSample simulate_horizontal_bm(const GroupModel& model, const ConnectionData& bott,
                                  const Eigen::VectorXd& x0, int N, double dt, uint64_t seed,
                                  uint64_t path_index, Scheme scheme) {
  if (N <= 0) throw std::invalid_argument("simulate_horizontal_bm requires N > 0");
  if (dt <= 0) throw std::invalid_argument("simulate_horizontal_bm requires dt > 0");
  PathSample path = drive_path(model, bott, x0, sample_noise(model.n, N, dt, seed, path_index), dt, scheme);
  path.seed = seed;
  path.path_index = path_index;
  return path;
}

void bott_transport(PathSample& path, const ConnectionData& bott) {
  const int d = path.d();
  path.theta_bott.assign(path.N + 1, Eigen::MatrixXd::Identity(d, d));
  if (bott.gamma.is_zero()) return;
  for (int k = 0; k < path.N; ++k) {
    Eigen::MatrixXd T = cayley_step(connection_matrix(bott.gamma, path.increments[k]),
                                    path.theta_bott[k]);
    mgs(T);
    path.theta_bott[k + 1] = T;
  }
}

void damped_transport(PathSample& path, const Geometry& geom, double eps) {
  if (eps <= 0) throw std::invalid_argument("damped_transport requires eps > 0");
  if (path.theta_bott.empty()) throw std::logic_error("damped_transport requires bott_transport");
  const int n = path.n, d = path.d();
  const ConnectionData epsc = epsilon_connection(geom.model, eps);

  path.epsilon = eps;
  path.theta_eps.assign(path.N + 1, Eigen::MatrixXd::Identity(d, d));
  path.m_eps.assign(path.N + 1, Eigen::MatrixXd::Identity(d, d));
  path.m_eps_inv.assign(path.N + 1, Eigen::MatrixXd::Identity(d, d));

  // Weitzenboeck potential as an operator on one-forms (transpose action).
  const Eigen::MatrixXd ric_ext = horizontal_ricci(geom.bott.curvature, n, true);
  const Eigen::MatrixXd K =
      (geom.bott.j_squared / eps - geom.bott.delta_h_t / eps + ric_ext).transpose();

  if (d == 3)
    damped_loop<3>(path, epsc.gamma, K, eps);
  else
    damped_loop<Eigen::Dynamic>(path, epsc.gamma, K, eps);
}

Eigen::MatrixXd anti_develop(const PathSample& path) {
  if (path.theta_bott.empty()) throw std::logic_error("anti_develop requires bott_transport");
  Eigen::MatrixXd out(path.N, path.n);
  for (int k = 0; k < path.N; ++k) {
    const Eigen::MatrixXd mid = 0.5 * (path.theta_bott[k] + path.theta_bott[k + 1]);
    out.row(k) = mid.partialPivLu().solve(path.increments[k]).head(path.n).transpose();
  }
  return out;
}

PathSample develop_smooth(const GroupModel& model, const ConnectionData& bott,
                          const SmoothPath& omega, int N) {
  if (N <= 0) throw std::invalid_argument("develop_smooth requires N > 0");
  if (omega.value(0.0).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("develop_smooth requires omega(0) = 0");
  const int d = model.d();
  const double dt = 1.0 / N;

  PathSample path;
  path.n = model.n;
  path.m = model.m;
  path.N = N;
  path.dt = dt;
  path.states.resize(N + 1);
  path.increments.resize(N);
  path.states[0].point = model.identity();
  path.states[0].frame = Eigen::MatrixXd::Identity(d, d);

  struct Deriv {
    Eigen::VectorXd dp;
    Eigen::MatrixXd dU;
  };
  auto rhs = [&](double s, const Eigen::VectorXd& p, const Eigen::MatrixXd& U) {
    const Eigen::VectorXd v = U * omega.deriv(s);
    Deriv out;
    out.dp = model.frame_coeffs(p).transpose() * v;
    out.dU = -connection_matrix(bott.gamma, v) * U;
    return out;
  };

  for (int k = 0; k < N; ++k) {
    const double s = k * dt;
    const Eigen::VectorXd& p = path.states[k].point;
    const Eigen::MatrixXd& U = path.states[k].frame;
    const Deriv k1 = rhs(s, p, U);
    const Deriv k2 = rhs(s + dt / 2, p + dt / 2 * k1.dp, U + dt / 2 * k1.dU);
    const Deriv k3 = rhs(s + dt / 2, p + dt / 2 * k2.dp, U + dt / 2 * k2.dU);
    const Deriv k4 = rhs(s + dt, p + dt * k3.dp, U + dt * k3.dU);
    Eigen::VectorXd pn = p + dt / 6.0 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp);
    Eigen::MatrixXd Un = U + dt / 6.0 * (k1.dU + 2 * k2.dU + 2 * k3.dU + k4.dU);
    model.normalize(pn);
    mgs(Un);
    path.states[k + 1].point = pn;
    path.states[k + 1].frame = Un;
    path.increments[k] = model.log_alg(model.product(model.inverse(p), pn));
  }
  bott_transport(path, bott);
  return path;
}

}  // namespace foliated
