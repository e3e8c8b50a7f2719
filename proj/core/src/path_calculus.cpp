#include "foliated/path_calculus.hpp"

#include <cmath>
#include <stdexcept>

namespace foliated {

namespace {

Eigen::VectorXd embed_h(const Eigen::VectorXd& hv, int d) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  w.head(hv.size()) = hv;
  return w;
}

// T(a, b) from frame-constant torsion components.
Eigen::VectorXd torsion_apply(const Tensor3& T, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const int d = T.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    if (a(i) == 0.0) continue;
    for (int j = 0; j < d; ++j) {
      if (b(j) == 0.0) continue;
      for (int k = 0; k < d; ++k) out(k) += a(i) * b(j) * T(i, j, k);
    }
  }
  return out;
}

}  // namespace

CylinderFunction CylinderFunction::coordinate(const GroupModel& model, int coord, double time) {
  CylinderFunction F;
  F.name = "coordinate[" + std::to_string(coord + 1) + "]@" + std::to_string(time);
  F.times = {time};
  const int nc = model.coord_dim;
  F.f = [coord](const std::vector<Eigen::VectorXd>& p) { return p[0](coord); };
  F.chart_grad = [coord, nc](int, const std::vector<Eigen::VectorXd>&) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nc);
    g(coord) = 1.0;
    return g;
  };
  return F;
}

CylinderFunction CylinderFunction::square(const GroupModel& model, int coord, double time) {
  CylinderFunction F;
  F.name = "square[" + std::to_string(coord + 1) + "]@" + std::to_string(time);
  F.times = {time};
  const int nc = model.coord_dim;
  F.f = [coord](const std::vector<Eigen::VectorXd>& p) { return p[0](coord) * p[0](coord); };
  F.chart_grad = [coord, nc](int, const std::vector<Eigen::VectorXd>& p) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nc);
    g(coord) = 2.0 * p[0](coord);
    return g;
  };
  return F;
}

CylinderFunction CylinderFunction::product_two(const GroupModel& model, int c1, double t1, int c2,
                                               double t2) {
  CylinderFunction F;
  F.name = "product[" + std::to_string(c1 + 1) + "@" + std::to_string(t1) + "," +
           std::to_string(c2 + 1) + "@" + std::to_string(t2) + "]";
  const int nc = model.coord_dim;
  if (t1 == t2) {
    F.times = {t1};
    F.f = [c1, c2](const std::vector<Eigen::VectorXd>& p) { return p[0](c1) * p[0](c2); };
    F.chart_grad = [c1, c2, nc](int, const std::vector<Eigen::VectorXd>& p) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(nc);
      g(c1) += p[0](c2);
      g(c2) += p[0](c1);
      return g;
    };
    return F;
  }
  F.times = {std::min(t1, t2), std::max(t1, t2)};
  const bool swapped = t2 < t1;
  const int a = swapped ? c2 : c1, b = swapped ? c1 : c2;
  F.f = [a, b](const std::vector<Eigen::VectorXd>& p) { return p[0](a) * p[1](b); };
  F.chart_grad = [a, b, nc](int i, const std::vector<Eigen::VectorXd>& p) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nc);
    if (i == 0)
      g(a) = p[1](b);
    else
      g(b) = p[0](a);
    return g;
  };
  return F;
}

CylinderFunction CylinderFunction::sum_of_squares(const GroupModel& model,
                                                  const std::vector<int>& coords, double time) {
  CylinderFunction F;
  F.name = "sum_of_squares@" + std::to_string(time);
  F.times = {time};
  const int nc = model.coord_dim;
  F.f = [coords](const std::vector<Eigen::VectorXd>& p) {
    double s = 0;
    for (int c : coords) s += p[0](c) * p[0](c);
    return s;
  };
  F.chart_grad = [coords, nc](int, const std::vector<Eigen::VectorXd>& p) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nc);
    for (int c : coords) g(c) += 2.0 * p[0](c);
    return g;
  };
  return F;
}

CylinderFunction CylinderFunction::from_json(const GroupModel& model, const nlohmann::json& j) {
  const std::string kind = j.value("kind", "");
  auto coord_list = [&](const char* key) {
    std::vector<int> cs;
    for (const auto& c : j.at(key)) cs.push_back(c.get<int>() - 1);
    for (int c : cs)
      if (c < 0 || c >= model.coord_dim)
        throw std::invalid_argument("cylinder function coordinate index out of range");
    return cs;
  };
  if (kind == "coordinate")
    return coordinate(model, coord_list("coords").at(0), j.at("times").at(0).get<double>());
  if (kind == "square")
    return square(model, coord_list("coords").at(0), j.at("times").at(0).get<double>());
  if (kind == "sum_of_squares")
    return sum_of_squares(model, coord_list("coords"), j.at("times").at(0).get<double>());
  if (kind == "product") {
    const auto cs = coord_list("coords");
    return product_two(model, cs.at(0), j.at("times").at(0).get<double>(), cs.at(1),
                       j.at("times").at(1).get<double>());
  }
  throw std::invalid_argument("unknown cylinder function kind: " + kind);
}

CameronMartinPath CameronMartinPath::piecewise_linear(const Eigen::MatrixXd& knots) {
  CameronMartinPath h;
  h.name = "piecewise_linear";
  h.n = static_cast<int>(knots.cols());
  const int K = static_cast<int>(knots.rows());
  Eigen::MatrixXd vals(K + 1, h.n);
  vals.row(0).setZero();
  vals.bottomRows(K) = knots;
  h.value = [vals, K](double s) {
    s = std::clamp(s, 0.0, 1.0);
    const int k = std::min(static_cast<int>(s * K), K - 1);
    const double u = s * K - k;
    return Eigen::VectorXd((1 - u) * vals.row(k).transpose() + u * vals.row(k + 1).transpose());
  };
  h.deriv = [vals, K](double s) {
    s = std::clamp(s, 0.0, 1.0);
    const int k = std::min(static_cast<int>(s * K), K - 1);
    return Eigen::VectorXd(K * (vals.row(k + 1) - vals.row(k)).transpose());
  };
  for (int k = 0; k < K; ++k) h.l2sq += K * (vals.row(k + 1) - vals.row(k)).squaredNorm();
  return h;
}

CameronMartinPath CameronMartinPath::trig(const Eigen::MatrixXd& amps) {
  CameronMartinPath h;
  h.name = "trig";
  h.n = static_cast<int>(amps.cols());
  const int J = static_cast<int>(amps.rows());
  const double pi = 3.14159265358979323846;
  h.deriv = [amps, J, pi](double s) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(amps.cols());
    for (int j = 0; j < J; ++j) d += amps.row(j).transpose() * std::cos((j + 1) * pi * s);
    return d;
  };
  h.value = [amps, J, pi](double s) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(amps.cols());
    for (int j = 0; j < J; ++j)
      v += amps.row(j).transpose() * (std::sin((j + 1) * pi * s) / ((j + 1) * pi));
    return v;
  };
  h.l2sq = 0.5 * amps.squaredNorm();  // cos modes are L2-orthogonal with norm 1/2
  return h;
}

CameronMartinPath CameronMartinPath::zero(int n) {
  CameronMartinPath h;
  h.name = "zero";
  h.n = n;
  h.value = [n](double) { return Eigen::VectorXd::Zero(n); };
  h.deriv = [n](double) { return Eigen::VectorXd::Zero(n); };
  h.l2sq = 0;
  return h;
}

CameronMartinPath CameronMartinPath::from_json(int n, const nlohmann::json& j) {
  const std::string kind = j.value("kind", "");
  Eigen::MatrixXd coeffs;
  if (j.contains("coeffs")) {
    const auto& rows = j.at("coeffs");
    coeffs.resize(static_cast<int>(rows.size()), n);
    int r = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != n)
        throw std::invalid_argument("h coeffs rows must have length n");
      for (int c = 0; c < n; ++c) coeffs(r, c) = row[c].get<double>();
      ++r;
    }
  }
  if (kind == "piecewise_linear") return piecewise_linear(coeffs);
  if (kind == "trig") return trig(coeffs);
  if (kind == "zero") return zero(n);
  throw std::invalid_argument("unknown Cameron-Martin kind: " + kind);
}

std::vector<int> partition_indices(const CylinderFunction& F, int N, double dt) {
  std::vector<int> idx;
  int prev = 0;
  for (double s : F.times) {
    const int k = static_cast<int>(std::lround(s / dt));
    if (std::abs(s - k * dt) > dt / 2 + 1e-12 || k < 1 || k > N)
      throw std::invalid_argument("partition time off-grid beyond dt/2: " + std::to_string(s));
    if (k <= prev) throw std::invalid_argument("partition times must snap to distinct grid steps");
    prev = k;
    idx.push_back(k);
  }
  return idx;
}

double eval_cylinder(const CylinderFunction& F, const PathSample& path, const GroupModel& model) {
  (void)model;
  const std::vector<int> idx = partition_indices(F, path.N, path.dt);
  std::vector<Eigen::VectorXd> pts;
  for (int k : idx) pts.push_back(path.states[k].point);
  return F.f(pts);
}

std::vector<Eigen::VectorXd> frame_differentials(const CylinderFunction& F, const PathSample& path,
                                                 const GroupModel& model) {
  const std::vector<int> idx = partition_indices(F, path.N, path.dt);
  std::vector<Eigen::VectorXd> pts;
  for (int k : idx) pts.push_back(path.states[k].point);
  std::vector<Eigen::VectorXd> out;
  for (size_t i = 0; i < idx.size(); ++i)
    out.push_back(model.frame_coeffs(pts[i]) * F.chart_grad(static_cast<int>(i), pts));
  return out;
}

std::vector<TangentProcess> make_tangent_processes(const PathSample& path, const Geometry& geom,
                                                   const std::vector<CameronMartinPath>& hs) {
  const int n = path.n, d = path.d();
  const int nH = static_cast<int>(hs.size());
  const bool id_theta = geom.bott.gamma.is_zero();  // transports stay identity
  std::vector<TangentProcess> out(nH);
  std::vector<Eigen::VectorXd> acc(nH, Eigen::VectorXd::Zero(d));  // vertical accumulators
  for (auto& tp : out) tp.v = Eigen::MatrixXd::Zero(path.N + 1, d);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  for (int k = 0; k < path.N; ++k) {
    Eigen::MatrixXd mid;
    if (!id_theta) {
      mid = 0.5 * (path.theta_bott[k] + path.theta_bott[k + 1]);
      lu.compute(mid);
    }
    for (int hi = 0; hi < nH; ++hi) {
      const Eigen::VectorXd hm = embed_h(hs[hi].value((k + 0.5) * path.dt), d);
      const Eigen::VectorXd y = id_theta ? hm : Eigen::VectorXd(mid * hm);
      const Eigen::VectorXd t = torsion_apply(geom.bott.torsion, path.increments[k], y);
      acc[hi] += id_theta ? t : Eigen::VectorXd(lu.solve(t));
      out[hi].v.row(k + 1).head(n) = hs[hi].value((k + 1) * path.dt).transpose();
      out[hi].v.row(k + 1).tail(d - n) = acc[hi].tail(d - n).transpose();
    }
  }
  return out;
}

TangentProcess make_tangent_process(const PathSample& path, const Geometry& geom,
                                    const CameronMartinPath& h) {
  return make_tangent_processes(path, geom, {h})[0];
}

double directional_derivative(const CylinderFunction& F, const PathSample& path,
                              const GroupModel& model, const TangentProcess& v) {
  const std::vector<int> idx = partition_indices(F, path.N, path.dt);
  const std::vector<Eigen::VectorXd> df = frame_differentials(F, path, model);
  double s = 0;
  for (size_t i = 0; i < idx.size(); ++i)
    s += df[i].dot(path.theta_bott[idx[i]] * v.v.row(idx[i]).transpose());
  return s;
}

std::vector<Eigen::VectorXd> damped_malliavin_derivative(const CylinderFunction& F,
                                                         const PathSample& path,
                                                         const GroupModel& model) {
  if (path.m_eps.empty()) throw std::logic_error("damped_malliavin_derivative requires damped_transport");
  const std::vector<int> idx = partition_indices(F, path.N, path.dt);
  const std::vector<Eigen::VectorXd> df = frame_differentials(F, path, model);
  const int d = path.d();
  // suffix sums of tau_{s_i} d_i f in T*_x, then pull back through tau_s^{-1}
  std::vector<Eigen::VectorXd> out(path.N + 1, Eigen::VectorXd::Zero(d));
  Eigen::VectorXd suffix = Eigen::VectorXd::Zero(d);
  int i = static_cast<int>(idx.size()) - 1;
  for (int k = path.N; k >= 0; --k) {
    while (i >= 0 && idx[i] >= k) {
      suffix += path.tau_eps(idx[i]) * df[i];
      --i;
    }
    if (suffix.squaredNorm() != 0.0) out[k] = path.tau_eps_inv_apply(k, suffix);
  }
  return out;
}

PDecomposition p_decomposition(const PathSample& path, const Geometry& geom,
                               const CameronMartinPath& h, const TangentProcess& v,
                               const DChoice& D) {
  const int n = path.n, d = path.d();
  const GroupModel& model = geom.model;

  // D-connection tensors (all frame-constant).
  Tensor3 gammaD = geom.bott.gamma;
  Tensor3 jdiff(d);  // difference tensor D - nabla_Bott
  if (D.adjoint) {
    if (D.eps <= 0) throw std::invalid_argument("p_decomposition requires eps > 0");
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          jdiff(i, j, k) = geom.J(i, j, k) / D.eps;
          gammaD(i, j, k) += jdiff(i, j, k);
        }
  }
  const Tensor4 RD = curvature_from(gammaD, model.c);
  const bool flat_D = RD.is_zero(1e-14);
  const Eigen::MatrixXd ricD = horizontal_ricci(RD, n, true);

  // Trace tensors for the Ito corrections:
  //   S(z, l) = sum_{a<n} (nabla^D_a jdiff)(z, a, l)
  //   P(y, l) = sum_{a<n} sum_z T(a, y, z) jdiff(z, a, l)
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d), P = Eigen::MatrixXd::Zero(d, d);
  for (int a = 0; a < n; ++a) {
    const Tensor3 dJ = covariant_derivative_12(gammaD, jdiff, a);
    for (int z = 0; z < d; ++z)
      for (int l = 0; l < d; ++l) S(l, z) += dJ(z, a, l);
    for (int y = 0; y < d; ++y)
      for (int l = 0; l < d; ++l) {
        double s = 0;
        for (int z = 0; z < d; ++z) s += geom.bott.torsion(a, y, z) * jdiff(z, a, l);
        P(l, y) += s;
      }
  }

  PDecomposition out;
  out.p = Eigen::MatrixXd::Zero(path.N + 1, n);
  out.q.assign(path.N, Eigen::MatrixXd::Zero(n, n));
  out.r = Eigen::MatrixXd::Zero(path.N, n);

  Eigen::MatrixXd omega_acc = Eigen::MatrixXd::Zero(n, n);  // inner curvature integral

  // flat connection, no difference tensor: q vanishes and r is the bare shift
  if (flat_D && jdiff.is_zero()) {
    for (int k = 0; k < path.N; ++k) {
      out.r.row(k) = h.deriv(k * path.dt).transpose();
      out.p.row(k + 1) = out.p.row(k) + out.r.row(k) * path.dt;
    }
    return out;
  }

  for (int k = 0; k < path.N; ++k) {
    const Eigen::MatrixXd& Th = path.theta_bott[k];  // adapted (left endpoint)
    const Eigen::VectorXd va = v.v.row(k).transpose();
    const Eigen::VectorXd X = Th * va;  // v at W_{s_k} in the left-invariant frame

    // q: J-correction minus accumulated curvature integral, symmetrized skew.
    Eigen::MatrixXd qraw = -omega_acc;
    if (!jdiff.is_zero()) {
      Eigen::MatrixXd JX = Eigen::MatrixXd::Zero(d, d);
      for (int z = n; z < d; ++z) {
        if (X(z) == 0.0) continue;
        for (int b = 0; b < d; ++b)
          for (int l = 0; l < d; ++l) JX(l, b) += X(z) * jdiff(z, b, l);
      }
      qraw += (Th.transpose() * JX * Th).topLeftCorner(n, n);
    }
    out.q[k] = 0.5 * (qraw - qraw.transpose());

    // r: h' plus Ricci drift plus the two Ito trace corrections.
    Eigen::VectorXd r = h.deriv(k * path.dt);
    r += 0.5 * (Th.transpose() * (ricD * X)).head(n);
    if (!jdiff.is_zero()) {
      const Eigen::VectorXd Y = Th * embed_h(va.head(n), d);
      r += 0.5 * (Th.transpose() * (S * X)).head(n);
      r -= 0.5 * (Th.transpose() * (P * Y)).head(n);
    }
    out.r.row(k) = r.transpose();

    out.p.row(k + 1) =
        out.p.row(k) + (out.q[k] * path.noise.row(k).transpose() + r * path.dt).transpose();

    // advance the inner Stratonovich curvature integral (midpoint rule):
    // contract R(w, vm) once, then conjugate by the midpoint transport
    if (!flat_D) {
      const Eigen::MatrixXd mid = 0.5 * (path.theta_bott[k] + path.theta_bott[k + 1]);
      const Eigen::VectorXd vm = mid * (0.5 * (v.v.row(k) + v.v.row(k + 1))).transpose();
      const Eigen::VectorXd& w = path.increments[k];
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d, d);  // C(kk,l) = R(w,vm)(kk,l)
      for (int i = 0; i < d; ++i) {
        if (w(i) == 0.0) continue;
        for (int j = 0; j < d; ++j) {
          if (vm(j) == 0.0) continue;
          const double wij = w(i) * vm(j);
          for (int kk = 0; kk < d; ++kk)
            for (int l = 0; l < d; ++l) C(kk, l) += wij * RD(i, j, kk, l);
        }
      }
      omega_acc += (mid.transpose() * C.transpose() * mid).topLeftCorner(n, n);
    }
  }
  return out;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& A) {
  const int d = static_cast<int>(A.rows());
  const double nrm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  Eigen::MatrixXd B = A;
  while (nrm / std::pow(2.0, squarings) > 0.5) ++squarings;
  B /= std::pow(2.0, squarings);
  // Pade(6,6): U the odd and V the even part of the numerator polynomial
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd B2 = B * B, B4 = B2 * B2, B6 = B4 * B2;
  const Eigen::MatrixXd U = B * (B4 / 15840.0 + B2 / 66.0 + 0.5 * I);
  const Eigen::MatrixXd V = B6 / 665280.0 + B4 / 792.0 + B2 * (5.0 / 44.0) + I;
  Eigen::MatrixXd E = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < squarings; ++i) E = E * E;
  return E;
}

Eigen::MatrixXd variation_rho(const PathSample& path, const Geometry& geom,
                              const CameronMartinPath& h, double t, const DChoice& D) {
  const TangentProcess v = make_tangent_process(path, geom, h);
  const PDecomposition pqr = p_decomposition(path, geom, h, v, D);
  Eigen::MatrixXd out(path.N, path.n);
  for (int k = 0; k < path.N; ++k) {
    const Eigen::MatrixXd E = matrix_exp(t * pqr.q[k]);
    if ((E.transpose() * E - Eigen::MatrixXd::Identity(path.n, path.n)).cwiseAbs().maxCoeff() >
        1e-10)
      throw std::runtime_error("variation_rho: exponential of skew q is not orthogonal");
    out.row(k) = (E * path.noise.row(k).transpose() + t * pqr.r.row(k).transpose() * path.dt)
                     .transpose();
  }
  return out;
}

double girsanov_density(const PathSample& path, const PDecomposition& pqr, double t) {
  double ito = 0, quad = 0;
  for (int k = 0; k < path.N; ++k) {
    const Eigen::VectorXd r = pqr.r.row(k).transpose();
    ito += r.dot(matrix_exp(t * pqr.q[k]) * path.noise.row(k).transpose());
    quad += r.squaredNorm() * path.dt;
  }
  return std::exp(t * ito - 0.5 * t * t * quad);
}

std::vector<Eigen::MatrixXd> variation_flow_nu(const PathSample& path, const Geometry& geom,
                                               const CameronMartinPath& h, double t_max,
                                               int t_steps, const DChoice& D) {
  if (t_steps < 1) throw std::invalid_argument("variation_flow_nu requires t_steps >= 1");
  std::vector<Eigen::MatrixXd> fam;
  fam.push_back(path.noise);
  const double scale0 = path.noise.cwiseAbs().maxCoeff() + std::sqrt(path.dt);
  const double dtau = t_max / t_steps;
  for (int j = 0; j < t_steps; ++j) {
    PathSample cur = drive_path(geom.model, geom.bott, path.states[0].point, fam.back(), path.dt);
    bott_transport(cur, geom.bott);
    const TangentProcess v = make_tangent_process(cur, geom, h);
    const PDecomposition pqr = p_decomposition(cur, geom, h, v, D);
    Eigen::MatrixXd next = fam.back();
    for (int k = 0; k < path.N; ++k)
      next.row(k) +=
          dtau * (pqr.q[k] * fam.back().row(k).transpose() + pqr.r.row(k).transpose() * path.dt)
                     .transpose();
    if (next.cwiseAbs().maxCoeff() > 10.0 * scale0)
      throw std::runtime_error("variation_flow_nu diverged: increment exceeded 10x initial scale");
    fam.push_back(next);
  }
  return fam;
}

TangencyResult tangency_check_smooth(const GroupModel& model, const Geometry& geom,
                                     const SmoothPath& omega,
                                     const std::function<Eigen::VectorXd(double)>& v, int N,
                                     double tol) {
  // Simpson on a half-step development grid; smooth inputs make the
  // accumulated integral fourth-order accurate, so constructed tangents sit
  // well under the acceptance tolerance.
  const PathSample dev = develop_smooth(model, geom.bott, omega, 2 * N);
  const int n = model.n, d = model.d();
  auto integrand = [&](int j) {
    const double s = j * dev.dt;
    const Eigen::MatrixXd& th = dev.theta_bott[j];
    const Eigen::VectorXd t =
        torsion_apply(geom.bott.torsion, th * omega.deriv(s), th * v(s));
    return Eigen::VectorXd(th.partialPivLu().solve(t));
  };
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  double worst = v(0.0).tail(d - n).cwiseAbs().maxCoeff();
  const double h = 1.0 / N;
  Eigen::VectorXd left = integrand(0);
  for (int k = 0; k < N; ++k) {
    const Eigen::VectorXd right = integrand(2 * k + 2);
    acc += (h / 6.0) * (left + 4.0 * integrand(2 * k + 1) + right);
    left = right;
    const Eigen::VectorXd res = v((k + 1.0) * h) - acc;
    worst = std::max(worst, res.tail(d - n).cwiseAbs().maxCoeff());
  }
  return {worst <= tol, worst};
}

}  // namespace foliated
