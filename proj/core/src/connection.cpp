#include "foliated/connection.hpp"

#include <cmath>
#include <stdexcept>

namespace foliated {

Tensor3 torsion_from(const Tensor3& gamma, const Tensor3& c) {
  const int d = c.dim();
  Tensor3 T(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) T(i, j, k) = gamma(i, j, k) - gamma(j, i, k) - c(i, j, k);
  return T;
}

Tensor4 curvature_from(const Tensor3& gamma, const Tensor3& c) {
  const int d = c.dim();
  Tensor4 R(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          double s = 0;
          for (int p = 0; p < d; ++p)
            s += gamma(j, k, p) * gamma(i, p, l) - gamma(i, k, p) * gamma(j, p, l) -
                 c(i, j, p) * gamma(p, k, l);
          R(i, j, k, l) = s;
        }
  return R;
}

Tensor3 covariant_derivative_12(const Tensor3& gamma, const Tensor3& S, int i) {
  const int d = S.dim();
  Tensor3 D(d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) {
        double s = 0;
        for (int p = 0; p < d; ++p)
          s += S(j, k, p) * gamma(i, p, l) - gamma(i, j, p) * S(p, k, l) -
               gamma(i, k, p) * S(j, p, l);
        D(j, k, l) = s;
      }
  return D;
}

Eigen::MatrixXd horizontal_ricci(const Tensor4& R, int n, bool extended) {
  const int d = R.dim();
  const int cols = extended ? d : n;
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(extended ? d : n, cols);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < cols; ++b) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += R(i, a, b, i);
      ric(a, b) = s;
    }
  return ric;
}

namespace {

double koszul(const Tensor3& c, int i, int j, int k) {
  return 0.5 * (c(i, j, k) - c(j, k, i) + c(k, i, j));
}

Eigen::MatrixXd delta_h_t_from(const Tensor3& gamma, const Tensor3& T, int n) {
  const int d = T.dim();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < n; ++j) {
    const Tensor3 dT = covariant_derivative_12(gamma, T, j);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) D(l, k) -= dT(j, k, l);
  }
  return D;
}

void fill_derived(ConnectionData& cd, const GroupModel& model) {
  cd.torsion = torsion_from(cd.gamma, model.c);
  cd.curvature = curvature_from(cd.gamma, model.c);
  cd.ric_h = horizontal_ricci(cd.curvature, model.n);
  cd.delta_h_t = delta_h_t_from(cd.gamma, cd.torsion, model.n);
}

}  // namespace

ConnectionData bott_connection(const GroupModel& model) {
  const int n = model.n, d = model.d();
  ConnectionData cd;
  cd.gamma = Tensor3(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        const bool ih = i < n, jh = j < n, kh = k < n;
        double g = 0;
        if (ih && jh)
          g = kh ? koszul(model.c, i, j, k) : 0.0;  // pi_H of Levi-Civita
        else if (!ih && jh)
          g = kh ? model.c(i, j, k) : 0.0;          // pi_H of bracket
        else if (ih && !jh)
          g = kh ? 0.0 : model.c(i, j, k);          // pi_V of bracket
        else
          g = kh ? 0.0 : koszul(model.c, i, j, k);  // pi_V of Levi-Civita
        cd.gamma(i, j, k) = g;
      }
  fill_derived(cd, model);
  const Tensor3 J = j_map(model, cd);
  cd.j_squared = j_squared_from(J, n, d);
  return cd;
}

Tensor3 j_map(const GroupModel& model, const ConnectionData& bott) {
  const int n = model.n, d = model.d();
  Tensor3 J(d);
  // orthonormal frame: g_H(J_Z X, Y) = g_V(Z, T(X,Y)) reads off directly
  for (int z = n; z < d; ++z)
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) J(z, x, y) = bott.torsion(x, y, z);
  return J;
}

Eigen::MatrixXd j_squared_from(const Tensor3& J, int n, int d) {
  Eigen::MatrixXd Jsq = Eigen::MatrixXd::Zero(d, d);
  for (int z = n; z < d; ++z)
    for (int l = 0; l < n; ++l)
      for (int x = 0; x < n; ++x) {
        double s = 0;
        for (int y = 0; y < n; ++y) s += J(z, y, l) * J(z, x, y);
        Jsq(l, x) += s;
      }
  return Jsq;
}

ConnectionData epsilon_connection(const GroupModel& model, double eps) {
  if (eps <= 0) throw std::invalid_argument("epsilon_connection requires eps > 0");
  const int d = model.d();
  const ConnectionData bott = bott_connection(model);
  const Tensor3 J = j_map(model, bott);
  ConnectionData cd;
  cd.gamma = Tensor3(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        cd.gamma(i, j, k) = bott.gamma(i, j, k) - bott.torsion(i, j, k) + J(j, i, k) / eps;
  fill_derived(cd, model);
  cd.j_squared = bott.j_squared;
  return cd;
}

ConnectionData adjoint_connection(const GroupModel& model, double eps) {
  if (eps <= 0) throw std::invalid_argument("adjoint_connection requires eps > 0");
  const int d = model.d();
  const ConnectionData bott = bott_connection(model);
  const Tensor3 J = j_map(model, bott);
  ConnectionData cd;
  cd.gamma = Tensor3(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) cd.gamma(i, j, k) = bott.gamma(i, j, k) + J(i, j, k) / eps;
  fill_derived(cd, model);
  cd.j_squared = bott.j_squared;
  return cd;
}

Tensor4 adjoint_curvature(const GroupModel& model, double eps) {
  if (eps <= 0) throw std::invalid_argument("adjoint_curvature requires eps > 0");
  const int d = model.d();
  const ConnectionData bott = bott_connection(model);
  const Tensor3 J = j_map(model, bott);
  std::vector<Tensor3> gradJ(d);
  for (int i = 0; i < d; ++i) gradJ[i] = covariant_derivative_12(bott.gamma, J, i);

  Tensor4 R(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          double s = bott.curvature(i, j, k, l);
          for (int z = model.n; z < d; ++z) s += bott.torsion(i, j, z) * J(z, k, l) / eps;
          double comm = 0;
          for (int p = 0; p < d; ++p)
            comm += J(j, k, p) * J(i, p, l) - J(i, k, p) * J(j, p, l);
          s += comm / (eps * eps);
          s += (gradJ[i](j, k, l) - gradJ[j](i, k, l)) / eps;
          R(i, j, k, l) = s;
        }
  return R;
}

Eigen::MatrixXd adjoint_ricci(const GroupModel& model, double eps) {
  if (eps <= 0) throw std::invalid_argument("adjoint_ricci requires eps > 0");
  const int n = model.n;
  const ConnectionData bott = bott_connection(model);
  const Eigen::MatrixXd assembled = bott.ric_h -
                                bott.delta_h_t.transpose().topLeftCorner(n, n) / eps +
                                bott.j_squared.topLeftCorner(n, n) / eps;
  const Eigen::MatrixXd trace = horizontal_ricci(adjoint_curvature(model, eps), n);
  if ((assembled - trace).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error(
        "adjoint_ricci cross-check failed: assembled horizontal Ricci does not match the "
        "horizontal trace of the adjoint curvature");
  return assembled;
}

Geometry Geometry::build(const GroupModel& model) {
  Geometry g;
  g.model = model;
  g.bott = bott_connection(model);
  g.J = j_map(model, g.bott);
  return g;
}

ScalarField ScalarField::from_poly(const GroupModel& model, const Polynomial& p) {
  ScalarField f;
  f.has_poly = true;
  f.poly = p;
  f.eval = [p](const Eigen::VectorXd& x) { return p.eval(x); };
  (void)model;
  return f;
}

ScalarField ScalarField::numeric(std::function<double(const Eigen::VectorXd&)> fn) {
  ScalarField f;
  f.eval = std::move(fn);
  return f;
}

namespace {

Eigen::VectorXd frame_dir(int d, int i) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  e(i) = 1.0;
  return e;
}

// F(a,b) = f(x * exp(a e_i) * exp(b e_k))
double two_param(const GroupModel& g, const ScalarField& f, const Eigen::VectorXd& x, int i,
                 double a, int k, double b) {
  const int d = g.d();
  Eigen::VectorXd p = x;
  if (a != 0.0) p = g.flow(p, frame_dir(d, i), a);
  if (b != 0.0) p = g.flow(p, frame_dir(d, k), b);
  return f.eval(p);
}

}  // namespace

double weitzenbock_residual(const GroupModel& model, double eps, const ScalarField& f,
                            const Eigen::VectorXd& x, double fd_step) {
  if (eps <= 0) throw std::invalid_argument("weitzenbock_residual requires eps > 0");
  if (fd_step <= 0) throw std::invalid_argument("weitzenbock_residual requires fd_step > 0");
  const int n = model.n, d = model.d();
  const ConnectionData bott = bott_connection(model);
  const ConnectionData epsc = epsilon_connection(model, eps);
  const Tensor3& ge = epsc.gamma;

  // X_0' = sum_{i<n} nabla_{X_i} X_i; L = sum X_i^2 - X_0'
  Eigen::VectorXd x0p = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < d; ++l) x0p(l) += bott.gamma(i, i, l);

  // Frame-derivative tables: eta_k = e_k f, deta(i,k) = e_i e_k f,
  // ddeta(i,k) = e_i e_i e_k f (i horizontal only).
  Eigen::VectorXd eta(d), dLf(d);
  Eigen::MatrixXd deta = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd ddeta = Eigen::MatrixXd::Zero(n, d);

  if (f.has_poly) {
    const std::vector<PolyVectorField> fr = model.frame_fields();
    std::vector<Polynomial> etap(d);
    for (int k = 0; k < d; ++k) {
      etap[k] = fr[k].apply(f.poly);
      eta(k) = etap[k].eval(x);
    }
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        const Polynomial p = fr[i].apply(etap[k]);
        deta(i, k) = p.eval(x);
        if (i < n) ddeta(i, k) = fr[i].apply(p).eval(x);
      }
    Polynomial Lf(f.poly.nvars());
    for (int i = 0; i < n; ++i) Lf += fr[i].apply(etap[i]);
    for (int l = 0; l < d; ++l) Lf += etap[l] * (-x0p(l));
    for (int k = 0; k < d; ++k) dLf(k) = fr[k].apply(Lf).eval(x);
  } else {
    // Central stencils along one-parameter subgroups.  Higher-order stencils
    // widen the step so truncation and roundoff balance near 1e-6.
    const double h1 = fd_step;
    const double h2 = std::max(fd_step, 1e-4);
    const double h3 = std::max(8.0 * fd_step, 8e-4);
    for (int k = 0; k < d; ++k)
      eta(k) = (two_param(model, f, x, k, h1, k, 0) - two_param(model, f, x, k, -h1, k, 0)) /
               (2 * h1);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k)
        deta(i, k) = (two_param(model, f, x, i, h2, k, h2) - two_param(model, f, x, i, h2, k, -h2) -
                      two_param(model, f, x, i, -h2, k, h2) +
                      two_param(model, f, x, i, -h2, k, -h2)) /
                     (4 * h2 * h2);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k)
        ddeta(i, k) =
            (two_param(model, f, x, i, h3, k, h3) - 2 * two_param(model, f, x, i, 0, k, h3) +
             two_param(model, f, x, i, -h3, k, h3) - two_param(model, f, x, i, h3, k, -h3) +
             2 * two_param(model, f, x, i, 0, k, -h3) - two_param(model, f, x, i, -h3, k, -h3)) /
            (2 * h3 * h3 * h3);
    // dLf via the same stencils with operator order swapped: e_k (e_i e_i f).
    for (int k = 0; k < d; ++k) {
      double s = 0;
      for (int i = 0; i < n; ++i)
        s += (two_param(model, f, x, k, h3, i, h3) - 2 * two_param(model, f, x, k, h3, i, 0) +
              two_param(model, f, x, k, h3, i, -h3) - two_param(model, f, x, k, -h3, i, h3) +
              2 * two_param(model, f, x, k, -h3, i, 0) - two_param(model, f, x, k, -h3, i, -h3)) /
             (2 * h3 * h3 * h3);
      for (int l = 0; l < d; ++l) s -= x0p(l) * deta(k, l);
      dLf(k) = s;
    }
  }

  // box_eps on the exact one-form eta: sum over horizontal i of the squared
  // nabla^eps derivative, minus the nabla^eps derivative along X_0', minus the
  // zeroth-order Weitzenboeck potential (tensors act on forms by transpose).
  Eigen::VectorXd box = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < d; ++k) {
    double s = 0;
    for (int i = 0; i < n; ++i) {
      s += ddeta(i, k);
      for (int l = 0; l < d; ++l) {
        s -= 2.0 * ge(i, k, l) * deta(i, l);
        for (int p = 0; p < d; ++p) s += ge(i, k, l) * ge(i, l, p) * eta(p);
      }
    }
    for (int l = 0; l < d; ++l) {
      s -= x0p(l) * deta(l, k);
      for (int p = 0; p < d; ++p) s += x0p(l) * ge(l, k, p) * eta(p);
    }
    for (int l = 0; l < d; ++l) {
      s -= bott.j_squared(l, k) * eta(l) / eps;
      s += bott.delta_h_t(l, k) * eta(l) / eps;
      if (l < n && k < n) s -= bott.ric_h(l, k) * eta(l);
    }
    box(k) = s;
  }

  return (dLf - box).cwiseAbs().maxCoeff();
}

}  // namespace foliated
