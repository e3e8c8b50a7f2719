#include "foliated/group_model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace foliated {

namespace {

void require_chart(const GroupModel& g) {
  if (!g.has_chart())
    throw std::logic_error("custom models carry no chart: only tensor operations are available");
}

}  // namespace

Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  return {a(0) * b(0) - a(1) * b(1) - a(2) * b(2) - a(3) * b(3),
          a(0) * b(1) + a(1) * b(0) + a(2) * b(3) - a(3) * b(2),
          a(0) * b(2) - a(1) * b(3) + a(2) * b(0) + a(3) * b(1),
          a(0) * b(3) + a(1) * b(2) - a(2) * b(1) + a(3) * b(0)};
}

Eigen::Vector4d quat_exp(const Eigen::Vector3d& v) {
  const double t = v.norm();
  Eigen::Vector4d q;
  // sin(t)/t via series near 0 keeps the map smooth through t = 0.
  const double s = (t < 1e-8) ? 1.0 - t * t / 6.0 : std::sin(t) / t;
  q << std::cos(t), s * v(0), s * v(1), s * v(2);
  return q;
}

Eigen::Vector3d quat_log(const Eigen::Vector4d& q) {
  const Eigen::Vector3d vec(q(1), q(2), q(3));
  const double nv = vec.norm();
  const double t = std::atan2(nv, q(0));
  if (nv < 1e-14) return Eigen::Vector3d::Zero();
  return vec * (t / nv);
}

Eigen::VectorXd GroupModel::identity() const {
  require_chart(*this);
  if (kind == ModelKind::su2_hopf) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
    e(0) = 1.0;
    return e;
  }
  return Eigen::VectorXd::Zero(coord_dim);
}

Eigen::VectorXd GroupModel::product(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  require_chart(*this);
  switch (kind) {
    case ModelKind::flat_product:
      return a + b;
    case ModelKind::su2_hopf:
      return quat_mul(Eigen::Vector4d(a), Eigen::Vector4d(b));
    case ModelKind::heisenberg: {
      const int nh = n / 2;
      Eigen::VectorXd r = a + b;
      double cross = 0;
      for (int i = 0; i < nh; ++i) cross += a(i) * b(nh + i) - b(i) * a(nh + i);
      r(2 * nh) = a(2 * nh) + b(2 * nh) + cross;
      return r;
    }
    default:
      throw std::logic_error("unreachable");
  }
}

Eigen::VectorXd GroupModel::inverse(const Eigen::VectorXd& a) const {
  require_chart(*this);
  if (kind == ModelKind::su2_hopf) {
    Eigen::VectorXd r = a;
    r(1) = -r(1);
    r(2) = -r(2);
    r(3) = -r(3);
    return r;
  }
  return -a;  // heisenberg uses exponential coordinates, flat is abelian
}

Eigen::VectorXd GroupModel::exp_alg(const Eigen::VectorXd& v) const {
  require_chart(*this);
  if (kind == ModelKind::su2_hopf) return quat_exp(Eigen::Vector3d(v));
  // Heisenberg in these coordinates is in exponential coordinates, flat too.
  return v;
}

Eigen::VectorXd GroupModel::log_alg(const Eigen::VectorXd& p) const {
  require_chart(*this);
  if (kind == ModelKind::su2_hopf) return quat_log(Eigen::Vector4d(p));
  return p;
}

void GroupModel::normalize(Eigen::VectorXd& p) const {
  if (kind == ModelKind::su2_hopf) p /= p.norm();
}

Eigen::MatrixXd GroupModel::frame_coeffs(const Eigen::VectorXd& p) const {
  require_chart(*this);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(d(), coord_dim);
  switch (kind) {
    case ModelKind::flat_product:
      E.setIdentity();
      break;
    case ModelKind::su2_hopf: {
      Eigen::Vector4d basis[3] = {{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
      for (int i = 0; i < 3; ++i) E.row(i) = quat_mul(Eigen::Vector4d(p), basis[i]).transpose();
      break;
    }
    case ModelKind::heisenberg: {
      const int nh = n / 2;
      for (int i = 0; i < nh; ++i) {
        E(i, i) = 1.0;                  // X_i = d/dx_i - y_i d/dz
        E(i, 2 * nh) = -p(nh + i);
        E(nh + i, nh + i) = 1.0;        // Y_i = d/dy_i + x_i d/dz
        E(nh + i, 2 * nh) = p(i);
      }
      E(2 * nh, 2 * nh) = 1.0;          // Z = d/dz
      break;
    }
    default:
      throw std::logic_error("unreachable");
  }
  return E;
}

std::vector<PolyVectorField> GroupModel::frame_fields() const {
  require_chart(*this);
  std::vector<PolyVectorField> fields(d());
  const int nc = coord_dim;
  for (auto& f : fields) f.coeff.assign(nc, Polynomial(nc));
  switch (kind) {
    case ModelKind::flat_product:
      for (int i = 0; i < d(); ++i) fields[i].coeff[i] = Polynomial::constant(nc, 1.0);
      break;
    case ModelKind::su2_hopf: {
      Eigen::Vector4d u[3] = {{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
      for (int i = 0; i < 3; ++i)
        for (int r = 0; r < 4; ++r) {
          Eigen::Vector4d er = Eigen::Vector4d::Zero();
          er(r) = 1.0;
          const Eigen::Vector4d col = quat_mul(er, u[i]);  // (q * u_i)_c linear in q_r
          for (int cidx = 0; cidx < 4; ++cidx)
            if (col(cidx) != 0.0) fields[i].coeff[cidx] += Polynomial::var(nc, r, col(cidx));
        }
      break;
    }
    case ModelKind::heisenberg: {
      const int nh = n / 2;
      for (int i = 0; i < nh; ++i) {
        fields[i].coeff[i] = Polynomial::constant(nc, 1.0);
        fields[i].coeff[2 * nh] = Polynomial::var(nc, nh + i, -1.0);
        fields[nh + i].coeff[nh + i] = Polynomial::constant(nc, 1.0);
        fields[nh + i].coeff[2 * nh] = Polynomial::var(nc, i, 1.0);
      }
      fields[2 * nh].coeff[2 * nh] = Polynomial::constant(nc, 1.0);
      break;
    }
    default:
      throw std::logic_error("unreachable");
  }
  return fields;
}

Eigen::VectorXd GroupModel::flow(const Eigen::VectorXd& p, const Eigen::VectorXd& v, double t) const {
  Eigen::VectorXd q = product(p, exp_alg(t * v));
  normalize(q);
  return q;
}

void GroupModel::validate() const {
  const int dd = d();
  if (n < 1 || m < 1) throw std::invalid_argument("model requires n >= 1 and m >= 1");

  for (int i = 0; i < dd; ++i)
    for (int j = 0; j < dd; ++j)
      for (int k = 0; k < dd; ++k)
        if (std::abs(c(i, j, k) + c(j, i, k)) > 1e-12) {
          std::ostringstream os;
          os << "structure constants violate antisymmetry at (" << i + 1 << "," << j + 1 << ","
             << k + 1 << ")";
          throw std::invalid_argument(os.str());
        }

  for (int i = 0; i < dd; ++i)
    for (int j = 0; j < dd; ++j)
      for (int k = 0; k < dd; ++k)
        for (int p = 0; p < dd; ++p) {
          double s = 0;
          for (int l = 0; l < dd; ++l)
            s += c(i, j, l) * c(l, k, p) + c(j, k, l) * c(l, i, p) + c(k, i, l) * c(l, j, p);
          if (std::abs(s) > 1e-10) {
            std::ostringstream os;
            os << "structure constants violate jacobi at (" << i + 1 << "," << j + 1 << ","
               << k + 1 << "," << p + 1 << ")";
            throw std::invalid_argument(os.str());
          }
        }

  for (int i = n; i < dd; ++i)
    for (int j = n; j < dd; ++j)
      for (int k = 0; k < n; ++k)
        if (std::abs(c(i, j, k)) > 1e-12) {
          std::ostringstream os;
          os << "structure constants violate foliation_compatibility: [vertical,vertical] has a "
                "horizontal component at ("
             << i + 1 << "," << j + 1 << "," << k + 1 << ")";
          throw std::invalid_argument(os.str());
        }

  // bracket_generating: iterated brackets of the horizontal basis span R^d.
  std::vector<Eigen::VectorXd> gen;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dd);
    e(i) = 1.0;
    gen.push_back(e);
  }
  auto rank_of = [dd](const std::vector<Eigen::VectorXd>& vs) {
    Eigen::MatrixXd M(dd, static_cast<int>(vs.size()));
    for (size_t i = 0; i < vs.size(); ++i) M.col(static_cast<int>(i)) = vs[i];
    return Eigen::FullPivLU<Eigen::MatrixXd>(M).rank();
  };
  int rank = rank_of(gen);
  bool grew = true;
  while (rank < dd && grew) {
    grew = false;
    const size_t sz = gen.size();
    for (size_t a = 0; a < sz; ++a)
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dd);
        e(i) = 1.0;
        Eigen::VectorXd b = bracket(c, e, gen[a]);
        if (b.norm() < 1e-12) continue;
        gen.push_back(b);
        const int r2 = rank_of(gen);
        if (r2 > rank) {
          rank = r2;
          grew = true;
        } else {
          gen.pop_back();
        }
      }
  }
  if (rank < dd)
    throw std::invalid_argument(
        "structure constants violate bracket_generating: horizontal fields do not bracket-generate "
        "the full tangent space");
}

GroupModel GroupModel::heisenberg(int nh) {
  if (nh < 1) throw std::invalid_argument("heisenberg requires n >= 1");
  GroupModel g;
  g.kind = ModelKind::heisenberg;
  g.name = "heisenberg(" + std::to_string(nh) + ")";
  g.n = 2 * nh;
  g.m = 1;
  g.coord_dim = 2 * nh + 1;
  g.c = Tensor3(g.d());
  for (int i = 0; i < nh; ++i) {
    g.c(i, nh + i, 2 * nh) = 2.0;   // [X_i, Y_i] = 2 Z
    g.c(nh + i, i, 2 * nh) = -2.0;
  }
  g.validate();
  return g;
}

GroupModel GroupModel::su2_hopf() {
  GroupModel g;
  g.kind = ModelKind::su2_hopf;
  g.name = "su2_hopf";
  g.n = 2;
  g.m = 1;
  g.coord_dim = 4;
  g.c = Tensor3(3);
  // [X,Y] = 2Z, [Y,Z] = 2X, [Z,X] = 2Y
  g.c(0, 1, 2) = 2.0;
  g.c(1, 0, 2) = -2.0;
  g.c(1, 2, 0) = 2.0;
  g.c(2, 1, 0) = -2.0;
  g.c(2, 0, 1) = 2.0;
  g.c(0, 2, 1) = -2.0;
  g.validate();
  return g;
}

GroupModel GroupModel::flat_product(int n, int m) {
  if (n < 1 || m < 1) throw std::invalid_argument("flat_product requires n >= 1 and m >= 1");
  GroupModel g;
  g.kind = ModelKind::flat_product;
  g.name = "flat_product(" + std::to_string(n) + "x" + std::to_string(m) + ")";
  g.n = n;
  g.m = m;
  g.coord_dim = n + m;
  // All brackets vanish; the vertical factor is a flat leaf direction, so the
  // bracket-generating check does not apply to this model.
  g.c = Tensor3(n + m);
  return g;
}

GroupModel GroupModel::custom(int n, int m, const std::vector<std::array<double, 4>>& triples) {
  GroupModel g;
  g.kind = ModelKind::custom;
  g.name = "custom";
  g.n = n;
  g.m = m;
  g.coord_dim = 0;
  if (n < 1 || m < 1) throw std::invalid_argument("custom model requires n >= 1 and m >= 1");
  g.c = Tensor3(n + m);
  for (const auto& t : triples) {
    const int i = static_cast<int>(t[0]) - 1;
    const int j = static_cast<int>(t[1]) - 1;
    const int k = static_cast<int>(t[2]) - 1;
    if (i < 0 || j < 0 || k < 0 || i >= g.d() || j >= g.d() || k >= g.d())
      throw std::invalid_argument("custom model index out of range (indices are 1-based)");
    g.c(i, j, k) = t[3];
    g.c(j, i, k) = -t[3];
  }
  g.validate();
  return g;
}

GroupModel GroupModel::from_json(const nlohmann::json& j) {
  const std::string name = j.value("name", "");
  if (name == "heisenberg") return heisenberg(j.value("n", 1));
  if (name == "su2_hopf") return su2_hopf();
  if (name == "flat_product") return flat_product(j.value("n", 2), j.value("m", 1));
  if (name == "custom") {
    if (!j.contains("n") || !j.contains("m") || !j.contains("c"))
      throw std::invalid_argument("custom model requires fields n, m, c");
    std::vector<std::array<double, 4>> triples;
    for (const auto& row : j.at("c")) {
      if (!row.is_array() || row.size() != 4)
        throw std::invalid_argument("custom model c entries must be [i, j, k, value]");
      triples.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                         row[3].get<double>()});
    }
    return custom(j.at("n").get<int>(), j.at("m").get<int>(), triples);
  }
  throw std::invalid_argument("unknown model name: " + name);
}

}  // namespace foliated
