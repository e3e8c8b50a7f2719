#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace foliated {

// Multivariate polynomial in chart coordinates, used to push test functions
// through frame fields exactly (frame fields of the built-in models have
// polynomial coefficient functions, so frame derivatives stay polynomial).
class Polynomial {
public:
  Polynomial() : nvars_(0) {}
  explicit Polynomial(int nvars) : nvars_(nvars) {}

  static Polynomial constant(int nvars, double c) {
    Polynomial p(nvars);
    if (c != 0.0) p.terms_[std::vector<int>(nvars, 0)] = c;
    return p;
  }
  static Polynomial var(int nvars, int i, double coeff = 1.0) {
    Polynomial p(nvars);
    std::vector<int> e(nvars, 0);
    e[i] = 1;
    if (coeff != 0.0) p.terms_[e] = coeff;
    return p;
  }

  int nvars() const { return nvars_; }

  Polynomial& operator+=(const Polynomial& o) {
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  Polynomial operator+(const Polynomial& o) const {
    Polynomial r = *this;
    r += o;
    return r;
  }
  Polynomial operator-(const Polynomial& o) const { return *this + o * -1.0; }
  Polynomial operator*(double s) const {
    Polynomial r(nvars_);
    if (s != 0.0)
      for (const auto& [e, c] : terms_) r.terms_[e] = c * s;
    return r;
  }
  Polynomial operator*(const Polynomial& o) const {
    Polynomial r(nvars_);
    for (const auto& [e1, c1] : terms_)
      for (const auto& [e2, c2] : o.terms_) {
        std::vector<int> e(nvars_);
        for (int i = 0; i < nvars_; ++i) e[i] = e1[i] + e2[i];
        r.add_term(e, c1 * c2);
      }
    return r;
  }

  Polynomial derivative(int i) const {
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) {
      if (e[i] == 0) continue;
      std::vector<int> d = e;
      d[i] -= 1;
      r.add_term(d, c * e[i]);
    }
    return r;
  }

  double eval(const Eigen::VectorXd& x) const {
    double s = 0;
    for (const auto& [e, c] : terms_) {
      double t = c;
      for (int i = 0; i < nvars_; ++i)
        for (int k = 0; k < e[i]; ++k) t *= x(i);
      s += t;
    }
    return s;
  }

private:
  int nvars_;
  std::map<std::vector<int>, double> terms_;

  void add_term(const std::vector<int>& e, double c) {
    if (c == 0.0) return;
    auto it = terms_.find(e);
    if (it == terms_.end())
      terms_[e] = c;
    else {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }
};

// First-order differential operator with polynomial coefficients,
// D f = sum_c coeff[c] * df/dx_c.  Each frame field of a built-in model is one
// of these in its chart, so repeated application gives exact frame derivatives.
struct PolyVectorField {
  std::vector<Polynomial> coeff;  // one per chart coordinate

  Polynomial apply(const Polynomial& f) const {
    Polynomial r(f.nvars());
    for (size_t c = 0; c < coeff.size(); ++c) r += coeff[c] * f.derivative(static_cast<int>(c));
    return r;
  }
};

}  // namespace foliated
