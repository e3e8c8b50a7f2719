#pragma once

#include <Eigen/Dense>
#include <vector>

namespace foliated {

// Dense rank-3 / rank-4 arrays over a frame of dimension d (d <= 5 for the
// built-in models, so no sparsity games).  Index convention throughout:
//   c(i,j,k)      [e_i, e_j] = sum_k c(i,j,k) e_k
//   gamma(i,j,k)  nabla_{e_i} e_j = sum_k gamma(i,j,k) e_k
//   R(i,j,k,l)    R(e_i,e_j) e_k = sum_l R(i,j,k,l) e_l
class Tensor3 {
public:
  Tensor3() = default;
  explicit Tensor3(int d) : d_(d), v_(static_cast<size_t>(d) * d * d, 0.0) {}
  double& operator()(int i, int j, int k) { return v_[(static_cast<size_t>(i) * d_ + j) * d_ + k]; }
  double operator()(int i, int j, int k) const { return v_[(static_cast<size_t>(i) * d_ + j) * d_ + k]; }
  int dim() const { return d_; }
  double max_abs() const {
    double m = 0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  bool is_zero(double tol = 0.0) const { return max_abs() <= tol; }
  Tensor3& operator+=(const Tensor3& o) {
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  Tensor3 operator*(double s) const {
    Tensor3 r = *this;
    for (double& x : r.v_) x *= s;
    return r;
  }

private:
  int d_ = 0;
  std::vector<double> v_;
};

class Tensor4 {
public:
  Tensor4() = default;
  explicit Tensor4(int d) : d_(d), v_(static_cast<size_t>(d) * d * d * d, 0.0) {}
  double& operator()(int i, int j, int k, int l) {
    return v_[((static_cast<size_t>(i) * d_ + j) * d_ + k) * d_ + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return v_[((static_cast<size_t>(i) * d_ + j) * d_ + k) * d_ + l];
  }
  int dim() const { return d_; }
  double max_abs() const {
    double m = 0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  bool is_zero(double tol = 0.0) const { return max_abs() <= tol; }

private:
  int d_ = 0;
  std::vector<double> v_;
};

// Connection matrix in direction w: C(w)(k,b) = sum_a w(a) gamma(a,b,k).
// A field with components v parallel along velocity w satisfies dv = -C(w) v.
inline Eigen::MatrixXd connection_matrix(const Tensor3& gamma, const Eigen::VectorXd& w) {
  const int d = gamma.dim();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(d, d);
  for (int a = 0; a < d; ++a) {
    if (w(a) == 0.0) continue;
    for (int b = 0; b < d; ++b)
      for (int k = 0; k < d; ++k) C(k, b) += w(a) * gamma(a, b, k);
  }
  return C;
}

// Lie bracket of algebra vectors from structure constants.
inline Eigen::VectorXd bracket(const Tensor3& c, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const int d = c.dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    if (u(i) == 0.0) continue;
    for (int j = 0; j < d; ++j) {
      if (v(j) == 0.0) continue;
      for (int k = 0; k < d; ++k) out(k) += u(i) * v(j) * c(i, j, k);
    }
  }
  return out;
}

}  // namespace foliated
