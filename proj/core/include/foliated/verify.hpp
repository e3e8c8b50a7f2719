#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "foliated/path_calculus.hpp"

namespace foliated {

struct McParams {
  long n_paths = 100000;
  double dt = 1.0 / 512;
  uint64_t seed = 42;
  double bias_c = 0.5;  // bias budget constant: budget = bias_c * dt
  int threads = 0;      // 0: FOLIATED_PATHS_THREADS env or hardware concurrency
};

struct VerificationReport {
  std::string identity_name;
  std::string model;
  double estimate = 0;
  double stderr_ = 0;
  long n_paths = 0;
  double dt = 0;
  double epsilon = -1;  // -1: not applicable
  double bias_c = 0;
  double bias_budget = 0;
  bool verdict = false;
  double runtime_seconds = 0;
  uint64_t seed = 0;
  // auxiliary named metrics (slopes, residuals, secondary estimates)
  std::map<std::string, double> extra;

  nlohmann::ordered_json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

// Numerically stable streaming moments with order-independent merge.
struct Accum {
  long count = 0;
  double mean = 0, m2 = 0;
  void add(double x);
  static Accum merge(const Accum& a, const Accum& b);
  double std_error() const;
};

// Runs fn(path_index) -> K statistics over n_paths paths, reduced blockwise in
// fixed block order so the result is independent of the thread count.
std::vector<Accum> run_paths(long n_paths, int K, int threads,
                             const std::function<void(uint64_t, std::vector<double>&)>& fn);
int resolve_threads(int requested);

// Simulation + transports for one path of the given model (exact sampler on
// heisenberg, geometric elsewhere), with the damped transport at eps if
// eps > 0.  Shared entry point for all statistical identities.
PathSample verify_path(const Geometry& geom, const Eigen::VectorXd& x0, const McParams& mc,
                       uint64_t path_index, double eps);

VerificationReport verify_ibp_damped(const Geometry& geom, const CylinderFunction& F,
                                     const CameronMartinPath& gamma, double eps,
                                     const McParams& mc);
VerificationReport verify_ibp_directional(const Geometry& geom, const CylinderFunction& F,
                                          const CameronMartinPath& h, double eps,
                                          const McParams& mc);
VerificationReport verify_adjoint_operator(const Geometry& geom, const CylinderFunction& F,
                                           const CylinderFunction& G, const CameronMartinPath& h,
                                           const McParams& mc);

// All damped/directional/adjoint null statistics for the cartesian product of
// Fs and hs in one path sweep (adjoint pairs consecutive Fs cyclically).
std::vector<VerificationReport> verify_ibp_bundle(const Geometry& geom,
                                                  const std::vector<CylinderFunction>& Fs,
                                                  const std::vector<CameronMartinPath>& hs,
                                                  double eps, const McParams& mc);

VerificationReport verify_gradient_representation(const Geometry& geom, const CylinderFunction& f,
                                                  const Eigen::VectorXd& x0, double s, double eps,
                                                  const McParams& mc, double fd_step = 1e-3);

VerificationReport verify_girsanov_density(const Geometry& geom, const CameronMartinPath& h,
                                           double t, const CylinderFunction& F, const DChoice& D,
                                           const McParams& mc);

struct OrthoSpec {
  enum class Kind { zero, constant_skew, j_conjugation } kind = Kind::zero;
  Eigen::MatrixXd skew;        // for constant_skew
  CameronMartinPath h;         // tangent direction for j_conjugation
};

VerificationReport verify_orthogonal_invariance(const Geometry& geom, const CylinderFunction& f,
                                                const OrthoSpec& O, double eps,
                                                const McParams& mc);

VerificationReport verify_heisenberg_flow(int nh, const CameronMartinPath& h, double t,
                                          const McParams& mc);

VerificationReport verify_projection_driver(int nh, const CylinderFunction& F_base,
                                            const CameronMartinPath& h, const McParams& mc);

// Pointwise Weitzenboeck residual over the built-in analytic test functions.
VerificationReport verify_weitzenbock(const GroupModel& model, double eps);

// Built-in experiment ingredients per model.
std::vector<CylinderFunction> default_cylinder_functions(const GroupModel& model);
std::vector<CameronMartinPath> default_cm_paths(int n);
std::vector<std::pair<std::string, ScalarField>> builtin_scalar_fields(const GroupModel& model);

}  // namespace foliated
