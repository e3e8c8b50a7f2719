#include "foliated/verify.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace foliated {

namespace {

double wall_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

int steps_for(double dt) {
  const int N = static_cast<int>(std::lround(1.0 / dt));
  if (N < 1 || std::abs(N * dt - 1.0) > 1e-12)
    throw std::invalid_argument("dt must divide the unit time horizon");
  return N;
}

std::string num(double x) { return nlohmann::json(x).dump(); }

Eigen::VectorXd embed_h(const Eigen::VectorXd& hv, int d) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  w.head(hv.size()) = hv;
  return w;
}

VerificationReport stat_report(const std::string& name, const std::string& model_name,
                               const Accum& a, const McParams& mc, double eps) {
  VerificationReport r;
  r.identity_name = name;
  r.model = model_name;
  r.estimate = a.mean;
  r.stderr_ = a.std_error();
  r.n_paths = a.count;
  r.dt = mc.dt;
  r.epsilon = eps;
  r.bias_c = mc.bias_c;
  r.bias_budget = mc.bias_c * mc.dt;
  r.seed = mc.seed;
  r.verdict = std::abs(r.estimate) <= 3.0 * r.stderr_ + r.bias_budget;
  return r;
}

}  // namespace

nlohmann::ordered_json VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["identity"] = identity_name;
  j["model"] = model;
  j["n_paths"] = n_paths;
  j["dt"] = dt;
  j["epsilon"] = epsilon;
  j["estimate"] = estimate;
  j["stderr"] = stderr_;
  j["bias_c"] = bias_c;
  j["bias_budget"] = bias_budget;
  j["verdict"] = verdict ? "pass" : "fail";
  j["seed"] = seed;
  j["runtime_seconds"] = runtime_seconds;
  nlohmann::ordered_json ex = nlohmann::ordered_json::object();
  for (const auto& [k, v] : extra) ex[k] = v;
  j["extra"] = ex;
  return j;
}

std::string VerificationReport::csv_header() {
  return "identity,model,n_paths,dt,epsilon,estimate,stderr,verdict,runtime_seconds,seed";
}

std::string VerificationReport::csv_row() const {
  return identity_name + "," + model + "," + std::to_string(n_paths) + "," + num(dt) + "," +
         num(epsilon) + "," + num(estimate) + "," + num(stderr_) + "," +
         (verdict ? "pass" : "fail") + "," + num(runtime_seconds) + "," + std::to_string(seed);
}

void Accum::add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

Accum Accum::merge(const Accum& a, const Accum& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  Accum r;
  r.count = a.count + b.count;
  const double delta = b.mean - a.mean;
  r.mean = a.mean + delta * static_cast<double>(b.count) / static_cast<double>(r.count);
  r.m2 = a.m2 + b.m2 +
         delta * delta * static_cast<double>(a.count) * static_cast<double>(b.count) /
             static_cast<double>(r.count);
  return r;
}

double Accum::std_error() const {
  if (count < 2) return 0;
  return std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count));
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FOLIATED_PATHS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

std::vector<Accum> run_paths(long n_paths, int K, int threads,
                             const std::function<void(uint64_t, std::vector<double>&)>& fn) {
  if (n_paths < 1) throw std::invalid_argument("run_paths requires n_paths >= 1");
  // Fixed reduction blocks: each block's moments are accumulated in path order
  // and blocks are merged in index order, so the result is bitwise independent
  // of the number of worker threads.
  const long block = 1024;
  const long nblocks = (n_paths + block - 1) / block;
  std::vector<std::vector<Accum>> per_block(nblocks, std::vector<Accum>(K));
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&]() {
    std::vector<double> stats(K, 0.0);
    try {
      for (;;) {
        const long b = next.fetch_add(1);
        if (b >= nblocks || failed.load()) break;
        auto& acc = per_block[b];
        const long lo = b * block, hi = std::min(n_paths, lo + block);
        for (long p = lo; p < hi; ++p) {
          fn(static_cast<uint64_t>(p), stats);
          for (int k = 0; k < K; ++k) acc[k].add(stats[k]);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
      failed.store(true);
    }
  };

  const int T = static_cast<int>(std::min<long>(resolve_threads(threads), nblocks));
  std::vector<std::thread> pool;
  for (int t = 1; t < T; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  std::vector<Accum> out(K);
  for (long b = 0; b < nblocks; ++b)
    for (int k = 0; k < K; ++k) out[k] = Accum::merge(out[k], per_block[b][k]);
  return out;
}

PathSample verify_path(const Geometry& geom, const Eigen::VectorXd& x0, const McParams& mc,
                       uint64_t path_index, double eps) {
  const int N = steps_for(mc.dt);
  const Scheme scheme =
      geom.model.kind == ModelKind::heisenberg ? Scheme::heisenberg_exact : Scheme::geometric;
  PathSample path =
      simulate_horizontal_bm(geom.model, geom.bott, x0, N, mc.dt, mc.seed, path_index, scheme);
  bott_transport(path, geom.bott);
  if (eps > 0) damped_transport(path, geom, eps);
  return path;
}

std::vector<VerificationReport> verify_ibp_bundle(const Geometry& geom,
                                                  const std::vector<CylinderFunction>& Fs,
                                                  const std::vector<CameronMartinPath>& hs,
                                                  double eps, const McParams& mc) {
  const double t0 = wall_seconds();
  const GroupModel& model = geom.model;
  const int n = model.n, d = model.d();
  const int N = steps_for(mc.dt);
  const int nF = static_cast<int>(Fs.size()), nH = static_cast<int>(hs.size());
  if (nF == 0 || nH == 0) throw std::invalid_argument("verify_ibp_bundle requires Fs and hs");
  for (const auto& h : hs)
    if (h.n != n) throw std::invalid_argument("Cameron-Martin path dimension must equal n");

  std::vector<std::pair<int, int>> pairs;
  if (nF >= 2)
    for (int a = 0; a < (nF == 2 ? 1 : nF); ++a) pairs.emplace_back(a, (a + 1) % nF);

  // statistic layout: [F][h] directional, then [F][h] damped, then [pair][h]
  const int off_dir = 0;
  const int off_damp = nF * nH;
  const int off_adj = 2 * nF * nH;
  const int K = 2 * nF * nH + static_cast<int>(pairs.size()) * nH;
  const DChoice bott = DChoice::bott();
  const Eigen::VectorXd x0 = model.identity();

  auto per_path = [&](uint64_t idx, std::vector<double>& out) {
    PathSample path = verify_path(geom, x0, mc, idx, eps);

    std::vector<double> Fv(nF);
    std::vector<std::vector<int>> Fidx(nF);
    std::vector<std::vector<Eigen::VectorXd>> Fdf(nF);
    for (int a = 0; a < nF; ++a) {
      Fv[a] = eval_cylinder(Fs[a], path, model);
      Fidx[a] = partition_indices(Fs[a], N, mc.dt);
      Fdf[a] = frame_differentials(Fs[a], path, model);
    }

    const std::vector<TangentProcess> vs = make_tangent_processes(path, geom, hs);
    for (int hi = 0; hi < nH; ++hi) {
      const CameronMartinPath& h = hs[hi];
      const TangentProcess& v = vs[hi];
      const PDecomposition pqr = p_decomposition(path, geom, h, v, bott);

      double div = 0, div_plain = 0;
      std::vector<Eigen::VectorXd> b(N);  // tau^{-T} Theta h' per left endpoint
      for (int k = 0; k < N; ++k) {
        const Eigen::VectorXd hp = h.deriv(k * mc.dt);
        const Eigen::VectorXd db = path.noise.row(k).transpose();
        div += pqr.r.row(k).dot(db);
        div_plain += hp.dot(db);
        b[k] = path.tau_eps_inv_T_apply(k, path.theta_bott[k] * embed_h(hp, d));
      }

      std::vector<double> DvF(nF);
      for (int a = 0; a < nF; ++a) {
        DvF[a] = directional_derivative(Fs[a], path, model, v);
        out[off_dir + a * nH + hi] = DvF[a] - Fv[a] * div;

        // int <Dtilde_s F, hat Theta_s h'(s)> ds via suffix sums of tau d_i f
        Eigen::VectorXd suffix = Eigen::VectorXd::Zero(d);
        int i = static_cast<int>(Fidx[a].size()) - 1;
        double integral = 0;
        for (int k = N - 1; k >= 0; --k) {
          while (i >= 0 && Fidx[a][i] > k) {
            suffix += path.tau_eps(Fidx[a][i]) * Fdf[a][i];
            --i;
          }
          integral += mc.dt * suffix.dot(b[k]);
        }
        out[off_damp + a * nH + hi] = integral - Fv[a] * div_plain;
      }
      for (size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto [a, c] = pairs[pi];
        out[off_adj + static_cast<int>(pi) * nH + hi] =
            Fv[a] * DvF[c] + Fv[c] * DvF[a] - Fv[a] * Fv[c] * div;
      }
    }
  };

  const std::vector<Accum> acc = run_paths(mc.n_paths, K, mc.threads, per_path);
  const double elapsed = wall_seconds() - t0;

  std::vector<VerificationReport> reports;
  auto emit = [&](const std::string& op, const std::string& fname, const std::string& hname,
                  int slot, double ep) {
    VerificationReport r = stat_report(op + "[" + fname + "|" + hname + "]", model.name, acc[slot],
                                       mc, ep);
    r.runtime_seconds = elapsed;
    reports.push_back(std::move(r));
  };
  for (int a = 0; a < nF; ++a)
    for (int hi = 0; hi < nH; ++hi)
      emit("ibp_directional", Fs[a].name, hs[hi].name, off_dir + a * nH + hi, -1);
  for (int a = 0; a < nF; ++a)
    for (int hi = 0; hi < nH; ++hi)
      emit("ibp_damped", Fs[a].name, hs[hi].name, off_damp + a * nH + hi, eps);
  for (size_t pi = 0; pi < pairs.size(); ++pi)
    for (int hi = 0; hi < nH; ++hi)
      emit("adjoint_operator", Fs[pairs[pi].first].name + "," + Fs[pairs[pi].second].name,
           hs[hi].name, off_adj + static_cast<int>(pi) * nH + hi, -1);
  return reports;
}

VerificationReport verify_ibp_damped(const Geometry& geom, const CylinderFunction& F,
                                     const CameronMartinPath& gamma, double eps,
                                     const McParams& mc) {
  for (auto& r : verify_ibp_bundle(geom, {F}, {gamma}, eps, mc))
    if (r.identity_name.rfind("ibp_damped", 0) == 0) return r;
  throw std::logic_error("ibp_damped report missing");
}

VerificationReport verify_ibp_directional(const Geometry& geom, const CylinderFunction& F,
                                          const CameronMartinPath& h, double eps,
                                          const McParams& mc) {
  for (auto& r : verify_ibp_bundle(geom, {F}, {h}, eps, mc))
    if (r.identity_name.rfind("ibp_directional", 0) == 0) return r;
  throw std::logic_error("ibp_directional report missing");
}

VerificationReport verify_adjoint_operator(const Geometry& geom, const CylinderFunction& F,
                                           const CylinderFunction& G, const CameronMartinPath& h,
                                           const McParams& mc) {
  for (auto& r : verify_ibp_bundle(geom, {F, G}, {h}, 1.0, mc))
    if (r.identity_name.rfind("adjoint_operator", 0) == 0) return r;
  throw std::logic_error("adjoint_operator report missing");
}

VerificationReport verify_gradient_representation(const Geometry& geom, const CylinderFunction& f,
                                                  const Eigen::VectorXd& x0, double s, double eps,
                                                  const McParams& mc, double fd_step) {
  const double t0 = wall_seconds();
  const GroupModel& model = geom.model;
  const int d = model.d();
  const int N = steps_for(mc.dt);
  if (f.times.size() != 1) throw std::invalid_argument("gradient representation needs a one-point function");
  const int s_idx = static_cast<int>(std::lround(s / mc.dt));
  if (s_idx < 1 || s_idx > N || std::abs(s_idx * mc.dt - s) > mc.dt / 2)
    throw std::invalid_argument("evaluation time must land on the grid");
  if (std::abs(f.times[0] - s) > 1e-12)
    throw std::invalid_argument("function time must equal the evaluation time");
  if (eps <= 0) throw std::invalid_argument("gradient representation requires eps > 0");

  // Perturbed start points x0 exp(+-delta e_a); common noise pairs each
  // finite-difference quotient with the transported-gradient estimate.
  std::vector<Eigen::VectorXd> xplus(d), xminus(d);
  for (int a = 0; a < d; ++a) {
    Eigen::VectorXd ea = Eigen::VectorXd::Zero(d);
    ea(a) = fd_step;
    xplus[a] = model.product(x0, model.exp_alg(ea));
    xminus[a] = model.product(x0, model.exp_alg(-ea));
    model.normalize(xplus[a]);
    model.normalize(xminus[a]);
  }
  const Eigen::VectorXd x0inv = model.inverse(x0);

  // stats: d difference components, then d transported-gradient components
  const int K = 2 * d;
  auto per_path = [&](uint64_t idx, std::vector<double>& out) {
    PathSample path = verify_path(geom, x0, mc, idx, eps);
    const std::vector<Eigen::VectorXd> df = frame_differentials(f, path, model);
    const Eigen::VectorXd rhs = path.tau_eps(s_idx) * df[0];
    // translate the endpoint: a left-invariant SDE started at x' follows
    // x' x0^{-1} W pathwise under the same noise
    const Eigen::VectorXd pid = model.product(x0inv, path.states[s_idx].point);
    for (int a = 0; a < d; ++a) {
      Eigen::VectorXd pp = model.product(xplus[a], pid);
      Eigen::VectorXd pm = model.product(xminus[a], pid);
      model.normalize(pp);
      model.normalize(pm);
      const double g = (f.f({pp}) - f.f({pm})) / (2 * fd_step);
      out[a] = g - rhs(a);
      out[d + a] = rhs(a);
    }
  };

  const std::vector<Accum> acc = run_paths(mc.n_paths, K, mc.threads, per_path);
  McParams mcb = mc;
  VerificationReport r = stat_report("gradient_representation[" + f.name + "]", model.name, acc[0],
                                     mcb, eps);
  bool ok = true;
  double worst = 0, worst_se = 0;
  for (int a = 0; a < d; ++a) {
    const double m = acc[a].mean, se = acc[a].std_error();
    if (std::abs(m) > std::abs(worst)) {
      worst = m;
      worst_se = se;
    }
    ok = ok && std::abs(m) <= 3.0 * se + r.bias_budget;
    r.extra["delta_" + std::to_string(a + 1)] = m;
    r.extra["stderr_" + std::to_string(a + 1)] = se;
    r.extra["grad_" + std::to_string(a + 1)] = acc[d + a].mean;
    r.extra["grad_stderr_" + std::to_string(a + 1)] = acc[d + a].std_error();
  }
  r.estimate = worst;
  r.stderr_ = worst_se;
  r.verdict = ok;
  r.runtime_seconds = wall_seconds() - t0;
  return r;
}

VerificationReport verify_girsanov_density(const Geometry& geom, const CameronMartinPath& h,
                                           double t, const CylinderFunction& F, const DChoice& D,
                                           const McParams& mc) {
  const double t0 = wall_seconds();
  const GroupModel& model = geom.model;
  const int N = steps_for(mc.dt);
  const Eigen::VectorXd x0 = model.identity();
  const Scheme scheme =
      model.kind == ModelKind::heisenberg ? Scheme::heisenberg_exact : Scheme::geometric;
  const bool cm_case = model.kind == ModelKind::heisenberg && !D.adjoint;

  // stats: G - 1, F(rho omega) - F(omega) G, G, |G - Cameron-Martin density|
  auto per_path = [&](uint64_t idx, std::vector<double>& out) {
    PathSample path = verify_path(geom, x0, mc, idx, -1);
    const TangentProcess v = make_tangent_process(path, geom, h);
    const PDecomposition pqr = p_decomposition(path, geom, h, v, D);
    const double G = girsanov_density(path, pqr, t);

    Eigen::MatrixXd rho(N, path.n);
    for (int k = 0; k < N; ++k)
      rho.row(k) = (matrix_exp(t * pqr.q[k]) * path.noise.row(k).transpose() +
                    t * pqr.r.row(k).transpose() * mc.dt)
                       .transpose();
    PathSample moved = drive_path(model, geom.bott, x0, rho, mc.dt, scheme);
    const double Fv = eval_cylinder(F, path, model);
    const double Fm = eval_cylinder(F, moved, model);

    out[0] = G - 1.0;
    out[1] = Fm - Fv * G;
    out[2] = G;
    if (cm_case) {
      // flat rotation, r = h': the density collapses to Cameron-Martin
      double ito = 0;
      for (int k = 0; k < N; ++k) ito += h.deriv(k * mc.dt).dot(path.noise.row(k));
      double quad = 0;
      for (int k = 0; k < N; ++k) quad += h.deriv(k * mc.dt).squaredNorm() * mc.dt;
      out[3] = std::abs(G - std::exp(t * ito - 0.5 * t * t * quad));
    } else {
      out[3] = 0;
    }
  };

  const std::vector<Accum> acc = run_paths(mc.n_paths, 4, mc.threads, per_path);
  VerificationReport r = stat_report("girsanov_density[" + F.name + "|" + h.name + "]", model.name,
                                     acc[0], mc, D.adjoint ? D.eps : -1);
  const double m2 = acc[1].mean, se2 = acc[1].std_error();
  r.verdict = r.verdict && std::abs(m2) <= 3.0 * se2 + r.bias_budget;
  r.extra["mean_density"] = acc[2].mean;
  r.extra["change_of_variables_estimate"] = m2;
  r.extra["change_of_variables_stderr"] = se2;
  r.extra["flow_time"] = t;
  if (cm_case) r.extra["cameron_martin_abs_dev_mean"] = acc[3].mean;
  r.runtime_seconds = wall_seconds() - t0;
  return r;
}

VerificationReport verify_orthogonal_invariance(const Geometry& geom, const CylinderFunction& f,
                                                const OrthoSpec& O, double eps,
                                                const McParams& mc) {
  const double t0 = wall_seconds();
  const GroupModel& model = geom.model;
  const int n = model.n, d = model.d();
  const int N = steps_for(mc.dt);
  if (eps <= 0) throw std::invalid_argument("orthogonal invariance requires eps > 0");
  if (f.times.size() != 1) throw std::invalid_argument("orthogonal invariance needs a one-point function");
  if (O.kind == OrthoSpec::Kind::constant_skew) {
    if (O.skew.rows() != n || O.skew.cols() != n)
      throw std::invalid_argument("skew matrix must be n x n");
    if ((O.skew + O.skew.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("matrix must be skew-symmetric");
  }
  const Tensor3 Teps = epsilon_connection(model, eps).torsion;
  const Eigen::VectorXd x0 = model.identity();

  auto per_path = [&](uint64_t idx, std::vector<double>& out) {
    PathSample path = verify_path(geom, x0, mc, idx, eps);
    const std::vector<int> fidx = partition_indices(f, N, mc.dt);
    const std::vector<Eigen::VectorXd> df = frame_differentials(f, path, model);
    const Eigen::VectorXd lhs = path.tau_eps(fidx[0]) * df[0];

    TangentProcess v;
    if (O.kind == OrthoSpec::Kind::j_conjugation) v = make_tangent_process(path, geom, O.h);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < fidx[0]; ++k) {
      const Eigen::MatrixXd& Th = path.theta_bott[k];
      Eigen::MatrixXd Ok;
      if (O.kind == OrthoSpec::Kind::zero) {
        out[0] = 0;
        return;
      } else if (O.kind == OrthoSpec::Kind::constant_skew) {
        Ok = O.skew;
      } else {
        // (1/eps) [Theta^-1 J_{Theta v} Theta]_HH, skew on the horizontal space
        const Eigen::VectorXd X = Th * v.v.row(k).transpose();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
        for (int z = n; z < d; ++z) {
          if (X(z) == 0.0) continue;
          for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y) A(y, x) += X(z) * geom.J(z, x, y);
        }
        Ok = (Th.transpose() * A * Th).topLeftCorner(n, n) / eps;
      }

      Eigen::MatrixXd Ofull = Eigen::MatrixXd::Zero(d, d);
      Ofull.topLeftCorner(n, n) = Ok;
      const Eigen::MatrixXd AW = Th * Ofull * Th.transpose();
      Eigen::VectorXd tvec = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
          if (AW(j, i) == 0.0) continue;
          for (int l = 0; l < d; ++l) tvec(l) += AW(j, i) * Teps(i, j, l);
        }

      const Eigen::VectorXd integrand =
          Th * embed_h(Eigen::VectorXd(Ok * path.noise.row(k).transpose()), d) - 0.5 * tvec * mc.dt;
      acc += path.tau_eps_inv_T_apply(k, integrand);
    }
    out[0] = lhs.dot(acc);
  };

  const std::vector<Accum> acc = run_paths(mc.n_paths, 1, mc.threads, per_path);
  std::string tag = O.kind == OrthoSpec::Kind::zero
                        ? "zero"
                        : (O.kind == OrthoSpec::Kind::constant_skew ? "constant_skew"
                                                                    : "j_conjugation");
  VerificationReport r =
      stat_report("orthogonal_invariance[" + f.name + "|" + tag + "]", model.name, acc[0], mc, eps);
  r.runtime_seconds = wall_seconds() - t0;
  return r;
}

VerificationReport verify_heisenberg_flow(int nh, const CameronMartinPath& h, double t,
                                          const McParams& mc) {
  const double t0 = wall_seconds();
  const GroupModel model = GroupModel::heisenberg(nh);
  const Geometry geom = Geometry::build(model);
  const int n = model.n;
  const int N = steps_for(mc.dt);
  if (h.n != n) throw std::invalid_argument("Cameron-Martin path dimension must equal n");
  if (t <= 0) throw std::invalid_argument("flow time must be positive");

  // h splits as (h1, h2); the flow shifts the driver by t h and the generator
  // has vertical part <B, h2> - <beta, h1> + 2 int (h1 dbeta - h2 dB)
  auto h1 = [&](double s) { return Eigen::VectorXd(h.value(s).head(nh)); };
  auto h2 = [&](double s) { return Eigen::VectorXd(h.value(s).tail(nh)); };

  Eigen::MatrixXd dh(N, n);  // increments of h over each step
  for (int k = 0; k < N; ++k)
    dh.row(k) = (h.value((k + 1) * mc.dt) - h.value(k * mc.dt)).transpose();

  const std::vector<double> taus = {1e-1, 1e-2, 1e-3};
  // stats: fd errors at the three flow times, projection deviation, tangent
  // process deviation
  auto per_path = [&](uint64_t idx, std::vector<double>& out) {
    PathSample path = verify_path(geom, model.identity(), mc, idx, -1);

    // generator along the path: exact t-derivative of the discrete flow
    Eigen::MatrixXd gen(N + 1, model.coord_dim);
    gen.row(0).setZero();
    double levy = 0;  // 2 int (h1 dbeta - h2 dB), endpoint-average rule
    for (int k = 0; k < N; ++k) {
      const double s1 = (k + 1) * mc.dt;
      const Eigen::VectorXd h1m = 0.5 * (h1(k * mc.dt) + h1(s1));
      const Eigen::VectorXd h2m = 0.5 * (h2(k * mc.dt) + h2(s1));
      const Eigen::VectorXd dB = path.noise.row(k).head(nh).transpose();
      const Eigen::VectorXd dbeta = path.noise.row(k).tail(nh).transpose();
      levy += 2.0 * (h1m.dot(dbeta) - h2m.dot(dB));
      const Eigen::VectorXd& p = path.states[k + 1].point;
      gen.row(k + 1).head(nh) = h1(s1).transpose();
      gen.row(k + 1).segment(nh, nh) = h2(s1).transpose();
      gen(k + 1, 2 * nh) =
          p.head(nh).dot(h2(s1)) - p.segment(nh, nh).dot(h1(s1)) + levy;
    }

    for (size_t j = 0; j < taus.size(); ++j) {
      const double tau = taus[j];
      const PathSample moved = drive_path(model, geom.bott, model.identity(),
                                          path.noise + tau * dh, mc.dt, Scheme::heisenberg_exact);
      double err = 0;
      for (int k = 1; k <= N; ++k) {
        const Eigen::VectorXd fd =
            (moved.states[k].point - path.states[k].point) / tau - gen.row(k).transpose();
        err = std::max(err, fd.cwiseAbs().maxCoeff());
      }
      out[j] = err;
    }

    // projection commutes with the flow at the requested flow time
    {
      const PathSample moved = drive_path(model, geom.bott, model.identity(),
                                          path.noise + t * dh, mc.dt, Scheme::heisenberg_exact);
      double proj = 0;
      for (int k = 1; k <= N; ++k) {
        const Eigen::VectorXd base = path.states[k].point.head(n) + t * h.value(k * mc.dt);
        proj = std::max(proj, (moved.states[k].point.head(n) - base).cwiseAbs().maxCoeff());
      }
      out[3] = proj;
    }

    // vertical part of the generic tangent process against the explicit one,
    // midpoint rule on both sides
    const TangentProcess v = make_tangent_process(path, geom, h);
    double dev = 0, levy_mid = 0;
    for (int k = 0; k < N; ++k) {
      const double sm = (k + 0.5) * mc.dt;
      levy_mid += 2.0 * (h1(sm).dot(path.noise.row(k).tail(nh)) -
                         h2(sm).dot(path.noise.row(k).head(nh)));
      dev = std::max(dev, std::abs(v.v(k + 1, n) - levy_mid));
    }
    out[4] = dev;
  };

  const std::vector<Accum> acc = run_paths(mc.n_paths, 5, mc.threads, per_path);
  VerificationReport r;
  r.identity_name = "heisenberg_flow[" + h.name + "]";
  r.model = model.name;
  r.n_paths = acc[0].count;
  r.dt = mc.dt;
  r.seed = mc.seed;
  r.bias_c = mc.bias_c;
  r.bias_budget = mc.bias_c * mc.dt;
  const double slope = std::log10(acc[0].mean / acc[2].mean) / 2.0;
  r.estimate = acc[4].mean;
  r.stderr_ = acc[4].std_error();
  r.extra["fd_slope"] = slope;
  r.extra["fd_err_t"] = acc[0].mean;
  r.extra["fd_err_t2"] = acc[1].mean;
  r.extra["fd_err_t4"] = acc[2].mean;
  r.extra["projection_dev"] = acc[3].mean;
  r.extra["tangent_dev"] = acc[4].mean;
  r.verdict = slope >= 0.8 && slope <= 1.2 && acc[3].mean <= 1e-6 && acc[4].mean <= 1e-6;
  r.runtime_seconds = wall_seconds() - t0;
  return r;
}

VerificationReport verify_projection_driver(int nh, const CylinderFunction& F_base,
                                            const CameronMartinPath& h, const McParams& mc) {
  const double t0 = wall_seconds();
  const GroupModel model = GroupModel::heisenberg(nh);
  const Geometry geom = Geometry::build(model);
  const int n = model.n;
  const int N = steps_for(mc.dt);
  if (h.n != n) throw std::invalid_argument("Cameron-Martin path dimension must equal n");

  // stats: manifold-side null, flat-side null, pathwise projection mismatch
  auto per_path = [&](uint64_t idx, std::vector<double>& out) {
    PathSample path = verify_path(geom, model.identity(), mc, idx, -1);
    const double Fv = eval_cylinder(F_base, path, model);
    const TangentProcess v = make_tangent_process(path, geom, h);
    const double DvF = directional_derivative(F_base, path, model, v);
    double div = 0;
    for (int k = 0; k < N; ++k) div += h.deriv(k * mc.dt).dot(path.noise.row(k));

    // flat side: the horizontal chart coordinates of the path are the driving
    // Brownian motion itself, so the projected functional lives on flat space
    const std::vector<int> idxs = partition_indices(F_base, N, mc.dt);
    std::vector<Eigen::VectorXd> pts;
    for (int k : idxs) pts.push_back(path.states[k].point);
    double Dflat = 0;
    for (size_t i = 0; i < idxs.size(); ++i) {
      const Eigen::VectorXd g = F_base.chart_grad(static_cast<int>(i), pts);
      if (g.tail(model.coord_dim - n).cwiseAbs().maxCoeff() > 0)
        throw std::invalid_argument("projected functional must not depend on the fiber coordinate");
      Dflat += g.head(n).dot(h.value(idxs[i] * mc.dt));
    }

    out[0] = DvF - Fv * div;
    out[1] = Dflat - Fv * div;
    out[2] = std::abs(DvF - Dflat);
  };

  const std::vector<Accum> acc = run_paths(mc.n_paths, 3, mc.threads, per_path);
  VerificationReport r =
      stat_report("projection_driver[" + F_base.name + "|" + h.name + "]", model.name, acc[0], mc,
                  -1);
  r.extra["flat_estimate"] = acc[1].mean;
  r.extra["flat_stderr"] = acc[1].std_error();
  r.extra["pathwise_mismatch_mean"] = acc[2].mean;
  r.verdict = r.verdict &&
              std::abs(acc[1].mean) <= 3.0 * acc[1].std_error() + r.bias_budget &&
              acc[2].mean <= 1e-10;
  r.runtime_seconds = wall_seconds() - t0;
  return r;
}

VerificationReport verify_weitzenbock(const GroupModel& model, double eps) {
  const double t0 = wall_seconds();
  const int d = model.d();
  std::vector<Eigen::VectorXd> points;
  points.push_back(model.identity());
  Eigen::VectorXd a = Eigen::VectorXd::Zero(d), b = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    a(i) = 0.3 / (i + 1);
    b(i) = (i % 2 ? -0.2 : 0.15);
  }
  points.push_back(model.exp_alg(a));
  points.push_back(model.product(model.exp_alg(a), model.exp_alg(b)));

  double worst = 0;
  for (const auto& [fname, f] : builtin_scalar_fields(model))
    for (const auto& x : points) worst = std::max(worst, weitzenbock_residual(model, eps, f, x));

  VerificationReport r;
  r.identity_name = "weitzenbock_residual";
  r.model = model.name;
  r.epsilon = eps;
  r.estimate = worst;
  r.verdict = worst <= 1e-8;
  r.runtime_seconds = wall_seconds() - t0;
  return r;
}

std::vector<CylinderFunction> default_cylinder_functions(const GroupModel& model) {
  int a = 0, b = 1;
  if (model.kind == ModelKind::heisenberg) {
    a = 0;
    b = model.n;  // fiber coordinate
  } else if (model.kind == ModelKind::su2_hopf) {
    a = 1;
    b = 2;
  }
  return {CylinderFunction::coordinate(model, a, 1.0), CylinderFunction::square(model, b, 1.0),
          CylinderFunction::product_two(model, a, 0.5, b, 1.0)};
}

std::vector<CameronMartinPath> default_cm_paths(int n) {
  Eigen::MatrixXd knots(2, n);
  for (int c = 0; c < n; ++c) {
    knots(0, c) = 0.5 / (c + 1);
    knots(1, c) = (c % 2 ? -0.3 : 0.3);
  }
  Eigen::MatrixXd amps(2, n);
  for (int c = 0; c < n; ++c) {
    amps(0, c) = 0.4 / (c + 1);
    amps(1, c) = (c % 2 ? -0.25 : 0.25);
  }
  return {CameronMartinPath::piecewise_linear(knots), CameronMartinPath::trig(amps)};
}

std::vector<std::pair<std::string, ScalarField>> builtin_scalar_fields(const GroupModel& model) {
  if (!model.has_chart())
    throw std::invalid_argument("built-in scalar fields need a model with a chart");
  const int nc = model.coord_dim;
  std::vector<std::pair<std::string, ScalarField>> out;
  auto add = [&](const std::string& name, const Polynomial& p) {
    out.emplace_back(name, ScalarField::from_poly(model, p));
  };
  add("x1", Polynomial::var(nc, 0));
  add("x1_sq", Polynomial::var(nc, 0) * Polynomial::var(nc, 0));
  add("xlast", Polynomial::var(nc, nc - 1));
  add("x1_x2", Polynomial::var(nc, 0) * Polynomial::var(nc, std::min(1, nc - 1)));
  Polynomial ss(nc);
  for (int c = 0; c < nc; ++c) ss += Polynomial::var(nc, c) * Polynomial::var(nc, c);
  add("radial_sq", ss);
  return out;
}

}  // namespace foliated
