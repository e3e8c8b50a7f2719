// Command-line front end: config-driven verification suites, single-identity
// runs, path simulation dumps, deterministic development, report merging.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "foliated/verify.hpp"

namespace fs = std::filesystem;
using namespace foliated;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  GroupModel model;
  std::vector<std::string> identities;
  McParams mc;
  double epsilon = 1.0;
  double flow_time = 0.1;
  std::vector<CylinderFunction> functions;
  std::vector<CameronMartinPath> h_paths;
  std::vector<double> dt_sweep;
  std::string out_dir = "reports";
};

const std::set<std::string> kIdentities = {
    "ibp_damped",        "ibp_directional",     "adjoint_operator",
    "gradient_representation", "girsanov_density", "orthogonal_invariance",
    "heisenberg_flow",   "projection_driver",   "weitzenbock"};

void check_dt(double dt) {
  for (int k = 6; k <= 12; ++k)
    if (std::abs(dt - std::ldexp(1.0, -k)) < 1e-15) return;
  throw ConfigError("dt must be a dyadic step 2^-k with k in [6, 12]");
}

GroupModel model_from_flag(const std::string& name) {
  if (name == "heisenberg1") return GroupModel::heisenberg(1);
  if (name == "heisenberg2") return GroupModel::heisenberg(2);
  if (name == "su2") return GroupModel::su2_hopf();
  if (name == "flat") return GroupModel::flat_product(2, 1);
  throw ConfigError("model must be one of heisenberg1, heisenberg2, su2, flat");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not readable: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  try {
    cfg.model = GroupModel::from_json(j.at("model"));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (!j.contains("identities") || !j["identities"].is_array() || j["identities"].empty())
    throw ConfigError("identities must be a non-empty array");
  for (const auto& id : j["identities"]) {
    const std::string s = id.get<std::string>();
    if (s == "all") {
      for (const auto& k : kIdentities) cfg.identities.push_back(k);
    } else if (kIdentities.count(s)) {
      cfg.identities.push_back(s);
    } else {
      throw ConfigError("identities: unknown identity \"" + s + "\"");
    }
  }
  cfg.mc.n_paths = j.value("n_paths", 100000L);
  if (cfg.mc.n_paths < 1000) throw ConfigError("n_paths must be at least 1000");
  cfg.mc.dt = j.value("dt", 1.0 / 512);
  check_dt(cfg.mc.dt);
  cfg.mc.seed = j.value("seed", 42UL);
  cfg.mc.bias_c = j.value("bias_c", 0.5);
  if (cfg.mc.bias_c < 0 || cfg.mc.bias_c > 50)
    throw ConfigError("bias_c must lie in [0, 50]");
  cfg.epsilon = j.value("epsilon", 1.0);
  if (cfg.epsilon <= 0) throw ConfigError("epsilon must be positive");
  cfg.flow_time = j.value("flow_time", 0.1);
  if (std::abs(cfg.flow_time) > 1) throw ConfigError("flow_time must lie in [-1, 1]");
  cfg.out_dir = j.value("out_dir", std::string("reports"));
  if (j.contains("functions"))
    for (const auto& fj : j["functions"]) {
      try {
        cfg.functions.push_back(CylinderFunction::from_json(cfg.model, fj));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("functions: ") + e.what());
      }
    }
  if (j.contains("h_paths"))
    for (const auto& hj : j["h_paths"]) {
      try {
        cfg.h_paths.push_back(CameronMartinPath::from_json(cfg.model.n, hj));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("h_paths: ") + e.what());
      }
    }
  if (j.contains("dt_sweep"))
    for (const auto& v : j["dt_sweep"]) {
      const double dts = v.get<double>();
      check_dt(dts);
      cfg.dt_sweep.push_back(dts);
    }
  return cfg;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

void write_reports(const std::vector<VerificationReport>& reports, const std::string& out_dir) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  const fs::path summary = fs::path(out_dir) / "summary.csv";
  const bool fresh = !fs::exists(summary);
  std::ofstream csv(summary, std::ios::app);
  if (fresh) csv << VerificationReport::csv_header() << "\n";
  for (const auto& r : reports) {
    csv << r.csv_row() << "\n";
    std::ofstream js(fs::path(out_dir) / (sanitize(r.identity_name) + ".json"));
    js << r.to_json().dump(2) << "\n";
  }
}

Eigen::VectorXd default_start(const GroupModel& model) {
  if (model.kind == ModelKind::heisenberg) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.coord_dim);
    x(0) = 0.4;
    x(model.n / 2) = -0.3;
    x(model.n) = 0.2;
    return x;
  }
  Eigen::VectorXd a = Eigen::VectorXd::Zero(model.d());
  a(0) = 0.3;
  a(model.d() - 1) = -0.2;
  return model.exp_alg(a);
}

CylinderFunction default_one_point(const GroupModel& model, double s) {
  if (model.kind == ModelKind::heisenberg)
    return CylinderFunction::sum_of_squares(model, {0, model.n / 2}, s);
  if (model.kind == ModelKind::su2_hopf) return CylinderFunction::square(model, 1, s);
  return CylinderFunction::sum_of_squares(model, {0, std::min(1, model.coord_dim - 1)}, s);
}

// Runs the requested identities; the three path-sweep IBP ops share one sweep.
std::vector<VerificationReport> run_identities(const ExperimentConfig& cfg) {
  const Geometry geom = Geometry::build(cfg.model);
  const std::vector<CylinderFunction> Fs =
      cfg.functions.empty() ? default_cylinder_functions(cfg.model) : cfg.functions;
  const std::vector<CameronMartinPath> hs =
      cfg.h_paths.empty() ? default_cm_paths(cfg.model.n) : cfg.h_paths;
  std::set<std::string> want(cfg.identities.begin(), cfg.identities.end());
  std::vector<VerificationReport> out;

  const bool bundle = want.count("ibp_damped") || want.count("ibp_directional") ||
                      want.count("adjoint_operator");
  if (bundle) {
    for (auto& r : verify_ibp_bundle(geom, Fs, hs, cfg.epsilon, cfg.mc)) {
      const std::string op = r.identity_name.substr(0, r.identity_name.find('['));
      if (want.count(op)) out.push_back(std::move(r));
    }
  }
  if (want.count("gradient_representation"))
    out.push_back(verify_gradient_representation(geom, default_one_point(cfg.model, 1.0),
                                                 default_start(cfg.model), 1.0, cfg.epsilon,
                                                 cfg.mc));
  if (want.count("girsanov_density")) {
    const DChoice D = cfg.model.kind == ModelKind::su2_hopf ? DChoice::adjoint_eps(cfg.epsilon)
                                                            : DChoice::bott();
    out.push_back(verify_girsanov_density(geom, hs.back(), cfg.flow_time, Fs[1 % Fs.size()], D,
                                          cfg.mc));
  }
  if (want.count("orthogonal_invariance")) {
    if (cfg.model.n >= 2) {
      OrthoSpec O;
      O.kind = OrthoSpec::Kind::constant_skew;
      O.skew = Eigen::MatrixXd::Zero(cfg.model.n, cfg.model.n);
      O.skew(0, 1) = 1.0;
      O.skew(1, 0) = -1.0;
      out.push_back(
          verify_orthogonal_invariance(geom, default_one_point(cfg.model, 1.0), O, cfg.epsilon,
                                       cfg.mc));
    }
    if (cfg.model.m >= 1 && cfg.model.kind != ModelKind::flat_product) {
      OrthoSpec O;
      O.kind = OrthoSpec::Kind::j_conjugation;
      O.h = hs.front();
      out.push_back(
          verify_orthogonal_invariance(geom, default_one_point(cfg.model, 1.0), O, cfg.epsilon,
                                       cfg.mc));
    }
  }
  if (want.count("heisenberg_flow")) {
    if (cfg.model.kind != ModelKind::heisenberg)
      throw ConfigError("identities: heisenberg_flow requires a heisenberg model");
    out.push_back(verify_heisenberg_flow(cfg.model.n / 2, hs.back(), cfg.flow_time, cfg.mc));
  }
  if (want.count("projection_driver")) {
    if (cfg.model.kind != ModelKind::heisenberg)
      throw ConfigError("identities: projection_driver requires a heisenberg model");
    out.push_back(verify_projection_driver(cfg.model.n / 2,
                                           CylinderFunction::square(cfg.model, 0, 1.0), hs.back(),
                                           cfg.mc));
  }
  if (want.count("weitzenbock")) out.push_back(verify_weitzenbock(cfg.model, cfg.epsilon));
  return out;
}

int run_suite(const ExperimentConfig& cfg) {
  std::vector<VerificationReport> reports = run_identities(cfg);

  // optional convergence table: every identity re-run over the dt sweep
  if (!cfg.dt_sweep.empty()) {
    fs::create_directories(cfg.out_dir);
    std::ofstream conv(fs::path(cfg.out_dir) / "convergence.csv");
    conv << "identity,model,dt,estimate,stderr\n";
    for (double dts : cfg.dt_sweep) {
      ExperimentConfig c2 = cfg;
      c2.mc.dt = dts;
      c2.dt_sweep.clear();
      for (const auto& r : run_identities(c2))
        conv << r.identity_name << "," << r.model << "," << nlohmann::json(dts).dump() << ","
             << nlohmann::json(r.estimate).dump() << "," << nlohmann::json(r.stderr_).dump()
             << "\n";
    }
  }

  write_reports(reports, cfg.out_dir);
  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << r.csv_row() << "\n";
    all_pass = all_pass && r.verdict;
  }
  return all_pass ? 0 : 1;
}

int cmd_simulate(const GroupModel& model, long n_paths, double dt, uint64_t seed, double eps,
                 const std::string& out_dir, bool dump) {
  const Geometry geom = Geometry::build(model);
  const int N = static_cast<int>(std::lround(1.0 / dt));
  const Scheme scheme =
      model.kind == ModelKind::heisenberg ? Scheme::heisenberg_exact : Scheme::geometric;

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(model.coord_dim);
  for (long p = 0; p < n_paths; ++p) {
    PathSample path = simulate_horizontal_bm(model, geom.bott, model.identity(), N, dt, seed,
                                             static_cast<uint64_t>(p), scheme);
    mean += path.states[N].point / static_cast<double>(n_paths);
    if (dump && p == 0) {
      bott_transport(path, geom.bott);
      fs::create_directories(out_dir);
      std::ofstream f(fs::path(out_dir) / "path0.csv");
      f << "step,s";
      for (int c = 0; c < model.coord_dim; ++c) f << ",x" << c + 1;
      const int d = model.d();
      for (int i = 0; i < d * d; ++i) f << ",frame" << i;
      for (int i = 0; i < d * d; ++i) f << ",theta" << i;
      f << "\n";
      for (int k = 0; k <= N; ++k) {
        f << k << "," << nlohmann::json(k * dt).dump();
        for (int c = 0; c < model.coord_dim; ++c)
          f << "," << nlohmann::json(path.states[k].point(c)).dump();
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) f << "," << nlohmann::json(path.states[k].frame(i, j)).dump();
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) f << "," << nlohmann::json(path.theta_bott[k](i, j)).dump();
        f << "\n";
      }
    }
  }
  std::cout << "model=" << model.name << " n_paths=" << n_paths << " dt=" << dt
            << " endpoint_mean=" << mean.transpose() << "\n";
  (void)eps;
  return 0;
}

int cmd_develop(const GroupModel& model, const std::string& path_name, int N, double radius) {
  const Geometry geom = Geometry::build(model);
  const double pi = 3.14159265358979323846;
  SmoothPath omega;
  if (path_name == "circle") {
    const int d = model.d();
    omega.value = [d, radius, pi](double s) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
      v(0) = radius * (std::cos(2 * pi * s) - 1);
      v(1) = radius * std::sin(2 * pi * s);
      return v;
    };
    omega.deriv = [d, radius, pi](double s) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
      v(0) = -2 * pi * radius * std::sin(2 * pi * s);
      v(1) = 2 * pi * radius * std::cos(2 * pi * s);
      return v;
    };
  } else if (path_name == "line") {
    const int d = model.d();
    omega.value = [d](double s) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
      v(0) = s;
      return v;
    };
    omega.deriv = [d](double) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
      v(0) = 1.0;
      return v;
    };
  } else {
    throw ConfigError("path must be circle or line");
  }
  const PathSample dev = develop_smooth(model, geom.bott, omega, N);
  std::cout << "endpoint: " << dev.states[N].point.transpose() << "\n";
  if (model.kind == ModelKind::heisenberg && path_name == "circle")
    // fiber coordinate accumulates twice the signed swept area
    std::cout << "levy_area: " << 0.5 * dev.states[N].point(model.n)
              << " expected_area: " << pi * radius * radius << "\n";
  return 0;
}

int cmd_report_merge(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<std::string> rows;
  std::set<std::string> seen;
  std::string header;
  for (const auto& in_path : inputs) {
    std::ifstream in(in_path);
    if (!in) throw ConfigError("summary file not readable: " + in_path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (first) {
        first = false;
        if (header.empty()) header = line;
        continue;
      }
      // dedupe key: identity, model, seed (first, second, last columns)
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      const auto cl = line.rfind(',');
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw ConfigError("malformed summary row: " + line);
      const std::string key = line.substr(0, c2) + "|" + line.substr(cl + 1);
      if (seen.insert(key).second) rows.push_back(line);
    }
  }
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    out = &file;
  }
  *out << header << "\n";
  for (const auto& r : rows) *out << r << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic analysis on foliated model groups: simulation and verification"};
  app.require_subcommand(1);

  std::string model_name = "heisenberg1", out_dir = "reports", config_path, identity, path_name =
      "circle";
  long n_paths = 10000;
  double dt = 1.0 / 512, eps = 1.0, radius = 0.5, bias_c = 0.5, flow_time = 0.1;
  uint64_t seed = 42;
  int threads = 0, N = 4096;
  bool dump = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_name, "heisenberg1|heisenberg2|su2|flat");
    cmd->add_option("--n-paths", n_paths)->check(CLI::PositiveNumber);
    cmd->add_option("--dt", dt);
    cmd->add_option("--seed", seed);
    cmd->add_option("--eps", eps);
    cmd->add_option("--threads", threads);
    cmd->add_option("--out-dir", out_dir);
  };

  CLI::App* sim = app.add_subcommand("simulate", "sample horizontal Brownian paths");
  add_common(sim);
  sim->add_flag("--dump", dump, "write the first path as CSV");

  CLI::App* devc = app.add_subcommand("develop", "develop a smooth flat path onto the group");
  devc->add_option("--model", model_name);
  devc->add_option("--path", path_name, "circle|line");
  devc->add_option("--N", N)->check(CLI::PositiveNumber);
  devc->add_option("--radius", radius);

  CLI::App* ver = app.add_subcommand("verify", "run one statistical identity");
  ver->add_option("identity", identity, "identity name (underscores or dashes)")->required();
  add_common(ver);
  ver->add_option("--bias-c", bias_c);
  ver->add_option("--flow-time", flow_time);

  CLI::App* suite = app.add_subcommand("suite", "run a JSON experiment config");
  suite->add_option("config_file", config_path, "experiment config (also --config)");
  suite->add_option("--config", config_path);
  auto* so = suite->add_option("--seed", seed);
  auto* sn = suite->add_option("--n-paths", n_paths);
  auto* sd = suite->add_option("--dt", dt);
  auto* st = suite->add_option("--threads", threads);
  suite->add_option("--out-dir", out_dir);

  CLI::App* merge = app.add_subcommand("report-merge", "merge CSV summaries, dedupe by identity/model/seed");
  std::vector<std::string> merge_inputs;
  std::string merge_out;
  merge->add_option("inputs", merge_inputs)->required();
  merge->add_option("--out", merge_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      check_dt(dt);
      if (n_paths < 1) throw ConfigError("n_paths must be positive");
      return cmd_simulate(model_from_flag(model_name), n_paths, dt, seed, eps, out_dir, dump);
    }
    if (devc->parsed()) return cmd_develop(model_from_flag(model_name), path_name, N, radius);
    if (ver->parsed()) {
      std::string id = identity;
      for (auto& c : id)
        if (c == '-') c = '_';
      if (!kIdentities.count(id)) throw ConfigError("identity: unknown identity \"" + identity + "\"");
      check_dt(dt);
      if (n_paths < 1000) throw ConfigError("n_paths must be at least 1000");
      ExperimentConfig cfg;
      cfg.model = model_from_flag(model_name);
      cfg.identities = {id};
      cfg.mc.n_paths = n_paths;
      cfg.mc.dt = dt;
      cfg.mc.seed = seed;
      cfg.mc.bias_c = bias_c;
      cfg.mc.threads = threads;
      cfg.epsilon = eps;
      cfg.flow_time = flow_time;
      cfg.out_dir = out_dir;
      return run_suite(cfg);
    }
    if (suite->parsed()) {
      if (config_path.empty()) throw ConfigError("config path is required");
      ExperimentConfig cfg = load_config(config_path);
      if (so->count()) cfg.mc.seed = seed;
      if (sn->count()) {
        if (n_paths < 1000) throw ConfigError("n_paths must be at least 1000");
        cfg.mc.n_paths = n_paths;
      }
      if (sd->count()) {
        check_dt(dt);
        cfg.mc.dt = dt;
      }
      if (st->count()) cfg.mc.threads = threads;
      if (suite->get_option("--out-dir")->count()) cfg.out_dir = out_dir;
      return run_suite(cfg);
    }
    if (merge->parsed()) return cmd_report_merge(merge_inputs, merge_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
