#include "qpwave/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "qpwave/diagnostics.hpp"
#include "qpwave/dynamics.hpp"
#include "qpwave/errors.hpp"
#include "qpwave/io.hpp"
#include "qpwave/linop.hpp"
#include "qpwave/solver.hpp"

namespace qpwave {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string config;
  std::string out = "run";
  int d = 1;
  int p = 1;
  double a = 0.01;
  std::string jtilde = "1,0";
  std::string lambda;
  int M = 3;
  int N_max = 0;
  int max_steps = 20;
  double residual_tol = 1e-12;
  double drop_tol = kDefaultDropTol;
  bool timing = false;
  bool force = false;
  int sep_N = 0;
  std::size_t samples = 200;
  std::uint64_t seed = 1;
  int jmax = 50;
  double dio_exponent = 4.0;
  double dio_threshold = 1e-6;
  int greens_N = 16;
  int N = 12;
  int axis = 1;
  double grid_step = 1e-3;
  double sigma = 0.5;
  double threshold = 0.0;
  std::string a_values = "0.001,0.002,0.004,0.008,0.016,0.03";
  double T = 1.0;
  double dt = 1e-3;
  int checkpoint_every = 1;
  std::string in;
};

// A subcommand plus typed accessors for echoing its effective configuration.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& desc)
      : app_(parent.add_subcommand(name, desc)) {
    app_->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  CLI::App* app() const { return app_; }

  template <class T>
  void option(const std::string& key, T& target, const std::string& desc) {
    app_->add_option("--" + key, target, desc)->capture_default_str();
    echo_.emplace_back(key, [&target] { return Json(target); });
    flags_[key] = false;
  }
  void flag(const std::string& key, bool& target, const std::string& desc) {
    app_->add_flag("--" + key, target, desc);
    echo_.emplace_back(key, [&target] { return Json(target); });
    flags_[key] = true;
  }

  bool knows(const std::string& key) const { return flags_.count(key) > 0; }
  bool is_flag(const std::string& key) const { return flags_.at(key); }

  Json effective() const {
    Json j = Json::object();
    j["command"] = app_->get_name();
    for (const auto& [k, get] : echo_) {
      if (k != "config") j[k] = get();
    }
    return j;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<Json()>>> echo_;
  std::map<std::string, bool> flags_;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<int> parse_ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& t : split(s)) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(t, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (t.empty() || pos != t.size()) throw UsageError(what + ": '" + s + "' is not a list of integers");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& t : split(s)) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (t.empty() || pos != t.size()) throw UsageError(what + ": '" + s + "' is not a list of numbers");
    out.push_back(v);
  }
  return out;
}

void add_problem_options(Command& c, Settings& s, bool with_lambda) {
  c.option("d", s.d, "number of frequency blocks");
  c.option("p", s.p, "nonlinearity power |U|^{2p}U");
  c.option("a", s.a, "amplitude");
  c.option("jtilde", s.jtilde, "seed index, 2d comma-separated integers");
  if (with_lambda) c.option("lambda", s.lambda, "frequencies, 2d comma-separated reals in (0.5,1.5)");
  c.option("M", s.M, "scale base, N_r = min(M^r, N_max)");
  c.option("N-max", s.N_max, "largest box (0: 30 for d=1, 8 for d=2, 4 for d>=3)");
  c.option("max-steps", s.max_steps, "Newton step limit");
  c.option("residual-tol", s.residual_tol, "stopping tolerance on ||F(u)||_2 over FullBox(N_max)");
  c.option("drop-tol", s.drop_tol, "coefficients below this are dropped");
  c.option("timing", s.timing, "record wall time in traces (outputs no longer byte-stable)");
}

void add_precheck_options(Command& c, Settings& s) {
  c.option("sep-N", s.sep_N, "box for the separation precheck (0: 2|jtilde|)");
  c.flag("force", s.force, "skip the separation precheck");
}

void add_common(Command& c, Settings& s) {
  c.option("config", s.config, "JSON file of option values; explicit flags win");
  c.option("out", s.out, "output directory");
}

ProblemConfig problem_config(const Settings& s, bool need_lambda) {
  ProblemConfig cfg;
  cfg.d = s.d;
  cfg.p = s.p;
  cfg.a = s.a;
  cfg.jtilde = LatticeIndex(parse_ints(s.jtilde, "--jtilde"));
  if (need_lambda) {
    if (s.lambda.empty()) throw UsageError("--lambda is required");
    cfg.lambda = Frequency(parse_doubles(s.lambda, "--lambda"));
  } else {
    cfg.lambda = Frequency(std::vector<double>(static_cast<std::size_t>(2 * s.d), 1.0));
  }
  cfg.M = s.M;
  cfg.N_max = s.N_max > 0 ? s.N_max : ProblemConfig::default_N_max(s.d);
  cfg.max_steps = s.max_steps;
  cfg.residual_tol = s.residual_tol;
  cfg.drop_tol = s.drop_tol;
  cfg.validate();
  return cfg;
}

void precheck(const ProblemConfig& cfg, const Settings& s, std::ostream& out) {
  if (s.force) return;
  const int N = s.sep_N > 0 ? s.sep_N : std::max(1, 2 * cfg.jtilde.linf());
  const auto sep = separation_margin(cfg.lambda, cfg.jtilde, N, cfg.a, cfg.p);
  if (!sep.pass) {
    throw DomainError("separation", "separation margin " + format_double(sep.margin) +
                                        " not above " + format_double(sep.threshold) + " at j=" +
                                        sep.argmin.to_string() + " (N=" + std::to_string(N) + ")");
  }
  out << "separation margin " << format_double(sep.margin) << " > " << format_double(sep.threshold)
      << "\n";
}

Json with_config(const Json& config, Json body) {
  Json j;
  j["config"] = config;
  for (auto& [k, v] : body.items()) j[k] = v;
  return j;
}

// Turns a JSON config into argument tokens for the given command.
std::vector<std::string> config_tokens(const std::string& path, const Command& cmd) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, v] : j.items()) {
    if (!cmd.knows(key) || key == "config") {
      throw UsageError("unknown config key '" + key + "' for " + cmd.app()->get_name());
    }
    if (cmd.is_flag(key)) {
      if (!v.is_boolean()) throw UsageError("config key '" + key + "' must be a boolean");
      if (v.get<bool>()) tokens.push_back("--" + key);
      continue;
    }
    std::string value;
    auto scalar = [&](const Json& x) -> std::string {
      if (x.is_string()) return x.get<std::string>();
      if (x.is_boolean()) return x.get<bool>() ? "true" : "false";
      if (x.is_number_integer()) return x.dump();
      if (x.is_number()) return format_double(x.get<double>());
      throw UsageError("config key '" + key + "' has an unsupported value");
    };
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) value += (i ? "," : "") + scalar(v[i]);
    } else {
      value = scalar(v);
    }
    tokens.push_back("--" + key);
    tokens.push_back(value);
  }
  return tokens;
}

int cmd_solve(const Settings& s, const Command& c, std::ostream& out) {
  const auto cfg = problem_config(s, true);
  precheck(cfg, s, out);
  SolutionDocument doc{solve(cfg, SolveOptions{s.timing}), c.effective()};
  const fs::path dir(s.out);
  store_solution(dir / "solution.json", doc);
  write_atomic(dir / "trace.csv", trace_csv(doc.record.trace));
  out << "accepted E=" << format_double(doc.record.E)
      << " residual=" << format_double(doc.record.residual_norm)
      << " steps=" << doc.record.trace.size() << " -> " << (dir / "solution.json").string() << "\n";
  return 0;
}

int cmd_greens(const Settings& s, const Command& c, std::ostream& out) {
  const auto cfg = problem_config(s, true);
  precheck(cfg, s, out);
  const auto rec = solve(cfg, SolveOptions{s.timing});
  const std::vector<double> theta(static_cast<std::size_t>(cfg.d), 0.0);
  const auto T = assemble(rec.u, rec.E, cfg.lambda, theta,
                          Region::box_minus(s.greens_N, cfg.resonant_set()), cfg.p);
  const auto g = greens_profile(T);
  Json body;
  body["op_norm_inverse"] = g.op_norm_inverse;
  body["beta"] = g.decay ? Json(g.decay->rate) : Json(nullptr);
  body["beta_prefactor"] = g.decay ? Json(g.decay->prefactor) : Json(nullptr);
  body["fit_rms"] = g.decay ? Json(g.decay->residual_rms) : Json(nullptr);
  body["N"] = g.N;
  body["threshold_distance"] = g.threshold_distance;
  body["max_offdiagonal"] = g.max_offdiagonal;
  body["region"] = {{"kind", to_string(Region::Kind::BoxMinusS)}, {"N", s.greens_N}};
  write_atomic(fs::path(s.out) / "greens.json", dump_json(with_config(c.effective(), body)));
  out << "op_norm_inverse=" << format_double(g.op_norm_inverse)
      << " beta=" << (g.decay ? format_double(g.decay->rate) : "n/a") << "\n";
  return 0;
}

int cmd_theta(const Settings& s, const Command& c, std::ostream& out) {
  const auto cfg = problem_config(s, true);
  precheck(cfg, s, out);
  const auto rec = solve(cfg, SolveOptions{s.timing});
  const double thr = s.threshold > 0.0 ? s.threshold : std::exp(std::pow(s.N, s.sigma));
  const auto res = theta_bad_fraction(rec.u, rec.E, cfg.lambda, s.N, cfg.p, s.axis, s.grid_step, thr);
  const fs::path dir(s.out);
  write_atomic(dir / "theta.csv", theta_csv(res));
  write_atomic(dir / "theta.json", dump_json(with_config(c.effective(), theta_to_json(res))));
  out << "bad_fraction=" << format_double(res.bad_fraction) << " threshold=" << format_double(thr)
      << " points=" << res.samples.size() << "\n";
  return 0;
}

int cmd_sweep(const Settings& s, const Command& c, std::ostream& out) {
  const auto tmpl = problem_config(s, false);
  SweepOptions opts;
  opts.J_max = s.jmax;
  opts.dio_exponent = s.dio_exponent;
  opts.dio_threshold = s.dio_threshold;
  opts.sep_N = s.sep_N;
  opts.greens_N = s.greens_N;
  opts.timing = s.timing;
  if (s.samples < 1) throw UsageError("--samples must be >= 1");
  const auto rep = lambda_sweep(tmpl, s.samples, s.seed, opts);
  const fs::path dir(s.out);
  const Json body = sweep_to_json(rep);
  write_atomic(dir / "sweep.json", dump_json(with_config(c.effective(), body)));
  write_atomic(dir / "sweep.csv", sweep_csv(rep));
  out << "acceptance_fraction=" << format_double(rep.acceptance_fraction)
      << " theorem_bound=" << format_double(rep.theorem_bound) << " reasons=" << body["reasons"].dump()
      << "\n";
  return 0;
}

int cmd_bifurcation(const Settings& s, const Command& c, std::ostream& out) {
  const auto cfg = problem_config(s, true);
  const auto res = bifurcation_scan(cfg, parse_doubles(s.a_values, "--a-values"));
  const fs::path dir(s.out);
  write_atomic(dir / "bifurcation.json", dump_json(with_config(c.effective(), bifurcation_to_json(res))));
  write_atomic(dir / "bifurcation.csv", bifurcation_csv(res));
  out << "slope_E=" << format_double(res.slope_E) << " slope_u=" << format_double(res.slope_u) << "\n";
  return 0;
}

int cmd_evolve(const Settings& s, const Command& c, std::ostream& out) {
  SolutionRecord rec;
  if (!s.in.empty()) {
    rec = load_solution(s.in).record;
  } else {
    const auto cfg = problem_config(s, true);
    precheck(cfg, s, out);
    rec = solve(cfg, SolveOptions{s.timing});
  }
  if (!rec.accepted) throw DomainError("not_accepted", "solution is not accepted");
  const auto traj = standing_wave_run(rec, s.T, s.dt, std::nullopt, s.checkpoint_every);
  const fs::path dir(s.out);
  write_atomic(dir / "trajectory.csv", trajectory_csv(traj));
  write_atomic(dir / "trajectory.json", dump_json(with_config(c.effective(), trajectory_to_json(traj))));
  out << "max_deviation=" << format_double(traj.max_deviation)
      << " max_mass_drift=" << format_double(traj.max_mass_drift) << "\n";
  return 0;
}

int cmd_verify(const Settings& s, std::ostream& out) {
  if (s.in.empty()) throw UsageError("--in is required");
  const auto doc = load_solution(s.in);
  const auto& rec = doc.record;
  const double recomputed =
      residual(rec.u, rec.E, rec.config.lambda, Region::full_box(rec.config.N_max), rec.config.p).l2_norm();
  const double diff = std::abs(recomputed - rec.residual_norm);
  out << "stored residual=" << format_double(rec.residual_norm)
      << " recomputed=" << format_double(recomputed) << " diff=" << format_double(diff) << "\n";
  if (!(diff <= 1e-14)) {
    throw DomainError("residual_mismatch", "stored residual does not match the coefficients");
  }
  if (rec.accepted && !(recomputed <= rec.config.residual_tol)) {
    throw DomainError("residual_mismatch", "accepted record exceeds its residual tolerance");
  }
  out << "verified\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app("Quasi-periodic standing waves of the nonlinear Schroedinger equation", "qpwave");
  app.require_subcommand(1);

  Command solve_c(app, "solve", "construct (u, E) by the multiscale Newton scheme");
  add_common(solve_c, s);
  add_problem_options(solve_c, s, true);
  add_precheck_options(solve_c, s);

  Command sweep_c(app, "sweep-lambda", "acceptance sweep over uniformly sampled frequencies");
  add_common(sweep_c, s);
  add_problem_options(sweep_c, s, false);
  sweep_c.option("samples", s.samples, "number of sampled frequencies");
  sweep_c.option("seed", s.seed, "RNG seed");
  sweep_c.option("jmax", s.jmax, "Diophantine search radius");
  sweep_c.option("dio-exponent", s.dio_exponent, "Diophantine exponent A");
  sweep_c.option("dio-threshold", s.dio_threshold, "minimum Diophantine margin");
  sweep_c.option("sep-N", s.sep_N, "box for the separation precheck (0: 2|jtilde|)");
  sweep_c.option("greens-N", s.greens_N, "box for the Green's decay fit (0: skip)");

  Command greens_c(app, "greens", "Green's function profile at the solution");
  add_common(greens_c, s);
  add_problem_options(greens_c, s, true);
  add_precheck_options(greens_c, s);
  greens_c.option("greens-N", s.greens_N, "box of the operator");

  Command theta_c(app, "theta-sweep", "bad fraction of theta along one axis");
  add_common(theta_c, s);
  add_problem_options(theta_c, s, true);
  add_precheck_options(theta_c, s);
  theta_c.option("N", s.N, "box of the operator");
  theta_c.option("axis", s.axis, "theta component to sweep (1-based)");
  theta_c.option("grid-step", s.grid_step, "theta grid spacing over [-2,2]");
  theta_c.option("sigma", s.sigma, "threshold exponent: exp(N^sigma)");
  theta_c.option("threshold", s.threshold, "explicit norm threshold (0: exp(N^sigma))");

  Command bif_c(app, "bifurcation", "amplitude scan of E - Etilde and u - u0");
  add_common(bif_c, s);
  add_problem_options(bif_c, s, true);
  bif_c.option("a-values", s.a_values, "comma-separated amplitudes");

  Command evolve_c(app, "evolve", "time evolution of a solution as a standing wave");
  add_common(evolve_c, s);
  add_problem_options(evolve_c, s, true);
  add_precheck_options(evolve_c, s);
  evolve_c.option("in", s.in, "solution.json to evolve instead of solving");
  evolve_c.option("T", s.T, "final time");
  evolve_c.option("dt", s.dt, "time step");
  evolve_c.option("checkpoint-every", s.checkpoint_every, "steps between trajectory rows");

  Command verify_c(app, "verify", "recompute the residual of a stored solution");
  verify_c.option("config", s.config, "JSON file of option values; explicit flags win");
  verify_c.option("in", s.in, "solution.json");

  std::vector<Command*> commands{&solve_c, &sweep_c, &greens_c, &theta_c, &bif_c, &evolve_c, &verify_c};

  try {
    std::vector<std::string> argv_s{"qpwave"};
    if (!args.empty()) {
      argv_s.push_back(args.front());
      std::string cfg_path;
      for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) cfg_path = args[i].substr(9);
      }
      if (!cfg_path.empty()) {
        for (Command* c : commands) {
          if (c->app()->get_name() == args.front()) {
            for (auto& t : config_tokens(cfg_path, *c)) argv_s.push_back(std::move(t));
          }
        }
      }
      argv_s.insert(argv_s.end(), args.begin() + 1, args.end());
    }
    std::vector<const char*> argv;
    for (const auto& a : argv_s) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 1;
    }

    Command* chosen = nullptr;
    for (Command* c : commands) {
      if (c->app()->parsed()) chosen = c;
    }
    const std::string name = chosen->app()->get_name();
    if (name == "solve") return cmd_solve(s, *chosen, out);
    if (name == "sweep-lambda") return cmd_sweep(s, *chosen, out);
    if (name == "greens") return cmd_greens(s, *chosen, out);
    if (name == "theta-sweep") return cmd_theta(s, *chosen, out);
    if (name == "bifurcation") return cmd_bifurcation(s, *chosen, out);
    if (name == "evolve") return cmd_evolve(s, *chosen, out);
    return cmd_verify(s, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    err << "rejected (" << e.reason() << "): " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace qpwave
