#include "qpwave/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "qpwave/errors.hpp"

namespace qpwave {

namespace fs = std::filesystem;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? number_or_null(*v) : Json(nullptr);
}

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

[[noreturn]] void corrupt(const std::string& what) { throw CorruptFile(what); }

const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) corrupt(std::string("expected an object around '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end()) corrupt(std::string("missing key '") + key + "'");
  return *it;
}

double get_double(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number()) corrupt(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

int get_int(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number_integer()) corrupt(std::string("'") + key + "' must be an integer");
  return v.get<int>();
}

std::vector<int> get_ints(const Json& v, const char* what) {
  if (!v.is_array()) corrupt(std::string(what) + " must be an integer array");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) corrupt(std::string(what) + " must be an integer array");
    out.push_back(x.get<int>());
  }
  return out;
}

}  // namespace

Json decay_fit_to_json(const DecayFit& f) {
  Json j;
  j["rate"] = f.rate;
  j["prefactor"] = f.prefactor;
  j["fit_rms"] = f.residual_rms;
  j["min_distance"] = f.min_distance_used;
  j["shells"] = f.shells_used;
  return j;
}

Json problem_config_to_json(const ProblemConfig& cfg) {
  Json j;
  j["d"] = cfg.d;
  j["p"] = cfg.p;
  j["a"] = cfg.a;
  j["jtilde"] = std::vector<int>(cfg.jtilde.coords().begin(), cfg.jtilde.coords().end());
  j["lambda"] = std::vector<double>(cfg.lambda.comps().begin(), cfg.lambda.comps().end());
  j["M"] = cfg.M;
  j["N_max"] = cfg.N_max;
  j["max_steps"] = cfg.max_steps;
  j["residual_tol"] = cfg.residual_tol;
  j["drop_tol"] = cfg.drop_tol;
  return j;
}

Json solution_to_json(const SolutionDocument& doc) {
  const SolutionRecord& rec = doc.record;
  const ProblemConfig& cfg = rec.config;
  Json j;
  j["schema"] = kSchemaVersion;
  j["d"] = cfg.d;
  j["p"] = cfg.p;
  j["a"] = cfg.a;
  j["M"] = cfg.M;
  j["jtilde"] = std::vector<int>(cfg.jtilde.coords().begin(), cfg.jtilde.coords().end());
  j["lambda"] = std::vector<double>(cfg.lambda.comps().begin(), cfg.lambda.comps().end());
  j["E"] = rec.E;
  j["accepted"] = rec.accepted;
  j["norm_convention"] = "linf";
  Json coeffs = Json::array();
  for (const auto& [site, v] : rec.u.canonical_entries()) {
    Json c;
    c["j"] = std::vector<int>(site.coords().begin(), site.coords().end());
    c["v"] = v;
    coeffs.push_back(std::move(c));
  }
  j["coeffs"] = std::move(coeffs);
  Json trace = Json::array();
  for (const auto& t : rec.trace) {
    Json row;
    row["r"] = t.r;
    row["N"] = t.N;
    row["incr_norm"] = t.incr_norm;
    row["resid_norm"] = t.resid_norm;
    row["E"] = t.E;
    row["support"] = t.support;
    row["seconds"] = t.seconds;
    trace.push_back(std::move(row));
  }
  j["trace"] = std::move(trace);

  Json diag;
  diag["residual_norm"] = rec.residual_norm;
  diag["e_shift"] = rec.e_shift;
  diag["support_size"] = rec.u.support_size();
  try {
    diag["coefficient_decay"] = decay_fit_to_json(decay_fit(rec.u, std::max(1, cfg.jtilde.linf())));
  } catch (const InsufficientData&) {
    diag["coefficient_decay"] = nullptr;
  }
  diag["config"] = problem_config_to_json(cfg);
  diag["run_config"] = doc.run_config;
  Json meta;
  meta["version"] = kVersion;
  meta["norm_scope"] = "per-lambda";
  meta["basis"] = "exponential";
  diag["metadata"] = std::move(meta);
  j["diagnostics"] = std::move(diag);
  return j;
}

SolutionDocument solution_from_json(const Json& j) {
  if (!j.is_object()) corrupt("solution document must be a JSON object");
  if (!j.contains("schema")) corrupt("missing key 'schema'");
  if (!j["schema"].is_number_integer()) corrupt("'schema' must be an integer");
  const int schema = j["schema"].get<int>();
  if (schema != kSchemaVersion) throw SchemaVersionMismatch(schema, kSchemaVersion);

  SolutionDocument doc;
  SolutionRecord& rec = doc.record;
  ProblemConfig& cfg = rec.config;
  const Json& diag = field(j, "diagnostics");
  const Json& c = field(diag, "config");
  try {
    cfg.d = get_int(j, "d");
    cfg.p = get_int(j, "p");
    cfg.a = get_double(j, "a");
    cfg.M = get_int(j, "M");
    cfg.jtilde = LatticeIndex(get_ints(field(j, "jtilde"), "jtilde"));
    const Json& lam = field(j, "lambda");
    if (!lam.is_array()) corrupt("lambda must be an array");
    std::vector<double> comps;
    for (const auto& x : lam) {
      if (!x.is_number()) corrupt("lambda must be numeric");
      comps.push_back(x.get<double>());
    }
    cfg.lambda = Frequency(comps);
    cfg.N_max = get_int(c, "N_max");
    cfg.max_steps = get_int(c, "max_steps");
    cfg.residual_tol = get_double(c, "residual_tol");
    cfg.drop_tol = get_double(c, "drop_tol");
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    corrupt(std::string("invalid configuration: ") + e.what());
  } catch (const MixedDegenerateIndex& e) {
    corrupt(e.what());
  }

  rec.E = get_double(j, "E");
  const Json& acc = field(j, "accepted");
  if (!acc.is_boolean()) corrupt("'accepted' must be a boolean");
  rec.accepted = acc.get<bool>();
  const Json& nc = field(j, "norm_convention");
  if (nc != "linf") corrupt("unsupported norm convention");

  rec.u = QPSeries(cfg.d);
  const Json& coeffs = field(j, "coeffs");
  if (!coeffs.is_array()) corrupt("'coeffs' must be an array");
  std::optional<LatticeIndex> prev;
  for (const auto& e : coeffs) {
    const auto coords = get_ints(field(e, "j"), "coefficient index");
    if (static_cast<int>(coords.size()) != 2 * cfg.d) corrupt("coefficient index has wrong length");
    LatticeIndex site(coords);
    if (!is_canonical(site)) corrupt("coefficient index " + site.to_string() + " is not canonical");
    if (prev && !(*prev < site)) corrupt("coefficients not strictly sorted at " + site.to_string());
    const double v = get_double(e, "v");
    if (!std::isfinite(v) || v == 0.0) corrupt("coefficient value at " + site.to_string() + " invalid");
    rec.u.set(site, v);
    prev = site;
  }

  const Json& trace = field(j, "trace");
  if (!trace.is_array()) corrupt("'trace' must be an array");
  for (const auto& t : trace) {
    NewtonStepRecord row;
    row.r = get_int(t, "r");
    row.N = get_int(t, "N");
    row.incr_norm = get_double(t, "incr_norm");
    row.resid_norm = get_double(t, "resid_norm");
    row.E = get_double(t, "E");
    const Json& s = field(t, "support");
    if (!s.is_number_unsigned()) corrupt("'support' must be a nonnegative integer");
    row.support = s.get<std::size_t>();
    row.seconds = get_double(t, "seconds");
    rec.trace.push_back(row);
  }
  rec.residual_norm = get_double(diag, "residual_norm");
  rec.e_shift = get_double(diag, "e_shift");
  doc.run_config = diag.contains("run_config") ? diag["run_config"] : Json(nullptr);
  return doc;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

void store_solution(const fs::path& path, const SolutionDocument& doc) {
  write_atomic(path, dump_json(solution_to_json(doc)));
}

SolutionDocument load_solution(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    corrupt(std::string("JSON parse error: ") + e.what());
  }
  return solution_from_json(j);
}

std::string trace_csv(const NewtonTrace& trace) {
  std::string s = "r,N,incr_norm,resid_norm,E,support,seconds\n";
  for (const auto& t : trace) {
    s += std::to_string(t.r) + "," + std::to_string(t.N) + "," + format_double(t.incr_norm) + "," +
         format_double(t.resid_norm) + "," + format_double(t.E) + "," + std::to_string(t.support) +
         "," + format_double(t.seconds) + "\n";
  }
  return s;
}

std::string sweep_csv(const AcceptanceReport& rep) {
  const std::size_t nl = rep.samples.empty() ? 0 : rep.samples.front().lambda.size();
  std::string s = "seed_index";
  for (std::size_t i = 0; i < nl; ++i) s += ",lambda_" + std::to_string(i + 1);
  s += ",dio_margin,sep_margin,solved,residual,beta,reason\n";
  for (const auto& r : rep.samples) {
    s += std::to_string(r.index);
    for (double l : r.lambda) s += "," + format_double(l);
    s += "," + format_double(r.dio_margin) + "," + opt_csv(r.sep_margin) + "," +
         (r.solved ? "1" : "0") + "," + opt_csv(r.residual) + "," + opt_csv(r.beta) + "," +
         r.reason + "\n";
  }
  return s;
}

std::string theta_csv(const ThetaSweepResult& res) {
  std::string s = "theta,inv_norm,bad\n";
  for (const auto& t : res.samples) {
    s += format_double(t.theta) + "," + format_double(t.inv_norm) + "," + (t.bad ? "1" : "0") + "\n";
  }
  return s;
}

std::string trajectory_csv(const TrajectorySummary& traj) {
  std::string s = "t,deviation,mass_drift,out_of_box_mass\n";
  for (const auto& c : traj.checkpoints) {
    s += format_double(c.t) + "," + format_double(c.deviation) + "," + format_double(c.mass_drift) +
         "," + format_double(c.out_of_box_mass) + "\n";
  }
  return s;
}

std::string bifurcation_csv(const BifurcationResult& res) {
  std::string s = "a,e_shift,u_deviation,residual,steps\n";
  for (const auto& p : res.points) {
    s += format_double(p.a) + "," + format_double(p.e_shift) + "," + format_double(p.u_deviation) +
         "," + format_double(p.residual) + "," + std::to_string(p.steps) + "\n";
  }
  return s;
}

Json sweep_to_json(const AcceptanceReport& rep) {
  Json j;
  j["n_samples"] = rep.n_samples;
  j["n_accepted"] = rep.n_accepted;
  j["acceptance_fraction"] = rep.acceptance_fraction;
  j["theorem_bound"] = rep.theorem_bound;
  j["seed"] = rep.seed;
  Json reasons = Json::object();
  for (const auto& r : rep.samples) {
    if (!reasons.contains(r.reason)) reasons[r.reason] = 0;
    reasons[r.reason] = reasons[r.reason].get<int>() + 1;
  }
  j["reasons"] = std::move(reasons);
  Json samples = Json::array();
  for (const auto& r : rep.samples) {
    Json s;
    s["index"] = r.index;
    s["lambda"] = r.lambda;
    s["dio_margin"] = number_or_null(r.dio_margin);
    s["sep_margin"] = optional_json(r.sep_margin);
    s["solved"] = r.solved;
    s["residual"] = optional_json(r.residual);
    s["beta"] = optional_json(r.beta);
    s["beta_fit_rms"] = optional_json(r.beta_fit_rms);
    s["steps"] = r.steps;
    s["reason"] = r.reason;
    samples.push_back(std::move(s));
  }
  j["samples"] = std::move(samples);
  return j;
}

Json theta_to_json(const ThetaSweepResult& res) {
  Json j;
  j["axis"] = res.axis;
  j["grid_step"] = res.grid_step;
  j["range"] = {res.range_lo, res.range_hi};
  j["threshold"] = res.threshold;
  j["N"] = res.N;
  j["points"] = res.samples.size();
  j["bad_fraction"] = res.bad_fraction;
  return j;
}

Json trajectory_to_json(const TrajectorySummary& traj) {
  Json j;
  j["steps"] = traj.steps;
  j["dt"] = traj.dt;
  j["max_deviation"] = traj.max_deviation;
  j["max_mass_drift"] = traj.max_mass_drift;
  j["max_out_of_box_mass"] = traj.max_out_of_box_mass;
  return j;
}

Json bifurcation_to_json(const BifurcationResult& res) {
  Json j;
  j["slope_E"] = res.slope_E;
  j["intercept_E"] = res.intercept_E;
  j["slope_u"] = res.slope_u;
  j["intercept_u"] = res.intercept_u;
  Json pts = Json::array();
  for (const auto& p : res.points) {
    Json q;
    q["a"] = p.a;
    q["e_shift"] = p.e_shift;
    q["u_deviation"] = p.u_deviation;
    q["residual"] = p.residual;
    q["steps"] = p.steps;
    pts.push_back(std::move(q));
  }
  j["points"] = std::move(pts);
  return j;
}

}  // namespace qpwave
