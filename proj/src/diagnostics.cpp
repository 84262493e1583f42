#include "qpwave/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "qpwave/detail/parallel.hpp"
#include "qpwave/errors.hpp"
#include "qpwave/linop.hpp"

namespace qpwave {

SeparationResult separation_margin(const Frequency& lambda, const LatticeIndex& jtilde, int N,
                                   double a, int p) {
  if (N < 1) throw std::invalid_argument("separation_margin: N must be >= 1");
  if (jtilde.d() != lambda.d()) throw DimensionMismatch("separation_margin: jtilde vs lambda");
  std::vector<LatticeIndex> S;
  for (auto& s : orbit(jtilde)) {
    if (s.linf() <= N) S.push_back(std::move(s));
  }
  const double target = symbol(jtilde, lambda);
  SeparationResult res;
  res.threshold = 2.0 * std::pow(a, 0.5 * p);
  res.margin = std::numeric_limits<double>::infinity();
  for (const auto& j : enumerate_region(Region::box_minus(N, S), lambda.d())) {
    const double m = std::abs(symbol(j, lambda) - target);
    if (m < res.margin) {
      res.margin = m;
      res.argmin = j;
    }
  }
  res.pass = res.margin > res.threshold;
  return res;
}

double diophantine_margin(const Frequency& lambda, int J_max, double A) {
  if (J_max < 1) throw std::invalid_argument("diophantine_margin: J_max must be >= 1");
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < lambda.d(); ++k) {
    const RealPair lk = lambda.block(k);
    // dist(x, Z) is even in x, so half of the pairs suffice.
    for (int j1 = 0; j1 <= J_max; ++j1) {
      for (int j2 = -J_max; j2 <= J_max; ++j2) {
        if (j1 == 0 && j2 <= 0) continue;
        const double x = block_inner({j1, j2}, lk);
        const double dist = std::abs(x - std::nearbyint(x));
        const double m = dist * std::pow(static_cast<double>(std::max(j1, std::abs(j2))), A);
        best = std::min(best, m);
      }
    }
  }
  return best;
}

ThetaSweepResult theta_bad_fraction(const QPSeries& u, double E, const Frequency& lambda, int N,
                                    int p, int axis, double grid_step, double norm_threshold,
                                    std::vector<double> base_theta) {
  const int d = lambda.d();
  if (axis < 1 || axis > d) throw std::invalid_argument("theta_bad_fraction: axis out of range");
  if (!(grid_step > 0.0)) throw std::invalid_argument("theta_bad_fraction: grid_step must be > 0");
  if (base_theta.empty()) base_theta.assign(static_cast<std::size_t>(d), 0.0);
  if (static_cast<int>(base_theta.size()) != d) throw DimensionMismatch("theta has wrong length");

  ThetaSweepResult res;
  res.axis = axis;
  res.grid_step = grid_step;
  res.threshold = norm_threshold;
  res.N = N;
  const auto n = static_cast<std::size_t>(std::floor((res.range_hi - res.range_lo) / grid_step + 1e-9)) + 1;
  res.samples.resize(n);
  const Region box = Region::full_box(N);
  detail::parallel_for(n, 0, [&](std::size_t i) {
    std::vector<double> theta = base_theta;
    theta[static_cast<std::size_t>(axis - 1)] = res.range_lo + static_cast<double>(i) * grid_step;
    const double inv = inverse_norm(assemble(u, E, lambda, theta, box, p));
    res.samples[i] = {theta[static_cast<std::size_t>(axis - 1)], inv, !(inv <= norm_threshold)};
  });
  std::size_t bad = 0;
  for (const auto& s : res.samples) bad += s.bad ? 1 : 0;
  res.bad_fraction = static_cast<double>(bad) / static_cast<double>(n);
  return res;
}

std::vector<Frequency> sample_frequencies(int d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto uniform = [&] {
    for (;;) {
      const double x = 0.5 + static_cast<double>(gen() >> 11) * 0x1.0p-53;
      if (x > 0.5) return x;
    }
  };
  std::vector<Frequency> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> comps(static_cast<std::size_t>(kBlockDim * d));
    for (auto& c : comps) c = uniform();
    out.emplace_back(std::move(comps));
  }
  return out;
}

SampleRecord evaluate_sample(const ProblemConfig& tmpl, const Frequency& lambda,
                             const SweepOptions& opts, std::size_t index) {
  SampleRecord rec;
  rec.index = index;
  rec.lambda.assign(lambda.comps().begin(), lambda.comps().end());
  rec.dio_margin = diophantine_margin(lambda, opts.J_max, opts.dio_exponent);
  if (!(rec.dio_margin > opts.dio_threshold)) {
    rec.reason = "diophantine";
    return rec;
  }
  const int sep_N = opts.sep_N > 0 ? opts.sep_N : std::max(1, 2 * tmpl.jtilde.linf());
  const auto sep = separation_margin(lambda, tmpl.jtilde, sep_N, tmpl.a, tmpl.p);
  rec.sep_margin = sep.margin;
  if (!sep.pass) {
    rec.reason = "separation";
    return rec;
  }
  ProblemConfig cfg = tmpl;
  cfg.lambda = lambda;
  SolutionRecord sol;
  try {
    sol = solve(cfg, SolveOptions{opts.timing});
  } catch (const DomainError& e) {
    rec.reason = "solver:" + e.reason();
    return rec;
  }
  rec.solved = true;
  rec.residual = sol.residual_norm;
  rec.steps = static_cast<int>(sol.trace.size());
  rec.reason = "accepted";
  if (opts.greens_N > 0 && cfg.a > 0.0) {
    try {
      const std::vector<double> theta(static_cast<std::size_t>(cfg.d), 0.0);
      const auto T = assemble(sol.u, sol.E, lambda, theta,
                              Region::box_minus(opts.greens_N, cfg.resonant_set()), cfg.p);
      const auto g = greens_profile(T);
      if (g.decay) {
        rec.beta = g.decay->rate;
        rec.beta_fit_rms = g.decay->residual_rms;
      }
    } catch (const DomainError&) {
      // beta stays absent; acceptance does not depend on it
    }
  }
  return rec;
}

namespace {

AcceptanceReport aggregate(const ProblemConfig& tmpl, std::vector<SampleRecord> samples) {
  AcceptanceReport rep;
  rep.n_samples = samples.size();
  for (const auto& s : samples) rep.n_accepted += s.solved ? 1 : 0;
  rep.acceptance_fraction =
      rep.n_samples ? static_cast<double>(rep.n_accepted) / static_cast<double>(rep.n_samples) : 0.0;
  rep.theorem_bound = 1.0 - std::pow(tmpl.a, tmpl.p / 6.0);
  rep.samples = std::move(samples);
  return rep;
}

}  // namespace

AcceptanceReport lambda_sweep(const ProblemConfig& tmpl, const std::vector<Frequency>& lambdas,
                              const SweepOptions& opts) {
  if (lambdas.empty()) throw std::invalid_argument("lambda_sweep: need at least one sample");
  std::vector<SampleRecord> samples(lambdas.size());
  detail::parallel_for(lambdas.size(), opts.threads, [&](std::size_t i) {
    samples[i] = evaluate_sample(tmpl, lambdas[i], opts, i);
  });
  return aggregate(tmpl, std::move(samples));
}

AcceptanceReport lambda_sweep(const ProblemConfig& tmpl, std::size_t n_samples, std::uint64_t seed,
                              const SweepOptions& opts) {
  if (n_samples < 1) throw std::invalid_argument("lambda_sweep: n_samples must be >= 1");
  auto rep = lambda_sweep(tmpl, sample_frequencies(tmpl.d, n_samples, seed), opts);
  rep.seed = seed;
  return rep;
}

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InsufficientData("linear_fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

BifurcationResult bifurcation_scan(const ProblemConfig& tmpl, const std::vector<double>& a_values) {
  if (a_values.size() < 4) throw InsufficientData("bifurcation_scan needs at least 4 amplitudes");
  const auto [lo, hi] = std::minmax_element(a_values.begin(), a_values.end());
  // A factor of 30, about 1.5 decades; rounding slack so that 1e-3..3e-2 qualifies.
  if (!(*lo > 0.0) || *hi / *lo < 30.0 * (1.0 - 1e-12)) {
    throw InsufficientData("bifurcation_scan amplitudes must be positive and span a factor >= 30");
  }
  BifurcationResult res;
  std::vector<double> la, le, lu;
  for (double a : a_values) {
    ProblemConfig cfg = tmpl;
    cfg.a = a;
    cfg.drop_tol = 0.0;
    const auto sol = solve(cfg, SolveOptions{false});
    const QPSeries u0 = initial_guess(cfg).first;
    BifurcationPoint pt{a, sol.e_shift, (sol.u - u0).l2_norm(), sol.residual_norm,
                        static_cast<int>(sol.trace.size())};
    res.points.push_back(pt);
    la.push_back(std::log(a));
    le.push_back(std::log(std::abs(pt.e_shift)));
    lu.push_back(std::log(pt.u_deviation));
  }
  std::tie(res.slope_E, res.intercept_E) = linear_fit(la, le);
  std::tie(res.slope_u, res.intercept_u) = linear_fit(la, lu);
  return res;
}

}  // namespace qpwave
