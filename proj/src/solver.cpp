#include "qpwave/solver.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qpwave/errors.hpp"
#include "qpwave/linop.hpp"

namespace qpwave {

int ProblemConfig::default_N_max(int d) {
  if (d <= 1) return 30;
  if (d == 2) return 8;
  return 4;
}

void ProblemConfig::validate() const {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("a must be finite and >= 0");
  if (M < 2) throw std::invalid_argument("M must be >= 2");
  if (N_max < 1) throw std::invalid_argument("N_max must be >= 1");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(residual_tol > 0.0)) throw std::invalid_argument("residual_tol must be > 0");
  if (!(drop_tol >= 0.0)) throw std::invalid_argument("drop_tol must be >= 0");
  if (jtilde.d() != d) throw DimensionMismatch("jtilde must have 2d coordinates");
  if (lambda.d() != d) throw DimensionMismatch("lambda must have 2d components");
  const int nz = jtilde.nonzero_blocks();
  if (nz != 0 && nz != d) {
    throw MixedDegenerateIndex("jtilde " + jtilde.to_string() +
                               " has both zero and nonzero blocks");
  }
  if (jtilde.linf() > N_max) {
    throw std::invalid_argument("jtilde lies outside FullBox(N_max)");
  }
}

double ProblemConfig::pinned_value() const {
  return a / static_cast<double>(orbit_size(jtilde));
}

std::pair<QPSeries, double> initial_guess(const ProblemConfig& cfg) {
  cfg.validate();
  QPSeries u(cfg.d);
  if (cfg.a != 0.0) u.set(cfg.jtilde, cfg.pinned_value());
  return {u, symbol(cfg.jtilde, cfg.lambda)};
}

double e_shift(const QPSeries& u, const ProblemConfig& cfg) {
  if (cfg.a == 0.0) return 0.0;
  const double S = static_cast<double>(orbit_size(cfg.jtilde));
  return -(S / cfg.a) * conv_power_at(u, 2 * cfg.p + 1, cfg.jtilde);
}

double q_update(const QPSeries& u, const ProblemConfig& cfg) {
  return symbol(cfg.jtilde, cfg.lambda) + e_shift(u, cfg);
}

QPSeries residual(const QPSeries& u, double E, const Frequency& lambda, const Region& box, int p) {
  if (u.d() != lambda.d()) throw DimensionMismatch("residual: u and lambda differ in d");
  QPSeries F = u.empty() ? QPSeries(u.d()) : conv_power(u, 2 * p + 1, box).scaled(-1.0);
  const QPSeries inside = truncate(u, box, 0.0);
  for (const auto& [j, v] : inside.canonical_entries()) {
    F.add(j, (symbol(j, lambda) - E) * v);
  }
  return F;
}

NewtonIncrement newton_step(const QPSeries& u, double E, const ProblemConfig& cfg, int N) {
  const Region region = Region::box_minus(N, cfg.resonant_set());
  const QPSeries F = residual(u, E, cfg.lambda, Region::full_box(N), cfg.p);
  NewtonIncrement out{QPSeries(cfg.d), F.l2_norm()};
  if (F.empty()) return out;

  const std::vector<double> theta(static_cast<std::size_t>(cfg.d), 0.0);
  const auto T = assemble(u, E, cfg.lambda, theta, region, cfg.p, Representation::SymmetryReduced);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(T.dim()));
  for (std::size_t i = 0; i < T.dim(); ++i) rhs[static_cast<Eigen::Index>(i)] = -F.at(T.sites()[i]);
  if (rhs.isZero(0.0)) return out;

  const Eigen::VectorXd x = solve_linear(T, rhs);
  for (std::size_t i = 0; i < T.dim(); ++i) {
    const double v = x[static_cast<Eigen::Index>(i)];
    if (v != 0.0) out.increment.set(T.sites()[i], v);
  }
  return out;
}

namespace {

void check_invariants(const QPSeries& u, const ProblemConfig& cfg) {
  if (cfg.a != 0.0 && u.at(cfg.jtilde) != cfg.pinned_value()) {
    throw std::logic_error("pinned amplitude on S changed");
  }
}

}  // namespace

SolutionRecord solve(const ProblemConfig& cfg, const SolveOptions& opts) {
  using Clock = std::chrono::steady_clock;
  auto [u, E0] = initial_guess(cfg);
  SolutionRecord rec;
  rec.config = cfg;
  const Region final_box = Region::full_box(cfg.N_max);
  const double Etilde = E0;

  if (cfg.a == 0.0) {
    rec.u = u;
    rec.E = Etilde;
    rec.trace.push_back({1, std::min(cfg.M, cfg.N_max), 0.0, 0.0, Etilde, 0, 0.0});
    rec.accepted = true;
    return rec;
  }

  long long scale = 1;
  int growth = 0;
  double prev_incr = -1.0;
  for (int r = 1; r <= cfg.max_steps; ++r) {
    const auto t0 = Clock::now();
    scale = std::min<long long>(scale * cfg.M, cfg.N_max);
    const int N = static_cast<int>(scale);

    const double E = q_update(u, cfg);
    // The equations on S hold identically at this E.
    const double q_defect = std::abs(residual(u, E, cfg.lambda, Region::full_box(cfg.jtilde.linf()), cfg.p)
                                         .at(cfg.jtilde));
    if (q_defect > 1e-15 * cfg.a * std::max(1.0, Etilde)) {
      throw std::logic_error("Q-equation defect " + std::to_string(q_defect));
    }

    const auto step = newton_step(u, E, cfg, N);
    u = truncate(u + step.increment, Region::full_box(N), cfg.drop_tol);
    check_invariants(u, cfg);

    NewtonStepRecord row;
    row.r = r;
    row.N = N;
    row.incr_norm = step.increment.l2_norm();
    row.E = E;
    const double E_next = q_update(u, cfg);
    row.resid_norm = residual(u, E_next, cfg.lambda, final_box, cfg.p).l2_norm();
    row.support = u.support_size();
    if (opts.timing) row.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    rec.trace.push_back(row);

    if (row.resid_norm <= cfg.residual_tol) {
      rec.u = u;
      rec.E = E_next;
      rec.e_shift = e_shift(u, cfg);
      rec.residual_norm = row.resid_norm;
      rec.accepted = true;
      return rec;
    }
    if (prev_incr >= 0.0 && row.incr_norm > prev_incr && row.incr_norm > cfg.residual_tol) {
      if (++growth >= 2) {
        throw DivergedIncrement("increment norm grew on two consecutive steps (now " +
                                std::to_string(row.incr_norm) + ")");
      }
    } else {
      growth = 0;
    }
    prev_incr = row.incr_norm;
  }
  throw NotConverged("residual " + std::to_string(rec.trace.back().resid_norm) + " above " +
                     std::to_string(cfg.residual_tol) + " after " +
                     std::to_string(cfg.max_steps) + " steps");
}

}  // namespace qpwave
