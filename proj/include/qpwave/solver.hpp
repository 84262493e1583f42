#pragma once

// Lyapunov-Schmidt split with a multiscale Newton scheme. The eigenvalue E is
// fixed from the equations on S = orbit(jtilde); the remaining coefficients are
// updated by Newton steps on boxes of side N_r = min(M^r, N_max).

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "qpwave/lattice.hpp"
#include "qpwave/qp_series.hpp"

namespace qpwave {

struct ProblemConfig {
  int d = 1;
  int p = 1;
  double a = 0.01;
  LatticeIndex jtilde;
  Frequency lambda;
  int M = 3;
  int N_max = 30;
  int max_steps = 20;
  double residual_tol = 1e-12;
  double drop_tol = kDefaultDropTol;

  static int default_N_max(int d);
  // Throws std::invalid_argument / DimensionMismatch / MixedDegenerateIndex.
  void validate() const;
  // S, sorted.
  std::vector<LatticeIndex> resonant_set() const { return orbit(jtilde); }
  // Pinned value on S: a / 2^d (a when jtilde = 0).
  double pinned_value() const;
};

struct NewtonStepRecord {
  int r = 0;
  int N = 0;
  double incr_norm = 0.0;
  double resid_norm = 0.0;  // ||F(u^(r))||_2 on FullBox(N_max)
  double E = 0.0;           // E^(r), the eigenvalue used for step r
  std::size_t support = 0;
  double seconds = 0.0;
};
using NewtonTrace = std::vector<NewtonStepRecord>;

struct SolutionRecord {
  ProblemConfig config;
  QPSeries u;
  double E = 0.0;        // q_update of the final iterate
  double e_shift = 0.0;  // E - Etilde, computed without cancellation
  double residual_norm = 0.0;
  NewtonTrace trace;
  bool accepted = false;
};

struct SolveOptions {
  bool timing = true;  // record wall time per step (breaks byte determinism)
};

std::pair<QPSeries, double> initial_guess(const ProblemConfig& cfg);

// E = symbol(jtilde) - (|S|/a) u^{*(2p+1)}(jtilde); E = Etilde when a = 0.
double q_update(const QPSeries& u, const ProblemConfig& cfg);
// q_update(u) - symbol(jtilde).
double e_shift(const QPSeries& u, const ProblemConfig& cfg);

// F(u)(j) = (symbol(j) - E) u(j) - u^{*(2p+1)}(j) on a FullBox at the origin.
QPSeries residual(const QPSeries& u, double E, const Frequency& lambda, const Region& box, int p);

struct NewtonIncrement {
  QPSeries increment;
  double residual_norm = 0.0;  // ||F(u)||_2 on FullBox(N) before the step
};

// -T_N^{-1} F(u) on BoxMinusS(N, S) in symmetry-reduced coordinates.
NewtonIncrement newton_step(const QPSeries& u, double E, const ProblemConfig& cfg, int N);

// Runs the scheme. The separation precheck is the caller's business.
// Throws NotConverged, SingularOperator, DivergedIncrement.
SolutionRecord solve(const ProblemConfig& cfg, const SolveOptions& opts = {});

}  // namespace qpwave
