#pragma once

// Measured surrogates for the non-resonance and measure statements: separation
// and Diophantine margins, theta-sectional bad fractions, acceptance sweeps over
// sampled frequencies, and amplitude scans of the bifurcating branch.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qpwave/lattice.hpp"
#include "qpwave/qp_series.hpp"
#include "qpwave/solver.hpp"

namespace qpwave {

struct SeparationResult {
  double margin = 0.0;      // min over FullBox(N) \ S of |symbol(j) - symbol(jtilde)|
  double threshold = 0.0;   // 2 a^{p/2}
  bool pass = false;        // margin > threshold
  LatticeIndex argmin;
};

SeparationResult separation_margin(const Frequency& lambda, const LatticeIndex& jtilde, int N,
                                   double a, int p);

// min over blocks k and 0 < |j_k|_inf <= J_max of dist(j_k . lambda_k, Z) |j_k|^A.
double diophantine_margin(const Frequency& lambda, int J_max, double A);

struct ThetaSample {
  double theta = 0.0;
  double inv_norm = 0.0;  // +inf when singular
  bool bad = false;
};

struct ThetaSweepResult {
  int axis = 1;  // 1-based
  double grid_step = 0.0;
  double range_lo = -2.0;
  double range_hi = 2.0;
  double threshold = 0.0;
  int N = 0;
  double bad_fraction = 0.0;
  std::vector<ThetaSample> samples;
};

// Sweeps theta_axis over [-2, 2]; the other components come from base_theta
// (zeros when empty). The operator lives on FullBox(N).
ThetaSweepResult theta_bad_fraction(const QPSeries& u, double E, const Frequency& lambda, int N,
                                    int p, int axis, double grid_step, double norm_threshold,
                                    std::vector<double> base_theta = {});

struct SweepOptions {
  int J_max = 50;
  double dio_exponent = 4.0;
  double dio_threshold = 1e-6;
  int sep_N = 0;      // 0: 2 |jtilde|_inf
  int greens_N = 16;  // 0 disables the Green's fit
  unsigned threads = 0;  // 0: hardware concurrency, capped by QPWAVE_THREADS
  bool timing = false;
};

struct SampleRecord {
  std::size_t index = 0;
  std::vector<double> lambda;
  double dio_margin = 0.0;
  std::optional<double> sep_margin;  // absent when rejected before the separation stage
  bool solved = false;
  std::optional<double> residual;
  std::optional<double> beta;
  std::optional<double> beta_fit_rms;
  int steps = 0;
  // "accepted", "diophantine", "separation", or "solver:<reason>".
  std::string reason;
};

struct AcceptanceReport {
  std::size_t n_samples = 0;
  std::size_t n_accepted = 0;
  double acceptance_fraction = 0.0;
  double theorem_bound = 0.0;  // 1 - a^{p/6}
  std::uint64_t seed = 0;
  std::vector<SampleRecord> samples;
};

// Draws lambda uniformly from (1/2, 3/2)^{2d} with a 64-bit Mersenne twister.
std::vector<Frequency> sample_frequencies(int d, std::size_t n, std::uint64_t seed);

// Stages: Diophantine margin, separation precheck, solve, Green's fit.
SampleRecord evaluate_sample(const ProblemConfig& tmpl, const Frequency& lambda,
                             const SweepOptions& opts, std::size_t index = 0);

AcceptanceReport lambda_sweep(const ProblemConfig& tmpl, std::size_t n_samples, std::uint64_t seed,
                              const SweepOptions& opts = {});
AcceptanceReport lambda_sweep(const ProblemConfig& tmpl, const std::vector<Frequency>& lambdas,
                              const SweepOptions& opts = {});

struct BifurcationPoint {
  double a = 0.0;
  double e_shift = 0.0;    // E - Etilde
  double u_deviation = 0.0;  // ||u - u^(0)||_2
  double residual = 0.0;
  int steps = 0;
};

struct BifurcationResult {
  double slope_E = 0.0;
  double intercept_E = 0.0;
  double slope_u = 0.0;
  double intercept_u = 0.0;
  std::vector<BifurcationPoint> points;
};

// Log-log least squares of |E - Etilde| and ||u - u^(0)|| against a. Solves use
// drop_tol = 0 so that high-order corrections survive at small a.
BifurcationResult bifurcation_scan(const ProblemConfig& tmpl, const std::vector<double>& a_values);

// Least-squares slope and intercept of y against x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qpwave
