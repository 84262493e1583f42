#pragma once

// Time evolution of the box-truncated NLS in Fourier variables,
//   i dC/dt(j) = symbol(j) C(j) - (C^{*(p+1)} * (C^dagger)^{*p})(j),
// with an integrating-factor fourth-order Runge-Kutta scheme (Lawson form).

#include <complex>
#include <map>
#include <optional>
#include <vector>

#include "qpwave/lattice.hpp"
#include "qpwave/qp_series.hpp"
#include "qpwave/solver.hpp"

namespace qpwave {

using Complex = std::complex<double>;

class ComplexSeries {
 public:
  explicit ComplexSeries(int d = 1) : d_(d) {}
  static ComplexSeries from_real(const QPSeries& u);

  int d() const { return d_; }
  bool empty() const { return coeffs_.empty(); }
  Complex at(const LatticeIndex& j) const;
  void set(const LatticeIndex& j, Complex v);  // zero erases
  const std::map<LatticeIndex, Complex>& entries() const { return coeffs_; }

  double l2_norm() const;
  // C^dagger(j) = conj(C(-j)); C represents a real field iff C == C^dagger.
  ComplexSeries dagger() const;
  ComplexSeries scaled(Complex f) const;

 private:
  int d_;
  std::map<LatticeIndex, Complex> coeffs_;
};

// l2 distance between two series.
double distance(const ComplexSeries& A, const ComplexSeries& B);

// C^{*(p+1)} * (C^dagger)^{*p}, exact on the box (a FullBox at the origin).
ComplexSeries nonlinear_term(const ComplexSeries& C, int p, const Region& box);

struct Checkpoint {
  double t = 0.0;
  double deviation = 0.0;       // ||C(t) - e^{-iEt} C0|| / ||C0|| when a reference E is given
  double mass_drift = 0.0;      // | ||C(t)|| - ||C0|| | / ||C0||
  double out_of_box_mass = 0.0; // share of ||NL(C(t))||^2 that lands outside the box
};

struct EvolveOptions {
  bool nonlinear = true;
  std::optional<double> reference_E;
  int checkpoint_every = 1;  // steps between checkpoints; the final time is always recorded
};

struct TrajectorySummary {
  ComplexSeries final_state;
  int steps = 0;
  double dt = 0.0;  // step actually used: T / ceil(T / dt)
  std::vector<Checkpoint> checkpoints;
  double max_deviation = 0.0;
  double max_mass_drift = 0.0;
  double max_out_of_box_mass = 0.0;
};

// Throws StepUnstable when the l2 norm grows by more than 10% in one step.
TrajectorySummary evolve(const ComplexSeries& C0, const Frequency& lambda, int p, double T,
                         double dt, const Region& box, const EvolveOptions& opts = {});

// max_t ||C(t) - e^{-iEt} u|| / ||u|| for the stored solution, on FullBox(N_max)
// unless a box is given. Zero for the zero solution.
TrajectorySummary standing_wave_run(const SolutionRecord& rec, double T, double dt,
                                    std::optional<Region> box = std::nullopt,
                                    int checkpoint_every = 1);
double standing_wave_deviation(const SolutionRecord& rec, double T, double dt);

}  // namespace qpwave
