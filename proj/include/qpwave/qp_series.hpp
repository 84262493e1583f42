#pragma once

// Sparse symmetric coefficient maps on Z^{2d} in the exponential basis.
//
// A QPSeries stores one value per sign-flip orbit (keyed by the canonical
// representative), so the symmetry u(j') = u(j) for j' in orbit(j) holds
// bit-for-bit. The represented function is
//   u(x) = sum_j u(j) exp(i sum_k (j_k . lambda_k) x_k)
//        = sum_{canonical j} 2^{m(j)} u(j) prod_{k: j_k != 0} cos((j_k . lambda_k) x_k).

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qpwave/lattice.hpp"

namespace qpwave {

class QPSeries {
 public:
  explicit QPSeries(int d = 1) : d_(d) {}

  // Value a on every member of orbit(j).
  static QPSeries orbit_delta(const LatticeIndex& j, double value);

  int d() const { return d_; }
  bool empty() const { return canon_.empty(); }

  double at(const LatticeIndex& j) const;
  // Assigns the whole orbit of j; a zero value erases it.
  void set(const LatticeIndex& j, double value);
  void add(const LatticeIndex& j, double value);

  const std::map<LatticeIndex, double>& canonical_entries() const { return canon_; }
  // Every stored site, lexicographically sorted.
  std::vector<std::pair<LatticeIndex, double>> expanded() const;
  std::size_t support_size() const;
  int radius() const;
  double l2_norm() const;
  double max_abs() const;

  QPSeries& operator+=(const QPSeries& o);
  QPSeries& operator-=(const QPSeries& o);
  QPSeries scaled(double factor) const;

  bool operator==(const QPSeries&) const = default;

 private:
  int d_;
  std::map<LatticeIndex, double> canon_;
};

QPSeries operator+(QPSeries a, const QPSeries& b);
QPSeries operator-(QPSeries a, const QPSeries& b);

struct DecayFit {
  double rate = 0.0;       // per unit l-infinity distance
  double prefactor = 0.0;  // exp(intercept)
  double residual_rms = 0.0;
  int min_distance_used = 0;
  int shells_used = 0;
};

// (A * B)(j) = sum_k A(k) B(j - k), restricted to `box` (a FullBox centered at 0).
QPSeries convolve(const QPSeries& A, const QPSeries& B, const Region& box);
QPSeries convolve(const QPSeries& A, const QPSeries& B);

// A^{*m}. With a box, every entry inside the box is exact: intermediate
// products keep whatever sites can still reach the box.
QPSeries conv_power(const QPSeries& A, int m, const Region& box);
QPSeries conv_power(const QPSeries& A, int m);

// Single coefficient of A^{*m} at site j.
double conv_power_at(const QPSeries& A, int m, const LatticeIndex& j);

double evaluate(const QPSeries& A, const Frequency& lambda, std::span<const double> x);
// -Laplacian of the represented function, differentiated termwise.
double evaluate_neg_laplacian(const QPSeries& A, const Frequency& lambda,
                              std::span<const double> x);

// Keeps orbits lying entirely inside `box` with |value| >= drop_tol.
QPSeries truncate(const QPSeries& A, const Region& box, double drop_tol);

// Least squares of log max_{|j|=s} |A(j)| against s over occupied shells
// s >= min_distance. Shells whose maximum falls below resolution_floor times the
// largest shell maximum are treated as unresolved.
DecayFit decay_fit(const QPSeries& A, int min_distance, double resolution_floor = 0.0);

// Shell-wise fit shared with the Green's function profile.
DecayFit fit_shell_decay(const std::map<int, double>& shell_max, int min_distance,
                         double resolution_floor);

inline constexpr double kDefaultDropTol = 1e-16;

}  // namespace qpwave
