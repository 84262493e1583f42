#pragma once

// Truncated linearized operator
//   T_N(theta) = diag( sum_k (j_k . lambda_k + theta_k)^2 - E ) - (2p+1) u^{*2p} *
// restricted to a region, its solves, and its Green's function profile.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <span>
#include <vector>

#include "qpwave/lattice.hpp"
#include "qpwave/qp_series.hpp"

namespace qpwave {

// Full: one unknown per site. SymmetryReduced: one unknown per sign-flip orbit
// (canonical representative); the entry in column c' aggregates the kernel over
// the whole source orbit. Reduction needs theta = 0 and an orbit-closed region.
enum class Representation { Full, SymmetryReduced };

class LinearizedOperator {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  const Region& region() const { return region_; }
  const std::vector<LatticeIndex>& sites() const { return sites_; }
  const std::vector<double>& diag() const { return diag_; }
  const QPSeries& kernel() const { return kernel_; }
  std::span<const double> theta() const { return theta_; }
  double E() const { return E_; }
  const Frequency& lambda() const { return lambda_; }
  int p() const { return p_; }
  int d() const { return lambda_.d(); }
  Representation representation() const { return rep_; }
  std::size_t dim() const { return sites_.size(); }

  const SparseMatrix& matrix() const { return matrix_; }
  std::optional<std::size_t> position(const LatticeIndex& j) const;

  // Full-space entry T(j, j') for arbitrary sites, straight from the defining formula.
  double entry(const LatticeIndex& j, const LatticeIndex& jp) const;
  double diag_at(const LatticeIndex& j) const;

  // Connected components of the coupling graph; T is block diagonal over them.
  const std::vector<std::vector<int>>& components() const { return components_; }
  std::size_t largest_component() const;

 private:
  friend LinearizedOperator assemble(const QPSeries&, double, const Frequency&,
                                     std::span<const double>, const Region&, int,
                                     Representation);
  Region region_;
  std::vector<LatticeIndex> sites_;
  std::vector<double> diag_;
  QPSeries kernel_;
  std::vector<double> theta_;
  double E_ = 0.0;
  Frequency lambda_;
  int p_ = 1;
  Representation rep_ = Representation::Full;
  SparseMatrix matrix_;
  std::vector<std::int64_t> position_;  // box linear index -> row, -1 when absent
  std::vector<std::vector<int>> components_;
};

LinearizedOperator assemble(const QPSeries& u, double E, const Frequency& lambda,
                            std::span<const double> theta, const Region& region, int p,
                            Representation rep = Representation::Full);

Eigen::VectorXd apply(const LinearizedOperator& T, const Eigen::VectorXd& v);

struct SolveStrategy {
  enum class Kind { Dense, Iterative };
  Kind kind = Kind::Dense;
  double tol = 1e-13;

  static SolveStrategy dense() { return {Kind::Dense, 1e-13}; }
  static SolveStrategy iterative(double tol = 1e-13) { return {Kind::Iterative, tol}; }
};

// Largest dense block factorized directly.
inline constexpr std::size_t kDenseDimensionCap = 20000;
// Relative residual every returned solution satisfies.
inline constexpr double kSolveResidualContract = 1e-13;

// Block-wise LU of T over its coupling components.
class DenseFactorization {
 public:
  explicit DenseFactorization(const LinearizedOperator& T);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  std::size_t blocks() const { return lu_.size(); }
  const std::vector<int>& block_sites(std::size_t b) const { return (*components_)[b]; }
  Eigen::MatrixXd block_matrix(std::size_t b) const;
  Eigen::MatrixXd block_inverse(std::size_t b) const { return lu_[b].inverse(); }

 private:
  const LinearizedOperator* op_;
  const std::vector<std::vector<int>>* components_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

Eigen::VectorXd solve_linear(const LinearizedOperator& T, const Eigen::VectorXd& rhs,
                             SolveStrategy strategy = SolveStrategy::dense());

struct GreensProfile {
  double op_norm_inverse = 0.0;
  std::optional<DecayFit> decay;  // empty when fewer than two resolved shells
  double max_offdiagonal = 0.0;
  int N = 0;
  int threshold_distance = 0;
};

GreensProfile greens_profile(const LinearizedOperator& T);

// ||T^{-1}||_2, +infinity when T is singular.
double inverse_norm(const LinearizedOperator& T);

// max |T(theta)(j + j0, j' + j0) - T(theta')(j, j')| with
// theta'_k = theta_k + j0_k . lambda_k, over j, j' in the region.
double covariance_discrepancy(const QPSeries& u, double E, const Frequency& lambda,
                              std::span<const double> theta, const LatticeIndex& j0,
                              const Region& region, int p);

}  // namespace qpwave
