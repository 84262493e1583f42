#include "qpwave/linop.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "qpwave/detail/sparse_conv.hpp"
#include "qpwave/errors.hpp"

namespace qpwave {

namespace {

constexpr std::size_t kExactSvdLimit = 400;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<int> parent_;
};

// ||A^{-1}||_2, +infinity when A is numerically singular.
double block_inverse_norm(const Eigen::MatrixXd& A) {
  const double tiny = static_cast<double>(A.rows()) * std::numeric_limits<double>::epsilon() *
                      A.cwiseAbs().maxCoeff();
  double smin = 0.0;
  if (A == A.transpose()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    smin = es.eigenvalues().cwiseAbs().minCoeff();
  } else if (A.rows() <= static_cast<Eigen::Index>(kExactSvdLimit)) {
    smin = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues().minCoeff();
  } else {
    smin = Eigen::BDCSVD<Eigen::MatrixXd>(A).singularValues().minCoeff();
  }
  return smin > tiny ? 1.0 / smin : INFINITY;
}

}  // namespace

std::optional<std::size_t> LinearizedOperator::position(const LatticeIndex& j) const {
  if (j.d() != d()) return std::nullopt;
  const LatticeIndex key = rep_ == Representation::SymmetryReduced ? canonical(j) : j;
  BoxIndexer box(d(), region_.N, region_.center);
  const auto lin = box.linear(key.coords());
  if (!lin || position_[*lin] < 0) return std::nullopt;
  return static_cast<std::size_t>(position_[*lin]);
}

double LinearizedOperator::diag_at(const LatticeIndex& j) const {
  return shifted_symbol(j, lambda_, theta_) - E_;
}

double LinearizedOperator::entry(const LatticeIndex& j, const LatticeIndex& jp) const {
  const double off = -kernel_.at(j - jp);
  return j == jp ? diag_at(j) + off : off;
}

std::size_t LinearizedOperator::largest_component() const {
  std::size_t m = 0;
  for (const auto& c : components_) m = std::max(m, c.size());
  return m;
}

LinearizedOperator assemble(const QPSeries& u, double E, const Frequency& lambda,
                            std::span<const double> theta, const Region& region, int p,
                            Representation rep) {
  const int d = lambda.d();
  if (u.d() != d || static_cast<int>(theta.size()) != d) {
    throw DimensionMismatch("assemble: u, lambda and theta must share d");
  }
  if (p < 1) throw std::invalid_argument("assemble: p must be >= 1");
  region.validate(d);
  if (rep == Representation::SymmetryReduced) {
    if (std::any_of(theta.begin(), theta.end(), [](double t) { return t != 0.0; })) {
      throw std::invalid_argument("symmetry reduction requires theta = 0");
    }
    if (!region.orbit_closed()) {
      throw std::invalid_argument("symmetry reduction requires an orbit-closed region");
    }
  }

  LinearizedOperator T;
  T.region_ = region;
  T.theta_.assign(theta.begin(), theta.end());
  T.E_ = E;
  T.lambda_ = lambda;
  T.p_ = p;
  T.rep_ = rep;

  // Kernel (2p+1) u^{*2p} on the difference box.
  const Region diff_box = Region::full_box(2 * region.N);
  T.kernel_ = u.empty() ? QPSeries(d) : conv_power(u, 2 * p, diff_box).scaled(2.0 * p + 1.0);

  BoxIndexer box(d, region.N, region.center);
  T.position_.assign(box.volume(), -1);
  for (auto& j : enumerate_region(region, d)) {
    if (rep == Representation::SymmetryReduced && !is_canonical(j)) continue;
    T.position_[*box.linear(j.coords())] = static_cast<std::int64_t>(T.sites_.size());
    T.sites_.push_back(std::move(j));
  }
  const std::size_t n = T.sites_.size();
  T.diag_.resize(n);
  for (std::size_t i = 0; i < n; ++i) T.diag_[i] = T.diag_at(T.sites_[i]);

  const auto kern = detail::FlatSupport<double>::from(kBlockDim * d, T.kernel_.expanded());
  const int dim = kBlockDim * d;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * (kern.size() + 1));
  std::vector<int> buf(static_cast<std::size_t>(dim));
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), T.diag_[i]);
    const auto row = T.sites_[i].coords();
    for (std::size_t o = 0; o < kern.size(); ++o) {
      for (int c = 0; c < dim; ++c) buf[c] = row[c] - kern.coords[o * dim + c];
      if (rep == Representation::SymmetryReduced) {
        // Fold the source onto its representative; the region is orbit-closed.
        for (int k = 0; k < dim; k += 2) {
          if (buf[k] < 0 || (buf[k] == 0 && buf[k + 1] < 0)) {
            buf[k] = -buf[k];
            buf[k + 1] = -buf[k + 1];
          }
        }
      }
      const auto lin = box.linear(buf);
      if (!lin) continue;
      const std::int64_t col = T.position_[*lin];
      if (col < 0) continue;
      trip.emplace_back(static_cast<int>(i), static_cast<int>(col), -kern.values[o]);
      uf.unite(static_cast<int>(i), static_cast<int>(col));
    }
  }
  T.matrix_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  T.matrix_.setFromTriplets(trip.begin(), trip.end());
  T.matrix_.makeCompressed();

  std::vector<int> comp_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = uf.find(static_cast<int>(i));
    if (comp_of_root[r] < 0) {
      comp_of_root[r] = static_cast<int>(T.components_.size());
      T.components_.emplace_back();
    }
    T.components_[comp_of_root[r]].push_back(static_cast<int>(i));
  }
  return T;
}

Eigen::VectorXd apply(const LinearizedOperator& T, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != T.dim()) {
    throw DimensionMismatch("apply: vector length " + std::to_string(v.size()) +
                            " does not match operator dimension " + std::to_string(T.dim()));
  }
  return T.matrix() * v;
}

DenseFactorization::DenseFactorization(const LinearizedOperator& T)
    : op_(&T), components_(&T.components()) {
  lu_.reserve(components_->size());
  for (std::size_t b = 0; b < components_->size(); ++b) {
    const Eigen::MatrixXd A = block_matrix(b);
    lu_.emplace_back(A);
    const auto& LU = lu_.back().matrixLU();
    const double scale = A.cwiseAbs().maxCoeff();
    const double tiny = static_cast<double>(A.rows()) * std::numeric_limits<double>::epsilon() * scale;
    for (Eigen::Index k = 0; k < LU.rows(); ++k) {
      const double piv = std::abs(LU(k, k));
      if (!std::isfinite(piv) || piv <= tiny) {
        const auto& site = T.sites()[(*components_)[b][static_cast<std::size_t>(k)]];
        throw SingularOperator("rank-deficient block near site " + site.to_string() +
                               " (pivot " + std::to_string(piv) + ")");
      }
    }
  }
}

Eigen::MatrixXd DenseFactorization::block_matrix(std::size_t b) const {
  const auto& comp = (*components_)[b];
  const auto n = static_cast<Eigen::Index>(comp.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  // Rows of a component only couple to columns of the same component.
  std::vector<int> local(op_->dim(), -1);
  for (Eigen::Index i = 0; i < n; ++i) local[comp[i]] = static_cast<int>(i);
  const auto& M = op_->matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (LinearizedOperator::SparseMatrix::InnerIterator it(M, comp[i]); it; ++it) {
      A(i, local[it.col()]) += it.value();
    }
  }
  return A;
}

Eigen::VectorXd DenseFactorization::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  for (std::size_t b = 0; b < lu_.size(); ++b) {
    const auto& comp = (*components_)[b];
    Eigen::VectorXd r(static_cast<Eigen::Index>(comp.size()));
    bool any = false;
    for (std::size_t i = 0; i < comp.size(); ++i) {
      r[static_cast<Eigen::Index>(i)] = rhs[comp[i]];
      any = any || rhs[comp[i]] != 0.0;
    }
    if (!any) continue;
    const Eigen::VectorXd y = lu_[b].solve(r);
    for (std::size_t i = 0; i < comp.size(); ++i) x[comp[i]] = y[static_cast<Eigen::Index>(i)];
  }
  return x;
}

namespace {

double relative_residual(const LinearizedOperator& T, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& rhs) {
  return (T.matrix() * x - rhs).norm() / rhs.norm();
}

Eigen::VectorXd dense_solve(const LinearizedOperator& T, const Eigen::VectorXd& rhs) {
  DenseFactorization f(T);
  Eigen::VectorXd x = f.solve(rhs);
  if (relative_residual(T, x, rhs) > kSolveResidualContract) {
    x += f.solve(rhs - T.matrix() * x);
  }
  const double res = relative_residual(T, x, rhs);
  if (!(res <= kSolveResidualContract)) {
    throw SingularOperator("dense solve residual " + std::to_string(res) +
                           " above contract; operator numerically singular");
  }
  return x;
}

}  // namespace

Eigen::VectorXd solve_linear(const LinearizedOperator& T, const Eigen::VectorXd& rhs,
                             SolveStrategy strategy) {
  if (static_cast<std::size_t>(rhs.size()) != T.dim()) {
    throw DimensionMismatch("solve_linear: rhs length does not match operator dimension");
  }
  const bool dense_allowed = T.largest_component() <= kDenseDimensionCap;
  if (strategy.kind == SolveStrategy::Kind::Dense && dense_allowed) {
    if (rhs.norm() == 0.0) {
      DenseFactorization check(T);  // still reports a singular operator
      return Eigen::VectorXd::Zero(rhs.size());
    }
    return dense_solve(T, rhs);
  }
  if (rhs.norm() == 0.0) return Eigen::VectorXd::Zero(rhs.size());

  Eigen::BiCGSTAB<LinearizedOperator::SparseMatrix, Eigen::DiagonalPreconditioner<double>> it;
  it.setTolerance(strategy.tol);
  it.setMaxIterations(static_cast<Eigen::Index>(10 * std::max<std::size_t>(T.dim(), 1)));
  it.compute(T.matrix());
  Eigen::VectorXd x = it.solve(rhs);
  const double res = x.allFinite() ? relative_residual(T, x, rhs) : INFINITY;
  if (it.info() == Eigen::Success && res <= std::max(strategy.tol, kSolveResidualContract)) {
    return x;
  }
  if (dense_allowed) return dense_solve(T, rhs);
  throw SingularOperator("iterative solve stagnated at relative residual " + std::to_string(res));
}

GreensProfile greens_profile(const LinearizedOperator& T) {
  if (T.representation() != Representation::Full) {
    throw std::invalid_argument("greens_profile needs the full (unreduced) operator");
  }
  DenseFactorization f(T);
  GreensProfile g;
  g.N = T.region().N;
  g.threshold_distance = (T.region().N + 9) / 10;

  std::map<int, double> shells;
  double norm = 0.0;
  for (std::size_t b = 0; b < f.blocks(); ++b) {
    const auto& comp = f.block_sites(b);
    const Eigen::MatrixXd G = f.block_inverse(b);
    norm = std::max(norm, block_inverse_norm(f.block_matrix(b)));
    for (std::size_t i = 0; i < comp.size(); ++i) {
      const auto& si = T.sites()[comp[i]];
      for (std::size_t k = 0; k < comp.size(); ++k) {
        const double v = std::abs(G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
        if (i != k) g.max_offdiagonal = std::max(g.max_offdiagonal, v);
        if (v == 0.0) continue;
        const int s = (si - T.sites()[comp[k]]).linf();
        double& m = shells[s];
        m = std::max(m, v);
      }
    }
  }
  g.op_norm_inverse = norm;
  try {
    g.decay = fit_shell_decay(shells, g.threshold_distance + 1, 0.0);
  } catch (const InsufficientData&) {
    g.decay.reset();
  }
  return g;
}

double inverse_norm(const LinearizedOperator& T) {
  double norm = 0.0;
  for (const auto& comp : T.components()) {
    const auto n = static_cast<Eigen::Index>(comp.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> local(T.dim(), -1);
    for (Eigen::Index i = 0; i < n; ++i) local[comp[i]] = static_cast<int>(i);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (LinearizedOperator::SparseMatrix::InnerIterator it(T.matrix(), comp[i]); it; ++it) {
        A(i, local[it.col()]) += it.value();
      }
    }
    const double v = block_inverse_norm(A);
    if (std::isinf(v)) return INFINITY;
    norm = std::max(norm, v);
  }
  return norm;
}

double covariance_discrepancy(const QPSeries& u, double E, const Frequency& lambda,
                              std::span<const double> theta, const LatticeIndex& j0,
                              const Region& region, int p) {
  const int d = lambda.d();
  if (j0.d() != d) throw DimensionMismatch("covariance_discrepancy: j0 has wrong d");
  std::vector<double> shifted(theta.begin(), theta.end());
  for (int k = 0; k < d; ++k) shifted[k] += block_inner(j0.block(k), lambda.block(k));

  const auto moved = assemble(u, E, lambda, theta, region.translated(j0), p);
  const auto base = assemble(u, E, lambda, shifted, region, p);
  if (moved.dim() != base.dim()) {
    throw std::logic_error("translated region enumerates a different number of sites");
  }
  const LinearizedOperator::SparseMatrix diff = moved.matrix() - base.matrix();
  double m = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (LinearizedOperator::SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      m = std::max(m, std::abs(it.value()));
    }
  }
  return m;
}

}  // namespace qpwave
