#include "qpwave/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "qpwave/detail/sparse_conv.hpp"
#include "qpwave/errors.hpp"

namespace qpwave {

ComplexSeries ComplexSeries::from_real(const QPSeries& u) {
  ComplexSeries c(u.d());
  for (const auto& [j, v] : u.expanded()) c.coeffs_.emplace(j, Complex(v, 0.0));
  return c;
}

Complex ComplexSeries::at(const LatticeIndex& j) const {
  auto it = coeffs_.find(j);
  return it == coeffs_.end() ? Complex{} : it->second;
}

void ComplexSeries::set(const LatticeIndex& j, Complex v) {
  if (j.d() != d_) throw DimensionMismatch("ComplexSeries::set: dimension mismatch");
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
    throw std::invalid_argument("ComplexSeries values must be finite");
  }
  if (v == Complex{}) {
    coeffs_.erase(j);
  } else {
    coeffs_[j] = v;
  }
}

double ComplexSeries::l2_norm() const {
  double s = 0.0;
  for (const auto& [j, v] : coeffs_) s += std::norm(v);
  return std::sqrt(s);
}

ComplexSeries ComplexSeries::dagger() const {
  ComplexSeries out(d_);
  for (const auto& [j, v] : coeffs_) out.coeffs_.emplace(-j, std::conj(v));
  return out;
}

ComplexSeries ComplexSeries::scaled(Complex f) const {
  ComplexSeries out(d_);
  for (const auto& [j, v] : coeffs_) out.set(j, v * f);
  return out;
}

double distance(const ComplexSeries& A, const ComplexSeries& B) {
  double s = 0.0;
  for (const auto& [j, v] : A.entries()) s += std::norm(v - B.at(j));
  for (const auto& [j, v] : B.entries()) {
    if (!A.entries().count(j)) s += std::norm(v);
  }
  return std::sqrt(s);
}

namespace {

using Flat = detail::FlatSupport<Complex>;

Flat dagger_flat(const Flat& f) {
  Flat g = f;
  for (auto& c : g.coords) c = -c;
  for (auto& v : g.values) v = std::conj(v);
  return g;
}

// C^{*(p+1)} * (C^dagger)^{*p} on |j| <= radius; each partial product keeps the
// sites that can still reach the output box.
std::vector<std::pair<LatticeIndex, Complex>> nl_product(const Flat& C, int p, int radius) {
  const Flat Cd = dagger_flat(C);
  const int factors = 2 * p + 1;
  Flat acc = C;
  for (int k = 1; k < factors; ++k) {
    const Flat& next = k <= p ? C : Cd;
    const long long reach =
        static_cast<long long>(radius) + static_cast<long long>(factors - 1 - k) * C.radius;
    auto prod = detail::sparse_convolve(acc, next, static_cast<int>(std::min<long long>(reach, 1 << 28)),
                                        false);
    if (k + 1 == factors) return prod;
    acc = Flat::from(C.dim, prod);
  }
  // p >= 1 means at least three factors; unreachable.
  return {};
}

void require_origin_box(const Region& box) {
  if (box.kind != Region::Kind::FullBox || (box.center && !box.center->is_zero())) {
    throw std::invalid_argument("dynamics needs a FullBox centered at the origin");
  }
}

}  // namespace

ComplexSeries nonlinear_term(const ComplexSeries& C, int p, const Region& box) {
  if (p < 1) throw std::invalid_argument("nonlinear_term: p must be >= 1");
  require_origin_box(box);
  ComplexSeries out(C.d());
  if (C.empty()) return out;
  std::vector<std::pair<LatticeIndex, Complex>> entries(C.entries().begin(), C.entries().end());
  const Flat f = Flat::from(kBlockDim * C.d(), entries);
  for (const auto& [j, v] : nl_product(f, p, box.N)) out.set(j, v);
  return out;
}

namespace {

// Dense state on the box with lexicographic site order.
class BoxState {
 public:
  BoxState(int d, int N) : d_(d), N_(N), indexer_(d, N) {
    const std::size_t vol = indexer_.volume();
    coords_.reserve(vol * kBlockDim * d);
    for (std::size_t i = 0; i < vol; ++i) {
      const auto s = indexer_.site(i);
      coords_.insert(coords_.end(), s.coords().begin(), s.coords().end());
    }
  }

  std::size_t volume() const { return indexer_.volume(); }
  const int* coords(std::size_t i) const { return &coords_[i * kBlockDim * d_]; }
  LatticeIndex site(std::size_t i) const { return indexer_.site(i); }
  std::optional<std::size_t> linear(std::span<const int> c) const { return indexer_.linear(c); }

  Flat flatten(const Eigen::VectorXcd& c) const {
    Flat f;
    f.dim = kBlockDim * d_;
    for (std::size_t i = 0; i < volume(); ++i) {
      const Complex v = c[static_cast<Eigen::Index>(i)];
      if (v == Complex{}) continue;
      const int* x = coords(i);
      for (int k = 0; k < f.dim; ++k) {
        f.coords.push_back(x[k]);
        f.radius = std::max(f.radius, std::abs(x[k]));
      }
      f.values.push_back(v);
    }
    return f;
  }

  // NL(c) restricted to the box; optionally the squared norm that falls outside.
  Eigen::VectorXcd nonlinear(const Eigen::VectorXcd& c, int p, double* outside_sq = nullptr,
                             double* total_sq = nullptr) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(c.size());
    const Flat f = flatten(c);
    if (f.size() == 0) return out;
    const int radius = outside_sq ? (2 * p + 1) * f.radius : N_;
    double in_sq = 0.0, out_sq = 0.0;
    for (const auto& [j, v] : nl_product(f, p, radius)) {
      if (const auto lin = indexer_.linear(j.coords())) {
        out[static_cast<Eigen::Index>(*lin)] = v;
        in_sq += std::norm(v);
      } else {
        out_sq += std::norm(v);
      }
    }
    if (outside_sq) *outside_sq = out_sq;
    if (total_sq) *total_sq = in_sq + out_sq;
    return out;
  }

 private:
  int d_;
  int N_;
  BoxIndexer indexer_;
  std::vector<int> coords_;
};

}  // namespace

TrajectorySummary evolve(const ComplexSeries& C0, const Frequency& lambda, int p, double T,
                         double dt, const Region& box, const EvolveOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
  if (!(T >= dt)) throw std::invalid_argument("evolve: T must be >= dt");
  if (p < 1) throw std::invalid_argument("evolve: p must be >= 1");
  if (C0.d() != lambda.d()) throw DimensionMismatch("evolve: C0 and lambda differ in d");
  if (opts.checkpoint_every < 1) throw std::invalid_argument("evolve: checkpoint_every must be >= 1");
  require_origin_box(box);

  const int d = lambda.d();
  const BoxState state(d, box.N);
  const auto n = static_cast<Eigen::Index>(state.volume());
  Eigen::VectorXcd c0 = Eigen::VectorXcd::Zero(n);
  for (const auto& [j, v] : C0.entries()) {
    const auto lin = state.linear(j.coords());
    if (!lin) throw std::invalid_argument("evolve: initial data leaves the box at " + j.to_string());
    c0[static_cast<Eigen::Index>(*lin)] = v;
  }

  const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  const double h = T / steps;
  Eigen::VectorXd sym(n);
  for (Eigen::Index i = 0; i < n; ++i) sym[i] = symbol(state.site(static_cast<std::size_t>(i)), lambda);
  const Complex I(0.0, 1.0);
  const Eigen::VectorXcd Ef = (sym.cast<Complex>() * (-I * h)).array().exp().matrix();
  const Eigen::VectorXcd Eh = (sym.cast<Complex>() * (-I * h / 2.0)).array().exp().matrix();

  auto Nf = [&](const Eigen::VectorXcd& c) -> Eigen::VectorXcd {
    if (!opts.nonlinear) return Eigen::VectorXcd::Zero(n);
    return I * state.nonlinear(c, p);
  };

  TrajectorySummary sum;
  sum.dt = h;
  sum.steps = steps;
  const double norm0 = c0.norm();
  auto checkpoint = [&](const Eigen::VectorXcd& c, double t) {
    Checkpoint cp;
    cp.t = t;
    if (norm0 > 0.0) {
      cp.mass_drift = std::abs(c.norm() - norm0) / norm0;
      if (opts.reference_E) {
        cp.deviation = (c - c0 * std::exp(-I * (*opts.reference_E) * t)).norm() / norm0;
      }
      if (opts.nonlinear) {
        double outside = 0.0, total = 0.0;
        state.nonlinear(c, p, &outside, &total);
        cp.out_of_box_mass = total > 0.0 ? outside / total : 0.0;
      }
    }
    sum.max_deviation = std::max(sum.max_deviation, cp.deviation);
    sum.max_mass_drift = std::max(sum.max_mass_drift, cp.mass_drift);
    sum.max_out_of_box_mass = std::max(sum.max_out_of_box_mass, cp.out_of_box_mass);
    sum.checkpoints.push_back(cp);
  };

  Eigen::VectorXcd c = c0;
  checkpoint(c, 0.0);
  for (int s = 1; s <= steps; ++s) {
    const Eigen::VectorXcd k1 = Nf(c);
    const Eigen::VectorXcd k2 = Nf(Eh.cwiseProduct(c + (h / 2.0) * k1));
    const Eigen::VectorXcd Ehc = Eh.cwiseProduct(c);
    const Eigen::VectorXcd k3 = Nf(Ehc + (h / 2.0) * k2);
    const Eigen::VectorXcd k4 = Nf(Ef.cwiseProduct(c) + h * Eh.cwiseProduct(k3));
    Eigen::VectorXcd next = Ef.cwiseProduct(c) +
                            (h / 6.0) * (Ef.cwiseProduct(k1) + 2.0 * Eh.cwiseProduct(k2 + k3) + k4);
    const double before = c.norm();
    const double after = next.norm();
    if (!std::isfinite(after) || after > 1.1 * before) {
      throw StepUnstable("l2 norm grew from " + std::to_string(before) + " to " +
                         std::to_string(after) + " at step " + std::to_string(s));
    }
    c = std::move(next);
    if (s % opts.checkpoint_every == 0 || s == steps) checkpoint(c, s * h);
  }

  sum.final_state = ComplexSeries(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (c[i] != Complex{}) sum.final_state.set(state.site(static_cast<std::size_t>(i)), c[i]);
  }
  return sum;
}

TrajectorySummary standing_wave_run(const SolutionRecord& rec, double T, double dt,
                                    std::optional<Region> box, int checkpoint_every) {
  const Region b = box ? *box : Region::full_box(rec.config.N_max);
  EvolveOptions opts;
  opts.reference_E = rec.E;
  opts.checkpoint_every = checkpoint_every;
  return evolve(ComplexSeries::from_real(rec.u), rec.config.lambda, rec.config.p, T, dt, b, opts);
}

double standing_wave_deviation(const SolutionRecord& rec, double T, double dt) {
  if (!rec.accepted) throw std::invalid_argument("standing_wave_deviation needs an accepted solution");
  return standing_wave_run(rec, T, dt).max_deviation;
}

}  // namespace qpwave
