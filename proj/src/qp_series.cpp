#include "qpwave/qp_series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qpwave/detail/sparse_conv.hpp"
#include "qpwave/errors.hpp"

namespace qpwave {

QPSeries QPSeries::orbit_delta(const LatticeIndex& j, double value) {
  QPSeries s(j.d());
  s.set(j, value);
  return s;
}

double QPSeries::at(const LatticeIndex& j) const {
  if (j.d() != d_) throw DimensionMismatch("QPSeries::at: dimension mismatch");
  auto it = canon_.find(canonical(j));
  return it == canon_.end() ? 0.0 : it->second;
}

void QPSeries::set(const LatticeIndex& j, double value) {
  if (j.d() != d_) throw DimensionMismatch("QPSeries::set: dimension mismatch");
  if (!std::isfinite(value)) throw std::invalid_argument("QPSeries values must be finite");
  if (value == 0.0) {
    canon_.erase(canonical(j));
  } else {
    canon_[canonical(j)] = value;
  }
}

void QPSeries::add(const LatticeIndex& j, double value) { set(j, at(j) + value); }

std::vector<std::pair<LatticeIndex, double>> QPSeries::expanded() const {
  std::vector<std::pair<LatticeIndex, double>> out;
  out.reserve(canon_.size() * 2);
  for (const auto& [j, v] : canon_) {
    for (auto& o : orbit(j)) out.emplace_back(std::move(o), v);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::size_t QPSeries::support_size() const {
  std::size_t n = 0;
  for (const auto& [j, v] : canon_) n += static_cast<std::size_t>(orbit_size(j));
  return n;
}

int QPSeries::radius() const {
  int r = 0;
  for (const auto& [j, v] : canon_) r = std::max(r, j.linf());
  return r;
}

double QPSeries::l2_norm() const {
  double s = 0.0;
  for (const auto& [j, v] : canon_) s += orbit_size(j) * v * v;
  return std::sqrt(s);
}

double QPSeries::max_abs() const {
  double m = 0.0;
  for (const auto& [j, v] : canon_) m = std::max(m, std::abs(v));
  return m;
}

QPSeries& QPSeries::operator+=(const QPSeries& o) {
  if (o.d_ != d_) throw DimensionMismatch("QPSeries addition: dimension mismatch");
  for (const auto& [j, v] : o.canon_) {
    const double s = at(j) + v;
    if (s == 0.0) {
      canon_.erase(j);
    } else {
      canon_[j] = s;
    }
  }
  return *this;
}

QPSeries& QPSeries::operator-=(const QPSeries& o) { return *this += o.scaled(-1.0); }

QPSeries QPSeries::scaled(double factor) const {
  QPSeries out(d_);
  if (factor == 0.0) return out;
  for (const auto& [j, v] : canon_) out.canon_.emplace(j, v * factor);
  return out;
}

QPSeries operator+(QPSeries a, const QPSeries& b) { return a += b; }
QPSeries operator-(QPSeries a, const QPSeries& b) { return a -= b; }

namespace {

int box_radius(const Region& box) {
  if (box.kind != Region::Kind::FullBox || (box.center && !box.center->is_zero())) {
    throw std::invalid_argument("convolution box must be a FullBox centered at the origin");
  }
  return box.N;
}

QPSeries from_canonical(int d, const std::vector<std::pair<LatticeIndex, double>>& entries) {
  QPSeries out(d);
  for (const auto& [j, v] : entries) out.set(j, v);
  return out;
}

QPSeries convolve_radius(const QPSeries& A, const QPSeries& B, int radius) {
  if (A.d() != B.d()) throw DimensionMismatch("convolve: series differ in d");
  if (A.empty() || B.empty()) return QPSeries(A.d());
  const auto fa = detail::FlatSupport<double>::from(kBlockDim * A.d(), A.expanded());
  const auto fb = detail::FlatSupport<double>::from(kBlockDim * B.d(), B.expanded());
  return from_canonical(A.d(), detail::sparse_convolve(fa, fb, radius, true));
}

QPSeries conv_power_radius(const QPSeries& A, int m, int radius) {
  if (m < 1) throw std::invalid_argument("conv_power: m must be >= 1");
  const int ra = A.radius();
  QPSeries acc = A;
  for (int k = 2; k <= m; ++k) {
    // Sites of the k-fold product farther than radius + (m-k)*ra cannot reach the box.
    const long long reach = static_cast<long long>(radius) + static_cast<long long>(m - k) * ra;
    acc = convolve_radius(acc, A, static_cast<int>(std::min<long long>(reach, 1 << 28)));
  }
  if (m == 1 && radius < (1 << 28)) acc = truncate(acc, Region::full_box(radius), 0.0);
  return acc;
}

}  // namespace

QPSeries convolve(const QPSeries& A, const QPSeries& B, const Region& box) {
  return convolve_radius(A, B, box_radius(box));
}

QPSeries convolve(const QPSeries& A, const QPSeries& B) {
  return convolve_radius(A, B, A.radius() + B.radius());
}

QPSeries conv_power(const QPSeries& A, int m, const Region& box) {
  return conv_power_radius(A, m, box_radius(box));
}

QPSeries conv_power(const QPSeries& A, int m) {
  if (m < 1) throw std::invalid_argument("conv_power: m must be >= 1");
  return conv_power_radius(A, m, m * A.radius());
}

double conv_power_at(const QPSeries& A, int m, const LatticeIndex& j) {
  if (m < 1) throw std::invalid_argument("conv_power_at: m must be >= 1");
  if (m == 1) return A.at(j);
  const QPSeries partial = conv_power_radius(A, m - 1, j.linf() + A.radius());
  double s = 0.0;
  for (const auto& [k, v] : A.expanded()) s += partial.at(j - k) * v;
  return s;
}

double evaluate(const QPSeries& A, const Frequency& lambda, std::span<const double> x) {
  if (A.d() != lambda.d() || static_cast<int>(x.size()) != A.d()) {
    throw DimensionMismatch("evaluate: dimension mismatch");
  }
  double s = 0.0;
  for (const auto& [j, v] : A.canonical_entries()) {
    double term = orbit_size(j) * v;
    for (int k = 0; k < A.d(); ++k) {
      if (!j.block_is_zero(k)) term *= std::cos(block_inner(j.block(k), lambda.block(k)) * x[k]);
    }
    s += term;
  }
  return s;
}

double evaluate_neg_laplacian(const QPSeries& A, const Frequency& lambda,
                              std::span<const double> x) {
  if (A.d() != lambda.d() || static_cast<int>(x.size()) != A.d()) {
    throw DimensionMismatch("evaluate_neg_laplacian: dimension mismatch");
  }
  double s = 0.0;
  for (const auto& [j, v] : A.canonical_entries()) {
    double term = orbit_size(j) * v * symbol(j, lambda);
    for (int k = 0; k < A.d(); ++k) {
      if (!j.block_is_zero(k)) term *= std::cos(block_inner(j.block(k), lambda.block(k)) * x[k]);
    }
    s += term;
  }
  return s;
}

QPSeries truncate(const QPSeries& A, const Region& box, double drop_tol) {
  if (drop_tol < 0.0) throw std::invalid_argument("truncate: drop_tol must be >= 0");
  QPSeries out(A.d());
  for (const auto& [j, v] : A.canonical_entries()) {
    if (std::abs(v) < drop_tol) continue;
    bool inside = true;
    if (box.kind == Region::Kind::FullBox && !box.center) {
      inside = j.linf() <= box.N;
    } else {
      for (const auto& o : orbit(j)) {
        if (!box.contains(o)) {
          inside = false;
          break;
        }
      }
    }
    if (inside) out.set(j, v);
  }
  return out;
}

DecayFit fit_shell_decay(const std::map<int, double>& shell_max, int min_distance,
                         double resolution_floor) {
  double global = 0.0;
  for (const auto& [s, m] : shell_max) global = std::max(global, m);
  std::vector<double> xs, ys;
  for (const auto& [s, m] : shell_max) {
    if (s < min_distance || !(m > 0.0)) continue;
    if (m < resolution_floor * global) continue;
    xs.push_back(static_cast<double>(s));
    ys.push_back(std::log(m));
  }
  if (xs.size() < 2) {
    throw InsufficientData("decay fit needs at least two occupied shells, found " +
                           std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ss += r * r;
  }
  DecayFit fit;
  fit.rate = -slope;
  fit.prefactor = std::exp(intercept);
  fit.residual_rms = std::sqrt(ss / n);
  fit.min_distance_used = min_distance;
  fit.shells_used = static_cast<int>(xs.size());
  return fit;
}

DecayFit decay_fit(const QPSeries& A, int min_distance, double resolution_floor) {
  std::map<int, double> shells;
  for (const auto& [j, v] : A.canonical_entries()) {
    double& m = shells[j.linf()];
    m = std::max(m, std::abs(v));
  }
  return fit_shell_decay(shells, min_distance, resolution_floor);
}

}  // namespace qpwave
