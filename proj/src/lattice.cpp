#include "qpwave/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "qpwave/errors.hpp"

namespace qpwave {

LatticeIndex::LatticeIndex(std::vector<int> coords) : coords_(std::move(coords)) {
  if (coords_.empty() || coords_.size() % kBlockDim != 0) {
    throw DimensionMismatch("lattice index needs 2d coordinates, got " +
                            std::to_string(coords_.size()));
  }
}

LatticeIndex LatticeIndex::zero(int d) {
  return LatticeIndex(std::vector<int>(static_cast<std::size_t>(kBlockDim * d), 0));
}

LatticeIndex LatticeIndex::from_blocks(const std::vector<IntPair>& blocks) {
  std::vector<int> c;
  c.reserve(blocks.size() * kBlockDim);
  for (const auto& b : blocks) {
    c.push_back(b[0]);
    c.push_back(b[1]);
  }
  return LatticeIndex(std::move(c));
}

bool LatticeIndex::is_zero() const {
  return std::all_of(coords_.begin(), coords_.end(), [](int c) { return c == 0; });
}

bool LatticeIndex::block_is_zero(int k) const {
  return coords_[2 * k] == 0 && coords_[2 * k + 1] == 0;
}

int LatticeIndex::nonzero_blocks() const {
  int m = 0;
  for (int k = 0; k < d(); ++k) m += block_is_zero(k) ? 0 : 1;
  return m;
}

int LatticeIndex::linf() const {
  int m = 0;
  for (int c : coords_) m = std::max(m, std::abs(c));
  return m;
}

LatticeIndex LatticeIndex::operator+(const LatticeIndex& o) const {
  if (o.size() != size()) throw DimensionMismatch("lattice index dimension mismatch");
  std::vector<int> c(coords_);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += o.coords_[i];
  return LatticeIndex(std::move(c));
}

LatticeIndex LatticeIndex::operator-(const LatticeIndex& o) const {
  if (o.size() != size()) throw DimensionMismatch("lattice index dimension mismatch");
  std::vector<int> c(coords_);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= o.coords_[i];
  return LatticeIndex(std::move(c));
}

LatticeIndex LatticeIndex::operator-() const { return scaled(-1); }

LatticeIndex LatticeIndex::scaled(int factor) const {
  std::vector<int> c(coords_);
  for (auto& x : c) x *= factor;
  return LatticeIndex(std::move(c));
}

LatticeIndex LatticeIndex::flipped(unsigned mask) const {
  std::vector<int> c(coords_);
  for (int k = 0; k < d(); ++k) {
    if ((mask >> k) & 1U) {
      c[2 * k] = -c[2 * k];
      c[2 * k + 1] = -c[2 * k + 1];
    }
  }
  return LatticeIndex(std::move(c));
}

std::string LatticeIndex::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (i) os << ',';
    os << coords_[i];
  }
  os << ']';
  return os.str();
}

std::size_t LatticeIndexHash::operator()(const LatticeIndex& j) const noexcept {
  std::size_t h = 1469598103934665603ULL;
  for (int c : j.coords()) {
    h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(c));
    h *= 1099511628211ULL;
  }
  return h;
}

Frequency::Frequency(std::vector<double> comps) : comps_(std::move(comps)) {
  if (comps_.empty() || comps_.size() % kBlockDim != 0) {
    throw DimensionMismatch("frequency needs 2d components, got " +
                            std::to_string(comps_.size()));
  }
  for (double c : comps_) {
    if (!(c > 0.5 && c < 1.5)) {
      std::ostringstream os;
      os << "frequency component " << c << " outside (1/2, 3/2)";
      throw std::invalid_argument(os.str());
    }
  }
}

double block_inner(const IntPair& jk, const RealPair& lk) {
  return jk[0] * lk[0] + jk[1] * lk[1];
}

double symbol(const LatticeIndex& j, const Frequency& lambda) {
  if (j.d() != lambda.d()) throw DimensionMismatch("symbol: index and frequency differ in d");
  double s = 0.0;
  for (int k = 0; k < j.d(); ++k) {
    const double t = block_inner(j.block(k), lambda.block(k));
    s += t * t;
  }
  return s;
}

double shifted_symbol(const LatticeIndex& j, const Frequency& lambda,
                      std::span<const double> theta) {
  if (j.d() != lambda.d() || static_cast<int>(theta.size()) != j.d()) {
    throw DimensionMismatch("shifted_symbol: dimension mismatch");
  }
  double s = 0.0;
  for (int k = 0; k < j.d(); ++k) {
    const double t = block_inner(j.block(k), lambda.block(k)) + theta[k];
    s += t * t;
  }
  return s;
}

std::vector<LatticeIndex> orbit(const LatticeIndex& j) {
  std::vector<int> nonzero;
  for (int k = 0; k < j.d(); ++k) {
    if (!j.block_is_zero(k)) nonzero.push_back(k);
  }
  std::vector<LatticeIndex> out;
  out.reserve(std::size_t{1} << nonzero.size());
  for (unsigned s = 0; s < (1U << nonzero.size()); ++s) {
    unsigned mask = 0;
    for (std::size_t b = 0; b < nonzero.size(); ++b) {
      if ((s >> b) & 1U) mask |= 1U << nonzero[b];
    }
    out.push_back(j.flipped(mask));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int orbit_size(const LatticeIndex& j) { return 1 << j.nonzero_blocks(); }

namespace {
bool block_negative(const LatticeIndex& j, int k) {
  const int a = j[2 * k];
  return a < 0 || (a == 0 && j[2 * k + 1] < 0);
}
}  // namespace

LatticeIndex canonical(const LatticeIndex& j) {
  unsigned mask = 0;
  for (int k = 0; k < j.d(); ++k) {
    if (block_negative(j, k)) mask |= 1U << k;
  }
  return mask ? j.flipped(mask) : j;
}

bool is_canonical(const LatticeIndex& j) {
  for (int k = 0; k < j.d(); ++k) {
    if (block_negative(j, k)) return false;
  }
  return true;
}

Region Region::full_box(int N) {
  Region r;
  r.kind = Kind::FullBox;
  r.N = N;
  return r;
}

Region Region::box_minus(int N, std::vector<LatticeIndex> S) {
  Region r;
  r.kind = Kind::BoxMinusS;
  r.N = N;
  std::sort(S.begin(), S.end());
  S.erase(std::unique(S.begin(), S.end()), S.end());
  r.S = std::move(S);
  return r;
}

Region Region::generalized_box(int N, std::vector<SignConstraint> constraints) {
  Region r;
  r.kind = Kind::GeneralizedBox;
  r.N = N;
  r.constraints = std::move(constraints);
  return r;
}

Region Region::translated(const LatticeIndex& shift) const {
  Region r = *this;
  r.center = center ? *center + shift : shift;
  for (auto& s : r.S) s = s + shift;
  return r;
}

namespace {
// Coordinates of j relative to the region center.
LatticeIndex relative(const Region& r, const LatticeIndex& j) {
  return r.center ? j - *r.center : j;
}
}  // namespace

bool Region::contains(const LatticeIndex& j) const {
  const LatticeIndex rel = relative(*this, j);
  if (rel.linf() > N) return false;
  switch (kind) {
    case Kind::FullBox:
      return true;
    case Kind::BoxMinusS:
      return !std::binary_search(S.begin(), S.end(), j);
    case Kind::GeneralizedBox: {
      bool excluded = true;
      for (std::size_t i = 0; i < constraints.size(); ++i) {
        const int n = rel[i];
        if (constraints[i] == SignConstraint::Less && !(n < 0)) excluded = false;
        if (constraints[i] == SignConstraint::Greater && !(n > 0)) excluded = false;
      }
      return !excluded;
    }
  }
  return false;
}

bool Region::orbit_closed() const {
  if (center && !center->is_zero()) return false;
  switch (kind) {
    case Kind::FullBox:
      return true;
    case Kind::BoxMinusS:
      for (const auto& s : S) {
        for (const auto& o : orbit(s)) {
          if (o.linf() <= N && !std::binary_search(S.begin(), S.end(), o)) return false;
        }
      }
      return true;
    case Kind::GeneralizedBox:
      return false;
  }
  return false;
}

void Region::validate(int d) const {
  if (N < 0) throw std::invalid_argument("region side N must be >= 0");
  if (center && center->d() != d) throw DimensionMismatch("region center has wrong d");
  for (const auto& s : S) {
    if (s.d() != d) throw DimensionMismatch("region S entry has wrong d");
  }
  if (kind == Kind::GeneralizedBox) {
    if (static_cast<int>(constraints.size()) != kBlockDim * d) {
      throw DimensionMismatch("generalized box needs 2d sign constraints");
    }
    const auto active = std::count_if(constraints.begin(), constraints.end(),
                                      [](SignConstraint c) { return c != SignConstraint::None; });
    if (active < 2) throw std::invalid_argument("generalized box needs at least two active constraints");
  }
}

std::vector<LatticeIndex> enumerate_region(const Region& r, int d) {
  r.validate(d);
  BoxIndexer box(d, r.N, r.center);
  std::vector<LatticeIndex> out;
  out.reserve(box.volume());
  for (std::size_t i = 0; i < box.volume(); ++i) {
    LatticeIndex j = box.site(i);
    if (r.kind == Region::Kind::FullBox || r.contains(j)) out.push_back(std::move(j));
  }
  return out;
}

BoxIndexer::BoxIndexer(int d, int N, std::optional<LatticeIndex> center)
    : d_(d), N_(N), side_(static_cast<std::size_t>(2 * N + 1)) {
  center_ = center ? std::vector<int>(center->coords().begin(), center->coords().end())
                   : std::vector<int>(static_cast<std::size_t>(kBlockDim * d), 0);
  volume_ = 1;
  for (int i = 0; i < kBlockDim * d; ++i) volume_ *= side_;
}

std::optional<std::size_t> BoxIndexer::linear(std::span<const int> coords) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const int rel = coords[i] - center_[i];
    if (rel < -N_ || rel > N_) return std::nullopt;
    idx = idx * side_ + static_cast<std::size_t>(rel + N_);
  }
  return idx;
}

LatticeIndex BoxIndexer::site(std::size_t linear) const {
  std::vector<int> c(static_cast<std::size_t>(kBlockDim * d_));
  for (std::size_t i = c.size(); i-- > 0;) {
    c[i] = static_cast<int>(linear % side_) - N_ + center_[i];
    linear /= side_;
  }
  return LatticeIndex(std::move(c));
}

std::string to_string(SignConstraint c) {
  switch (c) {
    case SignConstraint::Less: return "<";
    case SignConstraint::Greater: return ">";
    case SignConstraint::None: return "none";
  }
  return "none";
}

SignConstraint sign_constraint_from_string(const std::string& s) {
  if (s == "<") return SignConstraint::Less;
  if (s == ">") return SignConstraint::Greater;
  if (s == "none") return SignConstraint::None;
  throw std::invalid_argument("unknown sign constraint '" + s + "'");
}

std::string to_string(Region::Kind k) {
  switch (k) {
    case Region::Kind::FullBox: return "FullBox";
    case Region::Kind::BoxMinusS: return "BoxMinusS";
    case Region::Kind::GeneralizedBox: return "GeneralizedBox";
  }
  return "FullBox";
}

Region::Kind region_kind_from_string(const std::string& s) {
  if (s == "FullBox") return Region::Kind::FullBox;
  if (s == "BoxMinusS") return Region::Kind::BoxMinusS;
  if (s == "GeneralizedBox") return Region::Kind::GeneralizedBox;
  throw std::invalid_argument("unknown region kind '" + s + "'");
}

}  // namespace qpwave
