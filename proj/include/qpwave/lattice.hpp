#pragma once

// Index arithmetic on Z^{2d}: a site is d blocks, each block an integer pair.
// The lattice norm is the l-infinity norm over all 2d flattened coordinates.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qpwave {

inline constexpr int kBlockDim = 2;

using IntPair = std::array<int, 2>;
using RealPair = std::array<double, 2>;

class LatticeIndex {
 public:
  LatticeIndex() = default;
  // coords.size() must be a positive multiple of two.
  explicit LatticeIndex(std::vector<int> coords);

  static LatticeIndex zero(int d);
  static LatticeIndex from_blocks(const std::vector<IntPair>& blocks);

  int d() const { return static_cast<int>(coords_.size()) / kBlockDim; }
  std::size_t size() const { return coords_.size(); }
  std::span<const int> coords() const { return coords_; }
  int operator[](std::size_t i) const { return coords_[i]; }
  IntPair block(int k) const { return {coords_[2 * k], coords_[2 * k + 1]}; }

  bool is_zero() const;
  bool block_is_zero(int k) const;
  int nonzero_blocks() const;
  int linf() const;

  LatticeIndex operator+(const LatticeIndex& o) const;
  LatticeIndex operator-(const LatticeIndex& o) const;
  LatticeIndex operator-() const;
  LatticeIndex scaled(int factor) const;
  // Flip the sign of every block k with (mask >> k) & 1.
  LatticeIndex flipped(unsigned mask) const;

  auto operator<=>(const LatticeIndex&) const = default;
  bool operator==(const LatticeIndex&) const = default;

  std::string to_string() const;

 private:
  std::vector<int> coords_;
};

struct LatticeIndexHash {
  std::size_t operator()(const LatticeIndex& j) const noexcept;
};

// lambda = (lambda_1, ..., lambda_d), every component in the open interval (1/2, 3/2).
class Frequency {
 public:
  Frequency() = default;
  explicit Frequency(std::vector<double> comps);

  int d() const { return static_cast<int>(comps_.size()) / kBlockDim; }
  std::span<const double> comps() const { return comps_; }
  RealPair block(int k) const { return {comps_[2 * k], comps_[2 * k + 1]}; }

  bool operator==(const Frequency&) const = default;

 private:
  std::vector<double> comps_;
};

double block_inner(const IntPair& jk, const RealPair& lk);

// (j . lambda)^2 = sum_k (j_k . lambda_k)^2
double symbol(const LatticeIndex& j, const Frequency& lambda);

// sum_k (j_k . lambda_k + theta_k)^2
double shifted_symbol(const LatticeIndex& j, const Frequency& lambda,
                      std::span<const double> theta);

// Per-block sign-flip orbit, lexicographically sorted. Size 2^(nonzero blocks).
std::vector<LatticeIndex> orbit(const LatticeIndex& j);
int orbit_size(const LatticeIndex& j);
// Orbit representative: in every nonzero block the first nonzero coordinate is positive.
LatticeIndex canonical(const LatticeIndex& j);
bool is_canonical(const LatticeIndex& j);

enum class SignConstraint { None, Less, Greater };

// A finite set of sites. Boxes are centered at `center` (the origin unless a
// translated copy is needed, e.g. for covariance checks).
struct Region {
  enum class Kind { FullBox, BoxMinusS, GeneralizedBox };

  Kind kind = Kind::FullBox;
  int N = 0;
  std::vector<LatticeIndex> S;                // BoxMinusS only
  std::vector<SignConstraint> constraints;    // GeneralizedBox only, length 2d
  std::optional<LatticeIndex> center;

  static Region full_box(int N);
  static Region box_minus(int N, std::vector<LatticeIndex> S);
  static Region generalized_box(int N, std::vector<SignConstraint> constraints);

  Region translated(const LatticeIndex& shift) const;

  bool contains(const LatticeIndex& j) const;
  // Whether every sign-flip orbit meets the region either fully or not at all.
  bool orbit_closed() const;
  void validate(int d) const;
};

std::vector<LatticeIndex> enumerate_region(const Region& r, int d);

// Mixed-radix addressing of the box [c-N, c+N]^{2d}; linear order equals the
// lexicographic order of the sites.
class BoxIndexer {
 public:
  BoxIndexer(int d, int N, std::optional<LatticeIndex> center = std::nullopt);

  std::size_t volume() const { return volume_; }
  // Returns nullopt when the coordinates lie outside the box.
  std::optional<std::size_t> linear(std::span<const int> coords) const;
  LatticeIndex site(std::size_t linear) const;

 private:
  int d_;
  int N_;
  std::vector<int> center_;
  std::size_t side_;
  std::size_t volume_;
};

std::string to_string(SignConstraint c);
SignConstraint sign_constraint_from_string(const std::string& s);
std::string to_string(Region::Kind k);
Region::Kind region_kind_from_string(const std::string& s);

}  // namespace qpwave
