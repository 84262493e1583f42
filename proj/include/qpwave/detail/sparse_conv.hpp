#pragma once

// Sparse convolution kernel shared by the real (symmetric) and complex series.
// Pairs are visited in a fixed order so every output coefficient is summed in
// the same order on every run.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qpwave/lattice.hpp"

namespace qpwave::detail {

template <class T>
struct FlatSupport {
  int dim = 0;                 // 2d
  std::vector<int> coords;     // size() * dim
  std::vector<T> values;
  int radius = 0;

  std::size_t size() const { return values.size(); }

  static FlatSupport from(int dim, const std::vector<std::pair<LatticeIndex, T>>& entries) {
    FlatSupport f;
    f.dim = dim;
    f.coords.reserve(entries.size() * static_cast<std::size_t>(dim));
    f.values.reserve(entries.size());
    for (const auto& [j, v] : entries) {
      for (int c : j.coords()) {
        f.coords.push_back(c);
        f.radius = std::max(f.radius, std::abs(c));
      }
      f.values.push_back(v);
    }
    return f;
  }
};

inline bool coords_canonical(const int* c, int dim) {
  for (int k = 0; k < dim; k += 2) {
    if (c[k] < 0 || (c[k] == 0 && c[k + 1] < 0)) return false;
  }
  return true;
}

// Returns lexicographically sorted (site, value) pairs of A*B restricted to
// |j|_inf <= out_radius, optionally only canonical orbit representatives.
template <class T>
std::vector<std::pair<LatticeIndex, T>> sparse_convolve(const FlatSupport<T>& A,
                                                       const FlatSupport<T>& B,
                                                       int out_radius, bool canonical_only) {
  const int dim = A.dim;
  const int R = std::min(out_radius, A.radius + B.radius);
  const std::uint64_t side = static_cast<std::uint64_t>(2 * R + 1);
  std::uint64_t volume = 1;
  bool fits = true;
  for (int i = 0; i < dim; ++i) {
    volume *= side;
    if (volume > (std::uint64_t{1} << 22)) fits = false;
  }
  // A dense accumulator pays for itself only when the pair count is comparable.
  const std::uint64_t pairs = static_cast<std::uint64_t>(A.size()) * B.size();
  const bool dense = fits && volume <= std::max<std::uint64_t>(std::uint64_t{1} << 16, 4 * pairs);

  std::vector<T> dense_acc;
  std::vector<char> touched;
  std::unordered_map<std::uint64_t, T> sparse_acc;
  if (dense) {
    dense_acc.assign(volume, T{});
    touched.assign(volume, 0);
  }

  std::vector<int> buf(static_cast<std::size_t>(dim));
  for (std::size_t a = 0; a < A.size(); ++a) {
    const int* ca = &A.coords[a * dim];
    const T va = A.values[a];
    for (std::size_t b = 0; b < B.size(); ++b) {
      const int* cb = &B.coords[b * dim];
      bool inside = true;
      std::uint64_t key = 0;
      for (int i = 0; i < dim; ++i) {
        const int s = ca[i] + cb[i];
        if (s < -R || s > R) {
          inside = false;
          break;
        }
        buf[i] = s;
        key = key * side + static_cast<std::uint64_t>(s + R);
      }
      if (!inside) continue;
      if (canonical_only && !coords_canonical(buf.data(), dim)) continue;
      const T prod = va * B.values[b];
      if (dense) {
        dense_acc[key] += prod;
        touched[key] = 1;
      } else {
        sparse_acc[key] += prod;
      }
    }
  }

  std::vector<std::pair<std::uint64_t, T>> flat;
  if (dense) {
    for (std::uint64_t k = 0; k < volume; ++k) {
      if (touched[k] && dense_acc[k] != T{}) flat.emplace_back(k, dense_acc[k]);
    }
  } else {
    flat.reserve(sparse_acc.size());
    for (const auto& [k, v] : sparse_acc) {
      if (v != T{}) flat.emplace_back(k, v);
    }
    std::sort(flat.begin(), flat.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
  }

  std::vector<std::pair<LatticeIndex, T>> out;
  out.reserve(flat.size());
  for (const auto& [k, v] : flat) {
    std::vector<int> c(static_cast<std::size_t>(dim));
    std::uint64_t rem = k;
    for (int i = dim; i-- > 0;) {
      c[i] = static_cast<int>(rem % side) - R;
      rem /= side;
    }
    out.emplace_back(LatticeIndex(std::move(c)), v);
  }
  return out;
}

}  // namespace qpwave::detail
