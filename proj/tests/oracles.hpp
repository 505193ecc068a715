#pragma once

// Reference implementations used only by the tests. They trade speed for
// obviousness and share no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <numeric>
#include <vector>

#include "kora9/sensor.hpp"

namespace oracle {

// Direct 2D DFT with FFT-shifted Doppler axis and the first N/2 range bins.
inline std::vector<std::complex<double>> dft_range_doppler(const std::vector<std::complex<double>>& data,
                                                           std::size_t ramps, std::size_t samples,
                                                           const std::vector<double>& w_fast,
                                                           const std::vector<double>& w_slow) {
  const std::size_t nr = samples / 2;
  std::vector<std::complex<double>> out(ramps * nr);
  for (std::size_t k = 0; k < ramps; ++k) {
    const std::size_t kk = (k + ramps - ramps / 2) % ramps;  // unshifted index
    for (std::size_t r = 0; r < nr; ++r) {
      std::complex<double> acc = 0.0;
      for (std::size_t m = 0; m < ramps; ++m)
        for (std::size_t n = 0; n < samples; ++n) {
          const double ph = -2.0 * std::numbers::pi *
                            (static_cast<double>(r * n) / static_cast<double>(samples) +
                             static_cast<double>(kk * m) / static_cast<double>(ramps));
          acc += data[m * samples + n] * w_fast[n] * w_slow[m] * std::polar(1.0, ph);
        }
      out[k * nr + r] = acc;
    }
  }
  return out;
}

struct UnionFind {
  std::vector<std::size_t> p;
  explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), std::size_t{0}); }
  std::size_t find(std::size_t i) {
    while (p[i] != i) i = p[i] = p[p[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) { p[find(a)] = find(b); }
};

// Brute-force DBSCAN: clusters are connected components of core points; a
// border point belongs to the adjacent component whose smallest core index is
// lowest. Labels are component ranks by smallest core index; -1 is noise.
template <class Adj>
std::vector<int> dbscan(std::size_t n, int min_pts, Adj adjacent) {
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int cnt = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (i == j || adjacent(i, j)) ++cnt;
    core[i] = cnt >= min_pts;
  }
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (core[i] && core[j] && i != j && adjacent(i, j)) uf.unite(i, j);
  std::map<std::size_t, std::size_t> min_core;  // root -> smallest core index
  for (std::size_t i = 0; i < n; ++i)
    if (core[i]) {
      auto [it, ins] = min_core.emplace(uf.find(i), i);
      if (!ins) it->second = std::min(it->second, i);
    }
  std::vector<std::size_t> order;
  for (auto& [root, mc] : min_core) order.push_back(mc);
  std::sort(order.begin(), order.end());
  std::map<std::size_t, int> rank;  // root -> label
  for (std::size_t r = 0; r < order.size(); ++r) rank[uf.find(order[r])] = static_cast<int>(r);

  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      labels[i] = rank[uf.find(i)];
      continue;
    }
    int best = -1;
    for (std::size_t j = 0; j < n; ++j)
      if (core[j] && adjacent(i, j)) {
        const int l = rank[uf.find(j)];
        if (best < 0 || l < best) best = l;
      }
    labels[i] = best;
  }
  return labels;
}

// Equal up to a bijective renaming of non-noise labels.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [i1, n1] = ab.emplace(a[i], b[i]);
    auto [i2, n2] = ba.emplace(b[i], a[i]);
    if (i1->second != b[i] || i2->second != a[i]) return false;
  }
  return true;
}

// Dense sampling of the segment against the rectangle.
inline bool segment_hits_rect(kora9::Point2 a, kora9::Point2 b, double s_lo, double s_hi, double d_lo, double d_hi,
                              int steps = 20000) {
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double s = a.s + t * (b.s - a.s);
    const double d = a.d + t * (b.d - a.d);
    if (s >= s_lo && s <= s_hi && d >= d_lo && d <= d_hi) return true;
  }
  return false;
}

}  // namespace oracle
