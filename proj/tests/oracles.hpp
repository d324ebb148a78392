#pragma once

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks: exhaustive enumeration, long double
// arithmetic, or a third-party distribution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace oracle {

// Longest common subsequence by trying every subsequence of the shorter list.
inline std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& s = a.size() <= b.size() ? a : b;
  const auto& l = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
    const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
    if (bits <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < l.size() && l[j] != s[i]) ++j;
      if (j == l.size()) ok = false;
      else ++j;
    }
    if (ok) best = bits;
  }
  return best;
}

// Unsmoothed single-reference BLEU over joined n-gram strings.
inline long double bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                        int max_n) {
  if (cand.empty()) return 0;
  const int n_eff = std::min<int>(max_n, static_cast<int>(cand.size()));
  long double log_sum = 0;
  for (int n = 1; n <= n_eff; ++n) {
    auto grams = [n](const std::vector<std::string>& t) {
      std::map<std::string, int> m;
      for (std::size_t i = 0; i + n <= t.size(); ++i) {
        std::string g;
        for (int k = 0; k < n; ++k) g += t[i + k] + '\x1f';
        ++m[g];
      }
      return m;
    };
    const auto c = grams(cand), r = grams(ref);
    long double hit = 0, total = 0;
    for (const auto& [g, cnt] : c) {
      total += cnt;
      const auto it = r.find(g);
      if (it != r.end()) hit += std::min(cnt, it->second);
    }
    if (hit == 0) return 0;
    log_sum += std::log(hit / total);
  }
  const long double c = cand.size(), r = ref.size();
  const long double bp = c < r ? std::exp(1 - r / c) : 1;
  return bp * std::exp(log_sum / n_eff);
}

struct Cell {
  int x0, y0, size;
  bool operator<(const Cell& o) const {
    return std::tie(y0, x0, size) < std::tie(o.y0, o.x0, o.size);
  }
  bool operator==(const Cell&) const = default;
};

// Foveated layout computed cell by cell: each base cell climbs the aligned
// block hierarchy for as long as the block at the next level would merge.
inline std::set<Cell> foveated_cells(int w, int h, double gx, double gy, int base,
                                     const std::vector<double>& radii) {
  const int levels = static_cast<int>(radii.size());
  // mergeable(level, bx, by): the aligned block of size base<<level at block
  // coordinates (bx, by) is a single patch.
  std::map<std::tuple<int, int, int>, bool> memo;
  auto mergeable = [&](auto&& self, int level, long bx, long by) -> bool {
    const long size = static_cast<long>(base) << level;
    const long x0 = bx * size, y0 = by * size;
    if (x0 + size > w || y0 + size > h) return false;
    if (level == 0) return true;
    const auto key = std::make_tuple(level, static_cast<int>(bx), static_cast<int>(by));
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    bool ok = true;
    const double r = radii[static_cast<std::size_t>(level - 1)];
    for (int c = 0; c < 4 && ok; ++c) {
      const double cx = static_cast<double>(x0 + (c & 1 ? size : 0));
      const double cy = static_cast<double>(y0 + (c & 2 ? size : 0));
      if (!(std::hypot(cx - gx, cy - gy) > r)) ok = false;
    }
    for (int c = 0; c < 4 && ok; ++c)
      if (!self(self, level - 1, bx * 2 + (c & 1), by * 2 + (c >> 1))) ok = false;
    memo[key] = ok;
    return ok;
  };
  std::set<Cell> cells;
  for (int j = 0; j < h / base; ++j)
    for (int i = 0; i < w / base; ++i) {
      int level = 0;
      while (level < levels && mergeable(mergeable, level + 1, i >> (level + 1), j >> (level + 1)))
        ++level;
      const int size = base << level;
      cells.insert({(i >> level) * size, (j >> level) * size, size});
    }
  return cells;
}

// Size monotonicity: no patch lying entirely nearer the gaze than another
// patch may be larger than it. O(n log n) via the smallest far-distance seen
// among strictly larger patches.
inline bool size_monotonic(const std::set<Cell>& cells, double gx, double gy) {
  struct D {
    int size;
    double lo, hi;
  };
  std::vector<D> d;
  for (const auto& c : cells) {
    const double nx = std::clamp(gx, double(c.x0), double(c.x0 + c.size));
    const double ny = std::clamp(gy, double(c.y0), double(c.y0 + c.size));
    double hi = 0;
    for (int k = 0; k < 4; ++k)
      hi = std::max(hi, std::hypot(c.x0 + (k & 1 ? c.size : 0) - gx, c.y0 + (k & 2 ? c.size : 0) - gy));
    d.push_back({c.size, std::hypot(nx - gx, ny - gy), hi});
  }
  std::sort(d.begin(), d.end(), [](const D& a, const D& b) { return a.size > b.size; });
  double min_hi_larger = INFINITY, min_hi_here = INFINITY;
  int current = -1;
  for (const auto& x : d) {
    if (x.size != current) {
      min_hi_larger = std::min(min_hi_larger, min_hi_here);
      min_hi_here = INFINITY;
      current = x.size;
    }
    if (min_hi_larger < x.lo) return false;
    min_hi_here = std::min(min_hi_here, x.hi);
  }
  return true;
}

struct Stats {
  long double mean = 0, sd = 0;
};

inline Stats mean_sd(const std::vector<double>& v) {
  Stats s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<long double>(v.size());
  if (v.size() > 1) {
    long double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<long double>(v.size() - 1));
  }
  return s;
}

struct TTest {
  long double t;
  double p;
};

inline TTest paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto s = mean_sd(d);
  const long double t = s.mean / (s.sd / std::sqrt(static_cast<long double>(d.size())));
  const boost::math::students_t dist(static_cast<double>(d.size() - 1));
  const double p = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(static_cast<double>(t))));
  return {t, p};
}

inline long double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto sx = mean_sd(x), sy = mean_sd(y);
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - sx.mean) * (y[i] - sy.mean);
    sxx += (x[i] - sx.mean) * (x[i] - sx.mean);
    syy += (y[i] - sy.mean) * (y[i] - sy.mean);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
