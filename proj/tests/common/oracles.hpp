#pragma once

// Slow reference implementations used as test oracles. They deliberately
// avoid the library's own helpers.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace d2s::oracle {

using Tokens = std::vector<std::string>;

inline std::vector<Tokens> grams(const Tokens& s, std::size_t n) {
  std::vector<Tokens> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) out.emplace_back(s.begin() + long(i), s.begin() + long(i + n));
  return out;
}

inline std::size_t occurrences(const std::vector<Tokens>& bag, const Tokens& g) {
  return std::size_t(std::count(bag.begin(), bag.end(), g));
}

// Clipped multiset intersection by explicit counting over distinct grams.
inline std::size_t clipped_overlap(const Tokens& cand, const Tokens& ref, std::size_t n) {
  const auto c = grams(cand, n), r = grams(ref, n);
  std::vector<Tokens> distinct;
  for (const auto& g : r) {
    if (std::find(distinct.begin(), distinct.end(), g) == distinct.end()) distinct.push_back(g);
  }
  std::size_t total = 0;
  for (const auto& g : distinct) total += std::min(occurrences(c, g), occurrences(r, g));
  return total;
}

inline bool is_subsequence(const Tokens& sub, const Tokens& of) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < of.size() && j < sub.size(); ++i) {
    if (of[i] == sub[j]) ++j;
  }
  return j == sub.size();
}

// LCS by enumerating every subsequence of the shorter side (lengths <= ~16).
inline std::size_t lcs_enumerate(const Tokens& a, const Tokens& b) {
  const Tokens& s = a.size() <= b.size() ? a : b;
  const Tokens& t = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
    const auto bits = std::size_t(std::popcount(mask));
    if (bits <= best) continue;
    Tokens sub;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (mask & (1u << i)) sub.push_back(s[i]);
    }
    if (is_subsequence(sub, t)) best = bits;
  }
  return best;
}

inline std::array<double, 3> prf(double overlap, double cand, double ref) {
  if (cand == 0 || ref == 0) return {0, 0, 0};
  const double p = overlap / cand, r = overlap / ref;
  return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0};
}

inline std::array<double, 9> rouge(const Tokens& cand, const Tokens& ref) {
  std::array<double, 9> out{};
  for (std::size_t n = 1; n <= 2; ++n) {
    const double c = double(cand.size() >= n ? cand.size() - n + 1 : 0);
    const double r = double(ref.size() >= n ? ref.size() - n + 1 : 0);
    const auto v = prf(double(clipped_overlap(cand, ref, n)), c, r);
    std::copy(v.begin(), v.end(), out.begin() + long(3 * (n - 1)));
  }
  const auto l = prf(double(lcs_enumerate(cand, ref)), double(cand.size()), double(ref.size()));
  std::copy(l.begin(), l.end(), out.begin() + 6);
  return out;
}

inline char lower(char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; }

// Full-table edit distance with insert = delete = 1, substitute = 2.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = lower(a[i - 1]) == lower(b[j - 1]) ? 0 : 2;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + sub});
    }
  }
  return d[a.size()][b.size()];
}

inline double levenshtein_ratio(const std::string& a, const std::string& b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 1.0;
  return double(total - edit_distance(a, b)) / double(total);
}

// Character LCS; with substitution cost 2 the edit distance equals
// |a| + |b| - 2 * LCS.
inline std::size_t char_lcs(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> L(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      L[i][j] = lower(a[i - 1]) == lower(b[j - 1]) ? L[i - 1][j - 1] + 1 : std::max(L[i - 1][j], L[i][j - 1]);
    }
  }
  return L[a.size()][b.size()];
}

struct Ranked {
  std::size_t id;
  double score;
};

// Scores every row and sorts the whole list: score descending, id ascending.
inline std::vector<Ranked> brute_force_rank(const std::vector<std::vector<double>>& text,
                                            const std::vector<std::vector<double>>& kw,
                                            const std::vector<double>& q, double alpha) {
  std::vector<Ranked> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    double ts = 0, ks = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      ts += q[j] * text[i][j];
      ks += q[j] * kw[i][j];
    }
    out.push_back({i, alpha * ts + (1 - alpha) * ks});
  }
  std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return out;
}

// Descendants of `node` found by walking every node's parent chain.
inline std::vector<std::size_t> reachable(const std::vector<long>& parent, std::size_t node) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < parent.size(); ++v) {
    for (long u = parent[v]; u >= 0; u = parent[std::size_t(u)]) {
      if (std::size_t(u) == node) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

}  // namespace d2s::oracle
