#pragma once

// Tokenization, n-gram counting, string similarity and the evaluation
// metrics shared by retrieval, generation and filtering.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "d2s/error.hpp"

namespace d2s {

using TokenSeq = std::vector<std::string>;

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; advances i. Malformed bytes
// decode as themselves so tokenization never fails.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) noexcept {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    if (int c1 = cont(1); c1 >= 0) {
      i += 2;
      return (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      i += 3;
      return (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      i += 4;
      return (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
             char32_t(c3);
    }
  }
  ++i;
  return b0;
}

// Separators: ASCII non-alphanumerics, Unicode spaces, Latin-1 punctuation
// and the General Punctuation block.
inline bool is_separator(char32_t cp) noexcept {
  if (cp < 0x80) {
    return !((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9'));
  }
  if (cp >= 0x80 && cp <= 0xBF) return true;  // C1 controls, NBSP, Latin-1 symbols
  if (cp == 0xD7 || cp == 0xF7) return true;   // multiplication / division signs
  if (cp == 0x1680 || cp == 0x3000 || cp == 0xFEFF) return true;
  if (cp >= 0x2000 && cp <= 0x206F) return true;
  if (cp >= 0x3001 && cp <= 0x3003) return true;
  return false;
}

inline char ascii_lower(char c) noexcept {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string join_ngram(std::span<const std::string> tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key.push_back('\x1f');
    key += tokens[i];
  }
  return key;
}

}  // namespace detail

/// Lowercases ASCII and splits on whitespace and punctuation. Non-ASCII
/// letters are kept verbatim inside tokens.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = detail::decode_utf8(text, i);
    if (detail::is_separator(cp)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
      continue;
    }
    if (cp < 0x80) {
      cur.push_back(detail::ascii_lower(static_cast<char>(cp)));
    } else {
      cur.append(text.substr(start, i - start));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::size_t token_count(std::string_view text) { return tokenize(text).size(); }

/// An n-gram keyed as its tokens joined by U+001F.
using Ngram = std::string;
using NgramCounts = std::map<Ngram, std::size_t>;

/// All contiguous n-grams in order, duplicates kept.
inline std::vector<Ngram> ngrams(std::span<const std::string> seq, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::InvalidN, "n-gram order must be >= 1");
  std::vector<Ngram> out;
  if (seq.size() < n) return out;
  out.reserve(seq.size() - n + 1);
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    out.push_back(detail::join_ngram(seq.subspan(i, n)));
  }
  return out;
}

inline NgramCounts count_ngrams(std::span<const std::string> seq, std::size_t n) {
  NgramCounts counts;
  for (auto& g : ngrams(seq, n)) ++counts[g];
  return counts;
}

struct RougeScore {
  double p = 0.0;
  double r = 0.0;
  double f = 0.0;

  bool operator==(const RougeScore&) const = default;
};

inline RougeScore make_rouge_score(double overlap, double cand_units, double ref_units) {
  RougeScore s;
  if (cand_units <= 0.0 || ref_units <= 0.0) return s;
  s.p = overlap / cand_units;
  s.r = overlap / ref_units;
  s.f = (s.p + s.r) > 0.0 ? 2.0 * s.p * s.r / (s.p + s.r) : 0.0;
  return s;
}

struct RougeReport {
  RougeScore r1;
  RougeScore r2;
  RougeScore rl;

  bool operator==(const RougeReport&) const = default;

  /// Fixed order: r1_p, r1_r, r1_f, r2_p, r2_r, r2_f, rl_p, rl_r, rl_f.
  std::array<double, 9> values() const {
    return {r1.p, r1.r, r1.f, r2.p, r2.r, r2.f, rl.p, rl.r, rl.f};
  }
};

inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline RougeScore rouge_n(std::span<const std::string> candidate,
                          std::span<const std::string> reference, std::size_t n) {
  const auto cand = count_ngrams(candidate, n);
  const auto ref = count_ngrams(reference, n);
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (auto& [g, c] : cand) cand_total += c;
  for (auto& [g, c] : ref) {
    ref_total += c;
    if (auto it = cand.find(g); it != cand.end()) overlap += std::min(c, it->second);
  }
  return make_rouge_score(double(overlap), double(cand_total), double(ref_total));
}

inline RougeScore rouge_l(std::span<const std::string> candidate,
                          std::span<const std::string> reference) {
  return make_rouge_score(double(lcs_length(candidate, reference)), double(candidate.size()),
                          double(reference.size()));
}

/// ROUGE-1/2 by clipped n-gram overlap, ROUGE-L by LCS. No stemming and no
/// stopword removal.
inline RougeReport rouge(std::span<const std::string> candidate,
                         std::span<const std::string> reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2),
          rouge_l(candidate, reference)};
}

inline nlohmann::json to_json(const RougeReport& r) {
  return {{"r1_p", r.r1.p}, {"r1_r", r.r1.r}, {"r1_f", r.r1.f},
          {"r2_p", r.r2.p}, {"r2_r", r.r2.r}, {"r2_f", r.r2.f},
          {"rl_p", r.rl.p}, {"rl_r", r.rl.r}, {"rl_f", r.rl.f}};
}

/// Smoothed inverse document frequency: idf(w) = ln((N+1)/(df+1)) + 1.
class IdfTable {
 public:
  IdfTable() = default;

  explicit IdfTable(std::span<const TokenSeq> corpus) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "idf corpus has no documents");
    n_docs_ = corpus.size();
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
      std::unordered_set<std::string_view> seen(doc.begin(), doc.end());
      for (auto w : seen) ++df[std::string(w)];
    }
    for (auto& [w, d] : df) weights_.emplace(w, smooth(d));
  }

  /// Rebuilds a table from stored weights (model deserialization).
  IdfTable(std::size_t n_docs, std::map<std::string, double, std::less<>> weights)
      : n_docs_(n_docs), weights_(std::move(weights)) {}

  double operator()(std::string_view token) const {
    if (auto it = weights_.find(token); it != weights_.end()) return it->second;
    return unseen();
  }

  double unseen() const { return std::log(double(n_docs_) + 1.0) + 1.0; }
  std::size_t documents() const { return n_docs_; }
  const std::map<std::string, double, std::less<>>& weights() const { return weights_; }

  bool operator==(const IdfTable&) const = default;

 private:
  double smooth(std::size_t df) const {
    return std::log((double(n_docs_) + 1.0) / (double(df) + 1.0)) + 1.0;
  }

  std::size_t n_docs_ = 0;
  std::map<std::string, double, std::less<>> weights_;
};

inline IdfTable idf_table(std::span<const TokenSeq> corpus) { return IdfTable(corpus); }

/// IDF-weighted share of the reference's word types that also occur in the
/// retrieved text.
inline double idf_recall(std::span<const std::string> reference,
                         std::span<const std::string> retrieved, const IdfTable& idf) {
  if (reference.empty()) throw Error(ErrorCode::EmptyReference, "reference has no tokens");
  const std::set<std::string_view> ref_types(reference.begin(), reference.end());
  const std::unordered_set<std::string_view> got(retrieved.begin(), retrieved.end());
  double hit = 0.0, total = 0.0;
  for (auto w : ref_types) {
    const double weight = idf(w);
    total += weight;
    if (got.contains(w)) hit += weight;
  }
  return total > 0.0 ? hit / total : 0.0;
}

/// Fraction of the target's n-gram occurrences that never occur in the source.
inline double novel_ngram_ratio(std::span<const std::string> target,
                                std::span<const std::string> source, std::size_t n) {
  const auto tgt = ngrams(target, n);
  if (tgt.empty()) throw Error(ErrorCode::NoNgrams, "target yields no n-grams");
  const auto src = ngrams(source, n);
  const std::unordered_set<std::string> src_set(src.begin(), src.end());
  std::size_t novel = 0;
  for (auto& g : tgt) novel += src_set.contains(g) ? 0 : 1;
  return double(novel) / double(tgt.size());
}

/// Indel-weighted edit distance (insert = delete = 1, substitute = 2) over
/// ASCII-lowercased bytes.
inline std::size_t indel_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    const char ca = detail::ascii_lower(a[i - 1]);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const char cb = detail::ascii_lower(b[j - 1]);
      const std::size_t sub = prev[j - 1] + (ca == cb ? 0 : 2);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double levenshtein_ratio(std::string_view a, std::string_view b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 1.0;
  return double(total - indel_distance(a, b)) / double(total);
}

/// |top-k ∩ relevant| / k; short rankings still divide by k.
template <typename Id, typename Set>
double precision_at_k(std::span<const Id> ranked, const Set& relevant, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  std::size_t hits = 0;
  const std::size_t upto = std::min(k, ranked.size());
  for (std::size_t i = 0; i < upto; ++i) hits += relevant.contains(ranked[i]) ? 1 : 0;
  return double(hits) / double(k);
}

}  // namespace d2s
