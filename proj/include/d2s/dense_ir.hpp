#pragma once

// Snippet retrieval. A paper is cut into passages of up to four sentences;
// each passage is scored against a title by
//   alpha * (title . text) + (1 - alpha) * (title . keyword)
// and the top k are returned by exact maximum inner product search.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "d2s/binary_io.hpp"
#include "d2s/doc_model.hpp"
#include "d2s/embedder.hpp"
#include "d2s/error.hpp"
#include "d2s/keyword_tree.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

inline constexpr std::size_t kDefaultSnippetWindow = 4;
inline constexpr double kDefaultAlpha = 0.75;
inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr std::size_t kDefaultContextBudget = 1024;

struct Snippet {
  std::size_t snippet_id = 0;
  SnippetSpan span;
  std::vector<std::string> sentences;
  std::string text;     // sentences joined by single spaces
  std::string keyword;
  EmbeddingVector text_vec;
  EmbeddingVector kw_vec;

  bool operator==(const Snippet&) const = default;
};

/// Non-overlapping windows of `window` sentences inside each section. The
/// last window of a section may be shorter; windows never span sections.
inline std::vector<Snippet> snippetize(const PaperDoc& doc, const HeaderTree& tree,
                                       std::size_t window = kDefaultSnippetWindow) {
  if (window < 1) throw Error(ErrorCode::InvalidWindow, "window must be >= 1");
  if (doc.sentence_count() == 0) throw Error(ErrorCode::EmptyDocument, "paper has no sentences");
  std::vector<Snippet> out;
  for (std::size_t si = 0; si < doc.sections.size(); ++si) {
    const auto& sentences = doc.sections[si].sentences;
    for (std::size_t start = 0; start < sentences.size(); start += window) {
      Snippet s;
      s.snippet_id = out.size();
      s.span = {si, start, std::min(start + window, sentences.size())};
      s.sentences.assign(sentences.begin() + std::ptrdiff_t(s.span.start),
                         sentences.begin() + std::ptrdiff_t(s.span.end));
      for (const auto& sent : s.sentences) {
        if (!s.text.empty()) s.text.push_back(' ');
        s.text += sent;
      }
      s.keyword = snippet_keyword(tree, doc, s.span);
      out.push_back(std::move(s));
    }
  }
  return out;
}

struct ScoredCandidate {
  std::size_t snippet_id = 0;
  double score = 0.0;
  double text_score = 0.0;
  double kw_score = 0.0;

  bool operator==(const ScoredCandidate&) const = default;
};

/// Rank order: score descending, then snippet id ascending.
inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.snippet_id < b.snippet_id;
}

inline double mix_scores(double alpha, double text_score, double kw_score) {
  return alpha * text_score + (1.0 - alpha) * kw_score;
}

class SnippetIndex {
 public:
  static constexpr std::uint16_t kFileVersion = 1;

  SnippetIndex() = default;
  SnippetIndex(std::vector<Snippet> snippets, std::size_t dim, double alpha)
      : snippets_(std::move(snippets)), dim_(dim), alpha_(alpha) {
    check_alpha(alpha_);
    group_keywords();
  }

  static void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw Error(ErrorCode::AlphaOutOfRange, "alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
  }

  const std::vector<Snippet>& snippets() const { return snippets_; }
  const Snippet& snippet(std::size_t id) const { return snippets_.at(id); }
  std::size_t size() const { return snippets_.size(); }
  std::size_t dim() const { return dim_; }
  double alpha() const { return alpha_; }

  /// Same vectors, different mixing weight.
  SnippetIndex with_alpha(double alpha) const { return SnippetIndex(snippets_, dim_, alpha); }

  /// Exact top-k for a query vector. Snippets that share a keyword share its
  /// vector, so the keyword inner product is computed once per distinct
  /// keyword vector.
  std::vector<ScoredCandidate> search(std::span<const double> query, std::size_t k) const {
    return search(query, k, alpha_);
  }

  /// As above with an explicit mixing weight.
  std::vector<ScoredCandidate> search(std::span<const double> query, std::size_t k, double alpha) const {
    check_alpha(alpha);
    std::vector<double> kw_scores(kw_groups_.size());
    for (std::size_t g = 0; g < kw_groups_.size(); ++g) {
      kw_scores[g] = dot(query, snippets_[kw_groups_[g]].kw_vec);
    }
    std::vector<ScoredCandidate> all;
    all.reserve(snippets_.size());
    for (std::size_t i = 0; i < snippets_.size(); ++i) {
      const double ts = dot(query, snippets_[i].text_vec);
      const double ks = kw_scores[kw_group_of_[i]];
      all.push_back({snippets_[i].snippet_id, mix_scores(alpha, ts, ks), ts, ks});
    }
    const std::size_t n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + std::ptrdiff_t(n), all.end(), ranks_before);
    all.resize(n);
    return all;
  }

  void save(std::ostream& out) const {
    binary::put_magic(out, "D2SI", kFileVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
    binary::put<double>(out, alpha_);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(snippets_.size()));
    for (const auto& s : snippets_) {
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.snippet_id));
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.span.section_index));
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.span.start));
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.span.end));
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.sentences.size()));
      for (const auto& sent : s.sentences) binary::put_string(out, sent);
      binary::put_string(out, s.keyword);
      for (double v : s.text_vec) binary::put<double>(out, v);
      for (double v : s.kw_vec) binary::put<double>(out, v);
    }
  }

  static SnippetIndex load(std::istream& in) {
    const auto version = binary::expect_magic(in, "D2SI");
    if (version != kFileVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported index version " + std::to_string(version));
    }
    const auto dim = binary::get<std::uint32_t>(in);
    const auto alpha = binary::get<double>(in);
    const auto count = binary::get<std::uint32_t>(in);
    std::vector<Snippet> snippets(count);
    for (auto& s : snippets) {
      s.snippet_id = binary::get<std::uint32_t>(in);
      s.span.section_index = binary::get<std::uint32_t>(in);
      s.span.start = binary::get<std::uint32_t>(in);
      s.span.end = binary::get<std::uint32_t>(in);
      const auto n_sent = binary::get<std::uint32_t>(in);
      for (std::uint32_t i = 0; i < n_sent; ++i) {
        s.sentences.push_back(binary::get_string(in));
        if (!s.text.empty()) s.text.push_back(' ');
        s.text += s.sentences.back();
      }
      s.keyword = binary::get_string(in);
      s.text_vec.resize(dim);
      s.kw_vec.resize(dim);
      for (auto& v : s.text_vec) v = binary::get<double>(in);
      for (auto& v : s.kw_vec) v = binary::get<double>(in);
    }
    return SnippetIndex(std::move(snippets), dim, alpha);
  }

  void save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    save(out);
  }

  static SnippetIndex load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    return load(in);
  }

 private:
  void group_keywords() {
    std::unordered_map<std::string, std::size_t> seen;
    kw_group_of_.clear();
    kw_groups_.clear();
    for (std::size_t i = 0; i < snippets_.size(); ++i) {
      const auto& s = snippets_[i];
      // Key on the vector bytes so differing vectors never share a group.
      std::string key(reinterpret_cast<const char*>(s.kw_vec.data()), s.kw_vec.size() * sizeof(double));
      auto [it, inserted] = seen.emplace(std::move(key), kw_groups_.size());
      if (inserted) kw_groups_.push_back(i);
      kw_group_of_.push_back(it->second);
    }
  }

  std::vector<Snippet> snippets_;
  std::size_t dim_ = 0;
  double alpha_ = kDefaultAlpha;
  std::vector<std::size_t> kw_groups_;    // representative snippet per group
  std::vector<std::size_t> kw_group_of_;  // group per snippet
};

template <TextEmbedder E>
SnippetIndex build_index(std::vector<Snippet> snippets, const E& embedder,
                         double alpha = kDefaultAlpha) {
  SnippetIndex::check_alpha(alpha);
  if (snippets.empty()) throw Error(ErrorCode::EmptySnippets, "nothing to index");
  std::unordered_map<std::string, EmbeddingVector> kw_cache;
  for (auto& s : snippets) {
    s.text_vec = embedder.embed(s.text);
    auto it = kw_cache.find(s.keyword);
    if (it == kw_cache.end()) it = kw_cache.emplace(s.keyword, embedder.embed(s.keyword)).first;
    s.kw_vec = it->second;
    if (s.text_vec.size() != embedder.dim() || s.kw_vec.size() != embedder.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "embedder returned a vector of the wrong size");
    }
  }
  return SnippetIndex(std::move(snippets), embedder.dim(), alpha);
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

template <TextEmbedder E>
std::vector<ScoredCandidate> retrieve(const SnippetIndex& index, std::string_view title,
                                      const E& embedder, std::size_t k = kDefaultTopK) {
  if (blank(title)) throw Error(ErrorCode::EmptyTitle, "title is empty");
  const auto query = embedder.embed(title);
  if (query.size() != index.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query dimension differs from index dimension");
  }
  return index.search(query, k);
}

/// Snippet texts in rank order joined by single spaces, cut at the last
/// whole sentence that fits in `budget_tokens`.
inline std::string context_text(std::span<const ScoredCandidate> candidates, const SnippetIndex& index,
                                std::size_t budget_tokens = kDefaultContextBudget) {
  std::string out;
  std::size_t used = 0;
  for (const auto& c : candidates) {
    for (const auto& sent : index.snippet(c.snippet_id).sentences) {
      const std::size_t n = token_count(sent);
      if (used + n > budget_tokens) return out;
      used += n;
      if (!out.empty()) out.push_back(' ');
      out += sent;
    }
  }
  return out;
}

inline nlohmann::json to_json(std::span<const ScoredCandidate> candidates, const SnippetIndex& index) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : candidates) {
    arr.push_back({{"snippet_id", c.snippet_id},
                   {"score", c.score},
                   {"text_score", c.text_score},
                   {"kw_score", c.kw_score},
                   {"keyword", index.snippet(c.snippet_id).keyword},
                   {"text", index.snippet(c.snippet_id).text}});
  }
  return {{"candidates", arr}};
}

}  // namespace d2s
