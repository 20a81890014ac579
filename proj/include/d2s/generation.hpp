#pragma once

// Query composition, slide-content generation and the end-to-end slide
// pipeline: match keywords, retrieve context, generate bullets, rank figures.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "d2s/dense_ir.hpp"
#include "d2s/doc_model.hpp"
#include "d2s/embedder.hpp"
#include "d2s/error.hpp"
#include "d2s/figure_select.hpp"
#include "d2s/http_client.hpp"
#include "d2s/keyword_tree.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

inline constexpr std::size_t kDefaultMinTokens = 64;
inline constexpr std::size_t kDefaultMaxTokens = 128;
inline constexpr std::string_view kSep1 = "[SEP1]";
inline constexpr std::string_view kSep2 = "[SEP2]";

struct GenerationQuery {
  std::string title;
  std::vector<std::string> keywords;
  std::string context;

  /// title[SEP1]kw1, kw2, ...[SEP2]context
  std::string wire() const {
    std::string out = title;
    out += kSep1;
    for (std::size_t i = 0; i < keywords.size(); ++i) {
      if (i) out += ", ";
      out += keywords[i];
    }
    out += kSep2;
    out += context;
    return out;
  }

  bool operator==(const GenerationQuery&) const = default;
};

/// Inverse of GenerationQuery::wire for titles without "[SEP1]" and
/// keywords without ", ".
inline GenerationQuery parse_query(std::string_view wire) {
  const auto s1 = wire.find(kSep1);
  if (s1 == std::string_view::npos) throw Error(ErrorCode::SchemaError, "query lacks [SEP1]");
  const auto s2 = wire.find(kSep2, s1 + kSep1.size());
  if (s2 == std::string_view::npos) throw Error(ErrorCode::SchemaError, "query lacks [SEP2]");
  GenerationQuery q;
  q.title = std::string(wire.substr(0, s1));
  auto middle = wire.substr(s1 + kSep1.size(), s2 - s1 - kSep1.size());
  while (!middle.empty()) {
    const auto comma = middle.find(", ");
    q.keywords.emplace_back(middle.substr(0, comma));
    if (comma == std::string_view::npos) break;
    middle.remove_prefix(comma + 2);
  }
  q.context = std::string(wire.substr(s2 + kSep2.size()));
  return q;
}

inline GenerationQuery compose_query(std::string_view title, std::span<const std::string> keywords,
                                     std::string_view context) {
  if (blank(title)) throw Error(ErrorCode::EmptyTitle, "title is empty");
  return {std::string(title), {keywords.begin(), keywords.end()}, std::string(context)};
}

inline GenerationQuery compose_query(std::string_view title, const KeywordSet& keywords,
                                     std::string_view context) {
  return compose_query(title, std::span<const std::string>(keywords.keywords), context);
}

/// Splits after '.', '!' or '?' (plus any closing quotes or brackets) that
/// is followed by whitespace. Pieces are verbatim substrings of `text`.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto push = [&](std::string_view piece) {
    const auto b = piece.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return;
    const auto e = piece.find_last_not_of(" \t\r\n");
    out.emplace_back(piece.substr(b, e - b + 1));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < text.size() && (text[j] == '"' || text[j] == '\'' || text[j] == ')' || text[j] == ']')) ++j;
    if (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) {
      push(text.substr(start, j - start));
      start = j;
      i = j;
    }
  }
  push(text.substr(start));
  return out;
}

inline std::vector<Ngram> trigrams_of(std::string_view sentence) {
  const auto toks = tokenize(sentence);
  return ngrams(std::span<const std::string>(toks), 3);
}

/// Greedy extractive baseline. Context sentences are ranked by similarity to
/// the title-plus-keywords query and taken best first, skipping any sentence
/// that would repeat a trigram already emitted or push the total past
/// max_tokens, until min_tokens is reached. Bullets keep context order.
template <TextEmbedder E>
std::vector<std::string> generate_extractive(const GenerationQuery& query, const E& embedder,
                                             std::size_t min_tokens = kDefaultMinTokens,
                                             std::size_t max_tokens = kDefaultMaxTokens) {
  if (blank(query.context)) throw Error(ErrorCode::EmptyContext, "context is empty");
  const auto sentences = split_sentences(query.context);
  const auto q = embedder.embed(keyword_query(query.title, query.keywords));

  std::vector<double> scores(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) scores[i] = dot(q, embedder.embed(sentences[i]));
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::unordered_set<Ngram> seen;
  std::vector<std::size_t> chosen;
  std::size_t total = 0;
  for (auto i : order) {
    if (total >= min_tokens) break;
    const std::size_t n = token_count(sentences[i]);
    if (n == 0 || total + n > max_tokens) continue;
    const auto grams = trigrams_of(sentences[i]);
    std::unordered_set<Ngram> own;
    const bool repeats = std::any_of(grams.begin(), grams.end(), [&](const Ngram& g) {
      return seen.contains(g) || !own.insert(g).second;
    });
    if (repeats) continue;
    seen.insert(grams.begin(), grams.end());
    chosen.push_back(i);
    total += n;
  }
  if (chosen.empty()) {
    throw Error(ErrorCode::EmptyGeneration, "no context sentence fits within " + std::to_string(max_tokens) + " tokens");
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> bullets;
  for (auto i : chosen) bullets.push_back(sentences[i]);
  return bullets;
}

inline nlohmann::json generation_request(const GenerationQuery& query, std::size_t min_tokens,
                                         std::size_t max_tokens) {
  return {{"query", query.wire()}, {"min_tokens", min_tokens}, {"max_tokens", max_tokens}};
}

/// Client for POST /generate {"query", "min_tokens", "max_tokens"} -> {"text"}.
class RemoteGenerator {
 public:
  explicit RemoteGenerator(std::string url, HttpOptions options = {})
      : client_(std::make_shared<JsonPostClient>(std::move(url), options)) {}

  std::vector<std::string> generate(const GenerationQuery& query, std::size_t min_tokens,
                                    std::size_t max_tokens) const {
    const auto response = client_->post("/generate", generation_request(query, min_tokens, max_tokens));
    if (!response.is_object() || !response.contains("text") || !response["text"].is_string()) {
      throw Error(ErrorCode::SchemaError, "generation response lacks 'text'");
    }
    std::vector<std::string> bullets;
    std::string_view text = response["text"].get_ref<const std::string&>();
    while (!text.empty()) {
      const auto nl = text.find('\n');
      auto line = text.substr(0, nl);
      const auto b = line.find_first_not_of(" \t\r");
      if (b != std::string_view::npos) {
        const auto e = line.find_last_not_of(" \t\r");
        bullets.emplace_back(line.substr(b, e - b + 1));
      }
      if (nl == std::string_view::npos) break;
      text.remove_prefix(nl + 1);
    }
    if (bullets.empty()) throw Error(ErrorCode::EmptyGeneration, "generator returned no text");
    return bullets;
  }

 private:
  std::shared_ptr<const JsonPostClient> client_;
};

inline std::vector<std::string> generate_remote(const RemoteGenerator& client, const GenerationQuery& query,
                                                std::size_t min_tokens = kDefaultMinTokens,
                                                std::size_t max_tokens = kDefaultMaxTokens) {
  return client.generate(query, min_tokens, max_tokens);
}

enum class GeneratorKind { Extractive, Remote };

inline std::string_view to_string(GeneratorKind kind) {
  return kind == GeneratorKind::Extractive ? "extractive" : "remote";
}

inline GeneratorKind parse_generator_kind(std::string_view s) {
  if (s == "extractive") return GeneratorKind::Extractive;
  if (s == "remote") return GeneratorKind::Remote;
  throw Error(ErrorCode::ConfigError, "generator must be 'extractive' or 'remote'");
}

struct SlideOptions {
  std::size_t k = kDefaultTopK;
  std::size_t min_tokens = kDefaultMinTokens;
  std::size_t max_tokens = kDefaultMaxTokens;
  std::size_t context_budget = kDefaultContextBudget;
  std::size_t figure_count = kDefaultFigureCount;
  double match_threshold = kDefaultMatchThreshold;
  GeneratorKind generator = GeneratorKind::Extractive;
};

struct SlideDraft {
  std::string title;
  std::vector<std::string> keywords;
  std::vector<ScoredCandidate> candidates;
  std::string context;
  std::vector<std::string> bullets;
  FigureRanking figures;  // top figure_count entries
  GeneratorKind generator = GeneratorKind::Extractive;
};

template <TextEmbedder E>
SlideDraft build_slide(const PaperDoc& doc, const HeaderTree& tree, const SnippetIndex& index,
                       const E& embedder, std::string_view title, const SlideOptions& options = {},
                       const RemoteGenerator* remote = nullptr) {
  SlideDraft draft;
  draft.title = std::string(title);
  draft.generator = options.generator;
  const auto keywords = match_title(tree, title, options.match_threshold);
  draft.keywords = keywords.keywords;
  draft.candidates = retrieve(index, title, embedder, options.k);
  draft.context = context_text(draft.candidates, index, options.context_budget);
  const auto query = compose_query(title, keywords, draft.context);
  if (options.generator == GeneratorKind::Remote) {
    if (!remote) throw Error(ErrorCode::ConfigError, "remote generator requested but not configured");
    draft.bullets = generate_remote(*remote, query, options.min_tokens, options.max_tokens);
  } else {
    draft.bullets = generate_extractive(query, embedder, options.min_tokens, options.max_tokens);
  }
  if (!doc.figures.empty()) {
    draft.figures = rank_figures(doc, title, keywords, embedder);
    if (draft.figures.size() > options.figure_count) draft.figures.resize(options.figure_count);
  }
  return draft;
}

inline nlohmann::json to_json(const SlideDraft& draft, const SnippetIndex& index, const PaperDoc& doc) {
  nlohmann::json j;
  j["title"] = draft.title;
  j["keywords"] = draft.keywords;
  j["candidates"] = to_json(std::span<const ScoredCandidate>(draft.candidates), index)["candidates"];
  j["bullets"] = draft.bullets;
  j["figures"] = to_json(draft.figures, doc)["figures"];
  j["generator"] = to_string(draft.generator);
  return j;
}

inline SlideRecord to_slide_record(const SlideDraft& draft, std::string deck_id, std::size_t slide_index) {
  SlideRecord r;
  r.deck_id = std::move(deck_id);
  r.slide_index = slide_index;
  r.title = draft.title;
  r.content_lines = draft.bullets;
  for (const auto& f : draft.figures) r.linked_figures.push_back(f.figure_id);
  return r;
}

/// "# title", one "- bullet" per line, then "![fig](uri)" per figure.
inline std::string to_markdown(const SlideRecord& slide, const PaperDoc* doc = nullptr) {
  std::string out = "# " + slide.title + "\n\n";
  for (const auto& b : slide.content_lines) out += "- " + b + "\n";
  if (!slide.linked_figures.empty()) out += "\n";
  for (const auto& id : slide.linked_figures) {
    std::string uri = id;
    if (doc) {
      for (const auto& f : doc->figures) {
        if (f.figure_id == id) uri = f.uri;
      }
    }
    out += "![" + id + "](" + uri + ")\n";
  }
  return out;
}

inline std::string to_markdown(const Deck& deck, const PaperDoc* doc = nullptr) {
  std::string out;
  for (std::size_t i = 0; i < deck.slides.size(); ++i) {
    if (i) out += "\n";
    out += to_markdown(deck.slides[i], doc);
  }
  return out;
}

}  // namespace d2s
