#pragma once

// Papers and slide decks: in-memory model plus the paper-JSON / deck-JSON
// ingestion formats.

#include <cctype>
#include <cstddef>
#include <numeric>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "d2s/error.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

enum class FigureKind { Figure, Table };

inline std::string_view to_string(FigureKind kind) {
  return kind == FigureKind::Figure ? "figure" : "table";
}

struct FigureAsset {
  std::string figure_id;
  FigureKind kind = FigureKind::Figure;
  std::string caption;
  std::string uri;

  bool operator==(const FigureAsset&) const = default;
};

struct Section {
  std::string header_label;  // dotted numeric ("2.1") or empty
  std::string header_text;
  std::vector<std::string> sentences;

  bool numbered() const { return !header_label.empty(); }
  bool operator==(const Section&) const = default;
};

struct PaperDoc {
  std::string paper_id;
  std::string title;
  std::vector<Section> sections;
  std::vector<FigureAsset> figures;

  std::size_t sentence_count() const {
    return std::accumulate(sections.begin(), sections.end(), std::size_t{0},
                           [](std::size_t n, const Section& s) { return n + s.sentences.size(); });
  }
  bool operator==(const PaperDoc&) const = default;
};

struct SlideRecord {
  std::string deck_id;
  std::size_t slide_index = 0;
  std::string title;
  std::vector<std::string> content_lines;
  std::vector<std::string> linked_figures;

  bool operator==(const SlideRecord&) const = default;
};

/// A deck-JSON document. Decks pair with the paper whose paper_id equals
/// deck_id.
struct Deck {
  std::string deck_id;
  std::vector<SlideRecord> slides;

  bool operator==(const Deck&) const = default;
};

namespace detail {

inline bool is_dotted_label(std::string_view label) {
  static const std::regex pattern(R"(\d+(\.\d+)*)");
  return std::regex_match(label.begin(), label.end(), pattern);
}

// Share of non-whitespace characters that are not alphanumeric. Bytes of
// multi-byte UTF-8 sequences count as alphanumeric.
inline double symbol_share(std::string_view s) {
  std::size_t visible = 0, symbols = 0;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) continue;
    ++visible;
    if (u < 0x80 && !std::isalnum(u)) ++symbols;
  }
  return visible ? double(symbols) / double(visible) : 0.0;
}

inline std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::SchemaError,
                std::string(where) + ": missing required field '" + key + "'");
  }
  return obj.at(key);
}

inline std::string require_string(const nlohmann::json& obj, const char* key,
                                  std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) {
    throw Error(ErrorCode::SchemaError, std::string(where) + ": '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline const nlohmann::json& require_array(const nlohmann::json& obj, const char* key,
                                           std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_array()) {
    throw Error(ErrorCode::SchemaError, std::string(where) + ": '" + key + "' must be an array");
  }
  return v;
}

inline std::vector<std::string> string_list(const nlohmann::json& arr, std::string_view where) {
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw Error(ErrorCode::SchemaError, std::string(where) + ": expected string");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline nlohmann::json parse_json(std::string_view raw) {
  try {
    return nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

/// Sentence cleaning applied at ingestion: whitespace (including newlines)
/// collapses to single spaces, empty sentences and exact consecutive
/// duplicates are dropped, and equation fragments (more than 40% of visible
/// characters non-alphanumeric) are removed.
inline std::vector<std::string> clean_sentences(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& s : raw) {
    auto line = detail::normalize_whitespace(s);
    if (line.empty()) continue;
    if (detail::symbol_share(line) > 0.4) continue;
    if (!out.empty() && out.back() == line) continue;
    out.push_back(std::move(line));
  }
  return out;
}

inline PaperDoc paper_from_json(const nlohmann::json& j) {
  PaperDoc doc;
  doc.paper_id = detail::require_string(j, "paper_id", "paper");
  if (doc.paper_id.empty()) throw Error(ErrorCode::SchemaError, "paper: empty paper_id");
  doc.title = detail::normalize_whitespace(detail::require_string(j, "title", "paper"));

  for (const auto& js : detail::require_array(j, "sections", "paper")) {
    Section sec;
    sec.header_label = detail::require_string(js, "label", "section");
    if (!sec.header_label.empty() && !detail::is_dotted_label(sec.header_label)) {
      throw Error(ErrorCode::SchemaError, "section: label '" + sec.header_label +
                                              "' is not dotted-numeric");
    }
    sec.header_text = detail::normalize_whitespace(detail::require_string(js, "header", "section"));
    sec.sentences =
        clean_sentences(detail::string_list(detail::require_array(js, "sentences", "section"),
                                            "section.sentences"));
    doc.sections.push_back(std::move(sec));
  }

  std::set<std::string> ids;
  for (const auto& jf : detail::require_array(j, "figures", "paper")) {
    FigureAsset fig;
    fig.figure_id = detail::require_string(jf, "id", "figure");
    const auto kind = detail::require_string(jf, "kind", "figure");
    if (kind == "figure") {
      fig.kind = FigureKind::Figure;
    } else if (kind == "table") {
      fig.kind = FigureKind::Table;
    } else {
      throw Error(ErrorCode::SchemaError, "figure: kind must be 'figure' or 'table'");
    }
    fig.caption = detail::normalize_whitespace(detail::require_string(jf, "caption", "figure"));
    fig.uri = detail::require_string(jf, "uri", "figure");
    if (fig.caption.empty()) {
      throw Error(ErrorCode::SchemaError, "figure '" + fig.figure_id + "': empty caption");
    }
    if (!ids.insert(fig.figure_id).second) {
      throw Error(ErrorCode::SchemaError, "duplicate figure id '" + fig.figure_id + "'");
    }
    doc.figures.push_back(std::move(fig));
  }

  if (doc.sentence_count() == 0) {
    throw Error(ErrorCode::EmptyDocument, "paper '" + doc.paper_id + "' has no sentences");
  }
  return doc;
}

inline PaperDoc ingest_paper(std::string_view raw) { return paper_from_json(detail::parse_json(raw)); }

inline nlohmann::json to_json(const PaperDoc& doc) {
  nlohmann::json sections = nlohmann::json::array();
  for (const auto& s : doc.sections) {
    sections.push_back({{"label", s.header_label}, {"header", s.header_text}, {"sentences", s.sentences}});
  }
  nlohmann::json figures = nlohmann::json::array();
  for (const auto& f : doc.figures) {
    figures.push_back(
        {{"id", f.figure_id}, {"kind", to_string(f.kind)}, {"caption", f.caption}, {"uri", f.uri}});
  }
  return {{"paper_id", doc.paper_id}, {"title", doc.title}, {"sections", sections}, {"figures", figures}};
}

inline Deck deck_from_json(const nlohmann::json& j) {
  Deck deck;
  deck.deck_id = detail::require_string(j, "deck_id", "deck");
  if (deck.deck_id.empty()) throw Error(ErrorCode::SchemaError, "deck: empty deck_id");
  std::set<std::size_t> seen;
  for (const auto& js : detail::require_array(j, "slides", "deck")) {
    SlideRecord slide;
    slide.deck_id = deck.deck_id;
    const auto& index = detail::require(js, "index", "slide");
    if (!index.is_number_integer() || index.get<long long>() < 0) {
      throw Error(ErrorCode::SchemaError, "slide: index must be a non-negative integer");
    }
    slide.slide_index = index.get<std::size_t>();
    if (!seen.insert(slide.slide_index).second) {
      throw Error(ErrorCode::SchemaError,
                  "deck '" + deck.deck_id + "': duplicate slide index " + std::to_string(slide.slide_index));
    }
    slide.title = detail::normalize_whitespace(detail::require_string(js, "title", "slide"));
    for (auto& line : detail::string_list(detail::require_array(js, "lines", "slide"), "slide.lines")) {
      auto cleaned = detail::normalize_whitespace(line);
      if (!cleaned.empty()) slide.content_lines.push_back(std::move(cleaned));
    }
    slide.linked_figures = detail::string_list(detail::require_array(js, "figures", "slide"), "slide.figures");
    deck.slides.push_back(std::move(slide));
  }
  if (deck.slides.empty()) {
    throw Error(ErrorCode::EmptyDocument, "deck '" + deck.deck_id + "' has no slides");
  }
  return deck;
}

inline Deck ingest_deck(std::string_view raw) { return deck_from_json(detail::parse_json(raw)); }

inline nlohmann::json to_json(const Deck& deck) {
  nlohmann::json slides = nlohmann::json::array();
  for (const auto& s : deck.slides) {
    slides.push_back({{"index", s.slide_index},
                      {"title", s.title},
                      {"lines", s.content_lines},
                      {"figures", s.linked_figures}});
  }
  return {{"deck_id", deck.deck_id}, {"slides", slides}};
}

/// Joined slide content, one line per content line.
inline std::string slide_content(const SlideRecord& slide) {
  std::string out;
  for (const auto& line : slide.content_lines) {
    if (!out.empty()) out.push_back('\n');
    out += line;
  }
  return out;
}

struct DeckStats {
  double avg_title_len = 0.0;
  double avg_content_len = 0.0;
  std::size_t slides = 0;
};

/// Mean token counts per slide title and per slide content.
template <typename Tokenizer = decltype(&tokenize)>
DeckStats deck_stats(std::span<const SlideRecord> slides, Tokenizer tok = &tokenize) {
  if (slides.empty()) throw Error(ErrorCode::EmptyCorpus, "no slides");
  std::size_t title_tokens = 0, content_tokens = 0;
  for (const auto& s : slides) {
    title_tokens += tok(s.title).size();
    for (const auto& line : s.content_lines) content_tokens += tok(line).size();
  }
  const double n = double(slides.size());
  return {double(title_tokens) / n, double(content_tokens) / n, slides.size()};
}

inline std::vector<SlideRecord> all_slides(std::span<const Deck> decks) {
  std::vector<SlideRecord> out;
  for (const auto& d : decks) out.insert(out.end(), d.slides.begin(), d.slides.end());
  return out;
}

/// The paper a deck belongs to, matched on id.
inline const PaperDoc& paired_paper(std::string_view deck_id, std::span<const PaperDoc> papers) {
  for (const auto& p : papers) {
    if (p.paper_id == deck_id) return p;
  }
  throw Error(ErrorCode::MisalignedCorpora, "no paper with id '" + std::string(deck_id) + "'");
}

}  // namespace d2s
