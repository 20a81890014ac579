#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "d2s/doc_model.hpp"
#include "d2s/embedder.hpp"
#include "d2s/error.hpp"
#include "d2s/keyword_tree.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

inline constexpr std::size_t kDefaultFigureCount = 5;

struct RankedFigure {
  std::string figure_id;
  double score = 0.0;
  std::size_t position = 0;  // index into PaperDoc::figures

  bool operator==(const RankedFigure&) const = default;
};

using FigureRanking = std::vector<RankedFigure>;

/// Title, extended with ", "-joined keywords when there are any.
inline std::string keyword_query(std::string_view title, std::span<const std::string> keywords) {
  std::string q(title);
  for (const auto& kw : keywords) {
    q += ", ";
    q += kw;
  }
  return q;
}

/// Every figure and table, ordered by caption similarity to the query.
template <TextEmbedder E>
FigureRanking rank_figures(const PaperDoc& doc, std::string_view title, const KeywordSet& keywords,
                           const E& embedder) {
  if (doc.figures.empty()) throw Error(ErrorCode::NoFigures, "paper has no figures or tables");
  const auto query = embedder.embed(keyword_query(title, keywords.keywords));
  FigureRanking out;
  out.reserve(doc.figures.size());
  for (std::size_t i = 0; i < doc.figures.size(); ++i) {
    out.push_back({doc.figures[i].figure_id, dot(query, embedder.embed(doc.figures[i].caption)), i});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedFigure& a, const RankedFigure& b) { return a.score > b.score; });
  return out;
}

struct FigurePrecision {
  double p1 = 0.0;
  double p3 = 0.0;
  double p5 = 0.0;
  std::size_t slides = 0;
};

/// Macro-averaged p@1/3/5 over slides that link at least one figure; the
/// linked set is the relevant set. Decks pair with papers by id.
template <TextEmbedder E>
FigurePrecision evaluate_figures(const PaperDoc& doc, std::span<const SlideRecord> slides,
                                 const E& embedder) {
  const HeaderTree tree(doc);
  FigurePrecision acc;
  for (const auto& slide : slides) {
    if (slide.linked_figures.empty()) continue;
    const auto ranking = rank_figures(doc, slide.title, match_title(tree, slide.title), embedder);
    std::vector<std::string> ids;
    for (const auto& f : ranking) ids.push_back(f.figure_id);
    const std::unordered_set<std::string> relevant(slide.linked_figures.begin(), slide.linked_figures.end());
    acc.p1 += precision_at_k(std::span<const std::string>(ids), relevant, 1);
    acc.p3 += precision_at_k(std::span<const std::string>(ids), relevant, 3);
    acc.p5 += precision_at_k(std::span<const std::string>(ids), relevant, 5);
    ++acc.slides;
  }
  if (acc.slides == 0) throw Error(ErrorCode::NoEligibleSlides, "no slide links a figure");
  const double n = double(acc.slides);
  acc.p1 /= n;
  acc.p3 /= n;
  acc.p5 /= n;
  return acc;
}

inline nlohmann::json to_json(const FigureRanking& ranking, const PaperDoc& doc,
                              std::size_t limit = static_cast<std::size_t>(-1)) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < ranking.size() && i < limit; ++i) {
    const auto& f = doc.figures.at(ranking[i].position);
    arr.push_back({{"id", f.figure_id},
                   {"kind", to_string(f.kind)},
                   {"caption", f.caption},
                   {"uri", f.uri},
                   {"score", ranking[i].score}});
  }
  return {{"figures", arr}};
}

inline nlohmann::json to_json(const FigurePrecision& p) {
  return {{"p_at_1", p.p1}, {"p_at_3", p.p3}, {"p_at_5", p.p5}, {"slides", p.slides}};
}

}  // namespace d2s
