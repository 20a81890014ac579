#pragma once

// Corpus-level measurements: IDF-recall of retrieved context, ROUGE of
// generated slides, figure precision@k and novel n-gram rates. All means are
// macro averages accumulated in corpus order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "d2s/dense_ir.hpp"
#include "d2s/doc_model.hpp"
#include "d2s/embedder.hpp"
#include "d2s/error.hpp"
#include "d2s/figure_select.hpp"
#include "d2s/generation.hpp"
#include "d2s/keyword_tree.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

/// Builds the embedder used for one paper from its snippets.
using EmbedderFactory = std::function<AnyEmbedder(std::span<const Snippet>)>;

/// In-repo embedder whose IDF corpus is the paper's snippet set.
inline EmbedderFactory local_embedder_factory(std::size_t dim = kDefaultEmbedDim, std::uint64_t seed = 0) {
  return [dim, seed](std::span<const Snippet> snippets) {
    std::vector<std::string> texts;
    for (const auto& s : snippets) texts.push_back(s.text);
    return AnyEmbedder(HashedTfidfEmbedder::fit(texts, dim, seed));
  };
}

/// Everything derived from one paper that the pipeline reuses per title.
struct PaperContext {
  PaperDoc doc;
  HeaderTree tree;
  SnippetIndex index;
  AnyEmbedder embedder;
  IdfTable snippet_idf;
};

inline PaperContext prepare_paper(PaperDoc doc, const EmbedderFactory& factory, double alpha = kDefaultAlpha) {
  HeaderTree tree(doc);
  auto snippets = snippetize(doc, tree);
  auto embedder = factory(snippets);
  std::vector<TokenSeq> docs;
  for (const auto& s : snippets) docs.push_back(tokenize(s.text));
  IdfTable idf(docs);
  auto index = build_index(std::move(snippets), embedder, alpha);
  return {std::move(doc), std::move(tree), std::move(index), std::move(embedder), std::move(idf)};
}

// ---------------------------------------------------------------------------
// BM25 comparator (k1 = 1.2, b = 0.75) over snippet documents

class Bm25Scorer {
 public:
  Bm25Scorer(std::span<const Snippet> snippets, double k1 = 1.2, double b = 0.75) : k1_(k1), b_(b) {
    double total = 0.0;
    for (const auto& s : snippets) {
      std::unordered_map<std::string, std::size_t> tf;
      const auto toks = tokenize(s.text);
      for (const auto& t : toks) ++tf[t];
      for (const auto& [t, c] : tf) ++df_[t];
      lengths_.push_back(double(toks.size()));
      total += double(toks.size());
      tfs_.push_back(std::move(tf));
    }
    avg_len_ = snippets.empty() ? 0.0 : total / double(snippets.size());
  }

  double idf(const std::string& term) const {
    const auto it = df_.find(term);
    const double df = it == df_.end() ? 0.0 : double(it->second);
    const double n = double(tfs_.size());
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
  }

  double score(std::size_t doc, std::span<const std::string> query) const {
    double s = 0.0;
    const double norm = avg_len_ > 0.0 ? lengths_[doc] / avg_len_ : 0.0;
    for (const auto& q : query) {
      const auto it = tfs_[doc].find(q);
      if (it == tfs_[doc].end()) continue;
      const double tf = double(it->second);
      s += idf(q) * tf * (k1_ + 1.0) / (tf + k1_ * (1.0 - b_ + b_ * norm));
    }
    return s;
  }

  /// Snippet ids of the k best documents, score descending then id ascending.
  std::vector<std::size_t> top_k(std::string_view query_text, std::size_t k) const {
    const auto query = tokenize(query_text);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < tfs_.size(); ++i) scored.emplace_back(score(i, query), i);
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + std::ptrdiff_t(n), scored.end(), [](auto& a, auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
    return out;
  }

 private:
  double k1_, b_;
  double avg_len_ = 0.0;
  std::vector<double> lengths_;
  std::vector<std::unordered_map<std::string, std::size_t>> tfs_;
  std::unordered_map<std::string, std::size_t> df_;
};

// ---------------------------------------------------------------------------

inline const PaperContext& context_for(std::string_view deck_id, std::span<const PaperContext> papers) {
  for (const auto& p : papers) {
    if (p.doc.paper_id == deck_id) return p;
  }
  throw Error(ErrorCode::MisalignedCorpora, "deck '" + std::string(deck_id) + "' has no paired paper");
}

inline TokenSeq concat_tokens(const SnippetIndex& index, std::span<const std::size_t> ids) {
  TokenSeq out;
  for (auto id : ids) {
    auto t = tokenize(index.snippet(id).text);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

/// IDF-recall of a slide's content in the concatenation of the given snippets.
inline double slide_idf_recall(const SlideRecord& slide, const PaperContext& paper,
                               std::span<const std::size_t> retrieved) {
  const auto ref = tokenize(slide_content(slide));
  return idf_recall(ref, concat_tokens(paper.index, retrieved), paper.snippet_idf);
}

/// Slides that take part in retrieval/generation scoring: a title and some
/// content tokens.
inline bool scorable(const SlideRecord& slide) {
  return !blank(slide.title) && !tokenize(slide_content(slide)).empty();
}

struct RetrievalReport {
  std::map<std::string, double> mean_idf_recall;  // bm25, dense_text, dense_keyword, dense_mix
  std::size_t slides = 0;
};

/// Retrieval function: (paper, slide title, k) -> snippet ids.
using Retriever = std::function<std::vector<std::size_t>(const PaperContext&, const std::string&, std::size_t)>;

inline Retriever dense_retriever(double alpha) {
  return [alpha](const PaperContext& p, const std::string& title, std::size_t k) {
    std::vector<std::size_t> ids;
    if (k == 0) return ids;
    for (const auto& c : p.index.search(p.embedder.embed(title), k, alpha)) ids.push_back(c.snippet_id);
    return ids;
  };
}

inline Retriever bm25_retriever() {
  return [](const PaperContext& p, const std::string& title, std::size_t k) {
    return Bm25Scorer(p.index.snippets()).top_k(title, k);
  };
}

/// Mean IDF-recall of one retriever over all scorable slides.
inline std::pair<double, std::size_t> mean_idf_recall(std::span<const PaperContext> papers,
                                                      std::span<const Deck> decks, const Retriever& retriever,
                                                      std::size_t k) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& deck : decks) {
    const auto& paper = context_for(deck.deck_id, papers);
    for (const auto& slide : deck.slides) {
      if (!scorable(slide)) continue;
      const auto ids = retriever(paper, slide.title, k);
      sum += slide_idf_recall(slide, paper, ids);
      ++n;
    }
  }
  return {n ? sum / double(n) : 0.0, n};
}

inline RetrievalReport eval_retrieval(std::span<const PaperContext> papers, std::span<const Deck> decks,
                                      std::size_t k = kDefaultTopK, double alpha = kDefaultAlpha) {
  RetrievalReport r;
  const std::pair<std::string, Retriever> configs[] = {
      {"bm25", bm25_retriever()},
      {"dense_text", dense_retriever(1.0)},
      {"dense_keyword", dense_retriever(0.0)},
      {"dense_mix", dense_retriever(alpha)},
  };
  for (const auto& [name, retriever] : configs) {
    const auto [mean, n] = mean_idf_recall(papers, decks, retriever, k);
    r.mean_idf_recall[name] = mean;
    r.slides = n;
  }
  return r;
}

inline nlohmann::json to_json(const RetrievalReport& r) {
  nlohmann::json j = {{"slides", r.slides}};
  for (const auto& [name, v] : r.mean_idf_recall) j["idf_recall"][name] = v;
  return j;
}

// ---------------------------------------------------------------------------

/// Produces bullets for a slide of a prepared paper.
using SlideGenerator = std::function<std::vector<std::string>(const SlideRecord&, const PaperContext&)>;

inline SlideGenerator extractive_generator(SlideOptions options = {}) {
  options.generator = GeneratorKind::Extractive;
  return [options](const SlideRecord& slide, const PaperContext& p) {
    return build_slide(p.doc, p.tree, p.index, p.embedder, slide.title, options).bullets;
  };
}

/// Returns the slide's own content; an end-to-end check of the ROUGE path.
inline SlideGenerator copy_generator() {
  return [](const SlideRecord& slide, const PaperContext&) { return slide.content_lines; };
}

struct GenerationReport {
  RougeReport mean;
  std::size_t slides = 0;
};

/// Mean ROUGE of generated bullets against each slide's original content.
/// Evaluation slides are never filtered.
inline GenerationReport eval_generation(std::span<const PaperContext> papers, std::span<const Deck> decks,
                                        const SlideGenerator& generator) {
  std::array<double, 9> sum{};
  std::size_t n = 0;
  for (const auto& deck : decks) {
    const auto& paper = context_for(deck.deck_id, papers);
    for (const auto& slide : deck.slides) {
      if (!scorable(slide)) continue;
      std::vector<std::string> bullets;
      try {
        bullets = generator(slide, paper);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyGeneration) throw;
      }
      TokenSeq cand;
      for (const auto& b : bullets) {
        auto t = tokenize(b);
        cand.insert(cand.end(), t.begin(), t.end());
      }
      const auto v = rouge(cand, tokenize(slide_content(slide))).values();
      for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i];
      ++n;
    }
  }
  GenerationReport r;
  r.slides = n;
  if (n) {
    for (auto& x : sum) x /= double(n);
    r.mean = RougeReport{{sum[0], sum[1], sum[2]}, {sum[3], sum[4], sum[5]}, {sum[6], sum[7], sum[8]}};
  }
  return r;
}

inline nlohmann::json to_json(const GenerationReport& r) {
  return {{"slides", r.slides}, {"rouge", to_json(r.mean)}};
}

// ---------------------------------------------------------------------------

struct FigureReport {
  FigurePrecision precision;
  bool eligible = false;
};

/// p@1/3/5 macro-averaged over every slide (across decks) that links a figure.
inline FigureReport eval_figures(std::span<const PaperContext> papers, std::span<const Deck> decks) {
  FigureReport out;
  double p1 = 0.0, p3 = 0.0, p5 = 0.0;
  std::size_t n = 0;
  for (const auto& deck : decks) {
    const auto& paper = context_for(deck.deck_id, papers);
    std::vector<SlideRecord> eligible;
    for (const auto& s : deck.slides) {
      if (!s.linked_figures.empty() && !paper.doc.figures.empty()) eligible.push_back(s);
    }
    if (eligible.empty()) continue;
    const auto p = evaluate_figures(paper.doc, std::span<const SlideRecord>(eligible), paper.embedder);
    p1 += p.p1 * double(p.slides);
    p3 += p.p3 * double(p.slides);
    p5 += p.p5 * double(p.slides);
    n += p.slides;
  }
  if (n) {
    out.eligible = true;
    out.precision = {p1 / double(n), p3 / double(n), p5 / double(n), n};
  }
  return out;
}

// ---------------------------------------------------------------------------

struct AbstractivenessReport {
  // Index n-1 holds the mean novel n-gram share for n = 1, 2, 3.
  std::array<double, 3> title{};
  std::array<double, 3> content{};
  std::array<std::size_t, 3> title_slides{};
  std::array<std::size_t, 3> content_slides{};
};

inline TokenSeq paper_tokens(const PaperDoc& doc) {
  TokenSeq out;
  for (const auto& sec : doc.sections) {
    for (const auto& s : sec.sentences) {
      auto t = tokenize(s);
      out.insert(out.end(), t.begin(), t.end());
    }
  }
  return out;
}

/// Mean per-slide share of title and content n-grams absent from the paper.
/// Slides too short to yield an n-gram are left out of that n's mean.
inline AbstractivenessReport eval_abstractiveness(std::span<const Deck> decks, std::span<const PaperDoc> papers) {
  AbstractivenessReport r;
  for (const auto& deck : decks) {
    const auto source = paper_tokens(paired_paper(deck.deck_id, papers));
    for (const auto& slide : deck.slides) {
      const auto title = tokenize(slide.title);
      const auto content = tokenize(slide_content(slide));
      for (std::size_t n = 1; n <= 3; ++n) {
        if (title.size() >= n) {
          r.title[n - 1] += novel_ngram_ratio(title, source, n);
          ++r.title_slides[n - 1];
        }
        if (content.size() >= n) {
          r.content[n - 1] += novel_ngram_ratio(content, source, n);
          ++r.content_slides[n - 1];
        }
      }
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (r.title_slides[i]) r.title[i] /= double(r.title_slides[i]);
    if (r.content_slides[i]) r.content[i] /= double(r.content_slides[i]);
  }
  return r;
}

inline nlohmann::json to_json(const AbstractivenessReport& r) {
  nlohmann::json j;
  const char* names[] = {"unigrams", "bigrams", "trigrams"};
  for (std::size_t i = 0; i < 3; ++i) {
    j["title"][names[i]] = r.title[i];
    j["content"][names[i]] = r.content[i];
  }
  return j;
}

// ---------------------------------------------------------------------------

struct EvalReport {
  RetrievalReport retrieval;
  GenerationReport generation;
  FigureReport figures;
  AbstractivenessReport abstractiveness;
  DeckStats stats;
};

inline EvalReport run_evaluation(std::span<const PaperContext> papers, std::span<const Deck> decks,
                                 const SlideGenerator& generator, std::size_t k = kDefaultTopK,
                                 double alpha = kDefaultAlpha) {
  std::vector<PaperDoc> docs;
  for (const auto& p : papers) docs.push_back(p.doc);
  const auto slides = all_slides(decks);
  EvalReport r;
  r.retrieval = eval_retrieval(papers, decks, k, alpha);
  r.generation = eval_generation(papers, decks, generator);
  r.figures = eval_figures(papers, decks);
  r.abstractiveness = eval_abstractiveness(decks, docs);
  r.stats = deck_stats(std::span<const SlideRecord>(slides));
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["retrieval"] = to_json(r.retrieval);
  j["generation"] = to_json(r.generation);
  j["figures"] = r.figures.eligible ? to_json(r.figures.precision) : nlohmann::json(nullptr);
  j["abstractiveness"] = to_json(r.abstractiveness);
  j["deck_stats"] = {{"slides", r.stats.slides},
                     {"avg_title_len", r.stats.avg_title_len},
                     {"avg_content_len", r.stats.avg_content_len}};
  return j;
}

/// Aligned two-column text rendering of an evaluation report.
inline std::string to_text(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& name, double v) { out << std::left << std::setw(32) << name << v << "\n"; };
  out << "retrieval (IDF-recall, " << r.retrieval.slides << " slides)\n";
  for (const auto& [name, v] : r.retrieval.mean_idf_recall) row("  " + name, v);
  out << "generation (ROUGE, " << r.generation.slides << " slides)\n";
  const auto v = r.generation.mean.values();
  const char* names[] = {"r1_p", "r1_r", "r1_f", "r2_p", "r2_r", "r2_f", "rl_p", "rl_r", "rl_f"};
  for (std::size_t i = 0; i < v.size(); ++i) row(std::string("  ") + names[i], v[i]);
  if (r.figures.eligible) {
    out << "figures (" << r.figures.precision.slides << " slides)\n";
    row("  p_at_1", r.figures.precision.p1);
    row("  p_at_3", r.figures.precision.p3);
    row("  p_at_5", r.figures.precision.p5);
  }
  out << "novel n-grams\n";
  const char* grams[] = {"unigrams", "bigrams", "trigrams"};
  for (std::size_t i = 0; i < 3; ++i) row(std::string("  title ") + grams[i], r.abstractiveness.title[i]);
  for (std::size_t i = 0; i < 3; ++i) row(std::string("  content ") + grams[i], r.abstractiveness.content[i]);
  out << "deck stats (" << r.stats.slides << " slides)\n";
  row("  avg_title_len", r.stats.avg_title_len);
  row("  avg_content_len", r.stats.avg_content_len);
  return out.str();
}

}  // namespace d2s
