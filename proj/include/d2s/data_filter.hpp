#pragma once

// Derivability filter for slide lines: a random forest of Gini-split
// decision trees over the nine ROUGE precision/recall/F features of a line
// against its paired paper.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "d2s/binary_io.hpp"
#include "d2s/doc_model.hpp"
#include "d2s/error.hpp"
#include "d2s/random.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

inline constexpr std::size_t kFeatureCount = 9;

using FeatureVector = std::array<double, kFeatureCount>;

enum class Label : std::uint8_t { Underivable = 0, Derivable = 1 };

/// Per-component maximum over paper sentences of ROUGE with the sentence as
/// candidate and the line as reference, so a verbatim line has recall 1.
inline FeatureVector featurize(std::string_view line, std::span<const TokenSeq> paper_sentences) {
  const auto ref = tokenize(line);
  if (ref.empty()) throw Error(ErrorCode::EmptyLine, "slide line has no tokens");
  FeatureVector out{};
  for (const auto& sent : paper_sentences) {
    const auto v = rouge(sent, ref).values();
    for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = std::max(out[i], v[i]);
  }
  return out;
}

inline std::vector<TokenSeq> tokenized_sentences(const PaperDoc& doc) {
  std::vector<TokenSeq> out;
  for (const auto& sec : doc.sections) {
    for (const auto& s : sec.sentences) out.push_back(tokenize(s));
  }
  return out;
}

inline FeatureVector featurize(std::string_view line, const PaperDoc& doc) {
  const auto sents = tokenized_sentences(doc);
  return featurize(line, std::span<const TokenSeq>(sents));
}

struct Sample {
  FeatureVector x{};
  Label y = Label::Derivable;
};

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = 3;  // floor(sqrt(9))
  std::uint64_t seed = 0;
};

/// Majority label, ties to Derivable.
inline Label majority(std::size_t derivable, std::size_t underivable) {
  return derivable >= underivable ? Label::Derivable : Label::Underivable;
}

class DecisionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    Label label = Label::Derivable;

    bool operator==(const Node&) const = default;
  };

  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  static DecisionTree grow(std::span<const Sample> data, std::span<const std::size_t> rows,
                           const ForestConfig& config, Rng& rng) {
    DecisionTree t;
    std::vector<std::size_t> work(rows.begin(), rows.end());
    t.grow_node(data, work, 0, config, rng);
    return t;
  }

  Label predict(const FeatureVector& x) const {
    if (nodes_.empty()) throw Error(ErrorCode::UnfittedModel, "tree has no nodes");
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
      const auto& n = nodes_[i];
      i = x[std::size_t(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i].label;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  bool operator==(const DecisionTree&) const = default;

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted child Gini
  };

  static double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    const double p = double(pos) / double(n);
    return 2.0 * p * (1.0 - p);
  }

  // Best threshold on one feature: midpoints between consecutive distinct
  // values, minimizing the size-weighted Gini of the two children.
  static std::optional<Split> best_split_on(std::span<const Sample> data, std::span<const std::size_t> rows,
                                            std::size_t f) {
    std::vector<std::pair<double, bool>> v;
    v.reserve(rows.size());
    std::size_t total_pos = 0;
    for (auto r : rows) {
      const bool pos = data[r].y == Label::Derivable;
      v.emplace_back(data[r].x[f], pos);
      total_pos += pos ? 1 : 0;
    }
    std::sort(v.begin(), v.end());
    std::optional<Split> best;
    std::size_t left_pos = 0;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_pos += v[i].second ? 1 : 0;
      if (v[i].first == v[i + 1].first) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      const double imp = (double(nl) * gini(left_pos, nl) + double(nr) * gini(total_pos - left_pos, nr)) / double(n);
      if (!best || imp < best->impurity) {
        best = Split{f, v[i].first + (v[i + 1].first - v[i].first) / 2.0, imp};
      }
    }
    return best;
  }

  std::uint32_t grow_node(std::span<const Sample> data, std::vector<std::size_t>& rows, std::size_t depth,
                          const ForestConfig& config, Rng& rng) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    std::size_t pos = 0;
    for (auto r : rows) pos += data[r].y == Label::Derivable ? 1 : 0;
    nodes_[id].label = majority(pos, rows.size() - pos);

    const bool pure = pos == 0 || pos == rows.size();
    const bool depth_capped = config.max_depth && depth >= config.max_depth;
    if (pure || depth_capped || rows.size() < config.min_samples_split) return id;

    // Try the sampled features first; if none of them separates the rows,
    // keep drawing from the remaining ones.
    std::array<std::size_t, kFeatureCount> features;
    std::iota(features.begin(), features.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(features), rng);
    const double parent = gini(pos, rows.size());
    std::optional<Split> best;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (i >= config.features_per_split && best) break;
      auto s = best_split_on(data, rows, features[i]);
      if (s && (!best || s->impurity < best->impurity)) best = s;
    }
    if (!best || !(best->impurity < parent)) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (data[r].x[best->feature] <= best->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    nodes_[id].feature = static_cast<std::int32_t>(best->feature);
    nodes_[id].threshold = best->threshold;
    const auto l = grow_node(data, left, depth + 1, config, rng);
    const auto r = grow_node(data, right, depth + 1, config, rng);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Node> nodes_;
};

class RandomForest {
 public:
  static constexpr std::uint16_t kFileVersion = 1;

  RandomForest() = default;
  RandomForest(ForestConfig config, std::vector<DecisionTree> trees)
      : config_(config), trees_(std::move(trees)) {}

  bool fitted() const { return !trees_.empty(); }
  const ForestConfig& config() const { return config_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::optional<double> oob_accuracy() const { return oob_accuracy_; }

  /// Majority vote over trees, ties to Derivable.
  Label predict(const FeatureVector& x) const {
    if (!fitted()) throw Error(ErrorCode::UnfittedModel, "forest has not been fitted");
    std::size_t yes = 0;
    for (const auto& t : trees_) yes += t.predict(x) == Label::Derivable ? 1 : 0;
    return majority(yes, trees_.size() - yes);
  }

  static RandomForest fit(std::span<const Sample> samples, const ForestConfig& config) {
    if (samples.size() < 2) throw Error(ErrorCode::EmptyTraining, "need at least two samples");
    const auto pos = std::count_if(samples.begin(), samples.end(),
                                   [](const Sample& s) { return s.y == Label::Derivable; });
    if (pos == 0 || std::size_t(pos) == samples.size()) {
      throw Error(ErrorCode::DegenerateLabels, "training labels contain a single class");
    }
    if (config.n_trees < 1 || config.features_per_split < 1 || config.features_per_split > kFeatureCount) {
      throw Error(ErrorCode::DegenerateConfig, "need n_trees >= 1 and 1 <= features_per_split <= 9");
    }

    RandomForest forest;
    forest.config_ = config;
    const std::size_t n = samples.size();
    std::vector<std::size_t> yes_votes(n, 0), oob_votes(n, 0);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
      // Each tree draws from its own stream so tree t depends only on (seed, t).
      Rng rng(mix64(config.seed ^ mix64(t + 1)));
      std::vector<std::size_t> rows(n);
      std::vector<bool> in_bag(n, false);
      for (auto& r : rows) {
        r = uniform_index(rng, n);
        in_bag[r] = true;
      }
      forest.trees_.push_back(DecisionTree::grow(samples, rows, config, rng));
      for (std::size_t i = 0; i < n; ++i) {
        if (in_bag[i]) continue;
        ++oob_votes[i];
        yes_votes[i] += forest.trees_.back().predict(samples[i].x) == Label::Derivable ? 1 : 0;
      }
    }
    std::size_t scored = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!oob_votes[i]) continue;
      ++scored;
      correct += majority(yes_votes[i], oob_votes[i] - yes_votes[i]) == samples[i].y ? 1 : 0;
    }
    if (scored) forest.oob_accuracy_ = double(correct) / double(scored);
    return forest;
  }

  void save(std::ostream& out) const {
    binary::put_magic(out, "D2SF", kFileVersion);
    binary::put<std::uint32_t>(out, kFeatureCount);
    binary::put<std::uint64_t>(out, config_.seed);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.n_trees));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.max_depth));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.min_samples_split));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.features_per_split));
    binary::put<double>(out, oob_accuracy_.value_or(-1.0));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(trees_.size()));
    for (const auto& t : trees_) {
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.nodes().size()));
      for (const auto& node : t.nodes()) {
        binary::put<std::int32_t>(out, node.feature);
        binary::put<double>(out, node.threshold);
        binary::put<std::uint32_t>(out, node.left);
        binary::put<std::uint32_t>(out, node.right);
        binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(node.label));
      }
    }
  }

  static RandomForest load(std::istream& in) {
    const auto version = binary::expect_magic(in, "D2SF");
    if (version != kFileVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported forest version " + std::to_string(version));
    }
    if (binary::get<std::uint32_t>(in) != kFeatureCount) {
      throw Error(ErrorCode::DimensionMismatch, "forest was trained on a different feature count");
    }
    RandomForest f;
    f.config_.seed = binary::get<std::uint64_t>(in);
    f.config_.n_trees = binary::get<std::uint32_t>(in);
    f.config_.max_depth = binary::get<std::uint32_t>(in);
    f.config_.min_samples_split = binary::get<std::uint32_t>(in);
    f.config_.features_per_split = binary::get<std::uint32_t>(in);
    if (const double oob = binary::get<double>(in); oob >= 0.0) f.oob_accuracy_ = oob;
    const auto n_trees = binary::get<std::uint32_t>(in);
    for (std::uint32_t t = 0; t < n_trees; ++t) {
      std::vector<DecisionTree::Node> nodes(binary::get<std::uint32_t>(in));
      for (auto& node : nodes) {
        node.feature = binary::get<std::int32_t>(in);
        node.threshold = binary::get<double>(in);
        node.left = binary::get<std::uint32_t>(in);
        node.right = binary::get<std::uint32_t>(in);
        node.label = binary::get<std::uint8_t>(in) ? Label::Derivable : Label::Underivable;
        const bool bad_feature = node.feature >= std::int32_t(kFeatureCount);
        const bool bad_child = node.feature >= 0 && (node.left >= nodes.size() || node.right >= nodes.size());
        if (bad_feature || bad_child) throw Error(ErrorCode::SchemaError, "corrupt forest node");
      }
      f.trees_.emplace_back(std::move(nodes));
    }
    return f;
  }

  void save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    save(out);
  }

  static RandomForest load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    return load(in);
  }

 private:
  ForestConfig config_;
  std::vector<DecisionTree> trees_;
  std::optional<double> oob_accuracy_;
};

inline RandomForest fit(std::span<const Sample> samples, const ForestConfig& config = {}) {
  return RandomForest::fit(samples, config);
}

inline Label predict(const RandomForest& forest, const FeatureVector& x) { return forest.predict(x); }

struct FilterReport {
  std::size_t lines_seen = 0;
  std::size_t lines_removed = 0;
  std::size_t slides_dropped = 0;
};

inline nlohmann::json to_json(const FilterReport& r) {
  return {{"lines_seen", r.lines_seen}, {"lines_removed", r.lines_removed}, {"slides_dropped", r.slides_dropped}};
}

struct FilterResult {
  std::vector<Deck> decks;
  FilterReport report;
};

/// Drops lines the forest labels underivable, then slides left without
/// lines. Slide indices are kept so filtered decks stay aligned with the
/// originals. Only for training data; evaluation corpora stay unfiltered.
inline FilterResult filter_corpus(std::span<const Deck> decks, std::span<const PaperDoc> papers,
                                  const RandomForest& forest) {
  FilterResult out;
  for (const auto& deck : decks) {
    const auto sents = tokenized_sentences(paired_paper(deck.deck_id, papers));
    Deck kept{deck.deck_id, {}};
    for (const auto& slide : deck.slides) {
      SlideRecord s = slide;
      s.content_lines.clear();
      for (const auto& line : slide.content_lines) {
        ++out.report.lines_seen;
        const bool keep = tokenize(line).empty() ||
                          forest.predict(featurize(line, std::span<const TokenSeq>(sents))) == Label::Derivable;
        if (keep) {
          s.content_lines.push_back(line);
        } else {
          ++out.report.lines_removed;
        }
      }
      if (s.content_lines.empty()) {
        ++out.report.slides_dropped;
      } else {
        kept.slides.push_back(std::move(s));
      }
    }
    out.decks.push_back(std::move(kept));
  }
  return out;
}

struct Annotation {
  std::string deck_id;
  std::size_t slide_index = 0;
  std::size_t line_index = 0;
  Label label = Label::Derivable;
};

/// CSV rows `deck_id,slide_index,line_index,label` with labels 1/0. A header
/// row starting with "deck_id" is skipped.
inline std::vector<Annotation> parse_annotations(std::string_view csv) {
  std::vector<Annotation> out;
  std::istringstream in{std::string(csv)};
  std::string row;
  std::size_t line_no = 0;
  while (std::getline(in, row)) {
    ++line_no;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty() || (line_no == 1 && row.rfind("deck_id", 0) == 0)) continue;
    std::vector<std::string> cells;
    std::stringstream ss(row);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    auto bad = [&] { return Error(ErrorCode::SchemaError, "annotations line " + std::to_string(line_no) + ": '" + row + "'"); };
    if (cells.size() != 4 || (cells[3] != "0" && cells[3] != "1")) throw bad();
    Annotation a;
    a.deck_id = cells[0];
    try {
      a.slide_index = std::stoul(cells[1]);
      a.line_index = std::stoul(cells[2]);
    } catch (const std::exception&) {
      throw bad();
    }
    a.label = cells[3] == "1" ? Label::Derivable : Label::Underivable;
    out.push_back(std::move(a));
  }
  return out;
}

/// Feature vectors for annotated lines, featurized against their paired paper.
inline std::vector<Sample> annotation_samples(std::span<const Annotation> annotations,
                                              std::span<const Deck> decks, std::span<const PaperDoc> papers) {
  std::map<std::string, std::vector<TokenSeq>> sentence_cache;
  std::vector<Sample> out;
  for (const auto& a : annotations) {
    const Deck* deck = nullptr;
    for (const auto& d : decks) {
      if (d.deck_id == a.deck_id) deck = &d;
    }
    if (!deck) throw Error(ErrorCode::MisalignedCorpora, "annotation references unknown deck '" + a.deck_id + "'");
    const SlideRecord* slide = nullptr;
    for (const auto& s : deck->slides) {
      if (s.slide_index == a.slide_index) slide = &s;
    }
    if (!slide || a.line_index >= slide->content_lines.size()) {
      throw Error(ErrorCode::MisalignedCorpora, "annotation references missing line in deck '" + a.deck_id + "'");
    }
    auto it = sentence_cache.find(a.deck_id);
    if (it == sentence_cache.end()) {
      it = sentence_cache.emplace(a.deck_id, tokenized_sentences(paired_paper(a.deck_id, papers))).first;
    }
    out.push_back({featurize(slide->content_lines[a.line_index], std::span<const TokenSeq>(it->second)), a.label});
  }
  return out;
}

}  // namespace d2s
