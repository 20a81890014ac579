#pragma once

// Section-header hierarchy of a paper. Numbered headers nest by dotted
// label ("2.1" under "2"); unnumbered headers and orphans hang off a
// synthetic root.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "d2s/doc_model.hpp"
#include "d2s/error.hpp"
#include "d2s/textkit.hpp"

namespace d2s {

inline constexpr double kDefaultMatchThreshold = 0.9;

struct HeaderNode {
  std::string label;
  std::string text;
  std::size_t section_index = 0;  // meaningless for the root
  std::size_t depth = 0;          // root = 0
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;  // document order
};

class HeaderTree {
 public:
  static constexpr std::size_t kRoot = 0;

  HeaderTree() = default;

  explicit HeaderTree(const PaperDoc& doc) : paper_title_(doc.title) {
    nodes_.push_back(HeaderNode{"", doc.title, 0, 0, std::nullopt, {}});
    // Most recent node per label, so repeated labels nest under the latest.
    std::unordered_map<std::string, std::size_t> by_label;
    section_node_.reserve(doc.sections.size());
    for (std::size_t si = 0; si < doc.sections.size(); ++si) {
      const auto& sec = doc.sections[si];
      std::size_t parent = kRoot;
      if (sec.numbered()) {
        if (auto dot = sec.header_label.rfind('.'); dot != std::string::npos) {
          if (auto it = by_label.find(sec.header_label.substr(0, dot)); it != by_label.end()) {
            parent = it->second;
          }
        }
      }
      const std::size_t id = nodes_.size();
      nodes_.push_back(
          HeaderNode{sec.header_label, sec.header_text, si, nodes_[parent].depth + 1, parent, {}});
      nodes_[parent].children.push_back(id);
      if (sec.numbered()) by_label[sec.header_label] = id;
      section_node_.push_back(id);
    }
  }

  const HeaderNode& node(std::size_t id) const { return nodes_.at(id); }
  const HeaderNode& root() const { return nodes_.front(); }
  std::size_t size() const { return nodes_.size(); }
  const std::string& paper_title() const { return paper_title_; }

  /// Node id that represents section `section_index`.
  std::size_t node_of_section(std::size_t section_index) const {
    return section_node_.at(section_index);
  }

  /// Pre-order (document order) descendants, excluding `id` itself.
  std::vector<std::size_t> descendants(std::size_t id) const {
    std::vector<std::size_t> out;
    collect(id, out);
    return out;
  }

  /// First node whose label equals `label`.
  std::optional<std::size_t> find_label(std::string_view label) const {
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      if (nodes_[i].label == label) return i;
    }
    return std::nullopt;
  }

 private:
  void collect(std::size_t id, std::vector<std::size_t>& out) const {
    for (auto c : nodes_.at(id).children) {
      out.push_back(c);
      collect(c, out);
    }
  }

  std::string paper_title_;
  std::vector<HeaderNode> nodes_;
  std::vector<std::size_t> section_node_;
};

inline HeaderTree build_tree(const PaperDoc& doc) { return HeaderTree(doc); }

struct SnippetSpan {
  std::size_t section_index = 0;
  std::size_t start = 0;  // sentence offsets within the section, [start, end)
  std::size_t end = 0;

  bool operator==(const SnippetSpan&) const = default;
};

/// Keyword for a passage: the text of the numbered header whose section holds
/// the passage's first sentence. Unnumbered sections and blank headers fall
/// back to the paper title.
inline std::string snippet_keyword(const HeaderTree& tree, const PaperDoc& doc,
                                   const SnippetSpan& span) {
  if (span.section_index >= doc.sections.size()) {
    throw Error(ErrorCode::SpanOutOfRange, "section " + std::to_string(span.section_index));
  }
  const auto& sec = doc.sections[span.section_index];
  if (span.start >= span.end || span.end > sec.sentences.size()) {
    throw Error(ErrorCode::SpanOutOfRange, "sentence range [" + std::to_string(span.start) + ", " +
                                               std::to_string(span.end) + ")");
  }
  const auto& node = tree.node(tree.node_of_section(span.section_index));
  if (!node.label.empty() && !node.text.empty()) return node.text;
  if (!sec.header_label.empty() && !sec.header_text.empty()) return sec.header_text;
  return tree.paper_title();
}

struct KeywordSet {
  std::optional<std::size_t> matched_header;
  double ratio = 0.0;
  std::vector<std::string> keywords;

  bool empty() const { return keywords.empty(); }
};

/// Best header whose text has Levenshtein ratio >= threshold with the title
/// (case-insensitive). Ties go to the shallower header, then the earlier one.
/// The keyword list is that header followed by all its descendants.
inline KeywordSet match_title(const HeaderTree& tree, std::string_view title,
                              double threshold = kDefaultMatchThreshold) {
  KeywordSet out;
  std::optional<std::size_t> best;
  double best_ratio = -1.0;
  for (std::size_t id = 1; id < tree.size(); ++id) {
    const auto& n = tree.node(id);
    if (n.text.empty()) continue;
    const double r = levenshtein_ratio(title, n.text);
    if (r < threshold) continue;
    if (!best || r > best_ratio || (r == best_ratio && n.depth < tree.node(*best).depth)) {
      best = id;
      best_ratio = r;
    }
  }
  if (!best) return out;
  out.matched_header = best;
  out.ratio = best_ratio;
  out.keywords.push_back(tree.node(*best).text);
  for (auto d : tree.descendants(*best)) {
    if (!tree.node(d).text.empty()) out.keywords.push_back(tree.node(d).text);
  }
  return out;
}

inline nlohmann::json to_json(const HeaderTree& tree, std::size_t id = HeaderTree::kRoot) {
  const auto& n = tree.node(id);
  nlohmann::json children = nlohmann::json::array();
  for (auto c : n.children) children.push_back(to_json(tree, c));
  return {{"label", n.label}, {"text", n.text}, {"children", children}};
}

}  // namespace d2s
