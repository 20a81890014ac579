#pragma once

// Synthetic corpora shared by the unit tests and the acceptance binary.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "d2s/data_filter.hpp"
#include "d2s/embedder.hpp"

namespace d2s::synthetic {

/// n title/content pairs; pair i uses its own vocabulary and titles share no
/// word with their content. Every other content is a negative.
inline std::vector<TrainingPair> separable_pairs(std::size_t n = 50) {
  std::vector<std::string> titles, contents;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = std::to_string(i);
    titles.push_back("ttl" + id + "a ttl" + id + "b");
    contents.push_back("txt" + id + "a txt" + id + "b txt" + id + "c txt" + id + "d");
  }
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingPair p{titles[i], contents[i], {}};
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) p.negatives.push_back(contents[j]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<std::string> texts_of(const std::vector<TrainingPair>& pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) {
    out.push_back(p.title);
    out.push_back(p.positive_content);
  }
  return out;
}

/// Share of titles whose best-scoring content is their own.
inline double retrieval_accuracy(const HashedTfidfEmbedder& e, const std::vector<TrainingPair>& pairs) {
  std::vector<EmbeddingVector> contents;
  for (const auto& p : pairs) contents.push_back(e.embed(p.positive_content));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto q = e.embed(pairs[i].title);
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t j = 0; j < contents.size(); ++j) {
      const double s = dot(q, contents[j]);
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    hits += best == i ? 1 : 0;
  }
  return double(hits) / double(pairs.size());
}

/// Two classes in [0,1]^9 separated on the mean of the first three features:
/// Derivable when the mean is >= 0.5 + margin/2, Underivable when <= 0.5 - margin/2.
inline std::vector<Sample> blobs(std::size_t n, double margin, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Sample> out;
  while (out.size() < n) {
    Sample s;
    for (auto& v : s.x) v = u(rng);
    const double m = (s.x[0] + s.x[1] + s.x[2]) / 3.0;
    if (m >= 0.5 + margin / 2) {
      s.y = Label::Derivable;
    } else if (m <= 0.5 - margin / 2) {
      s.y = Label::Underivable;
    } else {
      continue;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace d2s::synthetic
