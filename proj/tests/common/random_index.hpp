#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "d2s/dense_ir.hpp"

namespace d2s::synthetic {

inline std::vector<double> unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g;
  std::vector<double> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = g(rng);
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

struct RandomCorpus {
  std::vector<std::vector<double>> text;
  std::vector<std::vector<double>> kw;
  std::vector<Snippet> snippets;
};

/// Random snippet vectors. Keyword vectors come from a small pool, as real
/// snippets share their section's keyword.
inline RandomCorpus random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  RandomCorpus c;
  std::vector<std::vector<double>> pool;
  const std::size_t pool_size = 1 + n / 8;
  for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(unit_vector(rng, dim));
  std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
  for (std::size_t i = 0; i < n; ++i) {
    c.text.push_back(unit_vector(rng, dim));
    c.kw.push_back(pool[pick(rng)]);
    Snippet s;
    s.snippet_id = i;
    s.text = "snippet " + std::to_string(i) + ".";
    s.sentences = {s.text};
    s.keyword = "kw";
    s.text_vec = c.text.back();
    s.kw_vec = c.kw.back();
    c.snippets.push_back(std::move(s));
  }
  return c;
}

}  // namespace d2s::synthetic
