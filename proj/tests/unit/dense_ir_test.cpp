#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "../common/oracles.hpp"
#include "../common/random_index.hpp"
#include "d2s/dense_ir.hpp"
#include "d2s/eval_harness.hpp"
#include "test_support.hpp"

using namespace d2s;

namespace {

PaperDoc sections_of(std::vector<std::size_t> counts) {
  PaperDoc doc;
  doc.paper_id = "p";
  doc.title = "T";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    Section s{std::to_string(i + 1), "H" + std::to_string(i + 1), {}};
    for (std::size_t j = 0; j < counts[i]; ++j) s.sentences.push_back("Sentence " + std::to_string(j) + ".");
    doc.sections.push_back(s);
  }
  return doc;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

std::vector<std::size_t> ids(const std::vector<ScoredCandidate>& c) {
  std::vector<std::size_t> out;
  for (const auto& x : c) out.push_back(x.snippet_id);
  return out;
}

}  // namespace

TEST(Snippetize, WindowArithmetic) {
  const auto doc = sections_of({9, 0, 4});
  const HeaderTree tree(doc);
  const auto s = snippetize(doc, tree);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].span.start, 0u);
  EXPECT_EQ(s[0].span.end, 4u);
  EXPECT_EQ(s[1].span.end, 8u);
  EXPECT_EQ(s[2].span.start, 8u);
  EXPECT_EQ(s[2].span.end, 9u);
  EXPECT_EQ(s[3].span.section_index, 2u);
  EXPECT_EQ(s[0].text, "Sentence 0. Sentence 1. Sentence 2. Sentence 3.");
  EXPECT_EQ(code_of([&] { snippetize(doc, tree, 0); }), ErrorCode::InvalidWindow);
}

TEST(Snippetize, PartitionsSentencesForAnyWindow) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> counts(1 + rng() % 6);
    for (auto& c : counts) c = rng() % 11;
    counts[0] = std::max<std::size_t>(counts[0], 1);
    const auto doc = sections_of(counts);
    const HeaderTree tree(doc);
    const std::size_t window = 1 + rng() % 6;
    std::size_t covered = 0;
    std::size_t expect_start = 0, section = 0;
    for (const auto& s : snippetize(doc, tree, window)) {
      EXPECT_LE(s.span.end - s.span.start, window);
      if (s.span.section_index != section) {
        section = s.span.section_index;
        expect_start = 0;
      }
      EXPECT_EQ(s.span.start, expect_start);
      expect_start = s.span.end;
      covered += s.span.end - s.span.start;
    }
    EXPECT_EQ(covered, doc.sentence_count());
  }
}

TEST(Snippetize, FixtureMatchesManifest) {
  const auto doc = test::sample_paper();
  const HeaderTree tree(doc);
  const auto snippets = snippetize(doc, tree);
  const auto m = test::manifest();
  ASSERT_EQ(snippets.size(), m["snippet_count"].get<std::size_t>());
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    const auto& want = m["snippets"][i];
    EXPECT_EQ(snippets[i].span.section_index, want["section"].get<std::size_t>());
    EXPECT_EQ(snippets[i].span.start, want["start"].get<std::size_t>());
    EXPECT_EQ(snippets[i].span.end, want["end"].get<std::size_t>());
    EXPECT_EQ(snippets[i].keyword, want["keyword"].get<std::string>()) << i;
  }
}

TEST(BuildIndex, VectorsAndErrors) {
  const auto doc = test::sample_paper();
  const HeaderTree tree(doc);
  auto snippets = snippetize(doc, tree);
  const auto e = HashedTfidfEmbedder::fit(std::vector<std::string>{"x"}, 128, 0);
  const auto index = build_index(snippets, e);
  EXPECT_EQ(index.size(), snippets.size());
  EXPECT_DOUBLE_EQ(index.alpha(), 0.75);
  for (const auto& s : index.snippets()) {
    EXPECT_NEAR(l2_norm(s.text_vec), 1.0, 1e-9);
    EXPECT_NEAR(l2_norm(s.kw_vec), 1.0, 1e-9);
  }
  EXPECT_EQ(code_of([&] { build_index(snippets, e, 1.3); }), ErrorCode::AlphaOutOfRange);
  EXPECT_EQ(code_of([&] { build_index({}, e); }), ErrorCode::EmptySnippets);

  std::vector<Snippet> one(snippets.begin(), snippets.begin() + 1);
  const auto single = build_index(one, e);
  const auto got = retrieve(single, "anything at all", e, 10);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].snippet_id, 0u);
  EXPECT_EQ(code_of([&] { retrieve(single, "  ", e); }), ErrorCode::EmptyTitle);
}

TEST(Retrieve, ExactAgainstBruteForce) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> a01(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = synthetic::random_corpus(rng, 300, 64);
    const double alpha = a01(rng);
    const SnippetIndex index(c.snippets, 64, alpha);
    const auto q = synthetic::unit_vector(rng, 64);
    const auto got = index.search(q, 10);
    const auto want = oracle::brute_force_rank(c.text, c.kw, q, alpha);
    ASSERT_EQ(got.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_EQ(got[i].snippet_id, want[i].id);
      EXPECT_EQ(got[i].score, mix_scores(alpha, got[i].text_score, got[i].kw_score));
      EXPECT_NEAR(got[i].score, want[i].score, 1e-12);
    }
    EXPECT_EQ(index.search(q, 1000).size(), 300u);
  }
}

TEST(Retrieve, AlphaEndpointsAndTies) {
  std::mt19937_64 rng(8);
  auto c = synthetic::random_corpus(rng, 100, 32);
  // Duplicate rows force exact ties, which must fall back to snippet id.
  c.snippets[7].text_vec = c.snippets[3].text_vec;
  c.snippets[7].kw_vec = c.snippets[3].kw_vec;
  const SnippetIndex index(c.snippets, 32, 0.75);
  const auto q = synthetic::unit_vector(rng, 32);
  auto by = [&](auto key) {
    std::vector<std::size_t> order(100);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key(a) > key(b); });
    return order;
  };
  const auto text_order = by([&](std::size_t i) { return dot(q, c.snippets[i].text_vec); });
  const auto kw_order = by([&](std::size_t i) { return dot(q, c.snippets[i].kw_vec); });
  EXPECT_EQ(ids(index.search(q, 100, 1.0)), text_order);
  EXPECT_EQ(ids(index.search(q, 100, 0.0)), kw_order);
  const auto all = index.search(q, 100);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    if (all[i].score == all[i + 1].score) {
      EXPECT_LT(all[i].snippet_id, all[i + 1].snippet_id);
    }
  }
}

TEST(Retrieve, JointArgmaxIsFirstForEveryAlpha) {
  std::mt19937_64 rng(13);
  auto c = synthetic::random_corpus(rng, 50, 16);
  const auto q = synthetic::unit_vector(rng, 16);
  c.snippets[20].text_vec = q;
  c.snippets[20].kw_vec = q;
  const SnippetIndex index(c.snippets, 16, 0.5);
  for (double alpha = 0.0; alpha <= 1.0; alpha += 0.125) {
    EXPECT_EQ(index.search(q, 1, alpha)[0].snippet_id, 20u) << alpha;
  }
}

TEST(ContextText, JoinsAndTruncates) {
  std::vector<Snippet> s(2);
  s[0] = {0, {0, 0, 1}, {"a b."}, "a b.", "k", {1.0}, {1.0}};
  s[1] = {1, {0, 1, 2}, {"c d."}, "c d.", "k", {0.5}, {1.0}};
  const SnippetIndex index(s, 1, 0.75);
  const std::vector<ScoredCandidate> c = {{0, 1, 1, 1}, {1, 0.5, 0.5, 1}};
  EXPECT_EQ(context_text(c, index), "a b. c d.");
  EXPECT_EQ(context_text(c, index, 3), "a b.");

  const auto doc = test::sample_paper();
  const HeaderTree tree(doc);
  const auto e = HashedTfidfEmbedder::fit(std::vector<std::string>{"x"}, 64, 0);
  const auto full = build_index(snippetize(doc, tree), e);
  const auto top = retrieve(full, "Results", e, 10);
  const auto ctx = context_text(top, full, 120);
  EXPECT_LE(token_count(ctx), 120u);
  // Whole sentences only: the cut lands on a sentence boundary.
  EXPECT_EQ(ctx.back(), '.');
  EXPECT_GT(token_count(context_text(top, full)), 120u);
}

TEST(SnippetIndex, SaveLoadRoundTrip) {
  std::mt19937_64 rng(4);
  const auto c = synthetic::random_corpus(rng, 20, 8);
  const SnippetIndex index(c.snippets, 8, 0.3);
  std::stringstream buf;
  index.save(buf);
  EXPECT_EQ(buf.str().substr(0, 4), "D2SI");
  const auto back = SnippetIndex::load(buf);
  EXPECT_EQ(back.snippets(), index.snippets());
  EXPECT_DOUBLE_EQ(back.alpha(), 0.3);
  const auto q = synthetic::unit_vector(rng, 8);
  EXPECT_EQ(back.search(q, 5), index.search(q, 5));
}

TEST(SnippetIndex, JsonShape) {
  std::mt19937_64 rng(4);
  const auto c = synthetic::random_corpus(rng, 5, 4);
  const SnippetIndex index(c.snippets, 4, 0.75);
  const auto top = index.search(synthetic::unit_vector(rng, 4), 2);
  const auto j = to_json(std::span<const ScoredCandidate>(top), index);
  ASSERT_EQ(j["candidates"].size(), 2u);
  for (const char* k : {"snippet_id", "score", "text"}) EXPECT_TRUE(j["candidates"][0].contains(k));
}
