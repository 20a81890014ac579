#include <sstream>

#include <gtest/gtest.h>

#include "../common/oracles.hpp"
#include "../common/synthetic.hpp"
#include "d2s/data_filter.hpp"
#include "test_support.hpp"

using namespace d2s;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

double accuracy(const RandomForest& f, const std::vector<Sample>& data) {
  std::size_t ok = 0;
  for (const auto& s : data) ok += f.predict(s.x) == s.y ? 1 : 0;
  return double(ok) / double(data.size());
}

ForestConfig small(std::uint64_t seed = 1) {
  ForestConfig c;
  c.n_trees = 25;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Featurize, VerbatimLineHasFullRecall) {
  const auto doc = test::sample_paper();
  const auto& line = doc.sections[4].sentences[1];
  const auto f = featurize(line, doc);
  EXPECT_DOUBLE_EQ(f[1], 1.0);  // rouge-1 recall
  EXPECT_DOUBLE_EQ(f[7], 1.0);  // rouge-l recall
  const auto none = featurize("zzqx wvvy", doc);
  for (double v : none) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(code_of([&] { featurize("  ", doc); }), ErrorCode::EmptyLine);
}

TEST(Featurize, MaxOverSentencesMatchesOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenSeq> sents;
    for (int i = 0; i < 5; ++i) sents.push_back(test::random_tokens(rng, 10, 4));
    auto ref = test::random_tokens(rng, 8, 4);
    if (ref.empty()) ref = {"a"};
    std::string line;
    for (const auto& t : ref) line += t + " ";
    const auto f = featurize(line, std::span<const TokenSeq>(sents));
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      double want = 0;
      for (const auto& s : sents) want = std::max(want, oracle::rouge(s, ref)[i]);
      EXPECT_NEAR(f[i], want, 1e-12);
    }
  }
}

TEST(Forest, SingleFeatureSeparable) {
  std::vector<Sample> data;
  for (int i = 0; i < 40; ++i) {
    Sample s;
    s.x[4] = i / 40.0;
    s.y = i >= 20 ? Label::Derivable : Label::Underivable;
    data.push_back(s);
  }
  const auto f = fit(data, small());
  EXPECT_DOUBLE_EQ(accuracy(f, data), 1.0);
  ASSERT_TRUE(f.oob_accuracy().has_value());
  EXPECT_GE(*f.oob_accuracy(), 0.9);
}

TEST(Forest, IdenticalFeaturesGiveLeaves) {
  std::vector<Sample> data(6);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].y = i % 2 ? Label::Derivable : Label::Underivable;
  const auto f = fit(data, small());
  for (const auto& t : f.trees()) EXPECT_EQ(t.nodes().size(), 1u);
}

TEST(Forest, BlobsHeldOut) {
  const auto train = synthetic::blobs(200, 0.3, 1);
  const auto test = synthetic::blobs(500, 0.3, 2);
  const auto f = fit(train);
  EXPECT_GE(accuracy(f, test), 0.95);
}

TEST(Forest, DeterministicAndSeedSensitive) {
  const auto train = synthetic::blobs(120, 0.2, 3);
  const auto a = fit(train, small(7));
  const auto b = fit(train, small(7));
  EXPECT_EQ(a.trees(), b.trees());
  std::stringstream sa, sb;
  a.save(sa);
  b.save(sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(fit(train, small(8)).trees(), a.trees());
}

TEST(Forest, VoteIgnoresTreeOrderAndTiesToDerivable) {
  const DecisionTree yes({DecisionTree::Node{-1, 0, 0, 0, Label::Derivable}});
  const DecisionTree no({DecisionTree::Node{-1, 0, 0, 0, Label::Underivable}});
  const FeatureVector x{};
  EXPECT_EQ(RandomForest({}, {yes, no}).predict(x), Label::Derivable);
  EXPECT_EQ(RandomForest({}, {no, yes}).predict(x), Label::Derivable);
  EXPECT_EQ(RandomForest({}, {no, yes, no}).predict(x), Label::Underivable);

  const auto f = fit(synthetic::blobs(100, 0.3, 4), small());
  auto reversed = f.trees();
  std::reverse(reversed.begin(), reversed.end());
  const RandomForest g(f.config(), reversed);
  for (const auto& s : synthetic::blobs(100, 0.0, 5)) EXPECT_EQ(f.predict(s.x), g.predict(s.x));
}

TEST(Forest, SaveLoadAndErrors) {
  const auto f = fit(synthetic::blobs(80, 0.3, 6), small());
  std::stringstream buf;
  f.save(buf);
  EXPECT_EQ(buf.str().substr(0, 4), "D2SF");
  const auto g = RandomForest::load(buf);
  EXPECT_EQ(g.trees(), f.trees());
  std::stringstream bad("NOPE");
  EXPECT_EQ(code_of([&] { RandomForest::load(bad); }), ErrorCode::SchemaError);
  std::stringstream cut(buf.str().substr(0, buf.str().size() / 2));
  EXPECT_EQ(code_of([&] { RandomForest::load(cut); }), ErrorCode::SchemaError);

  EXPECT_EQ(code_of([] { RandomForest().predict(FeatureVector{}); }), ErrorCode::UnfittedModel);
  std::vector<Sample> one_class(5);
  EXPECT_EQ(code_of([&] { fit(one_class); }), ErrorCode::DegenerateLabels);
  EXPECT_EQ(code_of([] { fit(std::vector<Sample>{}); }), ErrorCode::EmptyTraining);
}

TEST(FilterCorpus, KeepsEverythingWithAcceptingForest) {
  const std::vector<PaperDoc> papers = {test::sample_paper()};
  const std::vector<Deck> decks = {test::sample_deck()};
  const DecisionTree yes({DecisionTree::Node{-1, 0, 0, 0, Label::Derivable}});
  const DecisionTree no({DecisionTree::Node{-1, 0, 0, 0, Label::Underivable}});
  const auto kept = filter_corpus(decks, papers, RandomForest({}, {yes}));
  EXPECT_EQ(kept.decks, decks);
  EXPECT_EQ(kept.report.lines_removed, 0u);

  const auto gone = filter_corpus(decks, papers, RandomForest({}, {no}));
  EXPECT_TRUE(gone.decks[0].slides.empty());
  EXPECT_EQ(gone.report.slides_dropped, decks[0].slides.size());
  EXPECT_EQ(gone.report.lines_removed, gone.report.lines_seen);
}

TEST(FilterCorpus, IdempotentWithTrainedForest) {
  const std::vector<PaperDoc> papers = {test::sample_paper()};
  const std::vector<Deck> decks = {test::sample_deck()};
  const auto annotations = parse_annotations(test::slurp(test::fixture_path("sample_annotations.csv")));
  EXPECT_EQ(annotations.size(), 14u);
  const auto samples = annotation_samples(annotations, decks, papers);
  const auto f = fit(samples, small());
  const auto once = filter_corpus(decks, papers, f);
  const auto twice = filter_corpus(once.decks, papers, f);
  EXPECT_EQ(twice.decks, once.decks);
  EXPECT_EQ(twice.report.lines_removed, 0u);
  for (const auto& s : once.decks[0].slides) {
    bool found = false;
    for (const auto& orig : decks[0].slides) found = found || orig.slide_index == s.slide_index;
    EXPECT_TRUE(found);
  }
}

TEST(Annotations, ParseErrors) {
  EXPECT_EQ(code_of([] { parse_annotations("deck_id,slide_index,line_index,label\nd,0,0,2\n"); }),
            ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_annotations("d,x,0,1\n"); }), ErrorCode::SchemaError);
  EXPECT_EQ(parse_annotations("d,1,2,0\r\n").at(0).label, Label::Underivable);
  const std::vector<Deck> decks = {test::sample_deck()};
  const std::vector<PaperDoc> papers = {test::sample_paper()};
  const auto bad = parse_annotations("sample-paper,0,99,1\n");
  EXPECT_EQ(code_of([&] { annotation_samples(bad, decks, papers); }), ErrorCode::MisalignedCorpora);
}
