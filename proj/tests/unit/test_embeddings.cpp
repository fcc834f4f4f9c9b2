#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "nluaug/embeddings.hpp"
#include "nluaug/error.hpp"
#include "nluaug/generator.hpp"

using namespace nluaug;

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return ab / std::sqrt(aa * bb);
}

std::filesystem::path writeTemp(const std::string& name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

// "cat" and "dog" only ever appear in the same two contexts; filler words
// appear in random contexts.
std::vector<std::vector<std::string>> distributionalCorpus(Rng& rng) {
  const std::vector<std::string> filler{"red", "blue", "green", "fast", "slow", "tall", "short",
                                        "wide", "thin", "cold", "warm", "loud"};
  std::vector<std::vector<std::string>> out;
  for (int i = 0; i < 400; ++i) {
    const std::string pet = rng.index(2) ? "cat" : "dog";
    out.push_back({"feed", "the", pet, "now"});
    out.push_back({"walk", "my", pet, "today"});
    std::vector<std::string> noise;
    for (int k = 0; k < 5; ++k) noise.push_back(filler[rng.index(filler.size())]);
    out.push_back(noise);
  }
  return out;
}

}  // namespace

TEST(Subwords, DeterministicWithBoundaryToken) {
  const auto u = subwordUnits("cat");
  ASSERT_FALSE(u.empty());
  EXPECT_EQ(u[0], "<cat>");
  EXPECT_EQ(u, subwordUnits("cat"));
  EXPECT_NE(std::find(u.begin(), u.end(), "<ca"), u.end());
  EXPECT_NE(std::find(u.begin(), u.end(), "at>"), u.end());
  // "<cat>" has 5 chars: 3 trigrams, 2 four-grams, 1 five-gram (the full token itself).
  EXPECT_EQ(u.size(), 1u + 3u + 2u);
}

TEST(Skipgram, ZeroEpochsKeepsRandomInit) {
  Rng r(1);
  const std::vector<std::vector<std::string>> corpus{{"a", "b"}};
  SkipgramConfig cfg;
  cfg.epochs = 0;
  cfg.dim = 8;
  auto m = trainSubwordSkipgram(corpus, cfg, r);
  EXPECT_TRUE(m.epochLoss().empty());
  const auto v = m.wordVector("a");
  ASSERT_EQ(v.size(), 8u);
  double norm = 0;
  for (double x : v) {
    EXPECT_LE(std::abs(x), 1.0 / 8.0);
    norm += x * x;
  }
  EXPECT_GT(norm, 0.0);
}

TEST(Skipgram, RejectsBadConfig) {
  Rng r(1);
  SkipgramConfig cfg;
  cfg.dim = 0;
  const std::vector<std::vector<std::string>> corpus{{"a"}};
  EXPECT_THROW(trainSubwordSkipgram(corpus, cfg, r), ConfigError);
  cfg.dim = 4;
  EXPECT_THROW(trainSubwordSkipgram({}, cfg, r), DataError);
}

TEST(Skipgram, SharedContextsGiveSimilarVectorsAndLossFalls) {
  Rng r(2);
  const auto corpus = distributionalCorpus(r);
  SkipgramConfig cfg;
  cfg.dim = 24;
  cfg.epochs = 5;
  cfg.window = 2;
  auto m = trainSubwordSkipgram(corpus, cfg, r);
  ASSERT_EQ(m.epochLoss().size(), 5u);
  EXPECT_LT(m.epochLoss().back(), m.epochLoss().front());
  const double petSim = cosine(m.wordVector("cat"), m.wordVector("dog"));
  EXPECT_GT(petSim, 0.8);
  EXPECT_GT(petSim, cosine(m.wordVector("cat"), m.wordVector("green")));
}

TEST(Skipgram, OovWordComposedFromTrainedNgrams) {
  Rng r(3);
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back({"set", "alarm", "for", "seven", "weather", "today"});
  SkipgramConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 3;
  auto m = trainSubwordSkipgram(corpus, cfg, r);
  const auto oov = m.wordVector("alarms");
  EXPECT_GT(cosine(oov, m.wordVector("alarm")), 0.8);
  EXPECT_GT(cosine(oov, m.wordVector("alarm")), cosine(oov, m.wordVector("weather")));
  // Nothing shared: zero vector.
  for (double x : m.wordVector("qqq")) EXPECT_EQ(x, 0.0);
}

TEST(VectorsText, ParsesHeaderAndRows) {
  auto p = writeTemp("nluaug_vec_ok.txt", "2 3\na 1 0 0\nb 0 1 0\n");
  const auto t = loadVectorsText(p);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(*t.find("b"), (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(t.find("c"), nullptr);
  std::filesystem::remove(p);
}

TEST(VectorsText, RejectsCountAndDimensionMismatch) {
  auto p = writeTemp("nluaug_vec_bad1.txt", "3 3\na 1 0 0\nb 0 1 0\n");
  EXPECT_THROW(loadVectorsText(p), DataError);
  p = writeTemp("nluaug_vec_bad2.txt", "2 3\na 1 0 0\nb 0 1\n");
  try {
    loadVectorsText(p);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
  EXPECT_THROW(loadVectorsText("/nonexistent/vectors.txt"), Error);
}

TEST(VectorsText, SaveLoadRoundTrip) {
  Rng r(4);
  SkipgramConfig cfg;
  cfg.dim = 6;
  cfg.epochs = 1;
  const std::vector<std::vector<std::string>> corpus{{"wake", "me", "up"}, {"set", "alarm"}};
  const auto table = trainSubwordSkipgram(corpus, cfg, r).table();
  auto p = std::filesystem::temp_directory_path() / "nluaug_vec_rt.txt";
  saveVectorsText(table, p);
  EXPECT_EQ(loadVectorsText(p), table);
  std::filesystem::remove(p);
}

TEST(Inject, EmptyTableIsANoOp) {
  auto corpus = testkit::parseAll({"alarm/set wake:none me:none"});
  Rng init(5);
  GeneratorModel gen(Vocabulary::build(corpus), {4, 4, 6, 1.0}, init);
  const auto before = gen.params().fingerprint();
  const auto words = ganRowWords(gen.vocab());
  EXPECT_EQ(injectPretrained(gen.embedding(), words, EmbeddingTable(4), false), 0u);
  EXPECT_EQ(gen.params().fingerprint(), before);
}

TEST(Inject, CopiesByWordPartAndFrozenRowsNeverChange) {
  auto corpus = testkit::parseAll({"alarm/set wake:none me:none at:none 7:datetime",
                                   "alarm/set wake:none 7:datetime"});
  const auto vocab = Vocabulary::build(corpus);
  Rng init(6);
  GeneratorModel gen(vocab, {4, 4, 8, 1.0}, init);
  EmbeddingTable table(4);
  table.add("wake", {1, 2, 3, 4});
  table.add("7", {-1, 0, 1, 0});
  const auto words = ganRowWords(vocab);
  EXPECT_EQ(words[static_cast<std::size_t>(vocab.find("alarm/set"))], "");
  EXPECT_EQ(injectPretrained(gen.embedding(), words, table, true), 2u);
  const auto row = static_cast<std::size_t>(vocab.find("wake:none"));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(gen.embedding().value(row, c), table.row(0)[c]);
  EXPECT_TRUE(gen.embedding().frozen);

  const auto frozen = gen.embedding().value;
  std::vector<std::vector<int>> data;
  for (const auto& u : corpus) data.push_back(trainingSymbols(encodeSequence(u, vocab)));
  Optimizer opt({OptimizerKind::Adam, 1e-1});
  Rng r(7);
  pretrainMLE(gen, data, 5, 2, opt, r);
  EXPECT_EQ(gen.embedding().value.storage(), frozen.storage());

  EmbeddingTable narrow(3);
  narrow.add("wake", {1, 2, 3});
  EXPECT_THROW(injectPretrained(gen.embedding(), words, narrow, false), ConfigError);
}
