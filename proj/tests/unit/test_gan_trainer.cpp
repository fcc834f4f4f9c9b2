#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "nluaug/error.hpp"
#include "nluaug/gan_trainer.hpp"

using namespace nluaug;

namespace {

struct GanFixture {
  std::vector<AnnotatedUtterance> corpus;
  Vocabulary vocab;
  std::vector<std::vector<int>> goldens;
  Rng init{11};
  std::optional<GeneratorModel> gen;
  std::optional<TokenDiscriminator> token;
  std::optional<SentenceDiscriminator> sentence;

  explicit GanFixture(std::size_t n) {
    Rng r(10);
    corpus = testkit::syntheticNluCorpus(n, 0, r, {"alarm"}).train;
    vocab = Vocabulary::build(corpus);
    for (const auto& u : corpus) goldens.push_back(trainingSymbols(encodeSequence(u, vocab)));
    gen.emplace(vocab, GeneratorConfig{8, 16, 14, 1.0}, init);
    token.emplace(vocab.size(), TokenDiscriminatorConfig{8, 16}, init);
    sentence.emplace(vocab.size(), SentenceDiscriminatorConfig{8, {1, 2, 3}, 8, 0.0}, init);
  }
};

TrainSchedule tiny() {
  TrainSchedule s;
  s.genPretrainEpochs = 1;
  s.discPretrainEpochs = 1;
  s.adversarialEpochs = 3;
  s.batchSize = 4;
  s.snapshotEvery = 2;
  s.snapshotSamples = 10;
  s.policy.kind = RewardKind::TokenLevel;
  return s;
}

}  // namespace

TEST(GanTrainer, ThreeEpochCounterAudit) {
  GanFixture s(12);
  GanTrainer t(*s.gen, &*s.token, nullptr, tiny(), Rng(1));
  t.runPretraining(s.goldens);
  t.runAdversarial(s.goldens);
  const auto& c = t.counters();
  EXPECT_EQ(c.mleEpochs, 1u);
  EXPECT_EQ(c.generatorUpdates, 3u);
  EXPECT_EQ(c.discriminatorSteps, 105u);
  EXPECT_EQ(c.positives, c.negatives);
  // Pre-training draws one fake per golden.
  EXPECT_EQ(c.discPretrainSteps, (s.goldens.size() + 1) / 2);

  std::size_t last = 0;
  bool first = true, sawQuality = false;
  for (const auto& rec : t.log().records) {
    if (!first) EXPECT_GT(rec.epoch, last);
    first = false;
    last = rec.epoch;
    sawQuality |= rec.quality.has_value();
  }
  EXPECT_EQ(t.log().records.size(), 1u + 1u + 3u);
  EXPECT_TRUE(sawQuality);
}

TEST(GanTrainer, ZeroScheduleLeavesModelsUnchanged) {
  GanFixture s(6);
  auto sched = tiny();
  sched.genPretrainEpochs = sched.discPretrainEpochs = sched.adversarialEpochs = 0;
  const auto g = s.gen->params().fingerprint();
  const auto d = s.token->params().fingerprint();
  GanTrainer t(*s.gen, &*s.token, nullptr, sched, Rng(1));
  t.runPretraining(s.goldens);
  t.runAdversarial(s.goldens);
  EXPECT_EQ(s.gen->params().fingerprint(), g);
  EXPECT_EQ(s.token->params().fingerprint(), d);
  EXPECT_TRUE(t.log().records.empty());
}

TEST(GanTrainer, PolicyMismatchRejectedAtConstruction) {
  GanFixture s(4);
  auto sched = tiny();
  EXPECT_THROW(GanTrainer(*s.gen, nullptr, &*s.sentence, sched, Rng(1)), ConfigError);
  sched.policy.kind = RewardKind::SentenceLevelMC;
  EXPECT_THROW(GanTrainer(*s.gen, &*s.token, nullptr, sched, Rng(1)), ConfigError);
  sched.batchSize = 3;
  EXPECT_THROW(GanTrainer(*s.gen, &*s.token, &*s.sentence, sched, Rng(1)), ConfigError);
}

TEST(GanTrainer, EmptyGoldensRejected) {
  GanFixture s(4);
  GanTrainer t(*s.gen, &*s.token, nullptr, tiny(), Rng(1));
  EXPECT_THROW(t.runPretraining({}), DataError);
  EXPECT_THROW(t.runAdversarial({}), DataError);
}

TEST(GanTrainer, SameSeedGivesIdenticalLogs) {
  auto run = [](RewardKind kind) {
    GanFixture s(8);
    auto sched = tiny();
    sched.policy.kind = kind;
    sched.policy.rollouts = 2;
    GanTrainer t(*s.gen, &*s.token, &*s.sentence, sched, Rng(42));
    t.runPretraining(s.goldens);
    t.runAdversarial(s.goldens);
    return t.log().csv();
  };
  for (auto k : {RewardKind::TokenLevelMC, RewardKind::SentenceLevelMC}) EXPECT_EQ(run(k), run(k));
}

// A generator that memorises ten goldens makes its fakes identical to them,
// so this fixture slows generator MLE and averages over seeds.
TEST(GanTrainer, PretrainedDiscriminatorSeparatesItsTrainingPairs) {
  double total = 0.0;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    GanFixture s(10);
    auto sched = tiny();
    sched.genPretrainEpochs = 80;
    sched.discPretrainEpochs = 80;
    sched.adversarialEpochs = 0;
    sched.generatorPretrainOptimizer.learningRate = 1e-3;
    sched.discriminatorOptimizer.learningRate = 1e-2;
    Rng init(static_cast<std::uint64_t>(seed));
    s.gen.emplace(s.vocab, GeneratorConfig{8, 16, 14, 1.0}, init);
    s.token.emplace(s.vocab.size(), TokenDiscriminatorConfig{8, 16}, init);
    GanTrainer t(*s.gen, &*s.token, nullptr, sched, Rng(static_cast<std::uint64_t>(seed + 100)));
    t.runPretraining(s.goldens);
    Rng r(static_cast<std::uint64_t>(seed + 200));
    const auto fakes = sample(*s.gen, s.goldens.size(), r).sequences;
    LabeledBatch check;
    for (std::size_t i = 0; i < s.goldens.size(); ++i) {
      check.add(s.goldens[i], true);
      check.add(fakes[i], false);
    }
    total += discriminatorAccuracy(*s.token, check);
  }
  EXPECT_GT(total / seeds, 0.9);
}
