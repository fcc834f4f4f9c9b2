#include "nluaug/gan_trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "nluaug/error.hpp"
#include "nluaug/genqual.hpp"

namespace nluaug {

void TrainSchedule::validate() const {
  policy.validate();
  if (batchSize < 2 || batchSize % 2 != 0)
    throw ConfigError("batch size must be an even number >= 2, got " + std::to_string(batchSize));
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace

std::string TrainLog::csv() const {
  std::string out =
      "epoch,phase,generator_loss,discriminator_loss,mean_reward,bleu4,unique_utterances,mean_length,"
      "undecodable\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + "," + r.phase + "," + fmt(r.generatorLoss) + "," +
           fmt(r.discriminatorLoss) + "," + fmt(r.meanReward) + ",";
    if (r.quality)
      out += fmt(r.quality->bleu4) + "," + std::to_string(r.quality->uniqueUtterances) + "," +
             fmt(r.quality->meanLength) + "," + std::to_string(r.quality->undecodable);
    else
      out += ",,,";
    out += "\n";
  }
  return out;
}

GanTrainer::GanTrainer(GeneratorModel& generator, TokenDiscriminator* tokenDisc,
                       SentenceDiscriminator* sentenceDisc, TrainSchedule schedule, Rng rng)
    : gen_(generator),
      tokenDisc_(tokenDisc),
      sentenceDisc_(sentenceDisc),
      schedule_(std::move(schedule)),
      rng_(rng),
      genPretrainOpt_(schedule_.generatorPretrainOptimizer),
      genAdvOpt_(schedule_.generatorAdversarialOptimizer),
      discOpt_(schedule_.discriminatorOptimizer) {
  schedule_.validate();
  if (schedule_.policy.needsTokenDiscriminator()) {
    if (!tokenDisc_)
      throw ConfigError("reward policy '" + rewardKindTag(schedule_.policy.kind) +
                        "' needs a token-level discriminator");
    sentenceDisc_ = nullptr;
  } else {
    if (!sentenceDisc_)
      throw ConfigError("reward policy '" + rewardKindTag(schedule_.policy.kind) +
                        "' needs a sentence-level discriminator");
    tokenDisc_ = nullptr;
  }
}

void GanTrainer::setQualityReferences(std::vector<AnnotatedUtterance> references) {
  references_ = std::move(references);
}

double GanTrainer::discriminatorStep(const LabeledBatch& batch) {
  Rng stepRng = rng_.split("disc-dropout").split(counters_.discPretrainSteps + counters_.discriminatorSteps);
  const auto losses = tokenDisc_ ? trainDiscriminator(*tokenDisc_, batch, discOpt_, 1, stepRng)
                                 : trainDiscriminator(*sentenceDisc_, batch, discOpt_, 1, stepRng);
  counters_.positives += batch.positives();
  counters_.negatives += batch.negatives();
  return losses.front();
}

void GanTrainer::runPretraining(std::span<const std::vector<int>> goldens) {
  if (goldens.empty()) throw DataError("GAN pre-training needs at least one golden utterance");
  const std::size_t half = schedule_.batchSize / 2;

  if (schedule_.genPretrainEpochs > 0) {
    Rng mleRng = rng_.split("mle");
    const auto report = pretrainMLE(gen_, goldens, schedule_.genPretrainEpochs, schedule_.batchSize,
                                    genPretrainOpt_, mleRng);
    for (double ppl : report.epochPerplexity) {
      EpochRecord r;
      r.epoch = epoch_++;
      r.phase = "gen-pretrain";
      r.generatorLoss = std::log(ppl);
      log_.records.push_back(r);
      ++counters_.mleEpochs;
    }
  }

  for (std::size_t e = 0; e < schedule_.discPretrainEpochs; ++e) {
    Rng epochRng = rng_.split("disc-pretrain").split(e);
    auto fakes = sample(gen_, goldens.size(), epochRng).sequences;
    std::vector<std::size_t> order(goldens.size());
    std::iota(order.begin(), order.end(), 0);
    epochRng.shuffle(order.begin(), order.end());
    double lossSum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += half) {
      const std::size_t end = std::min(order.size(), start + half);
      LabeledBatch batch;
      for (std::size_t i = start; i < end; ++i) {
        batch.add(goldens[order[i]], true);
        batch.add(fakes[i], false);
      }
      lossSum += discriminatorStep(batch);
      ++steps;
      ++counters_.discPretrainSteps;
    }
    EpochRecord r;
    r.epoch = epoch_++;
    r.phase = "disc-pretrain";
    r.discriminatorLoss = lossSum / static_cast<double>(steps);
    log_.records.push_back(r);
  }
}

QualitySnapshot GanTrainer::snapshot(std::span<const std::vector<int>> goldens, std::size_t epoch) {
  Rng snapRng = rng_.split("snapshot").split(epoch);
  const auto batch = sample(gen_, schedule_.snapshotSamples, snapRng);
  std::vector<AnnotatedUtterance> decoded;
  QualitySnapshot q;
  for (const auto& s : batch.sequences) {
    if (auto u = decodeGenerated(s, gen_.vocab()))
      decoded.push_back(std::move(*u));
    else
      ++q.undecodable;
  }
  if (!references_) {
    std::vector<AnnotatedUtterance> refs;
    for (const auto& g : goldens)
      if (auto u = decodeGenerated(g, gen_.vocab())) refs.push_back(std::move(*u));
    references_ = std::move(refs);
  }
  const auto div = diversityReport(decoded, goldens.size());
  q.uniqueUtterances = div.uniqueUtterances;
  q.meanLength = div.meanLength;
  if (!decoded.empty() && !references_->empty())
    q.bleu4 = corpusBleu(wordSequences(decoded), wordSequences(*references_));
  return q;
}

void GanTrainer::runAdversarial(std::span<const std::vector<int>> goldens) {
  if (goldens.empty()) throw DataError("adversarial training needs at least one golden utterance");
  const std::size_t half = schedule_.batchSize / 2;
  PolicyGradientOptions pg;
  pg.centerRewards = schedule_.centerRewards;

  for (std::size_t e = 0; e < schedule_.adversarialEpochs; ++e) {
    Rng epochRng = rng_.split("adversarial").split(e);
    EpochRecord r;
    r.phase = "adversarial";

    double genLoss = 0.0, rewardSum = 0.0;
    std::size_t rewardCount = 0;
    for (std::size_t u = 0; u < schedule_.genUpdatesPerEpoch; ++u) {
      const auto batch = sample(gen_, schedule_.batchSize, epochRng);
      const auto rewards =
          computeRewards(schedule_.policy, gen_, tokenDisc_, sentenceDisc_, batch.sequences, epochRng);
      for (const auto& rv : rewards)
        for (double v : rv) {
          rewardSum += v;
          ++rewardCount;
        }
      genLoss += policyGradientStep(gen_, batch, rewards, genAdvOpt_, pg);
      ++counters_.generatorUpdates;
    }
    if (schedule_.genUpdatesPerEpoch > 0) {
      r.generatorLoss = genLoss / static_cast<double>(schedule_.genUpdatesPerEpoch);
      r.meanReward = rewardCount ? rewardSum / static_cast<double>(rewardCount) : 0.0;
    }

    double discLoss = 0.0;
    for (std::size_t s = 0; s < schedule_.discStepsPerEpoch; ++s) {
      LabeledBatch batch;
      for (std::size_t i = 0; i < half; ++i) batch.add(goldens[epochRng.index(goldens.size())], true);
      for (auto& f : sample(gen_, half, epochRng).sequences) batch.add(std::move(f), false);
      discLoss += discriminatorStep(batch);
      ++counters_.discriminatorSteps;
    }
    if (schedule_.discStepsPerEpoch > 0)
      r.discriminatorLoss = discLoss / static_cast<double>(schedule_.discStepsPerEpoch);

    if (schedule_.snapshotEvery > 0 && (e + 1) % schedule_.snapshotEvery == 0)
      r.quality = snapshot(goldens, e);
    r.epoch = epoch_++;
    log_.records.push_back(std::move(r));
  }
}

}  // namespace nluaug
