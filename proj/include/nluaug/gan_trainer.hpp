#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nluaug/discriminator.hpp"
#include "nluaug/generator.hpp"
#include "nluaug/optimizer.hpp"
#include "nluaug/rewards.hpp"

namespace nluaug {

struct TrainSchedule {
  std::size_t genPretrainEpochs = 80;
  std::size_t discPretrainEpochs = 80;
  std::size_t adversarialEpochs = 600;
  std::size_t genUpdatesPerEpoch = 1;
  std::size_t discStepsPerEpoch = 35;
  /// Sequences per generator update; discriminator steps use batchSize/2
  /// positives and batchSize/2 negatives.
  std::size_t batchSize = 32;
  /// Adversarial epochs between quality snapshots (0 disables them).
  std::size_t snapshotEvery = 25;
  std::size_t snapshotSamples = 200;
  RewardPolicy policy;
  bool centerRewards = true;
  OptimizerConfig generatorPretrainOptimizer{OptimizerKind::Adam, 5e-3};
  OptimizerConfig generatorAdversarialOptimizer{OptimizerKind::Adam, 1e-3};
  OptimizerConfig discriminatorOptimizer{OptimizerKind::Adam, 1e-3};

  void validate() const;
};

struct QualitySnapshot {
  double bleu4 = 0.0;
  std::size_t uniqueUtterances = 0;
  double meanLength = 0.0;
  std::size_t undecodable = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< monotone across phases
  std::string phase;      ///< gen-pretrain | disc-pretrain | adversarial
  std::optional<double> generatorLoss;
  std::optional<double> discriminatorLoss;
  std::optional<double> meanReward;
  std::optional<QualitySnapshot> quality;
};

struct TrainLog {
  std::vector<EpochRecord> records;
  std::string csv() const;
};

struct TrainCounters {
  std::size_t mleEpochs = 0;
  std::size_t discPretrainSteps = 0;
  std::size_t generatorUpdates = 0;
  std::size_t discriminatorSteps = 0;  ///< adversarial phase only
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Runs the schedule on borrowed models. Only the discriminator the reward
/// policy needs is trained; a missing one is rejected here.
class GanTrainer {
 public:
  GanTrainer(GeneratorModel& generator, TokenDiscriminator* tokenDisc,
             SentenceDiscriminator* sentenceDisc, TrainSchedule schedule, Rng rng);

  /// Word sequences used as BLEU references in quality snapshots; the
  /// goldens are used when unset.
  void setQualityReferences(std::vector<AnnotatedUtterance> references);

  /// MLE on the goldens, then the discriminator on goldens against an equal
  /// number of fresh generator samples per epoch.
  void runPretraining(std::span<const std::vector<int>> goldens);
  /// adversarialEpochs x (genUpdatesPerEpoch policy-gradient updates, then
  /// discStepsPerEpoch discriminator steps on fresh samples).
  void runAdversarial(std::span<const std::vector<int>> goldens);

  const TrainLog& log() const { return log_; }
  const TrainCounters& counters() const { return counters_; }
  const TrainSchedule& schedule() const { return schedule_; }

 private:
  double discriminatorStep(const LabeledBatch& batch);
  QualitySnapshot snapshot(std::span<const std::vector<int>> goldens, std::size_t epoch);

  GeneratorModel& gen_;
  TokenDiscriminator* tokenDisc_;
  SentenceDiscriminator* sentenceDisc_;
  TrainSchedule schedule_;
  Rng rng_;
  Optimizer genPretrainOpt_;
  Optimizer genAdvOpt_;
  Optimizer discOpt_;
  TrainLog log_;
  TrainCounters counters_;
  std::size_t epoch_ = 0;
  std::optional<std::vector<AnnotatedUtterance>> references_;
};

}  // namespace nluaug
