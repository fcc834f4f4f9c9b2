#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nluaug/corpus.hpp"
#include "nluaug/discriminator.hpp"
#include "nluaug/embeddings.hpp"
#include "nluaug/gan_trainer.hpp"
#include "nluaug/generator.hpp"
#include "nluaug/genqual.hpp"
#include "nluaug/nlu.hpp"
#include "nluaug/sampling.hpp"

namespace nluaug {

enum class BleuReferences { Goldens, Test };
BleuReferences parseBleuReferences(std::string_view tag);  // goldens | test
std::string bleuReferencesTag(BleuReferences r);

struct ExperimentConfig {
  GeneratorConfig generator;
  /// Derive generator maxLen from the goldens (99th percentile + 2).
  bool autoMaxLen = true;
  TokenDiscriminatorConfig tokenDisc;
  SentenceDiscriminatorConfig sentenceDisc;
  TrainSchedule schedule;
  JointModelConfig nlu;

  SamplingStrategy sampling = SamplingStrategy::Uniques;
  std::size_t perDomain = 9600;
  bool dropGoldenMatches = false;
  BleuReferences bleuReferences = BleuReferences::Goldens;

  SkipgramConfig skipgram;
  /// Vectors file for the low-resource experiment; trained on the robust
  /// domains when empty.
  std::string pretrainedEmbeddings;
  bool freezeEmbeddings = false;

  std::size_t repeats = 3;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  void validate() const;
  nlohmann::ordered_json toJson() const;
};

/// Applies "[section] key = value" entries from an INI file on top of
/// `base`. Unknown sections or keys are a ConfigError.
ExperimentConfig loadConfigIni(const std::filesystem::path& path, ExperimentConfig base = {});
/// Single "section.key" override, same keys as the INI file.
void applyConfigValue(ExperimentConfig& config, const std::string& key, const std::string& value);

std::map<std::string, std::vector<AnnotatedUtterance>> groupByDomain(
    std::span<const AnnotatedUtterance> corpus);

struct DomainGan {
  std::unique_ptr<GeneratorModel> generator;
  std::unique_ptr<TokenDiscriminator> tokenDisc;
  std::unique_ptr<SentenceDiscriminator> sentenceDisc;
  TrainLog log;
  TrainCounters counters;
  std::size_t injectedRows = 0;
};

/// Trains one domain's SeqGAN on its goldens. `pretrained` (may be null)
/// initialises the word part of every symbol embedding.
DomainGan trainDomainGan(std::span<const AnnotatedUtterance> goldens, const ExperimentConfig& config,
                         Rng& rng, const EmbeddingTable* pretrained = nullptr,
                         std::span<const AnnotatedUtterance> qualityReferences = {});

struct Augmentation {
  std::vector<AnnotatedUtterance> synthetic;
  std::map<std::string, std::size_t> syntheticPerDomain;
  std::map<std::string, std::size_t> rejected;
  std::vector<QualityRow> quality;
};

/// Pools perDomain samples from each generator and applies the sampling
/// strategy per domain (TopX is sized to that domain's goldens).
Augmentation augment(const std::map<std::string, const GeneratorModel*>& generators,
                     const std::map<std::string, std::vector<AnnotatedUtterance>>& goldens,
                     const std::map<std::string, std::vector<AnnotatedUtterance>>& bleuReferences,
                     const ExperimentConfig& config, const std::string& modelTag, Rng& rng);

struct RepeatResult {
  ExperimentReport baseline;
  ExperimentReport treatment;
  ExperimentReport control;
  std::map<std::string, std::size_t> syntheticPerDomain;
  std::vector<QualityRow> quality;
  std::map<std::string, std::string> ganLogs;  ///< domain -> TrainLog CSV
};

struct ExperimentOutcome {
  std::string experiment;  ///< bootstrap | lowresource
  ExperimentReport baseline;
  ExperimentReport treatment;
  ExperimentReport control;
  std::vector<ComparisonRow> treatmentRows;
  std::vector<ComparisonRow> controlRows;
  std::vector<RepeatResult> runs;

  /// Report with config, comparisons, per-run metrics and synthetic sizes.
  nlohmann::ordered_json toJson(const ExperimentConfig& config) const;
};

/// Baseline: NLU on goldens. Treatment: goldens + synthetic. Control:
/// goldens + goldens upsampled to the synthetic size of each domain. Each
/// repeat re-seeds the GANs and the NLU models; all arms of one repeat share
/// the NLU seed.
ExperimentOutcome runBootstrap(std::span<const AnnotatedUtterance> goldens,
                               std::span<const AnnotatedUtterance> test, const ExperimentConfig& config);

/// The low domain keeps only its goldens; the other domains use their full
/// training data and supply the corpus for pre-trained word embeddings
/// (unless config.pretrainedEmbeddings names a vectors file). Only the low
/// domain gets a GAN. Baseline omits the synthetic data; control upsamples
/// the low goldens.
ExperimentOutcome runLowResource(const std::string& lowDomain,
                                 std::span<const AnnotatedUtterance> goldens,
                                 std::span<const AnnotatedUtterance> fullTrain,
                                 std::span<const AnnotatedUtterance> test,
                                 const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Run manifest

std::string sha256File(const std::filesystem::path& path);
std::string versionString();

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  /// Files read to train models.
  std::vector<std::filesystem::path> trainingInputs;
  /// Files read only for evaluation.
  std::vector<std::filesystem::path> evaluationInputs;
  std::vector<std::filesystem::path> outputs;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();

  /// Throws ConfigError when a training input is an evaluation input (same
  /// file or same content).
  void auditTestIsolation() const;
  nlohmann::ordered_json toJson() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace nluaug
