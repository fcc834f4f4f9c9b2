#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nluaug/corpus.hpp"
#include "nluaug/crf.hpp"
#include "nluaug/layers.hpp"
#include "nluaug/optimizer.hpp"

namespace nluaug {

struct JointModelConfig {
  std::size_t wordEmbDim = 256;
  std::size_t charEmbDim = 16;
  std::size_t charKernel = 3;
  std::size_t encoderLayers = 2;
  std::size_t encoderHidden = 384;  ///< per direction
  std::size_t icHidden = 256;
  std::size_t nerHidden = 192;
  double dropout = 0.3;
  std::size_t icnerEpochs = 500;
  std::size_t dcEpochs = 100;
  std::size_t batchSize = 16;
  OptimizerConfig optimizer{OptimizerKind::Adam, 1e-3};
  /// Multipliers applied by resolved() unless fullScale is set.
  double deskScale = 0.25;
  double epochScale = 0.1;
  bool fullScale = false;

  /// Dimensions and epochs after scaling (each dim at least 1).
  JointModelConfig resolved() const;
  void validate() const;
  nlohmann::ordered_json toJson() const;
};

/// Word + char-CNN features, stacked BiLSTM encoder with layer norm, a
/// max-pooled classification MLP and, for joint models, an ELU projection
/// into a CRF tagger over BIO tags. A domain classifier is the same network
/// without the tagger.
class JointModel {
 public:
  /// `config` must already be resolved. Empty `slotLabels` with
  /// withTagger=false builds a classifier only.
  JointModel(std::vector<std::string> classes, std::vector<std::string> slotLabels, bool withTagger,
             std::vector<std::string> words, const JointModelConfig& config, Rng& initRng);

  struct Prediction {
    std::string label;
    std::vector<SlotSpan> slots;
  };

  Prediction predict(std::span<const std::string> tokens) const;
  /// Classification NLL plus (for joint models) CRF NLL, unit weights.
  Var loss(Graph& g, std::span<const std::string> tokens, int classId, std::span<const int> tags) const;

  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<std::string>& tags() const { return tags_; }
  bool hasTagger() const { return hasTagger_; }
  int classId(const std::string& label) const;
  /// BIO tag ids for the slots of u; throws DataError on unknown labels.
  std::vector<int> tagIds(const AnnotatedUtterance& u) const;
  std::vector<SlotSpan> spansFromTags(std::span<const int> tags) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Emission scores (n x tags) in evaluation mode.
  Tensor emissions(std::span<const std::string> tokens) const;
  const CrfLayer& crf() const { return crf_; }

 private:
  struct Encoded {
    Var tokens;  // n x 2h
    Var pooled;  // 1 x 2h
  };
  Encoded encode(Graph& g, std::span<const std::string> tokens) const;
  Var classLogits(Graph& g, Var pooled) const;
  Var emissionScores(Graph& g, Var tokens) const;

  struct EncoderLayer {
    Lstm forward, backward;
    Parameter* gain;
    Parameter* bias;
  };

  JointModelConfig config_;
  std::vector<std::string> classes_, tags_, words_;
  std::map<std::string, int> wordIndex_, classIndex_, tagIndex_;
  bool hasTagger_;
  ParameterSet params_;
  Parameter* wordEmbedding_ = nullptr;
  Parameter* charEmbedding_ = nullptr;
  Parameter* charConvWeight_ = nullptr;
  Parameter* charConvBias_ = nullptr;
  std::vector<EncoderLayer> encoder_;
  Dense icHidden_, icOut_;
  Dense nerHidden_, nerOut_;
  CrfLayer crf_;
};

struct TrainingReport {
  std::vector<double> epochLoss;
};

/// Joint IC/NER model for the utterances of one domain.
JointModel trainJointICNER(std::span<const AnnotatedUtterance> train, const JointModelConfig& config,
                           Rng& rng, TrainingReport* report = nullptr);
/// Domain classifier over all utterances.
JointModel trainDomainClassifier(std::span<const AnnotatedUtterance> train,
                                 const JointModelConfig& config, Rng& rng,
                                 TrainingReport* report = nullptr);

struct NluSystem {
  std::unique_ptr<JointModel> domainClassifier;
  std::map<std::string, JointModel> joint;
};

/// Trains the domain classifier and one joint model per domain.
NluSystem trainNluSystem(std::span<const AnnotatedUtterance> train, const JointModelConfig& config,
                         Rng& rng);

struct FramePrediction {
  std::string domain;
  std::string intent;
  std::vector<SlotSpan> slots;
};

/// The domain classifier routes each utterance to its predicted domain's
/// joint model.
FramePrediction predictFrame(const NluSystem& system, std::span<const std::string> tokens);

struct DomainCounts {
  std::size_t utterances = 0;
  std::size_t domainCorrect = 0;
  std::size_t intentCorrect = 0;
  std::size_t frameCorrect = 0;
  std::size_t slotTp = 0, slotFp = 0, slotFn = 0;
};

double microF1(std::size_t tp, std::size_t fp, std::size_t fn);

struct ExperimentReport {
  std::map<std::string, DomainCounts> counts;  ///< keyed by gold domain
  double domainAccuracy = 0.0;
  std::map<std::string, double> intentAccuracy;
  double overallIntentAccuracy = 0.0;
  std::map<std::string, double> slotF1;
  double overallSlotF1 = 0.0;
  double frameAccuracy = 0.0;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  static ExperimentReport fromCounts(std::map<std::string, DomainCounts> counts);
  nlohmann::ordered_json toJson() const;
};

/// Intent is correct only when the (domain, intent) pair matches; slots
/// must match span and label exactly.
ExperimentReport scoreFrames(std::span<const AnnotatedUtterance> gold,
                             std::span<const FramePrediction> predicted);
ExperimentReport evaluate(const NluSystem& system, std::span<const AnnotatedUtterance> test);

/// Metric-wise mean of several runs (counts are summed).
ExperimentReport averageReports(std::span<const ExperimentReport> runs);

struct ComparisonRow {
  std::string metric;
  std::string domain;  ///< "" for overall rows
  double baseline = 0.0;
  double treatment = 0.0;
  double percentChange = 0.0;
};

/// Rows: domain accuracy, intent accuracy per domain, overall intent
/// accuracy, slot F1 per domain, overall slot F1, overall frame accuracy.
std::vector<ComparisonRow> compareReports(const ExperimentReport& baseline,
                                          const ExperimentReport& treatment);
std::string comparisonCsv(std::span<const ComparisonRow> rows);
nlohmann::ordered_json comparisonJson(std::span<const ComparisonRow> rows);

}  // namespace nluaug
