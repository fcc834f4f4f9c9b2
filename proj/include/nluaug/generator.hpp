#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "nluaug/corpus.hpp"
#include "nluaug/graph.hpp"
#include "nluaug/layers.hpp"
#include "nluaug/optimizer.hpp"

namespace nluaug {

struct GeneratorConfig {
  std::size_t embeddingDim = 64;
  std::size_t hiddenDim = 128;
  /// Maximum number of emitted non-EOS symbols (header + body).
  std::size_t maxLen = 32;
  /// Sampling temperature; <= 0 selects the argmax.
  double temperature = 1.0;
};

/// Autoregressive LSTM over vocabulary symbols. Emission is masked to the
/// sequence grammar: a header first, then at least one body symbol before
/// EOS may appear. BOS, PAD and UNK are never emitted.
class GeneratorModel {
 public:
  GeneratorModel(Vocabulary vocab, GeneratorConfig config, Rng& initRng);

  const Vocabulary& vocab() const { return vocab_; }
  const GeneratorConfig& config() const { return config_; }
  GeneratorConfig& config() { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  Parameter& embedding() { return *embedding_; }
  Dense& output() { return output_; }

  struct State {
    Lstm::State lstm;
    std::size_t emitted = 0;
  };
  /// State s0 after consuming BOS.
  State initialState() const;
  /// Consumes an emitted symbol.
  void advance(State& state, int symbol) const;
  /// Log-distribution over the vocabulary for the next symbol.
  std::vector<double> nextLogProbs(const State& state) const;
  int sampleNext(const State& state, Rng& rng, double temperature) const;

  /// Per-step log G(y_t | y_<t) on a tape for the given emitted symbols
  /// (T x 1); inputs are BOS followed by symbols[0..T-2].
  Var sequenceLogProbs(Graph& g, std::span<const int> symbols) const;

  /// Writes params.json, vocab.txt and generator.json into dir.
  void save(const std::filesystem::path& dir) const;
  static GeneratorModel load(const std::filesystem::path& dir);

 private:
  std::vector<double> logits(const State& state) const;

  Vocabulary vocab_;
  GeneratorConfig config_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  Lstm lstm_;
  Dense output_;
  enum class SymbolKind : unsigned char { Never, Header, Body, Eos };
  bool allowed(std::size_t position, std::size_t symbol) const;
  std::vector<SymbolKind> kind_;
};

/// Emitted ids for a training utterance: header, body..., EOS.
std::vector<int> trainingSymbols(const TokenSequence& seq);

struct SampledBatch {
  /// Emitted symbols; a trailing EOS is present unless maxLen was reached.
  std::vector<std::vector<int>> sequences;
  std::vector<std::vector<double>> stepLogProbs;
};

/// Ancestral sampling. A seed prefix is forced (its log-probs are still
/// recorded) and sampling continues from it.
SampledBatch sample(const GeneratorModel& model, std::size_t count, Rng& rng,
                    std::span<const int> seedPrefix = {});

/// N completions of a prefix with the current policy; every result begins
/// with the prefix. Never modifies the model.
std::vector<std::vector<int>> mcRollouts(const GeneratorModel& model, std::span<const int> prefix,
                                         std::size_t n, Rng& rng);

struct MleReport {
  double initialPerplexity = 0.0;
  std::vector<double> epochPerplexity;  ///< running perplexity during each epoch
};

/// Mean per-token NLL of the corpus under the model.
double meanTokenNll(const GeneratorModel& model, std::span<const std::vector<int>> corpus);

/// One MLE update on the batch: loss = -(1/B) sum_seq sum_t log G(y_t|y_<t).
double mleStep(GeneratorModel& model, std::span<const std::vector<int>> batch, Optimizer& optimizer);

MleReport pretrainMLE(GeneratorModel& model, std::span<const std::vector<int>> corpus,
                      std::size_t epochs, std::size_t batchSize, Optimizer& optimizer, Rng& rng);

struct PolicyGradientOptions {
  /// Subtract the batch-mean reward before the update.
  bool centerRewards = true;
};

/// One ascent step on sum_i R(y_i) log G(y_i|y_<i). Returns the surrogate
/// loss -(1/B) sum_seq sum_i R_i log p_i evaluated with the rewards used.
double policyGradientStep(GeneratorModel& model, const SampledBatch& batch,
                          std::span<const std::vector<double>> rewards, Optimizer& optimizer,
                          const PolicyGradientOptions& options = {});

/// Surrogate loss and gradient accumulation without an optimizer step
/// (exposed for gradient checks).
double accumulatePolicyGradient(GeneratorModel& model, std::span<const std::vector<int>> sequences,
                                std::span<const std::vector<double>> rewards);

}  // namespace nluaug
