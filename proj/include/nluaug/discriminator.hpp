#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "nluaug/corpus.hpp"
#include "nluaug/graph.hpp"
#include "nluaug/layers.hpp"
#include "nluaug/optimizer.hpp"

namespace nluaug {

inline constexpr double kProbabilityFloor = 1e-7;

/// How the token-level discriminator turns its state into p_i.
enum class TokenScoreMode {
  /// sigmoid head on the state after reading y_<=i: "position i is real".
  RealProbability,
  /// softmax over the vocabulary from the state after y_<i, evaluated at y_i.
  NextTokenMass,
};

struct TokenDiscriminatorConfig {
  std::size_t embeddingDim = 64;
  std::size_t hiddenDim = 64;
  TokenScoreMode mode = TokenScoreMode::RealProbability;
};

/// Causal recurrent discriminator giving one real-probability per position.
class TokenDiscriminator {
 public:
  TokenDiscriminator(std::size_t vocabSize, TokenDiscriminatorConfig config, Rng& initRng);

  const TokenDiscriminatorConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  Parameter& embedding() { return *embedding_; }
  Dense& head() { return head_; }

  /// p_i for every position, clamped to [1e-7, 1 - 1e-7].
  std::vector<double> tokenScores(std::span<const int> seq) const;

  /// Per-position log p_i and log(1 - p_i) on a tape (each T x 1).
  std::pair<Var, Var> logProbabilities(Graph& g, std::span<const int> seq) const;
  /// Binary cross-entropy averaged over positions.
  Var loss(Graph& g, std::span<const int> seq, bool real) const;

 private:
  TokenDiscriminatorConfig config_;
  std::size_t vocabSize_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  Lstm lstm_;
  Dense head_;
};

struct SentenceDiscriminatorConfig {
  std::size_t embeddingDim = 64;
  std::vector<std::size_t> kernelWidths{1, 2, 3, 4};
  std::size_t filtersPerWidth = 32;
  double dropout = 0.25;
};

/// Convolutional whole-sequence discriminator: embeddings, one tanh
/// convolution per kernel width, max-over-time pooling, dropout, sigmoid head.
class SentenceDiscriminator {
 public:
  SentenceDiscriminator(std::size_t vocabSize, SentenceDiscriminatorConfig config, Rng& initRng);

  const SentenceDiscriminatorConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  Parameter& embedding() { return *embedding_; }
  Dense& head() { return head_; }

  /// Probability that the sequence is real, clamped like tokenScores.
  /// Trailing PAD symbols are ignored.
  double sentenceScore(std::span<const int> seq) const;
  Var logit(Graph& g, std::span<const int> seq) const;
  Var loss(Graph& g, std::span<const int> seq, bool real) const;

 private:
  struct Conv {
    Parameter* weight;
    Parameter* bias;
    std::size_t width;
  };
  SentenceDiscriminatorConfig config_;
  std::size_t vocabSize_;
  ParameterSet params_;
  Parameter* embedding_ = nullptr;
  std::vector<Conv> convs_;
  Dense head_;
};

struct LabeledBatch {
  std::vector<std::vector<int>> sequences;
  std::vector<bool> real;

  void add(std::vector<int> seq, bool isReal) {
    sequences.push_back(std::move(seq));
    real.push_back(isReal);
  }
  std::size_t positives() const;
  std::size_t negatives() const { return real.size() - positives(); }
};

/// `steps` full-batch gradient steps on mean binary cross-entropy. Returns
/// the loss measured before each step. Throws on single-class or unbalanced
/// batches.
std::vector<double> trainDiscriminator(TokenDiscriminator& d, const LabeledBatch& batch,
                                       Optimizer& optimizer, std::size_t steps, Rng& rng);
std::vector<double> trainDiscriminator(SentenceDiscriminator& d, const LabeledBatch& batch,
                                       Optimizer& optimizer, std::size_t steps, Rng& rng);

/// Mean BCE without updating (evaluation mode).
double discriminatorLoss(const TokenDiscriminator& d, const LabeledBatch& batch);
double discriminatorLoss(const SentenceDiscriminator& d, const LabeledBatch& batch);

/// Fraction of sequences classified correctly at threshold 0.5 (token
/// discriminator: mean of position scores).
double discriminatorAccuracy(const TokenDiscriminator& d, const LabeledBatch& batch);
double discriminatorAccuracy(const SentenceDiscriminator& d, const LabeledBatch& batch);

}  // namespace nluaug
