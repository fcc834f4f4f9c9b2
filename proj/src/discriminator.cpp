#include "nluaug/discriminator.hpp"

#include <algorithm>
#include <cmath>

#include "nluaug/error.hpp"

namespace nluaug {

namespace {

double clampProbability(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

void checkIds(std::span<const int> seq, std::size_t vocabSize) {
  if (seq.empty()) throw ConfigError("discriminator input sequence is empty");
  for (int id : seq)
    if (id < 0 || static_cast<std::size_t>(id) >= vocabSize)
      throw DataError("symbol id " + std::to_string(id) + " outside discriminator vocabulary");
}

}  // namespace

// ---------------------------------------------------------------------------

TokenDiscriminator::TokenDiscriminator(std::size_t vocabSize, TokenDiscriminatorConfig config,
                                       Rng& initRng)
    : config_(config), vocabSize_(vocabSize) {
  Rng rng = initRng.split("token_discriminator");
  embedding_ = &params_.add("token_disc.embedding", uniformTable(vocabSize, config_.embeddingDim, 0.1, rng));
  lstm_ = Lstm::create(params_, "token_disc.lstm", config_.embeddingDim, config_.hiddenDim, rng);
  const std::size_t outputs = config_.mode == TokenScoreMode::RealProbability ? 1 : vocabSize;
  head_ = Dense::create(params_, "token_disc.head", config_.hiddenDim, outputs, rng);
}

std::vector<double> TokenDiscriminator::tokenScores(std::span<const int> seq) const {
  checkIds(seq, vocabSize_);
  std::vector<double> out;
  out.reserve(seq.size());
  auto state = lstm_.initialState();
  std::vector<double> z(head_.outputs());
  if (config_.mode == TokenScoreMode::RealProbability) {
    for (int id : seq) {
      lstm_.step(embedding_->value.rowSpan(static_cast<std::size_t>(id)), state);
      head_.apply(state.h, z);
      out.push_back(clampProbability(1.0 / (1.0 + std::exp(-z[0]))));
    }
  } else {
    lstm_.step(embedding_->value.rowSpan(Vocabulary::kBos), state);
    for (int id : seq) {
      head_.apply(state.h, z);
      const double mx = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (double v : z) s += std::exp(v - mx);
      out.push_back(clampProbability(std::exp(z[static_cast<std::size_t>(id)] - mx) / s));
      lstm_.step(embedding_->value.rowSpan(static_cast<std::size_t>(id)), state);
    }
  }
  return out;
}

std::pair<Var, Var> TokenDiscriminator::logProbabilities(Graph& g, std::span<const int> seq) const {
  checkIds(seq, vocabSize_);
  if (config_.mode == TokenScoreMode::RealProbability) {
    Var h = lstm_.run(g, embedLookup(g, *embedding_, seq));
    Var z = head_(g, h);
    return {logSigmoid(z), logSigmoid(scale(z, -1.0))};
  }
  std::vector<int> inputs{Vocabulary::kBos};
  inputs.insert(inputs.end(), seq.begin(), seq.end() - 1);
  Var h = lstm_.run(g, embedLookup(g, *embedding_, inputs));
  Var logp = pick(logSoftmax(head_(g, h)), seq);
  return {logp, logOneMinusExp(logp)};
}

Var TokenDiscriminator::loss(Graph& g, std::span<const int> seq, bool real) const {
  auto [logp, log1mp] = logProbabilities(g, seq);
  return scale(mean(real ? logp : log1mp), -1.0);
}

// ---------------------------------------------------------------------------

SentenceDiscriminator::SentenceDiscriminator(std::size_t vocabSize,
                                             SentenceDiscriminatorConfig config, Rng& initRng)
    : config_(std::move(config)), vocabSize_(vocabSize) {
  if (config_.kernelWidths.empty()) throw ConfigError("sentence discriminator needs kernel widths");
  Rng rng = initRng.split("sentence_discriminator");
  embedding_ = &params_.add("sent_disc.embedding", uniformTable(vocabSize, config_.embeddingDim, 0.1, rng));
  for (std::size_t w : config_.kernelWidths) {
    if (w == 0) throw ConfigError("kernel width must be positive");
    const auto name = "sent_disc.conv" + std::to_string(w);
    Conv c;
    c.width = w;
    c.weight = &params_.add(name + ".weight",
                            xavierUniform(w * config_.embeddingDim, config_.filtersPerWidth, rng));
    c.bias = &params_.add(name + ".bias", Tensor::matrix(1, config_.filtersPerWidth));
    convs_.push_back(c);
  }
  head_ = Dense::create(params_, "sent_disc.head", config_.filtersPerWidth * convs_.size(), 1, rng);
}

Var SentenceDiscriminator::logit(Graph& g, std::span<const int> seq) const {
  while (!seq.empty() && seq.back() == Vocabulary::kPad) seq = seq.first(seq.size() - 1);
  checkIds(seq, vocabSize_);
  std::vector<int> ids(seq.begin(), seq.end());
  const std::size_t widest = *std::max_element(config_.kernelWidths.begin(), config_.kernelWidths.end());
  while (ids.size() < widest) ids.push_back(Vocabulary::kPad);
  Var x = embedLookup(g, *embedding_, ids);
  std::vector<Var> pooled;
  for (const auto& c : convs_)
    pooled.push_back(maxPoolOverTime(tanh(conv1d(x, g.param(*c.weight), g.param(*c.bias), c.width))));
  Var features = dropoutMask(concat(pooled, 1), config_.dropout);
  return head_(g, features);
}

double SentenceDiscriminator::sentenceScore(std::span<const int> seq) const {
  Graph g(false);
  const double z = logit(g, seq).value().item();
  return clampProbability(1.0 / (1.0 + std::exp(-z)));
}

Var SentenceDiscriminator::loss(Graph& g, std::span<const int> seq, bool real) const {
  Var z = logit(g, seq);
  return scale(logSigmoid(real ? z : scale(z, -1.0)), -1.0);
}

// ---------------------------------------------------------------------------

std::size_t LabeledBatch::positives() const {
  return static_cast<std::size_t>(std::count(real.begin(), real.end(), true));
}

namespace {

void checkBatch(const LabeledBatch& batch) {
  if (batch.sequences.size() != batch.real.size())
    throw ConfigError("labeled batch has mismatched sequence and label counts");
  if (batch.positives() == 0 || batch.negatives() == 0)
    throw ConfigError("discriminator batch contains a single class");
  if (batch.positives() != batch.negatives())
    throw ConfigError("discriminator batch is unbalanced: " + std::to_string(batch.positives()) +
                      " real vs " + std::to_string(batch.negatives()) + " fake");
}

template <class D>
double batchLoss(const D& d, const LabeledBatch& batch, Rng* rng, bool training) {
  const double inv = 1.0 / static_cast<double>(batch.sequences.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    Graph g(training, rng);
    Var l = scale(d.loss(g, batch.sequences[i], batch.real[i]), inv);
    total += l.value().item();
    if (training) g.backward(l);
  }
  return total;
}

template <class D>
std::vector<double> trainImpl(D& d, const LabeledBatch& batch, Optimizer& optimizer,
                              std::size_t steps, Rng& rng) {
  checkBatch(batch);
  std::vector<double> losses;
  for (std::size_t s = 0; s < steps; ++s) {
    const double l = batchLoss(d, batch, &rng, true);
    if (!std::isfinite(l)) throw NumericalError("discriminator loss is not finite");
    losses.push_back(l);
    optimizer.step(d.params());
  }
  return losses;
}

}  // namespace

std::vector<double> trainDiscriminator(TokenDiscriminator& d, const LabeledBatch& batch,
                                       Optimizer& optimizer, std::size_t steps, Rng& rng) {
  return trainImpl(d, batch, optimizer, steps, rng);
}

std::vector<double> trainDiscriminator(SentenceDiscriminator& d, const LabeledBatch& batch,
                                       Optimizer& optimizer, std::size_t steps, Rng& rng) {
  return trainImpl(d, batch, optimizer, steps, rng);
}

double discriminatorLoss(const TokenDiscriminator& d, const LabeledBatch& batch) {
  return batchLoss(d, batch, nullptr, false);
}

double discriminatorLoss(const SentenceDiscriminator& d, const LabeledBatch& batch) {
  return batchLoss(d, batch, nullptr, false);
}

double discriminatorAccuracy(const TokenDiscriminator& d, const LabeledBatch& batch) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    const auto p = d.tokenScores(batch.sequences[i]);
    double m = 0.0;
    for (double v : p) m += v;
    m /= static_cast<double>(p.size());
    if ((m >= 0.5) == batch.real[i]) ++correct;
  }
  return batch.sequences.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(batch.sequences.size());
}

double discriminatorAccuracy(const SentenceDiscriminator& d, const LabeledBatch& batch) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.sequences.size(); ++i)
    if ((d.sentenceScore(batch.sequences[i]) >= 0.5) == batch.real[i]) ++correct;
  return batch.sequences.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(batch.sequences.size());
}

}  // namespace nluaug
