#include "nluaug/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "nluaug/error.hpp"

namespace nluaug {

namespace {
constexpr double kMaskedLogit = -1e9;
}

GeneratorModel::GeneratorModel(Vocabulary vocab, GeneratorConfig config, Rng& initRng)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.maxLen < 2) throw ConfigError("generator maxLen must be at least 2");
  const std::size_t V = vocab_.size();
  Rng rng = initRng.split("generator");
  embedding_ = &params_.add("generator.embedding",
                            uniformTable(V, config_.embeddingDim, 0.1, rng));
  lstm_ = Lstm::create(params_, "generator.lstm", config_.embeddingDim, config_.hiddenDim, rng);
  output_ = Dense::create(params_, "generator.output", config_.hiddenDim, V, rng);
  kind_.assign(V, SymbolKind::Never);
  for (std::size_t i = 0; i < V; ++i) {
    const int id = static_cast<int>(i);
    if (vocab_.isHeader(id)) kind_[i] = SymbolKind::Header;
    else if (vocab_.isBody(id)) kind_[i] = SymbolKind::Body;
  }
  kind_[Vocabulary::kEos] = SymbolKind::Eos;
}

bool GeneratorModel::allowed(std::size_t position, std::size_t symbol) const {
  switch (kind_[symbol]) {
    case SymbolKind::Header: return position == 0;
    case SymbolKind::Body: return position >= 1;
    case SymbolKind::Eos: return position >= 2;
    case SymbolKind::Never: return false;
  }
  return false;
}

GeneratorModel::State GeneratorModel::initialState() const {
  State s{lstm_.initialState(), 0};
  lstm_.step(embedding_->value.rowSpan(Vocabulary::kBos), s.lstm);
  return s;
}

void GeneratorModel::advance(State& state, int symbol) const {
  lstm_.step(embedding_->value.rowSpan(static_cast<std::size_t>(symbol)), state.lstm);
  ++state.emitted;
}

std::vector<double> GeneratorModel::logits(const State& state) const {
  std::vector<double> z(vocab_.size());
  output_.apply(state.lstm.h, z);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!allowed(state.emitted, i)) z[i] = kMaskedLogit;
  return z;
}

std::vector<double> GeneratorModel::nextLogProbs(const State& state) const {
  auto z = logits(state);
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  for (double& v : z) v -= lse;
  return z;
}

int GeneratorModel::sampleNext(const State& state, Rng& rng, double temperature) const {
  const auto lp = nextLogProbs(state);
  if (temperature <= 0.0)
    return static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  std::vector<double> w(lp.size());
  if (temperature == 1.0) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = allowed(state.emitted, i) ? std::exp(lp[i]) : 0.0;
  } else {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (allowed(state.emitted, i)) mx = std::max(mx, lp[i] / temperature);
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = allowed(state.emitted, i) ? std::exp(lp[i] / temperature - mx) : 0.0;
  }
  return static_cast<int>(rng.categorical(w));
}

Var GeneratorModel::sequenceLogProbs(Graph& g, std::span<const int> symbols) const {
  if (symbols.empty()) throw ConfigError("sequenceLogProbs of an empty sequence");
  std::vector<int> inputs{Vocabulary::kBos};
  inputs.insert(inputs.end(), symbols.begin(), symbols.end() - 1);
  for (int s : symbols)
    if (s < 0 || static_cast<std::size_t>(s) >= vocab_.size())
      throw DataError("symbol id " + std::to_string(s) + " outside generator vocabulary of size " +
                      std::to_string(vocab_.size()));
  Var x = embedLookup(g, *embedding_, inputs);
  Var h = lstm_.run(g, x);
  Var z = output_(g, h);
  Tensor mask = Tensor::matrix(symbols.size(), vocab_.size());
  for (std::size_t t = 0; t < symbols.size(); ++t)
    for (std::size_t i = 0; i < vocab_.size(); ++i)
      if (!allowed(t, i)) mask(t, i) = kMaskedLogit;
  z = add(z, g.constant(std::move(mask)));
  return pick(logSoftmax(z), symbols);
}

void GeneratorModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  params_.save(dir / "params.json");
  vocab_.save(dir / "vocab.txt");
  nlohmann::json j{{"embedding_dim", config_.embeddingDim},
                   {"hidden_dim", config_.hiddenDim},
                   {"max_len", config_.maxLen},
                   {"temperature", config_.temperature}};
  std::ofstream(dir / "generator.json") << j.dump(2) << '\n';
}

GeneratorModel GeneratorModel::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "generator.json");
  if (!in) throw DataError("missing generator.json in " + dir.string());
  nlohmann::json j;
  in >> j;
  GeneratorConfig cfg;
  cfg.embeddingDim = j.at("embedding_dim");
  cfg.hiddenDim = j.at("hidden_dim");
  cfg.maxLen = j.at("max_len");
  cfg.temperature = j.at("temperature");
  Rng rng(0);
  GeneratorModel m(Vocabulary::load(dir / "vocab.txt"), cfg, rng);
  m.params_.load(dir / "params.json");
  return m;
}

std::vector<int> trainingSymbols(const TokenSequence& seq) {
  auto ids = seq.ids();
  ids.push_back(Vocabulary::kEos);
  return ids;
}

// ---------------------------------------------------------------------------

namespace {

void extend(const GeneratorModel& model, GeneratorModel::State& state, std::vector<int>& seq,
            std::vector<double>* logProbs, Rng& rng) {
  const auto maxLen = model.config().maxLen;
  while (seq.size() < maxLen && (seq.empty() || seq.back() != Vocabulary::kEos)) {
    const int next = model.sampleNext(state, rng, model.config().temperature);
    if (logProbs) logProbs->push_back(model.nextLogProbs(state)[static_cast<std::size_t>(next)]);
    seq.push_back(next);
    if (next == Vocabulary::kEos) break;
    model.advance(state, next);
  }
}

}  // namespace

SampledBatch sample(const GeneratorModel& model, std::size_t count, Rng& rng,
                    std::span<const int> seedPrefix) {
  SampledBatch batch;
  for (std::size_t n = 0; n < count; ++n) {
    auto state = model.initialState();
    std::vector<int> seq;
    std::vector<double> lps;
    for (int s : seedPrefix) {
      lps.push_back(model.nextLogProbs(state)[static_cast<std::size_t>(s)]);
      seq.push_back(s);
      if (s == Vocabulary::kEos) break;
      model.advance(state, s);
    }
    extend(model, state, seq, &lps, rng);
    batch.sequences.push_back(std::move(seq));
    batch.stepLogProbs.push_back(std::move(lps));
  }
  return batch;
}

std::vector<std::vector<int>> mcRollouts(const GeneratorModel& model, std::span<const int> prefix,
                                         std::size_t n, Rng& rng) {
  if (n == 0) throw ConfigError("rollout count must be at least 1");
  if (!prefix.empty() && prefix.back() == Vocabulary::kEos)
    throw ConfigError("cannot roll out a prefix already terminated by EOS");
  if (prefix.size() > model.config().maxLen)
    throw ConfigError("rollout prefix longer than maxLen");
  auto state = model.initialState();
  for (int s : prefix) model.advance(state, s);
  std::vector<std::vector<int>> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto st = state;
    std::vector<int> seq(prefix.begin(), prefix.end());
    extend(model, st, seq, nullptr, rng);
    out.push_back(std::move(seq));
  }
  return out;
}

double meanTokenNll(const GeneratorModel& model, std::span<const std::vector<int>> corpus) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : corpus) {
    auto state = model.initialState();
    for (int s : seq) {
      total -= model.nextLogProbs(state)[static_cast<std::size_t>(s)];
      ++count;
      if (s == Vocabulary::kEos) break;
      model.advance(state, s);
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double accumulatePolicyGradient(GeneratorModel& model, std::span<const std::vector<int>> sequences,
                                std::span<const std::vector<double>> rewards) {
  if (sequences.size() != rewards.size())
    throw ConfigError("reward batch size " + std::to_string(rewards.size()) +
                      " does not match sequence batch size " + std::to_string(sequences.size()));
  const double invB = sequences.empty() ? 0.0 : 1.0 / static_cast<double>(sequences.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < sequences.size(); ++b) {
    if (rewards[b].size() != sequences[b].size())
      throw ConfigError("reward vector of length " + std::to_string(rewards[b].size()) +
                        " misaligned with sequence of length " + std::to_string(sequences[b].size()));
    if (sequences[b].empty()) continue;
    std::vector<double> w(rewards[b].size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = -rewards[b][i] * invB;
    Graph g(true);
    Var lp = model.sequenceLogProbs(g, sequences[b]);
    Var l = weightedSum(lp, w);
    loss += l.value().item();
    g.backward(l);
  }
  return loss;
}

double mleStep(GeneratorModel& model, std::span<const std::vector<int>> batch, Optimizer& optimizer) {
  std::vector<std::vector<double>> ones;
  for (const auto& s : batch) ones.emplace_back(s.size(), 1.0);
  const double loss = accumulatePolicyGradient(model, batch, ones);
  optimizer.step(model.params());
  return loss;
}

MleReport pretrainMLE(GeneratorModel& model, std::span<const std::vector<int>> corpus,
                      std::size_t epochs, std::size_t batchSize, Optimizer& optimizer, Rng& rng) {
  if (corpus.empty()) throw DataError("MLE pre-training on an empty corpus");
  for (const auto& s : corpus)
    for (int id : s)
      if (id < 0 || static_cast<std::size_t>(id) >= model.vocab().size())
        throw DataError("corpus symbol id " + std::to_string(id) +
                        " not in the generator vocabulary (vocabulary mismatch)");
  MleReport report;
  report.initialPerplexity = std::exp(meanTokenNll(model, corpus));
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  batchSize = std::max<std::size_t>(1, batchSize);
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(order.begin(), order.end());
    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += batchSize) {
      std::vector<std::vector<int>> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + batchSize); ++k) {
        batch.push_back(corpus[order[k]]);
        tokens += corpus[order[k]].size();
      }
      nll += mleStep(model, batch, optimizer) * static_cast<double>(batch.size());
    }
    report.epochPerplexity.push_back(std::exp(nll / static_cast<double>(tokens)));
  }
  return report;
}

double policyGradientStep(GeneratorModel& model, const SampledBatch& batch,
                          std::span<const std::vector<double>> rewards, Optimizer& optimizer,
                          const PolicyGradientOptions& options) {
  if (rewards.size() != batch.sequences.size())
    throw ConfigError("reward batch size does not match sampled batch");
  std::vector<std::vector<double>> used(rewards.begin(), rewards.end());
  if (options.centerRewards) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& r : used)
      for (double v : r) {
        total += v;
        ++count;
      }
    const double mu = count ? total / static_cast<double>(count) : 0.0;
    for (auto& r : used)
      for (double& v : r) v -= mu;
  }
  const double loss = accumulatePolicyGradient(model, batch.sequences, used);
  optimizer.step(model.params());
  return loss;
}

}  // namespace nluaug
