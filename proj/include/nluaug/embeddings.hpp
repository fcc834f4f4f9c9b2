#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nluaug/corpus.hpp"
#include "nluaug/params.hpp"
#include "nluaug/rng.hpp"

namespace nluaug {

/// Word -> vector table. Rows follow the insertion order of `words`.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }

  void add(std::string word, std::vector<double> vec);
  const std::vector<double>* find(std::string_view word) const;
  const std::vector<double>& row(std::size_t i) const { return vectors_[i]; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<std::vector<double>> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// "<word>" followed by the distinct character n-grams of "<word>" with
/// length in [minN, maxN], in order of appearance.
std::vector<std::string> subwordUnits(std::string_view word, std::size_t minN = 3, std::size_t maxN = 6);

struct SkipgramConfig {
  std::size_t dim = 64;
  std::size_t epochs = 5;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t minN = 3;
  std::size_t maxN = 6;
  double learningRate = 0.05;
};

/// Trained subword model. Word vectors are the mean of the known unit
/// vectors, so unseen words get vectors from their n-grams.
class SubwordModel {
 public:
  SubwordModel(std::size_t dim, std::size_t minN, std::size_t maxN);

  std::size_t dim() const { return dim_; }
  std::vector<double> wordVector(std::string_view word) const;
  EmbeddingTable table(std::span<const std::string> words) const;
  /// Table over the training vocabulary.
  EmbeddingTable table() const { return table(vocab_); }

  /// Mean negative-sampling loss per epoch (empty when epochs == 0).
  const std::vector<double>& epochLoss() const { return epochLoss_; }

  friend SubwordModel trainSubwordSkipgram(std::span<const std::vector<std::string>> corpus,
                                           const SkipgramConfig& config, Rng& rng);

 private:
  std::size_t unitId(const std::string& unit);
  std::vector<std::size_t> knownUnits(std::string_view word) const;

  std::size_t dim_, minN_, maxN_;
  std::unordered_map<std::string, std::size_t> units_;
  std::vector<std::vector<double>> input_;
  std::vector<std::string> vocab_;
  std::vector<double> epochLoss_;
};

SubwordModel trainSubwordSkipgram(std::span<const std::vector<std::string>> corpus,
                                  const SkipgramConfig& config, Rng& rng);

/// "count dim" header, then "word v1 ... vdim" per line.
EmbeddingTable loadVectorsText(const std::filesystem::path& path);
void saveVectorsText(const EmbeddingTable& table, const std::filesystem::path& path);

/// Copies table rows into the embedding matrix for every row whose word is
/// in the table ("" = no word); other rows keep their initialisation.
/// Sets layer.frozen = freeze. Returns the number of rows copied.
std::size_t injectPretrained(Parameter& layer, std::span<const std::string> rowWords,
                             const EmbeddingTable& table, bool freeze);

/// Word part of each body symbol of a GAN vocabulary; "" for headers and
/// special symbols.
std::vector<std::string> ganRowWords(const Vocabulary& vocab);

}  // namespace nluaug
