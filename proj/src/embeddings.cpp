#include "nluaug/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "nluaug/error.hpp"

namespace nluaug {

void EmbeddingTable::add(std::string word, std::vector<double> vec) {
  if (vec.size() != dim_)
    throw DataError("vector for '" + word + "' has dimension " + std::to_string(vec.size()) +
                    ", table expects " + std::to_string(dim_));
  if (index_.count(word)) throw DataError("duplicate embedding for '" + word + "'");
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  vectors_.push_back(std::move(vec));
}

const std::vector<double>* EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

std::vector<std::string> subwordUnits(std::string_view word, std::size_t minN, std::size_t maxN) {
  const std::string bracketed = "<" + std::string(word) + ">";
  std::vector<std::string> out{bracketed};
  std::set<std::string> seen{bracketed};
  for (std::size_t i = 0; i < bracketed.size(); ++i)
    for (std::size_t n = minN; n <= maxN && i + n <= bracketed.size(); ++n) {
      auto g = bracketed.substr(i, n);
      if (seen.insert(g).second) out.push_back(std::move(g));
    }
  return out;
}

SubwordModel::SubwordModel(std::size_t dim, std::size_t minN, std::size_t maxN)
    : dim_(dim), minN_(minN), maxN_(maxN) {}

std::size_t SubwordModel::unitId(const std::string& unit) {
  auto [it, inserted] = units_.try_emplace(unit, input_.size());
  if (inserted) input_.emplace_back(dim_, 0.0);
  return it->second;
}

std::vector<std::size_t> SubwordModel::knownUnits(std::string_view word) const {
  std::vector<std::size_t> ids;
  for (const auto& u : subwordUnits(word, minN_, maxN_)) {
    auto it = units_.find(u);
    if (it != units_.end()) ids.push_back(it->second);
  }
  return ids;
}

std::vector<double> SubwordModel::wordVector(std::string_view word) const {
  std::vector<double> v(dim_, 0.0);
  const auto ids = knownUnits(word);
  for (auto id : ids)
    for (std::size_t k = 0; k < dim_; ++k) v[k] += input_[id][k];
  if (!ids.empty())
    for (auto& x : v) x /= static_cast<double>(ids.size());
  return v;
}

EmbeddingTable SubwordModel::table(std::span<const std::string> words) const {
  EmbeddingTable t(dim_);
  for (const auto& w : words)
    if (!t.find(w)) t.add(w, wordVector(w));
  return t;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SubwordModel trainSubwordSkipgram(std::span<const std::vector<std::string>> corpus,
                                  const SkipgramConfig& config, Rng& rng) {
  if (config.dim == 0) throw ConfigError("embedding dimension must be positive");
  if (config.minN == 0 || config.minN > config.maxN) throw ConfigError("subword n-gram range is empty");
  if (config.window == 0) throw ConfigError("skip-gram window must be positive");
  std::size_t tokens = 0;
  for (const auto& s : corpus) tokens += s.size();
  if (tokens == 0) throw DataError("skip-gram corpus is empty");

  SubwordModel m(config.dim, config.minN, config.maxN);
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus)
    for (const auto& w : s) ++counts[w];
  std::unordered_map<std::string, std::size_t> wordId;
  std::vector<std::vector<std::size_t>> wordUnits;
  std::vector<double> unigram;
  for (const auto& [w, c] : counts) {
    wordId.emplace(w, m.vocab_.size());
    m.vocab_.push_back(w);
    std::vector<std::size_t> ids;
    for (const auto& u : subwordUnits(w, config.minN, config.maxN)) ids.push_back(m.unitId(u));
    wordUnits.push_back(std::move(ids));
    unigram.push_back(std::pow(static_cast<double>(c), 0.75));
  }
  const double bound = 1.0 / static_cast<double>(config.dim);
  for (auto& row : m.input_)
    for (auto& x : row) x = rng.uniform(-bound, bound);
  std::vector<std::vector<double>> output(m.vocab_.size(), std::vector<double>(config.dim, 0.0));

  // Cumulative unigram^0.75 table for negative draws.
  std::vector<double> cumulative(unigram.size());
  std::partial_sum(unigram.begin(), unigram.end(), cumulative.begin());
  auto drawNegative = [&]() {
    const double u = rng.uniform() * cumulative.back();
    return static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                    cumulative.begin());
  };

  const double totalSteps = static_cast<double>(config.epochs * tokens);
  double processed = 0.0;
  std::vector<double> hidden(config.dim), grad(config.dim);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double lossSum = 0.0;
    std::size_t lossTerms = 0;
    for (const auto& sentence : corpus) {
      std::vector<std::size_t> ids;
      for (const auto& w : sentence) ids.push_back(wordId.at(w));
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        const double lr = config.learningRate * std::max(1e-4, 1.0 - processed / totalSteps);
        processed += 1.0;
        const auto& units = wordUnits[ids[pos]];
        const std::size_t span = 1 + rng.index(config.window);
        for (std::size_t c = pos >= span ? pos - span : 0; c <= std::min(ids.size() - 1, pos + span); ++c) {
          if (c == pos) continue;
          std::fill(hidden.begin(), hidden.end(), 0.0);
          for (auto u : units)
            for (std::size_t k = 0; k < config.dim; ++k) hidden[k] += m.input_[u][k];
          for (auto& h : hidden) h /= static_cast<double>(units.size());
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t s = 0; s <= config.negatives; ++s) {
            std::size_t target = ids[c];
            double label = 1.0;
            if (s > 0) {
              target = drawNegative();
              if (target == ids[c]) continue;
              label = 0.0;
            }
            auto& out = output[target];
            double dot = 0.0;
            for (std::size_t k = 0; k < config.dim; ++k) dot += hidden[k] * out[k];
            const double p = sigmoid(dot);
            lossSum += label > 0 ? -std::log(std::max(p, 1e-12)) : -std::log(std::max(1.0 - p, 1e-12));
            const double alpha = lr * (label - p);
            for (std::size_t k = 0; k < config.dim; ++k) {
              grad[k] += alpha * out[k];
              out[k] += alpha * hidden[k];
            }
          }
          ++lossTerms;
          for (auto u : units)
            for (std::size_t k = 0; k < config.dim; ++k) m.input_[u][k] += grad[k];
        }
      }
    }
    m.epochLoss_.push_back(lossTerms ? lossSum / static_cast<double>(lossTerms) : 0.0);
  }
  return m;
}

EmbeddingTable loadVectorsText(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vector file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing 'count dim' header");
  std::istringstream header(line);
  long long count = -1, dim = -1;
  if (!(header >> count >> dim) || count < 0 || dim <= 0)
    throw DataError(path.string() + ":1: malformed 'count dim' header");
  EmbeddingTable table(static_cast<std::size_t>(dim));
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> vec;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(lineNo) + ": bad number '" + tok + "'");
      }
    }
    if (vec.size() != static_cast<std::size_t>(dim))
      throw DataError(path.string() + ":" + std::to_string(lineNo) + ": expected " + std::to_string(dim) +
                      " values, found " + std::to_string(vec.size()));
    table.add(std::move(word), std::move(vec));
  }
  if (table.size() != static_cast<std::size_t>(count))
    throw DataError(path.string() + ": header announces " + std::to_string(count) + " vectors, found " +
                    std::to_string(table.size()));
  return table;
}

void saveVectorsText(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vector file " + path.string());
  out << table.size() << " " << table.dim() << "\n";
  char buf[32];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.words()[i];
    for (double v : table.row(i)) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

std::size_t injectPretrained(Parameter& layer, std::span<const std::string> rowWords,
                             const EmbeddingTable& table, bool freeze) {
  if (rowWords.size() != layer.value.rows())
    throw ConfigError("embedding layer " + layer.name + " has " + std::to_string(layer.value.rows()) +
                      " rows but " + std::to_string(rowWords.size()) + " row words were given");
  std::size_t copied = 0;
  if (!table.empty()) {
    if (table.dim() != layer.value.cols())
      throw ConfigError("pre-trained vectors have dimension " + std::to_string(table.dim()) + ", layer " +
                        layer.name + " expects " + std::to_string(layer.value.cols()));
    for (std::size_t r = 0; r < rowWords.size(); ++r) {
      if (rowWords[r].empty()) continue;
      if (const auto* v = table.find(rowWords[r])) {
        for (std::size_t k = 0; k < v->size(); ++k) layer.value(r, k) = (*v)[k];
        ++copied;
      }
    }
  }
  layer.frozen = freeze;
  return copied;
}

std::vector<std::string> ganRowWords(const Vocabulary& vocab) {
  std::vector<std::string> out(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const int id = static_cast<int>(i);
    if (vocab.isBody(id))
      if (auto parts = splitBody(vocab.symbol(id))) out[i] = parts->first;
  }
  return out;
}

}  // namespace nluaug
