#include "nluaug/genqual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "nluaug/error.hpp"

namespace nluaug {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> countNgrams(const std::vector<std::string>& words, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  if (words.size() < n) return out;
  for (std::size_t i = 0; i + n <= words.size(); ++i)
    ++out[Ngram(words.begin() + static_cast<std::ptrdiff_t>(i), words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

}  // namespace

double corpusBleu(std::span<const std::vector<std::string>> candidates,
                  std::span<const std::vector<std::string>> references, const BleuOptions& options) {
  if (options.maxOrder < 1 || options.maxOrder > 4)
    throw ConfigError("BLEU maxOrder must be in 1..4, got " + std::to_string(options.maxOrder));
  if (candidates.empty() || references.empty())
    throw ConfigError("BLEU needs non-empty candidate and reference sets");
  const auto N = static_cast<std::size_t>(options.maxOrder);

  // Shared references: max count of each n-gram over all references.
  std::vector<std::map<Ngram, std::size_t>> maxRef(N + 1);
  std::vector<std::size_t> refLengths;
  for (const auto& r : references) {
    refLengths.push_back(r.size());
    for (std::size_t n = 1; n <= N; ++n)
      for (const auto& [g, c] : countNgrams(r, n)) {
        auto& slot = maxRef[n][g];
        slot = std::max(slot, c);
      }
  }
  std::sort(refLengths.begin(), refLengths.end());
  refLengths.erase(std::unique(refLengths.begin(), refLengths.end()), refLengths.end());

  std::vector<double> matched(N + 1, 0.0), total(N + 1, 0.0);
  double candLen = 0.0, refLen = 0.0;
  for (const auto& c : candidates) {
    candLen += static_cast<double>(c.size());
    std::size_t best = refLengths.front();
    for (std::size_t r : refLengths) {
      const auto d = [&](std::size_t x) { return x > c.size() ? x - c.size() : c.size() - x; };
      if (d(r) < d(best)) best = r;
    }
    refLen += static_cast<double>(best);
    for (std::size_t n = 1; n <= N; ++n) {
      for (const auto& [g, cnt] : countNgrams(c, n)) {
        total[n] += static_cast<double>(cnt);
        auto it = maxRef[n].find(g);
        if (it != maxRef[n].end()) matched[n] += static_cast<double>(std::min(cnt, it->second));
      }
    }
  }
  if (candLen == 0.0) return 0.0;
  double logSum = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    double m = matched[n];
    if (m == 0.0) {
      if (!options.smoothing || total[n] == 0.0) return 0.0;
      m = options.smoothingEpsilon;
    }
    logSum += std::log(m / total[n]);
  }
  const double bp = candLen > refLen ? 1.0 : std::exp(1.0 - refLen / candLen);
  return 100.0 * bp * std::exp(logSum / static_cast<double>(N));
}

std::vector<std::vector<std::string>> wordSequences(std::span<const AnnotatedUtterance> set) {
  std::vector<std::vector<std::string>> out;
  out.reserve(set.size());
  for (const auto& u : set) out.push_back(u.tokens);
  return out;
}

std::vector<std::vector<std::string>> symbolSequences(std::span<const AnnotatedUtterance> set) {
  std::vector<std::vector<std::string>> out;
  out.reserve(set.size());
  for (const auto& u : set) {
    const auto labels = u.labels();
    std::vector<std::string> s;
    for (std::size_t i = 0; i < u.tokens.size(); ++i) s.push_back(bodySymbol(u.tokens[i], labels[i]));
    out.push_back(std::move(s));
  }
  return out;
}

DiversityReport diversityReport(std::span<const AnnotatedUtterance> set, std::size_t goldenCount) {
  DiversityReport r;
  if (set.empty()) return r;
  std::set<std::string> utterances, words;
  double len = 0.0;
  for (const auto& u : set) {
    utterances.insert(annotatedString(u));
    words.insert(u.tokens.begin(), u.tokens.end());
    len += static_cast<double>(u.tokens.size());
  }
  r.uniqueUtterances = utterances.size();
  r.uniqueWords = words.size();
  r.meanLength = len / static_cast<double>(set.size());
  r.uniquesOverGoldens = goldenCount ? static_cast<double>(r.uniqueUtterances) / static_cast<double>(goldenCount) : 0.0;
  return r;
}

std::string qualityCsvHeader() {
  return "model,pretrained_embeddings,domain,unique_utterances,unique_words,mean_utterance_length,"
         "bleu1,bleu2,bleu3,bleu4";
}

std::string qualityCsvRow(const QualityRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.2f,%.2f,%.2f,%.2f,%.2f", row.diversity.uniqueUtterances,
                row.diversity.uniqueWords, row.diversity.meanLength, row.bleu[0], row.bleu[1],
                row.bleu[2], row.bleu[3]);
  return row.model + "," + (row.pretrainedEmbeddings ? "Yes" : "No") + "," + row.domain + "," + buf;
}

QualityRow qualityRow(std::string model, bool pretrained, std::string domain,
                      std::span<const AnnotatedUtterance> synthetic,
                      std::span<const AnnotatedUtterance> references, std::size_t goldenCount,
                      const BleuOptions& options) {
  QualityRow row;
  row.model = std::move(model);
  row.pretrainedEmbeddings = pretrained;
  row.domain = std::move(domain);
  row.diversity = diversityReport(synthetic, goldenCount);
  if (!synthetic.empty() && !references.empty()) {
    const auto cands = wordSequences(synthetic);
    const auto refs = wordSequences(references);
    for (int n = 1; n <= 4; ++n) {
      BleuOptions o = options;
      o.maxOrder = n;
      row.bleu[n - 1] = corpusBleu(cands, refs, o);
    }
  }
  return row;
}

}  // namespace nluaug
