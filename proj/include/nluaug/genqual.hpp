#pragma once

#include <span>
#include <string>
#include <vector>

#include "nluaug/corpus.hpp"

namespace nluaug {

struct BleuOptions {
  int maxOrder = 4;
  /// Replace zero n-gram matches with epsilon / total ("smoothing 1").
  bool smoothing = false;
  double smoothingEpsilon = 0.1;
};

/// Corpus BLEU in [0, 100]. Every reference is a reference for every
/// candidate: counts are clipped by the maximum count in any reference and
/// the brevity penalty uses, per candidate, the closest reference length
/// (shorter on ties).
double corpusBleu(std::span<const std::vector<std::string>> candidates,
                  std::span<const std::vector<std::string>> references,
                  const BleuOptions& options = {});

/// Words only (labels stripped) or full "word:label" symbols.
std::vector<std::vector<std::string>> wordSequences(std::span<const AnnotatedUtterance> set);
std::vector<std::vector<std::string>> symbolSequences(std::span<const AnnotatedUtterance> set);

struct DiversityReport {
  std::size_t uniqueUtterances = 0;
  std::size_t uniqueWords = 0;
  double meanLength = 0.0;
  double uniquesOverGoldens = 0.0;
};

DiversityReport diversityReport(std::span<const AnnotatedUtterance> set, std::size_t goldenCount);

struct QualityRow {
  std::string model;
  bool pretrainedEmbeddings = false;
  std::string domain;
  DiversityReport diversity;
  double bleu[4] = {0, 0, 0, 0};
};

/// Model, pre-trained embeddings, domain, unique utterances, unique words,
/// mean utterance length, BLEU1..BLEU4.
std::string qualityCsvHeader();
std::string qualityCsvRow(const QualityRow& row);
QualityRow qualityRow(std::string model, bool pretrained, std::string domain,
                      std::span<const AnnotatedUtterance> synthetic,
                      std::span<const AnnotatedUtterance> references, std::size_t goldenCount,
                      const BleuOptions& options = {});

}  // namespace nluaug
