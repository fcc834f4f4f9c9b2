#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nluaug/corpus.hpp"
#include "nluaug/generator.hpp"

namespace nluaug {

enum class SamplingStrategy { TopX, Uniques, All };
SamplingStrategy parseSamplingStrategy(std::string_view tag);  // topx | uniques | all
std::string samplingStrategyTag(SamplingStrategy s);

struct Pool {
  std::vector<AnnotatedUtterance> utterances;
  std::map<std::string, std::size_t> rejected;  ///< undecodable draws per domain
};

/// Draws perDomainCount decodable utterances from each domain's generator,
/// tagged "synthetic". Undecodable samples are redrawn; a domain whose
/// rejections exceed its accepted count aborts with NumericalError.
Pool generatePool(const std::map<std::string, const GeneratorModel*>& generators,
                  std::size_t perDomainCount, Rng& rng);

/// |goldens| pool utterances by descending frequency (ties lexicographic),
/// unique first, then refilled with repeat occurrences of the most frequent.
std::vector<AnnotatedUtterance> sampleTopX(std::span<const AnnotatedUtterance> pool,
                                           std::size_t goldenCount);
/// Distinct annotated strings in first-seen order.
std::vector<AnnotatedUtterance> sampleUniques(std::span<const AnnotatedUtterance> pool);
std::vector<AnnotatedUtterance> sampleAll(std::span<const AnnotatedUtterance> pool);

std::vector<AnnotatedUtterance> applySampling(SamplingStrategy strategy,
                                              std::span<const AnnotatedUtterance> pool,
                                              std::size_t goldenCount);

/// Removes pool utterances whose annotated string matches a golden.
std::vector<AnnotatedUtterance> dropGoldenMatches(std::span<const AnnotatedUtterance> set,
                                                  std::span<const AnnotatedUtterance> goldens);

/// Goldens repeated round-robin in order to exactly targetCount items.
std::vector<AnnotatedUtterance> upsampleGoldens(std::span<const AnnotatedUtterance> goldens,
                                                std::size_t targetCount);

}  // namespace nluaug
