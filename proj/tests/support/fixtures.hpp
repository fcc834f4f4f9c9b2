#pragma once

#include <string>
#include <vector>

#include "nluaug/corpus.hpp"
#include "nluaug/rng.hpp"

namespace nluaug::testkit {

/// Templated three-domain corpus (alarm, reminder, weather) with Zipf-skewed
/// template and slot-value choice, so exact repeats are common and a long
/// tail of rare utterances exists.
struct SyntheticCorpus {
  std::vector<AnnotatedUtterance> train;
  std::vector<AnnotatedUtterance> test;
};

SyntheticCorpus syntheticNluCorpus(std::size_t trainPerDomain, std::size_t testPerDomain, Rng& rng,
                                   const std::vector<std::string>& domains = {"alarm", "reminder", "weather"});

/// "domain/intent word:label ..." lines parsed into utterances.
std::vector<AnnotatedUtterance> parseAll(const std::vector<std::string>& lines);

}  // namespace nluaug::testkit
