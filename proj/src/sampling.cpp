#include "nluaug/sampling.hpp"

#include <algorithm>
#include <set>

#include "nluaug/error.hpp"

namespace nluaug {

SamplingStrategy parseSamplingStrategy(std::string_view tag) {
  if (tag == "topx") return SamplingStrategy::TopX;
  if (tag == "uniques") return SamplingStrategy::Uniques;
  if (tag == "all") return SamplingStrategy::All;
  throw ConfigError("unknown sampling strategy '" + std::string(tag) + "' (expected topx, uniques or all)");
}

std::string samplingStrategyTag(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::TopX: return "topx";
    case SamplingStrategy::Uniques: return "uniques";
    case SamplingStrategy::All: return "all";
  }
  return "?";
}

Pool generatePool(const std::map<std::string, const GeneratorModel*>& generators,
                  std::size_t perDomainCount, Rng& rng) {
  Pool pool;
  for (const auto& [domain, gen] : generators) {
    Rng domainRng = rng.split(domain);
    std::size_t accepted = 0, rejected = 0;
    while (accepted < perDomainCount) {
      auto batch = sample(*gen, 1, domainRng);
      auto u = decodeGenerated(batch.sequences[0], gen->vocab());
      bool ok = u.has_value();
      if (ok) {
        try {
          u->validate();
        } catch (const DataError&) {
          ok = false;
        }
      }
      if (!ok) {
        if (++rejected > perDomainCount)
          throw NumericalError("generator for domain '" + domain + "' rejected " +
                               std::to_string(rejected) + " undecodable samples (> 50%)");
        continue;
      }
      u->provenance = "synthetic";
      pool.utterances.push_back(std::move(*u));
      ++accepted;
    }
    pool.rejected[domain] = rejected;
  }
  return pool;
}

std::vector<AnnotatedUtterance> sampleTopX(std::span<const AnnotatedUtterance> pool,
                                           std::size_t goldenCount) {
  if (pool.size() < goldenCount)
    throw ConfigError("pool of " + std::to_string(pool.size()) + " is smaller than the " +
                      std::to_string(goldenCount) + " goldens");
  struct Entry {
    std::string key;
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<std::string, Entry> byKey;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto key = annotatedString(pool[i]);
    auto [it, inserted] = byKey.try_emplace(key, Entry{key, 0, i});
    ++it->second.count;
  }
  std::vector<Entry> ranked;
  for (auto& [k, e] : byKey) ranked.push_back(e);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Entry& a, const Entry& b) { return a.count > b.count; });
  std::vector<AnnotatedUtterance> out;
  for (std::size_t round = 1; out.size() < goldenCount; ++round)
    for (const auto& e : ranked) {
      if (out.size() == goldenCount) break;
      if (e.count >= round) out.push_back(pool[e.first]);
    }
  return out;
}

std::vector<AnnotatedUtterance> sampleUniques(std::span<const AnnotatedUtterance> pool) {
  std::set<std::string> seen;
  std::vector<AnnotatedUtterance> out;
  for (const auto& u : pool)
    if (seen.insert(annotatedString(u)).second) out.push_back(u);
  return out;
}

std::vector<AnnotatedUtterance> sampleAll(std::span<const AnnotatedUtterance> pool) {
  return {pool.begin(), pool.end()};
}

std::vector<AnnotatedUtterance> applySampling(SamplingStrategy strategy,
                                              std::span<const AnnotatedUtterance> pool,
                                              std::size_t goldenCount) {
  switch (strategy) {
    case SamplingStrategy::TopX: return sampleTopX(pool, goldenCount);
    case SamplingStrategy::Uniques: return sampleUniques(pool);
    case SamplingStrategy::All: return sampleAll(pool);
  }
  return {};
}

std::vector<AnnotatedUtterance> dropGoldenMatches(std::span<const AnnotatedUtterance> set,
                                                  std::span<const AnnotatedUtterance> goldens) {
  std::set<std::string> golden;
  for (const auto& g : goldens) golden.insert(annotatedString(g));
  std::vector<AnnotatedUtterance> out;
  for (const auto& u : set)
    if (!golden.count(annotatedString(u))) out.push_back(u);
  return out;
}

std::vector<AnnotatedUtterance> upsampleGoldens(std::span<const AnnotatedUtterance> goldens,
                                                std::size_t targetCount) {
  if (goldens.empty() && targetCount > 0) throw ConfigError("cannot upsample an empty golden set");
  std::vector<AnnotatedUtterance> out;
  out.reserve(targetCount);
  for (std::size_t i = 0; i < targetCount; ++i) out.push_back(goldens[i % goldens.size()]);
  return out;
}

}  // namespace nluaug
