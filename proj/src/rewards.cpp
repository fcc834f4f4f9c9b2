#include "nluaug/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nluaug/error.hpp"

namespace nluaug {

void RewardPolicy::validate() const {
  if (rollouts == 0) throw ConfigError("rollout count N must be at least 1");
}

RewardKind parseRewardKind(std::string_view tag) {
  if (tag == "token") return RewardKind::TokenLevel;
  if (tag == "token-mc") return RewardKind::TokenLevelMC;
  if (tag == "sentence-mc") return RewardKind::SentenceLevelMC;
  throw ConfigError("unknown policy '" + std::string(tag) + "' (expected token, token-mc or sentence-mc)");
}

std::string rewardKindTag(RewardKind kind) {
  switch (kind) {
    case RewardKind::TokenLevel: return "token";
    case RewardKind::TokenLevelMC: return "token-mc";
    case RewardKind::SentenceLevelMC: return "sentence-mc";
  }
  return "?";
}

SignConvention parseSignConvention(std::string_view tag) {
  if (tag == "literal") return SignConvention::Literal;
  if (tag == "fooling") return SignConvention::FoolingReward;
  throw ConfigError("unknown sign convention '" + std::string(tag) + "' (expected literal or fooling)");
}

std::string signConventionTag(SignConvention sign) {
  return sign == SignConvention::Literal ? "literal" : "fooling";
}

RewardVector rewardsFromProbabilities(std::span<const double> p, SignConvention sign) {
  RewardVector r(p.begin(), p.end());
  for (double& v : r) {
    v = std::clamp(v, kProbabilityFloor, 1.0 - kProbabilityFloor);
    v = sign == SignConvention::Literal ? -std::log(v) : -std::log1p(-v);
  }
  return r;
}

RewardVector tokenLevelReward(const TokenDiscriminator& d, std::span<const int> seq,
                              SignConvention sign) {
  return rewardsFromProbabilities(d.tokenScores(seq), sign);
}

RewardVector tokenLevelMCReward(const TokenDiscriminator& d, const GeneratorModel& gen,
                                std::span<const int> seq, std::size_t n, Rng& rng,
                                const RewardPolicy& policy) {
  if (seq.empty()) throw ConfigError("reward of an empty sequence");
  if (n == 0) throw ConfigError("rollout count N must be at least 1");
  const std::size_t len = seq.size();
  const std::size_t last = len - 1;
  // Rollout rewards are accumulated as deviations from the sequence's own
  // reward so that identical rollouts reproduce it bit for bit.
  std::vector<double> deviation(len, 0.0);
  std::vector<double> terms(len, static_cast<double>(n));  // root k = n counted N times
  const auto own = tokenLevelReward(d, seq, policy.sign);
  if (policy.roots == RolloutRoots::All) {
    for (std::size_t k = 0; k < last; ++k) {
      for (const auto& completed : mcRollouts(gen, seq.first(k + 1), n, rng)) {
        const auto r = tokenLevelReward(d, completed, policy.sign);
        for (std::size_t i = 0; i < std::min(len, r.size()); ++i) {
          deviation[i] += r[i] - own[i];
          terms[i] += 1.0;
        }
      }
    }
  }
  const double strictDen = static_cast<double>(policy.roots == RolloutRoots::All ? len : 1) *
                           static_cast<double>(n);
  RewardVector out(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double den = policy.strictNormalization ? strictDen : terms[i];
    out[i] = own[i] * (terms[i] / den) + deviation[i] / den;
  }
  return out;
}

RewardVector sentenceLevelMCReward(const SentenceDiscriminator& d, const GeneratorModel& gen,
                                   std::span<const int> seq, std::size_t n, Rng& rng) {
  if (seq.empty()) throw ConfigError("reward of an empty sequence");
  if (n == 0) throw ConfigError("rollout count N must be at least 1");
  const std::size_t len = seq.size();
  RewardVector out(len, 0.0);
  for (std::size_t i = 0; i + 1 < len; ++i) {
    double s = 0.0;
    for (const auto& completed : mcRollouts(gen, seq.first(i + 1), n, rng))
      s += d.sentenceScore(completed);
    out[i] = s / static_cast<double>(n);
  }
  out[len - 1] = d.sentenceScore(seq);
  return out;
}

std::vector<RewardVector> computeRewards(const RewardPolicy& policy, const GeneratorModel& gen,
                                         const TokenDiscriminator* tokenDisc,
                                         const SentenceDiscriminator* sentenceDisc,
                                         std::span<const std::vector<int>> sequences, Rng& rng) {
  policy.validate();
  if (policy.needsTokenDiscriminator() && tokenDisc == nullptr)
    throw ConfigError("policy " + rewardKindTag(policy.kind) + " requires a token-level discriminator");
  if (!policy.needsTokenDiscriminator() && sentenceDisc == nullptr)
    throw ConfigError("policy sentence-mc requires a sentence-level discriminator");
  std::vector<RewardVector> out;
  out.reserve(sequences.size());
  for (const auto& seq : sequences) {
    switch (policy.kind) {
      case RewardKind::TokenLevel: out.push_back(tokenLevelReward(*tokenDisc, seq, policy.sign)); break;
      case RewardKind::TokenLevelMC:
        out.push_back(tokenLevelMCReward(*tokenDisc, gen, seq, policy.rollouts, rng, policy));
        break;
      case RewardKind::SentenceLevelMC:
        out.push_back(sentenceLevelMCReward(*sentenceDisc, gen, seq, policy.rollouts, rng));
        break;
    }
    for (double v : out.back())
      if (!std::isfinite(v)) throw NumericalError("non-finite reward");
  }
  return out;
}

std::string rewardTraceCsv(std::span<const std::vector<int>> sequences,
                           std::span<const RewardVector> rewards) {
  std::ostringstream os;
  os.precision(17);
  os << "sequence,position,symbol,reward\n";
  for (std::size_t s = 0; s < sequences.size() && s < rewards.size(); ++s)
    for (std::size_t i = 0; i < sequences[s].size() && i < rewards[s].size(); ++i)
      os << s << ',' << i << ',' << sequences[s][i] << ',' << rewards[s][i] << '\n';
  return os.str();
}

}  // namespace nluaug
