#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nluaug/discriminator.hpp"
#include "nluaug/generator.hpp"

namespace nluaug {

/// One reward per position of an emitted sequence (EOS included).
using RewardVector = std::vector<double>;

enum class RewardKind { TokenLevel, TokenLevelMC, SentenceLevelMC };

/// Literal: R = -log p_i. FoolingReward: R = -log(1 - p_i), i.e. high
/// when the discriminator takes a generated token for real.
enum class SignConvention { Literal, FoolingReward };

/// Which rollout roots k contribute to the averaged token-level reward.
enum class RolloutRoots { All, FinalOnly };

struct RewardPolicy {
  RewardKind kind = RewardKind::TokenLevelMC;
  std::size_t rollouts = 16;
  SignConvention sign = SignConvention::FoolingReward;
  /// Divide by (n+1)N instead of the number of contributing terms.
  bool strictNormalization = false;
  RolloutRoots roots = RolloutRoots::All;

  void validate() const;
  bool needsTokenDiscriminator() const { return kind != RewardKind::SentenceLevelMC; }
};

RewardKind parseRewardKind(std::string_view tag);  // token | token-mc | sentence-mc
std::string rewardKindTag(RewardKind kind);
SignConvention parseSignConvention(std::string_view tag);  // literal | fooling
std::string signConventionTag(SignConvention sign);

/// -log p (literal) or -log(1 - p) (fooling), p clamped first.
RewardVector rewardsFromProbabilities(std::span<const double> p, SignConvention sign);

RewardVector tokenLevelReward(const TokenDiscriminator& d, std::span<const int> seq,
                              SignConvention sign = SignConvention::FoolingReward);

/// Average of token-level rewards over N rollouts from every root k < n
/// (plus the sequence itself as root n). For root k, positions <= k are the
/// input tokens and positions > k come from the rollout; the reward at
/// position i of each completed sequence is credited to position i.
RewardVector tokenLevelMCReward(const TokenDiscriminator& d, const GeneratorModel& gen,
                                std::span<const int> seq, std::size_t n, Rng& rng,
                                const RewardPolicy& policy = {});

/// R(y_i) = mean over N rollouts of prefix y_<=i of D(Y) for i < n, and
/// R(y_n) = D(Y) for the full sequence.
RewardVector sentenceLevelMCReward(const SentenceDiscriminator& d, const GeneratorModel& gen,
                                   std::span<const int> seq, std::size_t n, Rng& rng);

/// Rewards for every sequence of a batch under the policy. The matching
/// discriminator must be non-null.
std::vector<RewardVector> computeRewards(const RewardPolicy& policy, const GeneratorModel& gen,
                                         const TokenDiscriminator* tokenDisc,
                                         const SentenceDiscriminator* sentenceDisc,
                                         std::span<const std::vector<int>> sequences, Rng& rng);

/// "sequence,position,symbol,reward" rows for debugging.
std::string rewardTraceCsv(std::span<const std::vector<int>> sequences,
                           std::span<const RewardVector> rewards);

}  // namespace nluaug
