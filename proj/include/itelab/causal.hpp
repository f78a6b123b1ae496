#pragma once

// Treatment-effect estimates over (factual, corrupted) step pairs and the
// step/transition contingency audit.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itelab/corpus.hpp"
#include "itelab/scorer.hpp"

namespace itelab {

enum class CorruptionStrategy { SwapArgument, RandomLegalAction, ShuffleTokens };

std::string_view corruption_name(CorruptionStrategy s) noexcept;
CorruptionStrategy parse_corruption(std::string_view text);

/// A well-formed step that differs from `step`. `alphabet` is the domain's
/// step alphabet for the sample (see step_alphabet). Throws
/// NoCorruptionPossible when the strategy has nothing to change.
std::string corrupt_step(Domain domain, const std::string& step,
                         const std::vector<std::string>& alphabet, Rng& rng,
                         CorruptionStrategy strategy);

/// Token-level form: `step_tokens` encode one bracketed step such as
/// " <move disk 1 ...>"; the result keeps the same leading whitespace.
std::vector<int> corrupt_step(const Codec& codec, Domain domain, std::span<const int> step_tokens,
                              const std::vector<std::string>& alphabet, Rng& rng,
                              CorruptionStrategy strategy);

struct CounterfactualPair {
  std::vector<int> context;    // BOS + prompt + " ####" + earlier steps
  std::vector<int> factual;    // treated arm: the reference step
  std::vector<int> corrupted;  // control arm
  std::vector<int> target;     // next step, or EOS after the last step
};

/// Pair for step `index` of a sample.
CounterfactualPair make_counterfactual(const Codec& codec, const Sample& s, std::size_t index,
                                       Rng& rng, CorruptionStrategy strategy);

/// `count` pairs over uniformly drawn (sample, step) positions.
std::vector<CounterfactualPair> draw_pairs(const Codec& codec, std::span<const Sample> samples,
                                           std::size_t count, Rng& rng,
                                           CorruptionStrategy strategy);

struct ITESample {
  double y1 = 0;
  double y0 = 0;
  double ite = 0;
};

/// Probability of the target continuation after context + step: the
/// product of the per-token conditionals.
double outcome_probability(const NextTokenScorer& scorer, std::span<const int> context,
                           std::span<const int> step, std::span<const int> target);

/// y1 / y0 are outcome probabilities under the factual / corrupted step.
ITESample estimate_ite(const NextTokenScorer& scorer, const CounterfactualPair& pair);

/// Binary outcomes: Y(w) ~ Bernoulli(y_w), ite = Y(1) - Y(0).
ITESample estimate_ite_binary(const NextTokenScorer& scorer, const CounterfactualPair& pair,
                              Rng& rng);

struct ITEEstimate {
  double mean = 0;
  double abs_mean = 0;
  double var = 0;  // unbiased
  std::size_t n = 0;
};

/// Throws InsufficientSamples when fewer than 2 values are given.
ITEEstimate aggregate(std::span<const double> ites);
ITEEstimate aggregate(std::span<const ITESample> samples);

/// Repeated binary experiments on a single pair.
ITEEstimate repeated_ite(const NextTokenScorer& scorer, const CounterfactualPair& pair,
                         std::size_t repetitions, Rng& rng);

enum class Scenario { A, B, C, Weak };

std::string_view scenario_name(Scenario s) noexcept;

/// C: strong and consistent; A: weak but consistent; B: strong but
/// inconsistent; Weak: neither.
Scenario classify_scenario(const ITEEstimate& est, double tau_mu = 0.1, double tau_sigma = 0.05);

struct PQRecord {
  bool p = false;  // step correct
  bool q = false;  // transition correct
};

struct ContingencyTable {
  std::uint64_t n[2][2] = {{0, 0}, {0, 0}};  // n[P][Q]

  std::uint64_t total() const noexcept { return n[0][0] + n[0][1] + n[1][0] + n[1][1]; }
  double rate(bool p, bool q) const noexcept;
  /// Share of mismatched records: (n01 + n10) / total.
  double hallucination_rate() const noexcept;
};

/// Throws EmptyInput on an empty record list.
ContingencyTable audit_contingency(std::span<const PQRecord> records);

/// `P,Q,count` rows plus `hallucination,<rate>,<mismatches>`.
std::string contingency_csv(const ContingencyTable& table);

/// One record per emitted step. P: the step is legal in the simulated state.
/// The state advances only on legal steps. Q: the following step is legal in
/// the resulting state, or for the last step, that state is the goal.
std::vector<PQRecord> audit_pathway(Domain domain, const PlanningState& init,
                                    const PlanningState& goal,
                                    const std::vector<std::string>& steps);

}  // namespace itelab
