#pragma once

// Causally augmented training objective
//
//   total = ce - alpha * |E(ITE)| + beta * Var(ITE)
//
// where ce is the mean token cross-entropy of the batch and the ITE terms come
// from counterfactual step pairs scored by the model itself.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itelab/causal.hpp"
#include "itelab/model.hpp"

namespace itelab {

enum class OutcomeMode { Probability, Binary };

std::string_view outcome_mode_name(OutcomeMode m) noexcept;
OutcomeMode parse_outcome_mode(std::string_view text);

struct LossConfig {
  double alpha = 0.1;
  double beta = 0.1;
  std::size_t pairs_per_batch = 16;
  CorruptionStrategy strategy = CorruptionStrategy::SwapArgument;
  /// ITE terms are logged but contribute no gradient.
  bool detached = false;
  /// Binary outcomes are sampled and therefore always detached.
  OutcomeMode outcome = OutcomeMode::Probability;

  /// Throws InvalidConfig on negative or non-finite weights, or fewer than 2
  /// pairs when a weight is non-zero.
  void validate() const;
  bool weighted() const noexcept { return alpha != 0.0 || beta != 0.0; }
};

struct LossBreakdown {
  double ce = 0;         // mean token cross-entropy
  double e_ite_abs = 0;  // |E(ITE)|
  double var_ite = 0;    // Var(ITE)
  double total = 0;      // ce - alpha * e_ite_abs + beta * var_ite
  double ppl = 0;        // exp(ce)
};

/// -[q ln p1 + (1 - q) ln p0] with probabilities clamped at 1e-12.
double binary_ce(bool q, double p1, double p0);

/// Assembles the breakdown from a CE value and an ITE estimate.
LossBreakdown combine_loss(double ce, const ITEEstimate& ite, const LossConfig& cfg);

/// Loss over token sequences and counterfactual pairs. `rng` is only used in
/// binary outcome mode. With no pairs the ITE terms are zero.
LossBreakdown csce_loss(const Params& p, std::span<const std::vector<int>> sequences,
                        std::span<const CounterfactualPair> pairs, const LossConfig& cfg,
                        Rng* rng = nullptr, std::size_t workers = 1);

/// Same value as csce_loss; also overwrites `grad` with d total / d params.
LossBreakdown csce_loss_gradient(const Params& p, std::span<const std::vector<int>> sequences,
                                 std::span<const CounterfactualPair> pairs, const LossConfig& cfg,
                                 std::span<double> grad, Rng* rng = nullptr,
                                 std::size_t workers = 1);

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;      // shuffling, pair draws
  std::size_t workers = 1;
  std::size_t eval_pairs = 64;  // fixed pair set for per-epoch metrics
  std::filesystem::path checkpoint_dir;  // empty: keep nothing on disk
  std::filesystem::path log_path;        // empty: no CSV log
};

struct StepLog {
  std::size_t step = 0;
  std::uint64_t version = 0;
  LossBreakdown loss;
};

struct TrainReport {
  std::vector<LossBreakdown> epochs;  // after each epoch, full training set
  std::vector<StepLog> steps;
  std::uint64_t final_version = 0;
  double wall_seconds = 0;
};

struct TrainResult {
  Params initial;
  Params params;
  TrainReport report;
  std::vector<std::filesystem::path> checkpoints;
};

/// Training sequences and the fixed evaluation pairs used for epoch metrics.
struct TrainingView {
  std::vector<std::vector<int>> sequences;
  std::vector<CounterfactualPair> eval_pairs;
};

TrainingView training_view(const DatasetSplit& split, const Codec& codec, const LossConfig& loss,
                           const TrainConfig& train);

/// Gradient descent with momentum on the training side of `split`. Throws
/// DivergenceDetected on a non-finite loss; checkpoints already written stay
/// on disk. A zero vocab_size in `model` is filled from the codec.
TrainResult train(const DatasetSplit& split, const Codec& codec, ModelConfig model,
                  const LossConfig& loss, const TrainConfig& cfg);

/// Checkpoint metrics named after LossBreakdown fields.
std::vector<std::pair<std::string, double>> loss_metrics(const LossBreakdown& lb);
LossBreakdown metrics_loss(const std::vector<std::pair<std::string, double>>& metrics);

/// `ckpt_v0001.ckpt`, ...
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t version);

}  // namespace itelab
