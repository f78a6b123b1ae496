#pragma once

// Plain-text run configuration: one `key = value` per line, `#` comments.
// Unknown keys are errors. Command-line flags override file values.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "itelab/eval.hpp"

namespace itelab {

struct RunConfig {
  // data
  Domain domain = Domain::Hanoi;
  int objects = 3;
  std::size_t rods = 3;
  std::vector<std::size_t> buckets{3, 5, 7};
  std::size_t n = 100;  // samples per bucket
  double test_fraction = 0.2;
  // model
  std::size_t context_window = 128;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 64;
  bool sliding_window = false;
  // loss
  double alpha = 0.1;
  double beta = 0.1;
  std::size_t pairs_per_batch = 16;
  CorruptionStrategy strategy = CorruptionStrategy::SwapArgument;
  bool detached = false;
  OutcomeMode outcome = OutcomeMode::Probability;
  // training
  std::size_t epochs = 300;
  double lr = 0.5;
  double momentum = 0.9;
  std::size_t batch_size = 4;
  std::size_t eval_pairs = 64;
  std::vector<std::pair<double, double>> grid{{0, 0}, {0.1, 0.1}};
  // evaluation
  std::string mode = "one_shot";  // one_shot | chained | both
  std::size_t max_len = 0;
  std::size_t repetitions = 5;
  ReportFormat format = ReportFormat::Markdown;
  std::string tag = "toy";
  double tau_mu = 0.1;
  double tau_sigma = 0.05;
  // plumbing
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string data;
  std::string model;
  std::string out;

  static const std::vector<std::string>& keys();

  /// Throws InvalidConfig for unknown keys or unparseable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Reads a config file; errors carry the line number.
  void load(const std::filesystem::path& path);

  /// Cross-field checks (bucket parity, probabilities, ...).
  void validate() const;

  /// Every key in `key = value` form; feeding it back through load()
  /// reproduces this config.
  std::string render() const;

  GenConfig gen_config() const;
  ModelConfig model_config() const;
  LossConfig loss_config() const;
  TrainConfig train_config() const;
  EvalOptions eval_options() const;
};

}  // namespace itelab
