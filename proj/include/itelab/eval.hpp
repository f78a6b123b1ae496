#pragma once

// Success-rate evaluation per step bucket, the one-shot vs chained timing
// comparison, report tables, and the ablation grid.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "itelab/causal.hpp"
#include "itelab/model.hpp"
#include "itelab/trainer.hpp"

namespace itelab {

struct SampleOutcome {
  std::size_t bucket = 0;
  std::string output;          // decoded continuation of the test prompt
  bool terminated = false;     // EOS produced
  bool parsed = false;         // pathway and every step parse
  bool success = false;        // parsed, terminated and the validator says Success
  std::size_t steps = 0;       // parsed step count
  std::size_t invocations = 0;
  double decode_ms = 0;
};

struct BucketSummary {
  std::size_t n = 0;
  std::size_t successes = 0;
  std::size_t parsed = 0;
  std::size_t invocations = 0;
  double median_ms = 0;

  double success_rate() const noexcept { return n ? static_cast<double>(successes) / static_cast<double>(n) : 0.0; }
  double parse_rate() const noexcept { return n ? static_cast<double>(parsed) / static_cast<double>(n) : 0.0; }
};

struct EvalResult {
  std::string model = "model";
  std::string method;
  DecodeMode mode = DecodeMode::OneShot;
  std::vector<SampleOutcome> samples;
  std::map<std::size_t, BucketSummary> buckets;
  double wall_seconds = 0;
};

struct EvalOptions {
  std::string model = "model";
  std::string method;       // empty: the decode mode name
  std::size_t max_len = 0;  // generated-token cap; 0: the context window
  std::size_t workers = 1;
};

/// Decodes every test prompt and grades the pathway with the simulator only.
/// Malformed output is a counted failure, never an error.
EvalResult evaluate_success(const Params& p, const Codec& codec, std::span<const Sample> testset,
                            DecodeMode mode, const EvalOptions& opts = {});

/// Outcome of one already-decoded continuation.
SampleOutcome grade_output(const Sample& s, const std::string& output, bool terminated);

struct SpeedReport {
  EvalResult one_shot;
  EvalResult chained;
  std::map<std::size_t, double> ratio;  // chained / one-shot median decode time
};

/// Times both modes on the same samples (single worker, modes interleaved).
/// Each sample's time is its median over `repetitions` runs; bucket times are
/// medians over samples. Requires repetitions >= 3.
SpeedReport speed_bench(const Params& p, const Codec& codec, std::span<const Sample> testset,
                        std::size_t repetitions, const EvalOptions& opts = {});

enum class ReportFormat { Markdown, Csv };

ReportFormat parse_report_format(std::string_view text);

/// One row per (model, method), one column per bucket. Markdown cells hold
/// success rates with two decimals; CSV rows follow
/// `model,method,bucket,success_rate,n,invocations,median_ms`. Throws
/// EmptyInput and InconsistentBuckets.
std::string render_report(std::span<const EvalResult> results, ReportFormat format);

struct AblationRow {
  double alpha = 0;
  double beta = 0;
  std::uint64_t init_hash = 0;
  LossBreakdown final_loss;
  EvalResult eval;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

/// Trains one model per (alpha, beta) from the same initial parameters and
/// evaluates each one-shot on the test side. The grid must contain (0, 0).
AblationReport ablate(const DatasetSplit& split, const Codec& codec, ModelConfig model,
                      const LossConfig& loss, const TrainConfig& train,
                      const std::vector<std::pair<double, double>>& grid,
                      const EvalOptions& opts = {});

/// Success table plus final losses and per-bucket deltas against (0, 0).
std::string render_ablation(const AblationReport& report, ReportFormat format);

struct AuditOptions {
  std::size_t pairs = 64;
  CorruptionStrategy strategy = CorruptionStrategy::SwapArgument;
  std::uint64_t seed = 0;
  double tau_mu = 0.1;
  double tau_sigma = 0.05;
};

struct AuditReport {
  ContingencyTable table;
  std::size_t samples = 0;
  std::size_t unparsed = 0;  // outputs without a readable pathway
  ITEEstimate ite;
  Scenario scenario = Scenario::Weak;
};

/// P/Q contingency over the model's one-shot pathways for the test prompts,
/// plus the model's ITE summary on counterfactual pairs drawn from them.
/// Throws EmptyInput when no output contains a step.
AuditReport audit_model(const Params& p, const Codec& codec, std::span<const Sample> testset,
                        const AuditOptions& audit, const EvalOptions& opts = {});

/// contingency_csv rows followed by `ite_abs_mean`, `ite_var`, `scenario` and
/// `unparsed` rows in the same three-column shape.
std::string render_audit(const AuditReport& report);

}  // namespace itelab
