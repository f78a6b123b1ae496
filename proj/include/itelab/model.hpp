#pragma once

// Pooled-embedding MLP language model over a closed vocabulary:
//
//   z = (1/L) * sum_t tok[x_t] * pos[t]      (elementwise, t from window start)
//   h = tanh(W1 z + b1)
//   P(next | x) = softmax(W2 h + b2)
//
// All arithmetic is double precision; gradients are exact.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "itelab/corpus.hpp"
#include "itelab/scorer.hpp"

namespace itelab {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t context_window = 32;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 64;
  std::uint64_t seed = 0;
  /// Longer contexts keep only their last context_window tokens instead of
  /// raising ContextOverflow.
  bool sliding_window = false;

  /// Throws InvalidConfig when a dimension is zero.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Offsets of the named blocks inside the flat parameter vector.
struct ParamLayout {
  std::size_t tok = 0;  // [vocab x embed]
  std::size_t pos = 0;  // [context x embed]
  std::size_t w1 = 0;   // [hidden x embed]
  std::size_t b1 = 0;   // [hidden]
  std::size_t w2 = 0;   // [vocab x hidden]
  std::size_t b2 = 0;   // [vocab]
  std::size_t total = 0;

  static ParamLayout of(const ModelConfig& cfg);
};

struct Params {
  ModelConfig config;
  std::vector<double> values;

  /// All-zero parameters of the right size.
  static Params zeros(const ModelConfig& cfg);
  ParamLayout layout() const { return ParamLayout::of(config); }

  friend bool operator==(const Params&, const Params&) = default;
};

/// tok/pos ~ U(-1, 1); W1 ~ U(+-1/sqrt(embed)); W2 ~ U(+-1/sqrt(hidden)); biases 0.
Params init_params(const ModelConfig& cfg, std::uint64_t seed);

/// FNV-1a over the raw parameter bytes.
std::uint64_t params_hash(const Params& p);

/// Next-token distribution. Throws ContextOverflow when the context exceeds
/// the window (and sliding is off), InvalidArgument on out-of-range ids.
std::vector<double> forward(const Params& p, std::span<const int> context);

struct SequenceNll {
  double total = 0;  // sum_t -log P(x_t | x_<t)
  double mean = 0;   // total / (|x| - 1)
};

/// Requires at least 2 tokens.
SequenceNll sequence_nll(const Params& p, std::span<const int> tokens);

/// exp(total NLL / predicted tokens) over the corpus; throws EmptyInput.
double perplexity(const Params& p, std::span<const std::vector<int>> corpus);

/// log P(tokens[begin..] | tokens[..begin)), the sum of per-token
/// conditionals. `begin` must be >= 1.
struct ScoredSpan {
  std::vector<int> tokens;
  std::size_t begin = 1;
};

double span_log_prob(const Params& p, const ScoredSpan& span);

/// Log-probs of many spans, evaluated in parallel.
std::vector<double> span_log_probs(const Params& p, std::span<const ScoredSpan> spans,
                                   std::size_t workers = 1);

/// Adds sum_i weights[i] * d log P(span_i) / d params into `grad` and returns
/// the span log-probs. Spans are reduced in fixed chunks so the result is
/// bit-identical for any worker count.
std::vector<double> accumulate_span_gradient(const Params& p, std::span<const ScoredSpan> spans,
                                             std::span<const double> weights,
                                             std::span<double> grad, std::size_t workers = 1);

/// A scalar loss over span log-probs: given the values, returns the loss and
/// writes d loss / d value into the second argument.
using SpanObjective = std::function<double(std::span<const double>, std::span<double>)>;

/// Loss and its exact gradient (written into `grad`, which is overwritten).
double loss_gradient(const Params& p, std::span<const ScoredSpan> spans,
                     const SpanObjective& objective, std::span<double> grad,
                     std::size_t workers = 1);

/// The model as a generic scorer.
class ModelScorer : public NextTokenScorer {
 public:
  explicit ModelScorer(const Params& p) : params_(p) {}
  std::vector<double> next_token_distribution(std::span<const int> context) const override {
    return forward(params_, context);
  }

 private:
  const Params& params_;
};

// ---------------------------------------------------------------------------
// Decoding

enum class DecodeMode { OneShot, Chained };

std::string_view decode_mode_name(DecodeMode m) noexcept;
DecodeMode parse_decode_mode(std::string_view text);

struct DecodeResult {
  std::vector<int> tokens;      // generated ids, EOS included when produced
  std::size_t invocations = 0;  // decode sessions started
  bool terminated = false;      // false: NonTermination (length or window limit)
};

/// Greedy decoding, lowest id wins ties. One-shot runs a single session until
/// EOS. Chained starts a fresh session per step: the accumulated text is
/// decoded, re-encoded and re-fed, and each session ends before opening a
/// second step. Throws ContextOverflow when the prompt alone does not fit.
DecodeResult decode(const Params& p, const Codec& codec, std::span<const int> prompt,
                    DecodeMode mode, std::size_t max_len);

// ---------------------------------------------------------------------------
// Checkpoints (layout in docs/checkpoint_format.md)

struct Checkpoint {
  Params params;
  std::uint64_t version = 0;
  std::vector<std::pair<std::string, double>> metrics;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws Io on unreadable files and ParseError on malformed ones.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace itelab
