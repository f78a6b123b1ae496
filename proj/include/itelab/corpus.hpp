#pragma once

// Planning corpora: samples, prompt rendering, pathway parsing, the word-level
// codec and the tab-separated dataset files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "itelab/planning.hpp"

namespace itelab {

struct Sample {
  Domain domain = Domain::Hanoi;
  std::string init_text;
  std::string goal_text;
  std::vector<std::string> steps;
  std::size_t n_steps = 0;

  /// Solves init->goal and renders everything canonically.
  static Sample solved(const PlanningState& init, const PlanningState& goal);

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Decodes the sample's states and steps and runs the simulator over them.
Verdict validate_sample(const Sample& s);

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// `<Step1><Step2>...`
std::string render_pathway(const std::vector<std::string>& steps);
/// `<init> || <goal> #### <Step1>...<StepN>`
std::string render_training_prompt(const Sample& s);
/// `<init> || <goal>`
std::string render_test_prompt(const Sample& s);

/// Step strings found after the first `####`; empty when the marker is absent.
/// Throws MalformedPathway on unbalanced brackets or stray text between steps.
std::vector<std::string> parse_pathway(std::string_view text);

struct GenConfig {
  Domain domain = Domain::Hanoi;
  int objects = 3;               // disks (Hanoi) or blocks (Blocksworld)
  std::size_t rods = 3;          // Hanoi only
  std::size_t per_bucket = 100;  // samples drawn per bucket (duplicates allowed)
  std::vector<std::size_t> buckets{3, 5, 7};
  std::uint64_t seed = 0;
};

/// Rejection-samples random (init, goal) pairs until every bucket holds
/// `per_bucket` samples. Output is grouped by bucket in config order.
/// Throws BucketInfeasible for lengths that cannot occur and InvalidConfig for
/// malformed configs (empty bucket list, even Hanoi buckets, ...).
std::vector<Sample> gen_dataset(const GenConfig& cfg);

/// Drops duplicate (init, goal) keys, then moves round(test_fraction * n)
/// samples of every bucket into the test side.
DatasetSplit split_dataset(const std::vector<Sample>& samples, double test_fraction,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Codec

/// Lossless word-level pieces: runs of whitespace attach to the following
/// piece; `||`, `####`, `<`, `>`, `|`, `;` and `[...]` groups stand alone.
std::vector<std::string> tokenize(std::string_view text);

class Codec {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;       // " ||"
  static constexpr int kPathMark = 4;  // " ####"
  static constexpr int kStepOpen = 5;  // "<"
  static constexpr int kReserved = 6;

  /// Vocabulary over the training prompts plus every step of each sample's
  /// step alphabet (so corrupted steps always encode). Pieces after the
  /// reserved ids are sorted.
  static Codec build(std::span<const Sample> corpus);
  /// Rebuilds from a stored piece list; reserved ids must be in place.
  static Codec from_pieces(std::vector<std::string> pieces);

  std::size_t size() const noexcept { return pieces_.size(); }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& pieces() const noexcept { return pieces_; }
  std::optional<int> find(std::string_view piece) const;

  /// Throws UnknownToken when a piece is outside the vocabulary.
  std::vector<int> encode(std::string_view text) const;
  /// PAD/BOS/EOS decode to nothing.
  std::string decode(std::span<const int> ids) const;

  /// BOS + training prompt + EOS.
  std::vector<int> training_sequence(const Sample& s) const;
  /// BOS + test prompt.
  std::vector<int> test_sequence(const Sample& s) const;

  /// Ids whose piece is optional whitespace followed by `<`.
  const std::vector<int>& step_open_ids() const noexcept { return step_open_; }
  bool is_step_open(int id) const noexcept;

 private:
  explicit Codec(std::vector<std::string> pieces);

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> step_open_;
};

// ---------------------------------------------------------------------------
// Dataset files
//
// One sample per line: domain \t n_steps \t init \t goal \t <s1><s2>...

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples);
/// Throws ParseError (with line number) on malformed records, Io when unreadable.
std::vector<Sample> read_samples(const std::filesystem::path& path);

/// Writes train.tsv, test.tsv and split.txt (the split seed) into `dir`.
void write_split(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& dir);

}  // namespace itelab
