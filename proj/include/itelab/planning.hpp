#pragma once

// World models for the two planning domains: Blocksworld and Tower of Hanoi.
// Everything here is a pure function over values; states are never mutated in
// place by apply/solve/validate.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "itelab/rng.hpp"

namespace itelab {

enum class Domain { Blocksworld, Hanoi };

std::string_view domain_name(Domain d) noexcept;
/// Accepts "blocksworld" / "hanoi"; throws InvalidArgument otherwise.
Domain parse_domain(std::string_view text);

// ---------------------------------------------------------------------------
// Blocksworld

using Block = char;

/// Stacks are bottom->top and kept in canonical order (sorted by bottom block),
/// so two states compare equal iff they describe the same world.
struct BlockState {
  std::vector<std::vector<Block>> stacks;
  std::optional<Block> holding;

  /// Builds a canonical state; throws InvalidArgument when a block repeats or
  /// an empty stack is given.
  static BlockState make(std::vector<std::vector<Block>> stacks,
                         std::optional<Block> holding = std::nullopt);

  std::vector<Block> blocks() const;  // sorted
  bool hand_empty() const noexcept { return !holding.has_value(); }

  friend bool operator==(const BlockState&, const BlockState&) = default;
};

struct BlockAction {
  enum class Kind { PickUp, PutDown, Unstack, Stack };
  Kind kind = Kind::PickUp;
  Block subject = 'A';
  std::optional<Block> target;  // Unstack/Stack only

  static BlockAction pick_up(Block b) { return {Kind::PickUp, b, std::nullopt}; }
  static BlockAction put_down(Block b) { return {Kind::PutDown, b, std::nullopt}; }
  static BlockAction unstack(Block b, Block from) { return {Kind::Unstack, b, from}; }
  static BlockAction stack(Block b, Block on) { return {Kind::Stack, b, on}; }

  friend bool operator==(const BlockAction&, const BlockAction&) = default;
};

/// Throws IllegalAction when the action is not applicable.
BlockState bw_apply(const BlockState& state, const BlockAction& action);

/// Every applicable action, in lexicographic order of the rendered step text.
std::vector<BlockAction> bw_legal_actions(const BlockState& state);

/// Shortest plan by breadth-first search; ties broken by lexicographic action
/// order. Empty iff init == goal.
std::vector<BlockAction> bw_solve(const BlockState& init, const BlockState& goal);

/// Uniform over hand-empty configurations of blocks 'A'.. (set partitions into
/// ordered stacks). 1 <= n_blocks <= 26.
BlockState bw_random_state(std::size_t n_blocks, Rng& rng);

/// Number of hand-empty configurations of n blocks (1, 3, 13, 73, 501, ...).
unsigned long long bw_configuration_count(std::size_t n_blocks);

std::string render_state(const BlockState& state);
std::string render_step(const BlockAction& action);
BlockState parse_block_state(std::string_view text);
BlockAction parse_block_action(std::string_view text);

// ---------------------------------------------------------------------------
// Tower of Hanoi

/// rods[i] lists disk sizes bottom->top, strictly decreasing.
struct HanoiState {
  std::vector<std::vector<int>> rods;

  /// Throws InvalidArgument when the placement rule or the 1..n disk set is violated.
  static HanoiState make(std::vector<std::vector<int>> rods);
  /// All n disks stacked on one rod.
  static HanoiState tower(int n_disks, std::size_t n_rods, std::size_t rod);

  int n_disks() const noexcept;
  std::size_t n_rods() const noexcept { return rods.size(); }
  /// rod_of()[d - 1] is the rod holding disk d.
  std::vector<std::size_t> rod_of() const;

  friend bool operator==(const HanoiState&, const HanoiState&) = default;
};

struct HanoiMove {
  std::size_t from_rod = 0;
  std::size_t to_rod = 1;
  /// Disk named by the textual step; 0 when the move carries no label. A label
  /// that disagrees with the top disk of from_rod makes the move illegal.
  int disk = 0;

  friend bool operator==(const HanoiMove&, const HanoiMove&) = default;
};

/// Throws IllegalMove when from_rod is empty, the disk label mismatches, or a
/// larger disk would land on a smaller one.
HanoiState hanoi_apply(const HanoiState& state, const HanoiMove& move);

std::vector<HanoiMove> hanoi_legal_moves(const HanoiState& state);

/// Minimum-length labelled move sequence between two legal 3-rod states.
/// The largest mismatched disk is moved directly or via the spare rod,
/// whichever is shorter; smaller disks follow the classical recursion.
std::vector<HanoiMove> hanoi_solve(const HanoiState& init, const HanoiState& goal);

/// Each disk placed on a uniformly chosen rod (uniform over legal states).
HanoiState hanoi_random_state(int n_disks, std::size_t n_rods, Rng& rng);

std::string render_state(const HanoiState& state);
std::string render_step(const HanoiMove& move);
HanoiState parse_hanoi_state(std::string_view text);
HanoiMove parse_hanoi_move(std::string_view text);

// ---------------------------------------------------------------------------
// Pathways and validation

using PlanningState = std::variant<BlockState, HanoiState>;
using Pathway = std::variant<std::vector<BlockAction>, std::vector<HanoiMove>>;

Domain domain_of(const PlanningState& state) noexcept;
std::size_t pathway_length(const Pathway& path) noexcept;
std::string render_state(const PlanningState& state);
std::vector<std::string> render_steps(const Pathway& path);
PlanningState parse_state(Domain domain, std::string_view text);
/// Throws InvalidArgument when any step does not parse.
Pathway parse_steps(Domain domain, const std::vector<std::string>& steps);

/// Every well-formed step text over the objects of `state` (disks and rods,
/// or blocks), whether or not it is applicable.
std::vector<std::string> step_alphabet(const PlanningState& state);

/// Domain-dispatching solve.
Pathway solve(const PlanningState& init, const PlanningState& goal);
/// Applies one step of the pathway; throws IllegalAction / IllegalMove.
PlanningState apply_step(const PlanningState& state, const Pathway& path, std::size_t index);

struct Verdict {
  enum class Kind { Success, IllegalAt, GoalMissed };
  Kind kind = Kind::Success;
  std::size_t index = 0;  // first illegal step, IllegalAt only
  PlanningState final_state;

  bool success() const noexcept { return kind == Kind::Success; }
};

/// Simulates the pathway from init. Illegality is reported as a verdict.
Verdict validate_pathway(Domain domain, const PlanningState& init, const PlanningState& goal,
                         const Pathway& path);

}  // namespace itelab
