#include "itelab/error.hpp"
#include "itelab/planning.hpp"

namespace itelab {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
}  // namespace

std::string_view domain_name(Domain d) noexcept {
  return d == Domain::Hanoi ? "hanoi" : "blocksworld";
}

Domain parse_domain(std::string_view text) {
  if (text == "hanoi") return Domain::Hanoi;
  if (text == "blocksworld") return Domain::Blocksworld;
  throw Error(ErrorCode::InvalidArgument, "unknown domain '" + std::string(text) + "'");
}

Domain domain_of(const PlanningState& state) noexcept {
  return std::holds_alternative<HanoiState>(state) ? Domain::Hanoi : Domain::Blocksworld;
}

std::size_t pathway_length(const Pathway& path) noexcept {
  return std::visit([](const auto& steps) { return steps.size(); }, path);
}

std::string render_state(const PlanningState& state) {
  return std::visit([](const auto& s) { return render_state(s); }, state);
}

std::vector<std::string> render_steps(const Pathway& path) {
  return std::visit(
      [](const auto& steps) {
        std::vector<std::string> out;
        out.reserve(steps.size());
        for (const auto& s : steps) out.push_back(render_step(s));
        return out;
      },
      path);
}

PlanningState parse_state(Domain domain, std::string_view text) {
  if (domain == Domain::Hanoi) return parse_hanoi_state(text);
  return parse_block_state(text);
}

Pathway parse_steps(Domain domain, const std::vector<std::string>& steps) {
  if (domain == Domain::Hanoi) {
    std::vector<HanoiMove> out;
    for (const auto& s : steps) out.push_back(parse_hanoi_move(s));
    return out;
  }
  std::vector<BlockAction> out;
  for (const auto& s : steps) out.push_back(parse_block_action(s));
  return out;
}

Pathway solve(const PlanningState& init, const PlanningState& goal) {
  if (init.index() != goal.index()) {
    throw Error(ErrorCode::InvalidArgument, "init and goal belong to different domains");
  }
  if (const auto* h = std::get_if<HanoiState>(&init)) {
    return hanoi_solve(*h, std::get<HanoiState>(goal));
  }
  return bw_solve(std::get<BlockState>(init), std::get<BlockState>(goal));
}

PlanningState apply_step(const PlanningState& state, const Pathway& path, std::size_t index) {
  if (state.index() != path.index()) {
    throw Error(ErrorCode::InvalidArgument, "pathway does not match the state's domain");
  }
  return std::visit(
      overloaded{
          [&](const std::vector<HanoiMove>& steps) -> PlanningState {
            return hanoi_apply(std::get<HanoiState>(state), steps.at(index));
          },
          [&](const std::vector<BlockAction>& steps) -> PlanningState {
            return bw_apply(std::get<BlockState>(state), steps.at(index));
          },
      },
      path);
}

std::vector<std::string> step_alphabet(const PlanningState& state) {
  std::vector<std::string> out;
  if (const auto* h = std::get_if<HanoiState>(&state)) {
    for (int d = 1; d <= h->n_disks(); ++d) {
      for (std::size_t a = 0; a < h->n_rods(); ++a) {
        for (std::size_t b = 0; b < h->n_rods(); ++b) {
          if (a != b) out.push_back(render_step(HanoiMove{a, b, d}));
        }
      }
    }
    return out;
  }
  const auto blocks = std::get<BlockState>(state).blocks();
  for (Block x : blocks) {
    out.push_back(render_step(BlockAction::pick_up(x)));
    out.push_back(render_step(BlockAction::put_down(x)));
    for (Block y : blocks) {
      if (x == y) continue;
      out.push_back(render_step(BlockAction::unstack(x, y)));
      out.push_back(render_step(BlockAction::stack(x, y)));
    }
  }
  return out;
}

Verdict validate_pathway(Domain domain, const PlanningState& init, const PlanningState& goal,
                         const Pathway& path) {
  const auto expected = domain == Domain::Hanoi ? 1u : 0u;
  if (init.index() != expected || goal.index() != expected || path.index() != expected) {
    throw Error(ErrorCode::InvalidArgument, "pathway, states and domain tag disagree");
  }
  PlanningState state = init;
  const std::size_t n = pathway_length(path);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      state = apply_step(state, path, i);
    } catch (const Error& e) {
      // out-of-range rods or unknown blocks in decoded text are illegal steps too
      if (e.code() != ErrorCode::IllegalAction && e.code() != ErrorCode::IllegalMove &&
          e.code() != ErrorCode::InvalidArgument) {
        throw;
      }
      return {Verdict::Kind::IllegalAt, i, std::move(state)};
    }
  }
  if (state == goal) return {Verdict::Kind::Success, 0, std::move(state)};
  return {Verdict::Kind::GoalMissed, 0, std::move(state)};
}

}  // namespace itelab
