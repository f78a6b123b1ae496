#include <algorithm>
#include <limits>
#include <unordered_map>

#include "itelab/error.hpp"
#include "itelab/planning.hpp"
#include "text_util.hpp"

namespace itelab {

namespace {

[[noreturn]] void illegal(const BlockAction& a, const std::string& why) {
  throw Error(ErrorCode::IllegalAction, "illegal action '" + render_step(a) + "': " + why);
}

// Index of the stack whose top block is b, or npos.
std::size_t stack_with_top(const BlockState& s, Block b) {
  for (std::size_t i = 0; i < s.stacks.size(); ++i) {
    if (s.stacks[i].back() == b) return i;
  }
  return std::string::npos;
}

bool valid_block(char c) { return c >= 'A' && c <= 'Z'; }

}  // namespace

BlockState BlockState::make(std::vector<std::vector<Block>> stacks, std::optional<Block> holding) {
  std::vector<Block> seen;
  for (const auto& st : stacks) {
    if (st.empty()) throw Error(ErrorCode::InvalidArgument, "empty stack in block state");
    seen.insert(seen.end(), st.begin(), st.end());
  }
  if (holding) seen.push_back(*holding);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw Error(ErrorCode::InvalidArgument, "block appears more than once");
  }
  for (char c : seen) {
    if (!valid_block(c)) throw Error(ErrorCode::InvalidArgument, "block ids must be A..Z");
  }
  std::sort(stacks.begin(), stacks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return BlockState{std::move(stacks), holding};
}

std::vector<Block> BlockState::blocks() const {
  std::vector<Block> out;
  for (const auto& st : stacks) out.insert(out.end(), st.begin(), st.end());
  if (holding) out.push_back(*holding);
  std::sort(out.begin(), out.end());
  return out;
}

BlockState bw_apply(const BlockState& state, const BlockAction& action) {
  using K = BlockAction::Kind;
  const bool needs_target = action.kind == K::Unstack || action.kind == K::Stack;
  if (needs_target != action.target.has_value()) {
    throw Error(ErrorCode::InvalidArgument, "malformed block action");
  }
  BlockState next = state;
  switch (action.kind) {
    case K::PickUp: {
      if (state.holding) illegal(action, "hand is occupied");
      auto i = stack_with_top(state, action.subject);
      if (i == std::string::npos) illegal(action, "block is not clear");
      if (state.stacks[i].size() != 1) illegal(action, "block is not on the table");
      next.stacks.erase(next.stacks.begin() + static_cast<std::ptrdiff_t>(i));
      next.holding = action.subject;
      break;
    }
    case K::Unstack: {
      if (state.holding) illegal(action, "hand is occupied");
      auto i = stack_with_top(state, action.subject);
      if (i == std::string::npos) illegal(action, "block is not clear");
      const auto& st = state.stacks[i];
      if (st.size() < 2 || st[st.size() - 2] != *action.target) {
        illegal(action, "block is not on the named block");
      }
      next.stacks[i].pop_back();
      next.holding = action.subject;
      break;
    }
    case K::PutDown: {
      if (state.holding != action.subject) illegal(action, "block is not held");
      next.holding.reset();
      next.stacks.push_back({action.subject});
      break;
    }
    case K::Stack: {
      if (state.holding != action.subject) illegal(action, "block is not held");
      auto i = stack_with_top(state, *action.target);
      if (i == std::string::npos) illegal(action, "target is not clear");
      next.holding.reset();
      next.stacks[i].push_back(action.subject);
      break;
    }
  }
  std::sort(next.stacks.begin(), next.stacks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return next;
}

std::vector<BlockAction> bw_legal_actions(const BlockState& state) {
  std::vector<BlockAction> out;
  if (state.holding) {
    out.push_back(BlockAction::put_down(*state.holding));
    for (const auto& st : state.stacks) out.push_back(BlockAction::stack(*state.holding, st.back()));
  } else {
    for (const auto& st : state.stacks) {
      if (st.size() == 1) {
        out.push_back(BlockAction::pick_up(st.back()));
      } else {
        out.push_back(BlockAction::unstack(st.back(), st[st.size() - 2]));
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const BlockAction& a, const BlockAction& b) {
    return render_step(a) < render_step(b);
  });
  return out;
}

std::vector<BlockAction> bw_solve(const BlockState& init, const BlockState& goal) {
  if (init.blocks() != goal.blocks()) {
    throw Error(ErrorCode::InvalidArgument, "init and goal use different block sets");
  }
  if (init == goal) return {};

  struct Node {
    BlockState state;
    std::size_t parent;
    BlockAction via;
  };
  std::vector<Node> nodes;
  std::unordered_map<std::string, std::size_t> seen;
  nodes.push_back({init, std::string::npos, {}});
  seen.emplace(render_state(init), 0);

  for (std::size_t head = 0; head < nodes.size(); ++head) {
    // nodes may reallocate below; copy what we need first
    const BlockState current = nodes[head].state;
    for (const auto& a : bw_legal_actions(current)) {
      BlockState next = bw_apply(current, a);
      auto [it, inserted] = seen.emplace(render_state(next), nodes.size());
      if (!inserted) continue;
      const bool done = next == goal;
      nodes.push_back({std::move(next), head, a});
      if (done) {
        std::vector<BlockAction> path;
        for (std::size_t i = nodes.size() - 1; nodes[i].parent != std::string::npos;
             i = nodes[i].parent) {
          path.push_back(nodes[i].via);
        }
        std::reverse(path.begin(), path.end());
        return path;
      }
    }
  }
  throw Error(ErrorCode::InvalidArgument, "goal unreachable");  // not reachable for equal block sets
}

namespace {

using u128 = unsigned __int128;

// configs[m] = number of ways to arrange m labelled blocks into unordered
// collections of ordered stacks.
std::vector<u128> configuration_table(std::size_t n) {
  std::vector<u128> a(n + 1, 0);
  a[0] = 1;
  for (std::size_t m = 1; m <= n; ++m) {
    // a(m) = sum_k C(m-1, k-1) * k! * a(m-k)
    u128 c = 1, fact = 1, total = 0;
    for (std::size_t k = 1; k <= m; ++k) {
      fact *= k;
      if (k > 1) c = c * (m - k + 1) / (k - 1);
      total += c * fact * a[m - k];
    }
    a[m] = total;
  }
  return a;
}

u128 uniform_below(u128 n, Rng& rng) {
  if (n <= (u128)std::numeric_limits<std::uint64_t>::max()) {
    return rng.below(static_cast<std::size_t>(n));
  }
  const u128 limit = ~u128{0} - (~u128{0} % n);
  for (;;) {
    u128 x = (u128(rng.engine()()) << 64) | rng.engine()();
    if (x < limit) return x % n;
  }
}

}  // namespace

unsigned long long bw_configuration_count(std::size_t n_blocks) {
  if (n_blocks > 20) throw Error(ErrorCode::InvalidArgument, "too many blocks to count");
  return static_cast<unsigned long long>(configuration_table(n_blocks)[n_blocks]);
}

BlockState bw_random_state(std::size_t n_blocks, Rng& rng) {
  if (n_blocks < 1 || n_blocks > 26) {
    throw Error(ErrorCode::InvalidArgument, "n_blocks must be in 1..26");
  }
  const auto a = configuration_table(n_blocks);
  std::vector<Block> remaining;
  for (std::size_t i = 0; i < n_blocks; ++i) remaining.push_back(static_cast<Block>('A' + i));

  std::vector<std::vector<Block>> stacks;
  while (!remaining.empty()) {
    const std::size_t m = remaining.size();
    // Size k of the stack holding the first remaining block.
    u128 r = uniform_below(a[m], rng);
    std::size_t k = 1;
    u128 c = 1, fact = 1;
    for (;; ++k) {
      fact *= k;
      if (k > 1) c = c * (m - k + 1) / (k - 1);
      const u128 w = c * fact * a[m - k];
      if (r < w) break;
      r -= w;
    }
    std::vector<Block> others(remaining.begin() + 1, remaining.end());
    rng.shuffle(others);
    std::vector<Block> stack{remaining.front()};
    stack.insert(stack.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1));
    rng.shuffle(stack);
    std::vector<Block> rest(others.begin() + static_cast<std::ptrdiff_t>(k - 1), others.end());
    std::sort(rest.begin(), rest.end());
    stacks.push_back(std::move(stack));
    remaining = std::move(rest);
  }
  return BlockState::make(std::move(stacks));
}

std::string render_state(const BlockState& state) {
  std::string out;
  for (const auto& st : state.stacks) {
    for (std::size_t i = 0; i < st.size(); ++i) {
      if (i) out += ',';
      out += st[i];
    }
    out += '|';
  }
  out += "hand:";
  if (state.holding) {
    out += *state.holding;
  } else {
    out += "empty";
  }
  return out;
}

std::string render_step(const BlockAction& a) {
  using K = BlockAction::Kind;
  switch (a.kind) {
    case K::PickUp: return std::string("pick up ") + a.subject;
    case K::PutDown: return std::string("put down ") + a.subject;
    case K::Unstack: return std::string("unstack ") + a.subject + " from " + a.target.value_or('?');
    case K::Stack: return std::string("stack ") + a.subject + " on " + a.target.value_or('?');
  }
  return {};
}

BlockState parse_block_state(std::string_view text) {
  auto parts = detail::split(text, '|');
  const std::string_view hand = parts.back();
  if (!hand.starts_with("hand:")) {
    throw Error(ErrorCode::InvalidArgument, "block state lacks hand: field");
  }
  std::optional<Block> holding;
  const auto held = hand.substr(5);
  if (held != "empty") {
    if (held.size() != 1) throw Error(ErrorCode::InvalidArgument, "bad hand field");
    holding = held[0];
  }
  std::vector<std::vector<Block>> stacks;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    std::vector<Block> st;
    for (auto b : detail::split(parts[i], ',')) {
      if (b.size() != 1) throw Error(ErrorCode::InvalidArgument, "bad block id in stack");
      st.push_back(b[0]);
    }
    stacks.push_back(std::move(st));
  }
  return BlockState::make(std::move(stacks), holding);
}

BlockAction parse_block_action(std::string_view text) {
  auto w = detail::split(text, ' ');
  auto block = [&](std::string_view s) {
    if (s.size() != 1 || !valid_block(s[0])) {
      throw Error(ErrorCode::InvalidArgument, "bad block id in step: " + std::string(text));
    }
    return s[0];
  };
  if (w.size() == 3 && w[0] == "pick" && w[1] == "up") return BlockAction::pick_up(block(w[2]));
  if (w.size() == 3 && w[0] == "put" && w[1] == "down") return BlockAction::put_down(block(w[2]));
  if (w.size() == 4 && w[0] == "unstack" && w[2] == "from") {
    return BlockAction::unstack(block(w[1]), block(w[3]));
  }
  if (w.size() == 4 && w[0] == "stack" && w[2] == "on") {
    return BlockAction::stack(block(w[1]), block(w[3]));
  }
  throw Error(ErrorCode::InvalidArgument, "not a blocksworld step: " + std::string(text));
}

}  // namespace itelab
