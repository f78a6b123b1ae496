#include <algorithm>
#include <functional>

#include "itelab/error.hpp"
#include "itelab/planning.hpp"
#include "text_util.hpp"

namespace itelab {

HanoiState HanoiState::make(std::vector<std::vector<int>> rods) {
  std::vector<int> seen;
  for (const auto& rod : rods) {
    for (std::size_t i = 0; i < rod.size(); ++i) {
      if (i > 0 && rod[i] >= rod[i - 1]) {
        throw Error(ErrorCode::InvalidArgument, "placement rule violated: larger disk on smaller");
      }
      seen.push_back(rod[i]);
    }
  }
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != static_cast<int>(i) + 1) {
      throw Error(ErrorCode::InvalidArgument, "disks must be exactly 1..n");
    }
  }
  if (rods.size() < 3) throw Error(ErrorCode::InvalidArgument, "at least 3 rods required");
  return HanoiState{std::move(rods)};
}

HanoiState HanoiState::tower(int n_disks, std::size_t n_rods, std::size_t rod) {
  std::vector<std::vector<int>> rods(n_rods);
  for (int d = n_disks; d >= 1; --d) rods.at(rod).push_back(d);
  return make(std::move(rods));
}

int HanoiState::n_disks() const noexcept {
  std::size_t n = 0;
  for (const auto& r : rods) n += r.size();
  return static_cast<int>(n);
}

std::vector<std::size_t> HanoiState::rod_of() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(n_disks()));
  for (std::size_t r = 0; r < rods.size(); ++r) {
    for (int d : rods[r]) out[static_cast<std::size_t>(d - 1)] = r;
  }
  return out;
}

HanoiState hanoi_apply(const HanoiState& state, const HanoiMove& mv) {
  if (mv.from_rod == mv.to_rod || mv.from_rod >= state.n_rods() || mv.to_rod >= state.n_rods()) {
    throw Error(ErrorCode::InvalidArgument, "malformed hanoi move");
  }
  const auto& from = state.rods[mv.from_rod];
  const auto& to = state.rods[mv.to_rod];
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::IllegalMove, "illegal move '" + render_step(mv) + "': " + why);
  };
  if (from.empty()) fail("source rod is empty");
  const int disk = from.back();
  if (mv.disk != 0 && mv.disk != disk) fail("named disk is not on top of the source rod");
  if (!to.empty() && to.back() < disk) fail("larger disk onto smaller disk");
  HanoiState next = state;
  next.rods[mv.from_rod].pop_back();
  next.rods[mv.to_rod].push_back(disk);
  return next;
}

std::vector<HanoiMove> hanoi_legal_moves(const HanoiState& state) {
  std::vector<HanoiMove> out;
  for (std::size_t a = 0; a < state.n_rods(); ++a) {
    if (state.rods[a].empty()) continue;
    const int disk = state.rods[a].back();
    for (std::size_t b = 0; b < state.n_rods(); ++b) {
      if (a == b) continue;
      if (!state.rods[b].empty() && state.rods[b].back() < disk) continue;
      out.push_back({a, b, disk});
    }
  }
  return out;
}

namespace {

// Moves needed to gather disks 1..k of `rod_of` onto `target` as a tower.
unsigned long long tower_cost(const std::vector<std::size_t>& rod_of, int k, std::size_t target) {
  unsigned long long cost = 0;
  for (int d = k; d >= 1; --d) {
    const std::size_t r = rod_of[static_cast<std::size_t>(d - 1)];
    if (r != target) {
      cost += 1ULL << (d - 1);  // this disk plus re-stacking the d-1 smaller ones
      target = 3 - r - target;
    }
  }
  return cost;
}

class Planner {
 public:
  explicit Planner(std::vector<std::size_t> rod_of) : pos_(std::move(rod_of)) {}

  // Stack disks 1..k onto `target` (classical recursion).
  void gather(int k, std::size_t target) {
    if (k == 0) return;
    const std::size_t r = at(k);
    if (r == target) {
      gather(k - 1, target);
      return;
    }
    gather(k - 1, 3 - r - target);
    move(k, target);
    gather(k - 1, target);
  }

  // Bring disks 1..k to `goal`, assuming larger disks are already in place.
  void place(int k, const std::vector<std::size_t>& goal) {
    for (; k >= 1; --k) {
      const std::size_t r = at(k);
      const std::size_t g = goal[static_cast<std::size_t>(k - 1)];
      if (r == g) continue;
      gather(k - 1, 3 - r - g);
      move(k, g);
    }
  }

  void move(int disk, std::size_t to) {
    moves_.push_back({at(disk), to, disk});
    pos_[static_cast<std::size_t>(disk - 1)] = to;
  }

  std::size_t at(int disk) const { return pos_[static_cast<std::size_t>(disk - 1)]; }
  const std::vector<std::size_t>& positions() const { return pos_; }
  std::vector<HanoiMove> take() { return std::move(moves_); }

 private:
  std::vector<std::size_t> pos_;
  std::vector<HanoiMove> moves_;
};

}  // namespace

std::vector<HanoiMove> hanoi_solve(const HanoiState& init, const HanoiState& goal) {
  if (init.n_rods() != 3 || goal.n_rods() != 3) {
    throw Error(ErrorCode::InvalidArgument, "hanoi_solve supports exactly 3 rods");
  }
  if (init.n_disks() != goal.n_disks()) {
    throw Error(ErrorCode::InvalidArgument, "init and goal hold different disk sets");
  }
  const auto goal_pos = goal.rod_of();
  Planner plan(init.rod_of());

  int k = init.n_disks();
  while (k >= 1 && plan.at(k) == goal_pos[static_cast<std::size_t>(k - 1)]) --k;
  if (k == 0) return {};

  const std::size_t a = plan.at(k);
  const std::size_t b = goal_pos[static_cast<std::size_t>(k - 1)];
  const std::size_t c = 3 - a - b;
  // Largest mismatched disk moves once (a->b, smaller disks parked on c) or
  // twice (a->c->b, smaller disks shuttled b->a in between).
  const auto once = tower_cost(plan.positions(), k - 1, c) + 1 + tower_cost(goal_pos, k - 1, c);
  const auto twice = tower_cost(plan.positions(), k - 1, b) + 2 + ((1ULL << (k - 1)) - 1) +
                     tower_cost(goal_pos, k - 1, a);
  if (once <= twice) {
    plan.gather(k - 1, c);
    plan.move(k, b);
  } else {
    plan.gather(k - 1, b);
    plan.move(k, c);
    plan.gather(k - 1, a);
    plan.move(k, b);
  }
  plan.place(k - 1, goal_pos);
  return plan.take();
}

HanoiState hanoi_random_state(int n_disks, std::size_t n_rods, Rng& rng) {
  if (n_disks < 1) throw Error(ErrorCode::InvalidArgument, "n_disks must be >= 1");
  if (n_rods < 3) throw Error(ErrorCode::InvalidArgument, "n_rods must be >= 3");
  std::vector<std::vector<int>> rods(n_rods);
  std::vector<std::size_t> where(static_cast<std::size_t>(n_disks));
  for (auto& w : where) w = rng.below(n_rods);
  for (int d = n_disks; d >= 1; --d) rods[where[static_cast<std::size_t>(d - 1)]].push_back(d);
  return HanoiState::make(std::move(rods));
}

std::string render_state(const HanoiState& state) {
  std::string out;
  for (std::size_t r = 0; r < state.rods.size(); ++r) {
    if (r) out += ';';
    out += "rod" + std::to_string(r) + ":[";
    for (std::size_t i = 0; i < state.rods[r].size(); ++i) {
      if (i) out += ',';
      out += std::to_string(state.rods[r][i]);
    }
    out += ']';
  }
  return out;
}

std::string render_step(const HanoiMove& mv) {
  return "move disk " + std::to_string(mv.disk) + " from rod " + std::to_string(mv.from_rod) +
         " to rod " + std::to_string(mv.to_rod);
}

HanoiState parse_hanoi_state(std::string_view text) {
  std::vector<std::vector<int>> rods;
  for (auto part : detail::split(text, ';')) {
    const std::string prefix = "rod" + std::to_string(rods.size()) + ":[";
    if (!part.starts_with(prefix) || !part.ends_with("]")) {
      throw Error(ErrorCode::InvalidArgument, "bad hanoi rod: " + std::string(part));
    }
    auto body = part.substr(prefix.size(), part.size() - prefix.size() - 1);
    std::vector<int> rod;
    if (!body.empty()) {
      for (auto d : detail::split(body, ',')) {
        auto v = detail::parse_int<int>(d);
        if (!v) throw Error(ErrorCode::InvalidArgument, "bad disk in hanoi state");
        rod.push_back(*v);
      }
    }
    rods.push_back(std::move(rod));
  }
  return HanoiState::make(std::move(rods));
}

HanoiMove parse_hanoi_move(std::string_view text) {
  auto w = detail::split(text, ' ');
  if (w.size() != 9 || w[0] != "move" || w[1] != "disk" || w[3] != "from" || w[4] != "rod" ||
      w[6] != "to" || w[7] != "rod") {
    throw Error(ErrorCode::InvalidArgument, "not a hanoi step: " + std::string(text));
  }
  auto disk = detail::parse_int<int>(w[2]);
  auto from = detail::parse_int<std::size_t>(w[5]);
  auto to = detail::parse_int<std::size_t>(w[8]);
  if (!disk || !from || !to || *disk < 1 || *from == *to) {
    throw Error(ErrorCode::InvalidArgument, "bad hanoi step arguments: " + std::string(text));
  }
  return {*from, *to, *disk};
}

}  // namespace itelab
