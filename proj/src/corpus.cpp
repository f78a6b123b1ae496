#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "itelab/corpus.hpp"
#include "itelab/error.hpp"

namespace itelab {

Sample Sample::solved(const PlanningState& init, const PlanningState& goal) {
  Sample s;
  s.domain = domain_of(init);
  s.init_text = render_state(init);
  s.goal_text = render_state(goal);
  s.steps = render_steps(solve(init, goal));
  s.n_steps = s.steps.size();
  return s;
}

Verdict validate_sample(const Sample& s) {
  const auto init = parse_state(s.domain, s.init_text);
  const auto goal = parse_state(s.domain, s.goal_text);
  return validate_pathway(s.domain, init, goal, parse_steps(s.domain, s.steps));
}

std::string render_pathway(const std::vector<std::string>& steps) {
  std::string out;
  for (const auto& st : steps) {
    out += '<';
    out += st;
    out += '>';
  }
  return out;
}

std::string render_test_prompt(const Sample& s) { return s.init_text + " || " + s.goal_text; }

std::string render_training_prompt(const Sample& s) {
  return render_test_prompt(s) + " #### " + render_pathway(s.steps);
}

std::vector<std::string> parse_pathway(std::string_view text) {
  const auto mark = text.find("####");
  if (mark == std::string_view::npos) return {};
  std::string_view rest = text.substr(mark + 4);
  std::vector<std::string> steps;
  std::size_t i = 0;
  auto malformed = [&](const char* why) {
    throw Error(ErrorCode::MalformedPathway, std::string(why) + " in pathway '" + std::string(rest) + "'");
  };
  while (i < rest.size()) {
    const char c = rest[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if (c != '<') malformed(c == '>' ? "unbalanced '>'" : "text outside step brackets");
    const auto close = rest.find_first_of("<>", i + 1);
    if (close == std::string_view::npos || rest[close] != '>') malformed("unbalanced '<'");
    steps.emplace_back(rest.substr(i + 1, close - i - 1));
    i = close + 1;
  }
  return steps;
}

namespace {

void check_config(const GenConfig& cfg) {
  auto invalid = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (cfg.buckets.empty()) invalid("bucket list is empty");
  if (cfg.per_bucket == 0) invalid("samples per bucket must be positive");
  std::set<std::size_t> uniq(cfg.buckets.begin(), cfg.buckets.end());
  if (uniq.size() != cfg.buckets.size()) invalid("duplicate bucket");
  if (uniq.count(0)) invalid("bucket 0 (init == goal) is not a valid bucket");
  if (cfg.objects < 1) invalid("need at least one disk/block");

  if (cfg.domain == Domain::Hanoi) {
    if (cfg.rods != 3) invalid("hanoi generation solves 3-rod instances only");
    if (cfg.objects > 20) invalid("too many disks");
    const unsigned long long longest = (1ULL << cfg.objects) - 1;
    for (auto b : cfg.buckets) {
      if (b > longest) {
        throw Error(ErrorCode::BucketInfeasible,
                    "bucket " + std::to_string(b) + " exceeds 2^" + std::to_string(cfg.objects) +
                        "-1 = " + std::to_string(longest) + " moves");
      }
      if (b % 2 == 0) invalid("hanoi buckets must be odd, got " + std::to_string(b));
    }
  } else {
    if (cfg.objects > 8) invalid("blocksworld generation is limited to 8 blocks");
    for (auto b : cfg.buckets) {
      // hand-empty to hand-empty plans alternate grab/release
      if (b % 2 == 1) {
        throw Error(ErrorCode::BucketInfeasible,
                    "bucket " + std::to_string(b) + " is odd; hand-empty plans have even length");
      }
    }
  }
}

PlanningState random_state(const GenConfig& cfg, Rng& rng) {
  if (cfg.domain == Domain::Hanoi) return hanoi_random_state(cfg.objects, cfg.rods, rng);
  return bw_random_state(static_cast<std::size_t>(cfg.objects), rng);
}

}  // namespace

std::vector<Sample> gen_dataset(const GenConfig& cfg) {
  check_config(cfg);
  Rng rng(derive_seed(cfg.seed, 0x67656e));
  std::map<std::size_t, std::vector<Sample>> filled;
  for (auto b : cfg.buckets) filled[b];

  std::size_t missing = cfg.per_bucket * cfg.buckets.size();
  const std::size_t max_draws = 200000 + 2000 * missing;
  for (std::size_t draw = 0; missing > 0; ++draw) {
    if (draw == max_draws) {
      std::string which;
      for (const auto& [b, v] : filled) {
        if (v.size() < cfg.per_bucket) which += " " + std::to_string(b);
      }
      throw Error(ErrorCode::BucketInfeasible,
                  "no instances found for bucket(s)" + which + " after " +
                      std::to_string(max_draws) + " draws");
    }
    const auto init = random_state(cfg, rng);
    const auto goal = random_state(cfg, rng);
    const auto path = solve(init, goal);
    auto it = filled.find(pathway_length(path));
    if (it == filled.end() || it->second.size() >= cfg.per_bucket) continue;
    Sample s;
    s.domain = cfg.domain;
    s.init_text = render_state(init);
    s.goal_text = render_state(goal);
    s.steps = render_steps(path);
    s.n_steps = s.steps.size();
    it->second.push_back(std::move(s));
    --missing;
  }

  std::vector<Sample> out;
  for (auto b : cfg.buckets) {
    auto& v = filled[b];
    out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<Sample>& samples, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "test fraction must be within [0, 1]");
  }
  std::set<std::pair<std::string, std::string>> seen;
  std::map<std::size_t, std::vector<Sample>> by_bucket;
  for (const auto& s : samples) {
    if (seen.emplace(s.init_text, s.goal_text).second) by_bucket[s.n_steps].push_back(s);
  }
  DatasetSplit split;
  split.seed = seed;
  for (auto& [bucket, group] : by_bucket) {
    Rng rng(derive_seed(seed, bucket));
    rng.shuffle(group);
    const auto n_test =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(group.size())));
    for (std::size_t i = 0; i < group.size(); ++i) {
      (i < n_test ? split.test : split.train).push_back(std::move(group[i]));
    }
  }
  return split;
}

}  // namespace itelab
