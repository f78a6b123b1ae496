#include "itelab/causal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "itelab/error.hpp"
#include "text_util.hpp"

namespace itelab {

std::string_view corruption_name(CorruptionStrategy s) noexcept {
  switch (s) {
    case CorruptionStrategy::SwapArgument: return "swap-argument";
    case CorruptionStrategy::RandomLegalAction: return "random-legal-action";
    case CorruptionStrategy::ShuffleTokens: return "shuffle-tokens";
  }
  return "?";
}

CorruptionStrategy parse_corruption(std::string_view text) {
  for (auto s : {CorruptionStrategy::SwapArgument, CorruptionStrategy::RandomLegalAction,
                 CorruptionStrategy::ShuffleTokens}) {
    if (text == corruption_name(s)) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown corruption strategy '" + std::string(text) + "'");
}

namespace {

[[noreturn]] void no_corruption(const std::string& step, const char* why) {
  throw Error(ErrorCode::NoCorruptionPossible, "cannot corrupt '" + step + "': " + why);
}

bool is_argument(std::string_view w) {
  if (w.empty()) return false;
  if (w.size() == 1 && std::isupper(static_cast<unsigned char>(w[0]))) return true;
  return std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::string swap_argument(Domain domain, const std::string& step) {
  if (domain == Domain::Hanoi) {
    auto mv = parse_hanoi_move(step);
    std::swap(mv.from_rod, mv.to_rod);
    return render_step(mv);
  }
  auto a = parse_block_action(step);
  using K = BlockAction::Kind;
  switch (a.kind) {
    case K::PickUp: return render_step(BlockAction::put_down(a.subject));
    case K::PutDown: return render_step(BlockAction::pick_up(a.subject));
    case K::Unstack: return render_step(BlockAction::unstack(*a.target, a.subject));
    case K::Stack: return render_step(BlockAction::stack(*a.target, a.subject));
  }
  return step;
}

// Every distinct arrangement of the step's argument words that is still in
// the alphabet and differs from the step.
std::vector<std::string> shuffled_variants(const std::string& step,
                                           const std::vector<std::string>& alphabet) {
  auto words = detail::split(step, ' ');
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (is_argument(words[i])) slots.push_back(i);
  }
  std::vector<std::string_view> args;
  for (auto i : slots) args.push_back(words[i]);
  std::sort(args.begin(), args.end());
  std::vector<std::string> out;
  do {
    auto w = words;
    for (std::size_t k = 0; k < slots.size(); ++k) w[slots[k]] = args[k];
    auto text = detail::join(w, " ");
    if (text != step && std::find(alphabet.begin(), alphabet.end(), text) != alphabet.end() &&
        std::find(out.begin(), out.end(), text) == out.end()) {
      out.push_back(std::move(text));
    }
  } while (std::next_permutation(args.begin(), args.end()));
  return out;
}

}  // namespace

std::string corrupt_step(Domain domain, const std::string& step,
                         const std::vector<std::string>& alphabet, Rng& rng,
                         CorruptionStrategy strategy) {
  switch (strategy) {
    case CorruptionStrategy::SwapArgument: return swap_argument(domain, step);
    case CorruptionStrategy::RandomLegalAction: {
      std::vector<const std::string*> others;
      for (const auto& a : alphabet) {
        if (a != step) others.push_back(&a);
      }
      if (others.empty()) no_corruption(step, "the step alphabet has no other action");
      return *others[rng.below(others.size())];
    }
    case CorruptionStrategy::ShuffleTokens: {
      const auto variants = shuffled_variants(step, alphabet);
      if (variants.empty()) no_corruption(step, "no other arrangement of its arguments is well-formed");
      return variants[rng.below(variants.size())];
    }
  }
  return step;
}

std::vector<int> corrupt_step(const Codec& codec, Domain domain, std::span<const int> step_tokens,
                              const std::vector<std::string>& alphabet, Rng& rng,
                              CorruptionStrategy strategy) {
  const auto text = codec.decode(step_tokens);
  const auto open = text.find('<');
  const auto close = text.rfind('>');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(ErrorCode::MalformedPathway, "step tokens do not hold a bracketed step");
  }
  const auto inner = text.substr(open + 1, close - open - 1);
  const auto changed = corrupt_step(domain, inner, alphabet, rng, strategy);
  return codec.encode(text.substr(0, open) + "<" + changed + ">");
}

CounterfactualPair make_counterfactual(const Codec& codec, const Sample& s, std::size_t index,
                                       Rng& rng, CorruptionStrategy strategy) {
  if (index >= s.steps.size()) throw Error(ErrorCode::InvalidArgument, "step index out of range");
  std::string prefix = render_test_prompt(s) + " ####";
  if (index > 0) {
    prefix += ' ';
    prefix += render_pathway({s.steps.begin(), s.steps.begin() + static_cast<std::ptrdiff_t>(index)});
  }
  CounterfactualPair pair;
  pair.context.push_back(Codec::kBos);
  const auto body = codec.encode(prefix);
  pair.context.insert(pair.context.end(), body.begin(), body.end());
  pair.factual = codec.encode((index == 0 ? " <" : "<") + s.steps[index] + ">");
  const auto alphabet = step_alphabet(parse_state(s.domain, s.init_text));
  pair.corrupted = corrupt_step(codec, s.domain, pair.factual, alphabet, rng, strategy);
  if (index + 1 < s.steps.size()) {
    pair.target = codec.encode("<" + s.steps[index + 1] + ">");
  } else {
    pair.target = {Codec::kEos};
  }
  return pair;
}

std::vector<CounterfactualPair> draw_pairs(const Codec& codec, std::span<const Sample> samples,
                                           std::size_t count, Rng& rng,
                                           CorruptionStrategy strategy) {
  if (count > 0 && samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples to draw pairs from");
  std::vector<CounterfactualPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& s = samples[rng.below(samples.size())];
    if (s.steps.empty()) throw Error(ErrorCode::InvalidArgument, "sample without steps");
    const auto index = rng.below(s.steps.size());
    out.push_back(make_counterfactual(codec, s, index, rng, strategy));
  }
  return out;
}

double outcome_probability(const NextTokenScorer& scorer, std::span<const int> context,
                           std::span<const int> step, std::span<const int> target) {
  std::vector<int> seq(context.begin(), context.end());
  seq.insert(seq.end(), step.begin(), step.end());
  double y = 1.0;
  for (int t : target) {
    const auto dist = scorer.next_token_distribution(seq);
    y *= dist.at(static_cast<std::size_t>(t));
    seq.push_back(t);
  }
  return y;
}

ITESample estimate_ite(const NextTokenScorer& scorer, const CounterfactualPair& pair) {
  ITESample s;
  s.y1 = outcome_probability(scorer, pair.context, pair.factual, pair.target);
  s.y0 = outcome_probability(scorer, pair.context, pair.corrupted, pair.target);
  s.ite = s.y1 - s.y0;
  return s;
}

ITESample estimate_ite_binary(const NextTokenScorer& scorer, const CounterfactualPair& pair,
                              Rng& rng) {
  const auto p = estimate_ite(scorer, pair);
  ITESample s;
  s.y1 = rng.unit() < p.y1 ? 1.0 : 0.0;
  s.y0 = rng.unit() < p.y0 ? 1.0 : 0.0;
  s.ite = s.y1 - s.y0;
  return s;
}

ITEEstimate aggregate(std::span<const double> ites) {
  if (ites.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples,
                "variance needs at least 2 ITE samples, got " + std::to_string(ites.size()));
  }
  ITEEstimate e;
  e.n = ites.size();
  double sum = 0;
  for (double x : ites) sum += x;
  e.mean = sum / static_cast<double>(e.n);
  e.abs_mean = std::abs(e.mean);
  double ss = 0;
  for (double x : ites) ss += (x - e.mean) * (x - e.mean);
  e.var = ss / static_cast<double>(e.n - 1);
  return e;
}

ITEEstimate aggregate(std::span<const ITESample> samples) {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.ite);
  return aggregate(v);
}

ITEEstimate repeated_ite(const NextTokenScorer& scorer, const CounterfactualPair& pair,
                         std::size_t repetitions, Rng& rng) {
  const auto p = estimate_ite(scorer, pair);
  std::vector<double> v;
  for (std::size_t i = 0; i < repetitions; ++i) {
    const double y1 = rng.unit() < p.y1 ? 1.0 : 0.0;
    const double y0 = rng.unit() < p.y0 ? 1.0 : 0.0;
    v.push_back(y1 - y0);
  }
  return aggregate(v);
}

std::string_view scenario_name(Scenario s) noexcept {
  switch (s) {
    case Scenario::A: return "A";
    case Scenario::B: return "B";
    case Scenario::C: return "C";
    case Scenario::Weak: return "Weak";
  }
  return "?";
}

Scenario classify_scenario(const ITEEstimate& est, double tau_mu, double tau_sigma) {
  const bool strong = est.abs_mean >= tau_mu;
  const bool consistent = est.var <= tau_sigma;
  if (strong && consistent) return Scenario::C;
  if (consistent) return Scenario::A;
  if (strong) return Scenario::B;
  return Scenario::Weak;
}

double ContingencyTable::rate(bool p, bool q) const noexcept {
  const auto t = total();
  return t ? static_cast<double>(n[p][q]) / static_cast<double>(t) : 0.0;
}

double ContingencyTable::hallucination_rate() const noexcept { return rate(false, true) + rate(true, false); }

ContingencyTable audit_contingency(std::span<const PQRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no (P, Q) records to audit");
  ContingencyTable t;
  for (const auto& r : records) ++t.n[r.p][r.q];
  return t;
}

std::string contingency_csv(const ContingencyTable& t) {
  std::string out = "P,Q,count\n";
  for (int p = 0; p < 2; ++p) {
    for (int q = 0; q < 2; ++q) {
      out += std::to_string(p) + "," + std::to_string(q) + "," + std::to_string(t.n[p][q]) + "\n";
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", t.hallucination_rate());
  out += "hallucination," + std::string(buf) + "," + std::to_string(t.n[0][1] + t.n[1][0]) + "\n";
  return out;
}

namespace {

// The state after `step`, or nothing when it does not parse or apply.
std::optional<PlanningState> try_step(Domain domain, const PlanningState& state,
                                      const std::string& step) {
  try {
    const auto path = parse_steps(domain, {step});
    return apply_step(state, path, 0);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<PQRecord> audit_pathway(Domain domain, const PlanningState& init,
                                    const PlanningState& goal,
                                    const std::vector<std::string>& steps) {
  std::vector<PQRecord> out;
  PlanningState state = init;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    PQRecord r;
    if (auto next = try_step(domain, state, steps[i])) {
      r.p = true;
      state = std::move(*next);
    }
    r.q = i + 1 < steps.size() ? try_step(domain, state, steps[i + 1]).has_value() : state == goal;
    out.push_back(r);
  }
  return out;
}

}  // namespace itelab
