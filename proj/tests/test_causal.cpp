#include <cmath>
#include <map>

#include "doctest.h"
#include "itelab/causal.hpp"
#include "itelab/error.hpp"
#include "itelab/model.hpp"

using namespace itelab;

namespace {

// Two-token vocabulary {0, 1}: P(1 | context) depends on the last token.
class LastTokenScorer : public NextTokenScorer {
 public:
  LastTokenScorer(double after0, double after1) : p_{after0, after1} {}
  std::vector<double> next_token_distribution(std::span<const int> ctx) const override {
    const double q = p_[ctx.back()];
    return {1 - q, q};
  }

 private:
  double p_[2];
};

// Emits the target token (1) with certainty iff the step token equals `factual`.
class GateScorer : public NextTokenScorer {
 public:
  std::vector<double> next_token_distribution(std::span<const int> ctx) const override {
    const bool treated = ctx.size() >= 2 && ctx[ctx.size() - 1] == 3;
    return treated ? std::vector<double>{0, 1, 0, 0} : std::vector<double>{0.5, 0, 0.25, 0.25};
  }
};

class ConstantScorer : public NextTokenScorer {
 public:
  std::vector<double> next_token_distribution(std::span<const int>) const override {
    return {0.1, 0.2, 0.3, 0.4};
  }
};

class MixtureScorer : public NextTokenScorer {
 public:
  MixtureScorer(const NextTokenScorer& a, const NextTokenScorer& b, double lambda) : a_(a), b_(b), l_(lambda) {}
  std::vector<double> next_token_distribution(std::span<const int> ctx) const override {
    auto x = a_.next_token_distribution(ctx);
    auto y = b_.next_token_distribution(ctx);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = l_ * x[i] + (1 - l_) * y[i];
    return x;
  }

 private:
  const NextTokenScorer& a_;
  const NextTokenScorer& b_;
  double l_;
};

Sample hanoi_sample() {
  return Sample::solved(HanoiState::tower(3, 3, 0), HanoiState::tower(3, 3, 2));
}

}  // namespace

TEST_CASE("corruption strategies") {
  Rng rng(1);
  const auto alphabet = step_alphabet(HanoiState::tower(3, 3, 0));
  CHECK(corrupt_step(Domain::Hanoi, "move disk 1 from rod 0 to rod 1", alphabet, rng,
                     CorruptionStrategy::SwapArgument) == "move disk 1 from rod 1 to rod 0");
  for (int i = 0; i < 10000; ++i) {
    const auto& step = alphabet[rng.below(alphabet.size())];
    for (auto s : {CorruptionStrategy::SwapArgument, CorruptionStrategy::RandomLegalAction,
                   CorruptionStrategy::ShuffleTokens}) {
      const auto c = corrupt_step(Domain::Hanoi, step, alphabet, rng, s);
      REQUIRE(c != step);
      REQUIRE(std::find(alphabet.begin(), alphabet.end(), c) != alphabet.end());
    }
  }

  const auto bw = step_alphabet(BlockState::make({{'A'}, {'B'}}));
  CHECK(corrupt_step(Domain::Blocksworld, "stack A on B", bw, rng, CorruptionStrategy::SwapArgument) ==
        "stack B on A");
  CHECK(corrupt_step(Domain::Blocksworld, "pick up A", bw, rng, CorruptionStrategy::SwapArgument) ==
        "put down A");
  CHECK(corrupt_step(Domain::Blocksworld, "unstack A from B", bw, rng, CorruptionStrategy::ShuffleTokens) ==
        "unstack B from A");
  try {
    corrupt_step(Domain::Blocksworld, "pick up A", bw, rng, CorruptionStrategy::ShuffleTokens);
    FAIL("expected NoCorruptionPossible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoCorruptionPossible);
  }
  const std::vector<std::string> single{"pick up A"};
  CHECK_THROWS_AS(corrupt_step(Domain::Blocksworld, "pick up A", single, rng,
                               CorruptionStrategy::RandomLegalAction),
                  Error);

  Rng a(5), b(5);
  CHECK(corrupt_step(Domain::Hanoi, alphabet[3], alphabet, a, CorruptionStrategy::RandomLegalAction) ==
        corrupt_step(Domain::Hanoi, alphabet[3], alphabet, b, CorruptionStrategy::RandomLegalAction));
}

TEST_CASE("counterfactual pairs encode and keep their whitespace") {
  const auto s = hanoi_sample();
  const std::vector<Sample> corpus{s};
  const auto codec = Codec::build(corpus);
  Rng rng(2);
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    for (auto strat : {CorruptionStrategy::SwapArgument, CorruptionStrategy::RandomLegalAction,
                       CorruptionStrategy::ShuffleTokens}) {
      const auto pair = make_counterfactual(codec, s, i, rng, strat);
      CHECK(pair.factual != pair.corrupted);
      CHECK(pair.factual.front() == pair.corrupted.front());
      auto seq = pair.context;
      seq.insert(seq.end(), pair.factual.begin(), pair.factual.end());
      seq.insert(seq.end(), pair.target.begin(), pair.target.end());
      const auto full = codec.training_sequence(s);
      CHECK(std::equal(seq.begin(), seq.end(), full.begin()));
    }
  }
  CHECK(make_counterfactual(codec, s, s.steps.size() - 1, rng, CorruptionStrategy::SwapArgument).target ==
        std::vector<int>{Codec::kEos});
  CHECK(draw_pairs(codec, corpus, 12, rng, CorruptionStrategy::SwapArgument).size() == 12);
}

TEST_CASE("estimate_ite closed forms") {
  // step-blind scorer
  ConstantScorer flat;
  CounterfactualPair pair{{0}, {3}, {2}, {1, 2}};
  CHECK(estimate_ite(flat, pair).ite == 0.0);

  GateScorer gate;
  const auto g = estimate_ite(gate, CounterfactualPair{{0}, {3}, {2}, {1}});
  CHECK(g.y1 == 1.0);
  CHECK(g.y0 == 0.0);
  CHECK(g.ite == 1.0);

  // y(step) = prod over target tokens of P(t | last token)
  LastTokenScorer two(0.3, 0.8);
  const CounterfactualPair p2{{0, 1}, {1}, {0}, {1, 0, 1}};
  const double y1 = 0.8 * (1 - 0.8) * 0.3;
  const double y0 = 0.3 * (1 - 0.8) * 0.3;
  const auto e = estimate_ite(two, p2);
  CHECK(std::abs(e.y1 - y1) < 1e-12);
  CHECK(std::abs(e.y0 - y0) < 1e-12);
  CHECK(std::abs(e.ite - (y1 - y0)) < 1e-12);

  // outcome-level mixture is linear in ite
  LastTokenScorer other(0.6, 0.1);
  const double lambda = 0.35;
  MixtureScorer mix(two, other, lambda);
  const CounterfactualPair p1{{0}, {1}, {0}, {1}};
  const double want = lambda * estimate_ite(two, p1).ite + (1 - lambda) * estimate_ite(other, p1).ite;
  CHECK(std::abs(estimate_ite(mix, p1).ite - want) < 1e-12);
}

TEST_CASE("model scorer agrees with span log-probs") {
  ModelConfig c;
  c.vocab_size = 6;
  c.context_window = 12;
  const auto p = init_params(c, 3);
  ModelScorer scorer(p);
  const CounterfactualPair pair{{1, 4, 5}, {3, 3}, {3, 4}, {5, 2}};
  const auto e = estimate_ite(scorer, pair);
  const double lp1 = span_log_prob(p, {{1, 4, 5, 3, 3, 5, 2}, 5});
  const double lp0 = span_log_prob(p, {{1, 4, 5, 3, 4, 5, 2}, 5});
  CHECK(std::abs(e.y1 - std::exp(lp1)) < 1e-12);
  CHECK(std::abs(e.y0 - std::exp(lp0)) < 1e-12);
}

TEST_CASE("aggregate arithmetic") {
  const auto a = aggregate(std::vector<double>{1, 1, 1});
  CHECK(a.mean == 1.0);
  CHECK(a.var == 0.0);
  const auto b = aggregate(std::vector<double>{1, 0});
  CHECK(b.mean == 0.5);
  CHECK(b.var == 0.5);
  const auto c = aggregate(std::vector<double>{0.2, -0.2});
  CHECK(std::abs(c.mean) < 1e-15);
  CHECK(c.abs_mean == std::abs(c.mean));
  CHECK(std::abs(c.var - 0.08) < 1e-15);
  try {
    aggregate(std::vector<double>{1});
    FAIL("expected InsufficientSamples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientSamples);
  }
}

TEST_CASE("binary and repeated modes") {
  GateScorer gate;
  Rng rng(3);
  const CounterfactualPair pair{{0}, {3}, {2}, {1}};
  for (int i = 0; i < 100; ++i) CHECK(estimate_ite_binary(gate, pair, rng).ite == 1.0);
  const auto r = repeated_ite(gate, pair, 50, rng);
  CHECK(r.mean == 1.0);
  CHECK(r.var == 0.0);

  LastTokenScorer half(0.5, 0.5);
  const auto h = repeated_ite(half, CounterfactualPair{{0}, {1}, {0}, {1}}, 20000, rng);
  CHECK(std::abs(h.mean) < 5 * std::sqrt(0.5 / 20000));
  CHECK(std::abs(h.var - 0.5) < 0.03);
}

TEST_CASE("scenario corners") {
  auto est = [](double mean, double var) {
    ITEEstimate e;
    e.mean = mean;
    e.abs_mean = std::abs(mean);
    e.var = var;
    e.n = 10;
    return e;
  };
  CHECK(classify_scenario(est(0.9, 0.01), 0.5, 0.05) == Scenario::C);
  CHECK(classify_scenario(est(0.1, 0.01), 0.5, 0.05) == Scenario::A);
  CHECK(classify_scenario(est(0.9, 0.5), 0.5, 0.05) == Scenario::B);
  CHECK(classify_scenario(est(0.1, 0.5), 0.5, 0.05) == Scenario::Weak);
  CHECK(classify_scenario(est(-0.9, 0.01), 0.5, 0.05) == Scenario::C);

  // permutation invariance
  std::vector<double> v{0.3, -0.1, 0.7, 0.05, 0.2};
  const auto e1 = aggregate(v);
  std::reverse(v.begin(), v.end());
  const auto e2 = aggregate(v);
  CHECK(classify_scenario(e1) == classify_scenario(e2));
  CHECK(std::abs(e1.var - e2.var) < 1e-15);
}

TEST_CASE("contingency audit") {
  const std::vector<PQRecord> ok(5, PQRecord{true, true});
  CHECK(audit_contingency(ok).hallucination_rate() == 0.0);
  const std::vector<PQRecord> mixed{{false, true}, {true, false}};
  CHECK(audit_contingency(mixed).hallucination_rate() == 1.0);
  CHECK_THROWS_AS(audit_contingency(std::vector<PQRecord>{}), Error);

  Rng rng(8);
  std::vector<PQRecord> coin;
  for (int i = 0; i < 1000; ++i) coin.push_back({rng.below(2) == 1, rng.below(2) == 1});
  const auto t = audit_contingency(coin);
  CHECK(std::abs(t.hallucination_rate() - 0.5) < 5 * std::sqrt(0.25 / 1000));
  double sum = 0;
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) sum += t.rate(p, q);
  CHECK(std::abs(sum - 1.0) < 1e-12);
  const auto csv = contingency_csv(t);
  CHECK(csv.starts_with("P,Q,count\n0,0,"));
  CHECK(csv.find("\nhallucination,") != std::string::npos);
}

TEST_CASE("audit_pathway records") {
  const auto init = HanoiState::tower(2, 3, 0);
  const auto goal = HanoiState::tower(2, 3, 2);
  const auto steps = render_steps(hanoi_solve(init, goal));
  for (const auto& r : audit_pathway(Domain::Hanoi, init, goal, steps)) {
    CHECK(r.p);
    CHECK(r.q);
  }
  // an illegal middle step: its predecessor's transition is flagged, the
  // step itself is P=0, and the state does not move
  const std::vector<std::string> bad{steps[0], "move disk 2 from rod 0 to rod 1", steps[1], steps[2]};
  const auto recs = audit_pathway(Domain::Hanoi, init, goal, bad);
  CHECK(recs[0].p);
  CHECK(!recs[0].q);
  CHECK(!recs[1].p);
  CHECK(recs[1].q);
  CHECK(recs[3].q);
}
