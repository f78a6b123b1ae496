// Acceptance suite: one PASS/FAIL line per criterion. Exit status is 0 when
// every criterion passes, or when the only failures are listed with
// --expect-red.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "itelab/error.hpp"
#include "itelab/eval.hpp"
#include "oracles.hpp"
#include "text_util.hpp"

using namespace itelab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<long> histogram(const std::map<std::string, long>& counts) {
  std::vector<long> out;
  for (const auto& [k, c] : counts) out.push_back(c);
  return out;
}

std::vector<Sample> merged(const DatasetSplit& s) {
  auto all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  return all;
}

// ---------------------------------------------------------------------------

Outcome hanoi_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  for (int n = 1; n <= 8; ++n) {
    const auto init = HanoiState::tower(n, 3, 0);
    const auto goal = HanoiState::tower(n, 3, 2);
    const auto path = hanoi_solve(init, goal);
    const std::size_t want = (std::size_t{1} << n) - 1;
    if (path.size() != want) return {false, "n=" + std::to_string(n) + " gave " + std::to_string(path.size())};
    if (!validate_pathway(Domain::Hanoi, init, goal, path).success()) {
      return {false, "n=" + std::to_string(n) + " pathway does not validate"};
    }
  }
  const double t = seconds_since(t0);
  return {t < 1.0, "lengths 2^n-1 for n=1..8 in " + fmt("%.3f s", t)};
}

Outcome solver_optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dist = oracle::hanoi_all_distances(3);
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < dist.size(); ++a) {
    for (std::size_t b = 0; b < dist.size(); ++b) {
      const auto init = oracle::hanoi_state(static_cast<int>(a), 3);
      const auto goal = oracle::hanoi_state(static_cast<int>(b), 3);
      const auto path = hanoi_solve(init, goal);
      if (static_cast<int>(path.size()) != dist[a][b] ||
          !validate_pathway(Domain::Hanoi, init, goal, path).success()) {
        return {false, "pair " + std::to_string(a) + "," + std::to_string(b) + " not optimal"};
      }
      ++pairs;
    }
  }
  const double t = seconds_since(t0);
  return {pairs == 729 && t < 10.0,
          std::to_string(pairs) + " pairs equal to BFS distance in " + fmt("%.3f s", t)};
}

// Legal 3-rod placements of disks 1..n: every ordering of the disks cut into
// three rods, kept when each rod is strictly decreasing bottom to top.
std::size_t enumerate_hanoi_states(int n) {
  std::vector<int> disks(static_cast<std::size_t>(n));
  std::iota(disks.begin(), disks.end(), 1);
  std::size_t legal = 0;
  do {
    for (int c1 = 0; c1 <= n; ++c1) {
      for (int c2 = c1; c2 <= n; ++c2) {
        const int cuts[4] = {0, c1, c2, n};
        bool ok = true;
        for (int r = 0; r < 3 && ok; ++r) {
          for (int i = cuts[r] + 1; i < cuts[r + 1]; ++i) ok = ok && disks[i - 1] > disks[i];
        }
        legal += ok;
      }
    }
  } while (std::next_permutation(disks.begin(), disks.end()));
  return legal;
}

Outcome state_counts() {
  const std::size_t hanoi = enumerate_hanoi_states(3);
  const std::size_t blocks = oracle::bw_configurations(3).size();
  const long draws = 100000;
  std::map<std::string, long> hc, bc;
  Rng rh(31), rb(32);
  for (long i = 0; i < draws; ++i) {
    ++hc[render_state(hanoi_random_state(3, 3, rh))];
    ++bc[render_state(bw_random_state(3, rb))];
  }
  const double zh = hc.size() == 27 ? oracle::max_z(histogram(hc), draws) : 1e9;
  const double zb = bc.size() == 13 ? oracle::max_z(histogram(bc), draws) : 1e9;
  const bool pass = hanoi == 27 && blocks == 13 && bw_configuration_count(3) == 13 && zh < 5 && zb < 5;
  return {pass, std::to_string(hanoi) + " hanoi states, " + std::to_string(blocks) +
                    " block configurations, max |z| " + fmt("%.2f", zh) + " / " + fmt("%.2f", zb) +
                    " over 1e5 draws"};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome dataset_integrity() {
  const auto dir = fs::temp_directory_path() / "itelab_acceptance_data";
  fs::remove_all(dir);
  fs::create_directories(dir);
  GenConfig bw;
  bw.domain = Domain::Blocksworld;
  bw.objects = 4;
  bw.buckets = {2, 4, 6};
  bw.per_bucket = 100;
  bw.seed = 4;
  GenConfig hanoi;
  hanoi.buckets = {3, 5, 7};
  hanoi.per_bucket = 100;
  hanoi.seed = 4;

  std::size_t total = 0;
  for (const auto& g : {bw, hanoi}) {
    const auto samples = gen_dataset(g);
    std::map<std::size_t, std::size_t> per;
    for (const auto& s : samples) {
      if (!validate_sample(s).success()) return {false, "generated sample fails validation"};
      if (s.steps.size() != s.n_steps) return {false, "n_steps disagrees with the pathway"};
      ++per[s.n_steps];
    }
    for (auto b : g.buckets) {
      if (per[b] != g.per_bucket) return {false, "bucket " + std::to_string(b) + " count off"};
    }
    if (per.size() != g.buckets.size()) return {false, "length outside the requested buckets"};
    total += samples.size();

    const auto name = std::string(domain_name(g.domain));
    write_split(dir / (name + "_a"), split_dataset(gen_dataset(g), 0.2, g.seed));
    write_split(dir / (name + "_b"), split_dataset(gen_dataset(g), 0.2, g.seed));
    for (const char* f : {"train.tsv", "test.tsv", "split.txt"}) {
      const auto a = file_bytes(dir / (name + "_a") / f);
      if (a.empty() || a != file_bytes(dir / (name + "_b") / f)) {
        return {false, name + " " + f + " differs between regenerations"};
      }
    }
  }
  fs::remove_all(dir);
  return {true, std::to_string(total) +
                    " samples valid, buckets {2,4,6} and {3,5,7} exact, regenerated files byte-identical"};
}

struct SmallCorpus {
  DatasetSplit split;
  Codec codec;
  ModelConfig model;
};

SmallCorpus small_corpus(std::size_t per_bucket, std::uint64_t seed) {
  GenConfig g;
  g.objects = 2;
  g.buckets = {1, 3};
  g.per_bucket = per_bucket;
  g.seed = seed;
  auto split = split_dataset(gen_dataset(g), 0.0, seed);
  auto codec = Codec::build(split.train);
  ModelConfig m;
  m.vocab_size = codec.size();
  m.context_window = 64;
  m.embed_dim = 6;
  m.hidden_dim = 10;
  m.seed = seed;
  return {std::move(split), std::move(codec), m};
}

Outcome loss_algebra() {
  auto f = small_corpus(10, 5);
  LossConfig lc;
  lc.alpha = 0.3;
  lc.beta = 0.7;
  lc.pairs_per_batch = 6;
  TrainConfig tc;
  tc.epochs = 6;
  tc.lr = 0.2;
  tc.batch_size = 5;
  tc.seed = 11;
  tc.log_path = fs::temp_directory_path() / "itelab_acceptance_log.csv";
  const auto run = train(f.split, f.codec, f.model, lc, tc);

  double worst_total = 0, worst_ppl = 0;
  for (const auto& s : run.report.steps) {
    const auto& l = s.loss;
    worst_total = std::max(worst_total, std::abs(l.total - (l.ce - lc.alpha * l.e_ite_abs + lc.beta * l.var_ite)));
    worst_ppl = std::max(worst_ppl, std::abs(std::log(l.ppl) - l.ce));
  }
  std::ifstream log(tc.log_path);
  std::string line;
  std::getline(log, line);
  std::size_t rows = 0;
  while (std::getline(log, line)) {
    const auto cols = detail::split(line, ',');
    if (cols.size() != 7) return {false, "malformed log row"};
    const double ce = *detail::parse_double(cols[2]), e = *detail::parse_double(cols[3]);
    const double v = *detail::parse_double(cols[4]), total = *detail::parse_double(cols[5]);
    worst_total = std::max(worst_total, std::abs(total - (ce - lc.alpha * e + lc.beta * v)));
    ++rows;
  }
  fs::remove(tc.log_path);

  // zero weights against a run without any pairs
  LossConfig ce_only;
  ce_only.alpha = ce_only.beta = 0;
  ce_only.pairs_per_batch = 0;
  LossConfig zero = ce_only;
  zero.pairs_per_batch = 8;
  TrainConfig plain = tc;
  plain.log_path.clear();
  const auto a = train(f.split, f.codec, f.model, ce_only, plain);
  const auto b = train(f.split, f.codec, f.model, zero, plain);
  bool identical = a.params == b.params && a.report.steps.size() == b.report.steps.size();
  for (std::size_t i = 0; identical && i < a.report.steps.size(); ++i) {
    identical = a.report.steps[i].loss.ce == b.report.steps[i].loss.ce;
  }

  // ln PPL against a token-by-token CE from the forward distributions
  std::vector<std::vector<int>> seqs;
  for (const auto& s : f.split.train) seqs.push_back(f.codec.training_sequence(s));
  double nll = 0;
  std::size_t tokens = 0;
  for (const auto& seq : seqs) {
    for (std::size_t t = 1; t < seq.size(); ++t) {
      const auto dist = forward(run.params, std::span<const int>(seq.data(), t));
      nll -= std::log(dist[static_cast<std::size_t>(seq[t])]);
      ++tokens;
    }
  }
  const double ppl_gap = std::abs(std::log(perplexity(run.params, seqs)) - nll / static_cast<double>(tokens));

  const bool pass = rows == run.report.steps.size() && worst_total < 1e-12 && worst_ppl < 1e-12 &&
                    identical && ppl_gap < 1e-12;
  return {pass, std::to_string(rows) + " logged steps, max |total - combination| " +
                    fmt("%.1e", worst_total) + ", zero-weight run " +
                    (identical ? "bit-identical" : "DIFFERS") + ", |ln PPL - CE| " + fmt("%.1e", ppl_gap)};
}

Outcome gradient_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  auto f = small_corpus(4, 5);
  f.model.embed_dim = 4;
  f.model.hidden_dim = 5;
  const auto p = init_params(f.model, 7);
  Rng rng(3);
  const auto pairs = draw_pairs(f.codec, f.split.train, 6, rng, CorruptionStrategy::SwapArgument);
  std::vector<std::vector<int>> seqs;
  for (const auto& s : f.split.train) seqs.push_back(f.codec.training_sequence(s));
  LossConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 1.3;
  std::vector<double> grad(p.values.size());
  csce_loss_gradient(p, seqs, pairs, cfg, grad);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = rng.below(p.values.size());
    Params q = p;
    const double h = 1e-5;
    q.values[k] = p.values[k] + h;
    const double up = csce_loss(q, seqs, pairs, cfg).total;
    q.values[k] = p.values[k] - h;
    const double down = csce_loss(q, seqs, pairs, cfg).total;
    const double num = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(num - grad[k]) / std::max(1e-8, std::abs(num) + std::abs(grad[k])));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 30, "max relative error " + fmt("%.2e", worst) +
                                      " over 100 coordinates in " + fmt("%.2f s", t)};
}

// Vocabulary {0, 1}; P(next = 1) depends only on the last token.
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

Outcome ite_correctness() {
  double worst = 0;
  const double a = 0.3, b = 0.8;
  const LastTokenScorer s(a, b);
  // target "1" after step 1 vs step 0
  worst = std::max(worst, std::abs(estimate_ite(s, {{0}, {1}, {0}, {1}}).ite - (b - a)));
  // target "1 0 1": y(w) = P(1|w) P(0|1) P(1|0)
  const auto e = estimate_ite(s, {{0, 1}, {1}, {0}, {1, 0, 1}});
  worst = std::max(worst, std::abs(e.y1 - b * (1 - b) * a));
  worst = std::max(worst, std::abs(e.y0 - a * (1 - b) * a));
  worst = std::max(worst, std::abs(e.ite - (b - a) * (1 - b) * a));
  // two-token steps: y1 = P(1|1), y0 = P(1|0) after steps "0 1" and "1 0"
  const auto g = estimate_ite(s, {{1}, {0, 1}, {1, 0}, {1}});
  worst = std::max(worst, std::abs(g.ite - (b - a)));

  const auto agg = aggregate(std::vector<double>{1, 0});
  const bool pass = worst < 1e-12 && agg.mean == 0.5 && agg.var == 0.5;
  return {pass, "max deviation from closed form " + fmt("%.1e", worst) + ", aggregate{1,0} mean " +
                    fmt("%g", agg.mean) + " var " + fmt("%g", agg.var)};
}

Outcome scenario_classifier() {
  auto est = [](double mean, double var) {
    ITEEstimate e;
    e.mean = mean;
    e.abs_mean = std::abs(mean);
    e.var = var;
    e.n = 2;
    return e;
  };
  const auto c = classify_scenario(est(0.9, 0.01), 0.5, 0.05);
  const auto a = classify_scenario(est(0.1, 0.01), 0.5, 0.05);
  const auto b = classify_scenario(est(0.9, 0.5), 0.5, 0.05);
  return {c == Scenario::C && a == Scenario::A && b == Scenario::B,
          "(0.9,0.01)->" + std::string(scenario_name(c)) + " (0.1,0.01)->" +
              std::string(scenario_name(a)) + " (0.9,0.5)->" + std::string(scenario_name(b))};
}

Outcome desk_run() {
  GenConfig g;
  g.buckets = {3};
  g.per_bucket = 1000;
  g.seed = 1;
  const auto split = split_dataset(gen_dataset(g), 0.2, 1);
  const auto codec = Codec::build(merged(split));
  ModelConfig mc;
  mc.context_window = 64;
  mc.embed_dim = 16;
  mc.hidden_dim = 64;
  mc.seed = 1;
  LossConfig lc;
  lc.alpha = 0.1;
  lc.beta = 0.1;
  TrainConfig tc;
  tc.epochs = 300;
  tc.lr = 0.5;
  tc.momentum = 0.9;
  tc.batch_size = 4;
  tc.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto run = train(split, codec, mc, lc, tc);
  const auto held = evaluate_success(run.params, codec, split.test, DecodeMode::OneShot);
  const auto seen = evaluate_success(run.params, codec, split.train, DecodeMode::OneShot);
  const double t = seconds_since(t0);
  const double rate = held.buckets.at(3).success_rate();
  return {rate >= 0.9 && t < 600,
          "held-out one-shot success " + fmt("%.3f", rate) + " (threshold 0.90) on " +
              std::to_string(split.test.size()) + " prompts, training-set success " +
              fmt("%.3f", seen.buckets.at(3).success_rate()) + ", " + fmt("%.1f s", t)};
}

Outcome speed_mechanism() {
  GenConfig g;
  g.buckets = {7};
  g.per_bucket = 20;
  g.seed = 10;
  const auto split = split_dataset(gen_dataset(g), 0.0, 10);
  const auto codec = Codec::build(split.train);
  ModelConfig mc;
  mc.context_window = 128;
  mc.embed_dim = 32;
  mc.hidden_dim = 128;
  mc.seed = 10;
  LossConfig lc;
  lc.alpha = lc.beta = 0;
  lc.pairs_per_batch = 0;
  TrainConfig tc;
  tc.epochs = 600;
  tc.lr = 0.5;
  tc.batch_size = 4;
  tc.seed = 10;
  const auto run = train(split, codec, mc, lc, tc);

  std::vector<Sample> bench;
  for (std::size_t i = 0; i < 100; ++i) bench.push_back(split.train[i % split.train.size()]);
  const auto sr = speed_bench(run.params, codec, bench, 5);
  bool counts = sr.one_shot.samples.size() == 100 && sr.chained.samples.size() == 100;
  std::size_t same = 0;
  for (std::size_t i = 0; counts && i < bench.size(); ++i) {
    const auto& one = sr.one_shot.samples[i];
    const auto& ch = sr.chained.samples[i];
    counts = one.invocations == 1 && ch.parsed && ch.invocations == ch.steps;
    same += one.output == ch.output;
  }
  const double a = sr.one_shot.buckets.at(7).median_ms;
  const double b = sr.chained.buckets.at(7).median_ms;
  return {counts && b > a,
          "median one-shot " + fmt("%.4f ms", a) + " vs chained " + fmt("%.4f ms", b) +
              ", invocations " + std::to_string(sr.one_shot.buckets.at(7).invocations) + " vs " +
              std::to_string(sr.chained.buckets.at(7).invocations) + " over 100 samples" +
              (counts ? " (1 vs k each)" : " (bookkeeping mismatch)") + ", " + std::to_string(same) +
              "/100 identical outputs"};
}

Outcome variance_term() {
  // two modes: 1-step and 3-step pathways
  GenConfig g;
  g.objects = 2;
  g.buckets = {1, 3};
  g.per_bucket = 40;
  g.seed = 1;
  const auto split = split_dataset(gen_dataset(g), 0.0, 1);
  const auto codec = Codec::build(split.train);
  ModelConfig mc;
  mc.context_window = 64;
  mc.seed = 11;
  TrainConfig tc;
  tc.epochs = 200;
  tc.lr = 0.5;
  tc.batch_size = 4;
  tc.seed = 11;
  LossConfig with;
  with.alpha = 0;
  with.beta = 0.1;
  LossConfig without = with;
  without.beta = 0;
  const auto a = train(split, codec, mc, with, tc);
  const auto b = train(split, codec, mc, without, tc);
  const double va = a.report.epochs.back().var_ite;
  const double vb = b.report.epochs.back().var_ite;
  const bool shared = params_hash(a.initial) == params_hash(b.initial);
  return {shared && va < vb, "final Var(ITE) " + fmt("%.6f", va) + " with beta=0.1 vs " +
                                 fmt("%.6f", vb) + " with beta=0" +
                                 (shared ? ", shared init" : ", INIT DIFFERS")};
}

Outcome disclosures() {
  auto fake = [](const std::string& method, std::vector<std::size_t> buckets) {
    EvalResult r;
    r.model = "toy";
    r.method = method;
    for (auto b : buckets) r.buckets[b] = BucketSummary{4, 3, 4, 4, 1.0};
    return r;
  };
  const std::vector<EvalResult> bw{fake("one_shot", {2, 4, 6}), fake("chained", {2, 4, 6})};
  const std::vector<EvalResult> hanoi{fake("one_shot", {3, 5, 7})};
  const auto md_bw = render_report(bw, ReportFormat::Markdown);
  const auto md_h = render_report(hanoi, ReportFormat::Markdown);
  const bool layout = md_bw.find("| 2-Step | 4-Step | 6-Step |") != std::string::npos &&
                      md_h.find("| 3-Step | 5-Step | 7-Step |") != std::string::npos &&
                      md_h.find("| 0.75 | 0.75 | 0.75 |") != std::string::npos;

  // ablation protocol: shared init, (0,0) row equal to a direct run
  auto f = small_corpus(6, 9);
  LossConfig lc;
  TrainConfig tc;
  tc.epochs = 3;
  tc.lr = 0.2;
  tc.batch_size = 4;
  tc.seed = 9;
  auto split = f.split;
  split.test = split.train;
  const auto rep = ablate(split, f.codec, f.model, lc, tc, {{0, 0}, {0.1, 0.1}});
  LossConfig zero = lc;
  zero.alpha = zero.beta = 0;
  const auto direct = train(split, f.codec, f.model, zero, tc);
  const bool protocol = rep.rows.size() == 2 && rep.rows[0].init_hash == rep.rows[1].init_hash &&
                        rep.rows[0].final_loss.total == direct.report.epochs.back().total;
  return {layout && protocol,
          std::string("bucket-column tables and ablation grid reproduced") +
              (layout ? "" : " (layout mismatch)") + (protocol ? "" : " (protocol mismatch)") +
              "; absolute success rates of billion-parameter fine-tunes are out of scope"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> expect_red, only;
  std::string report_path;
  app.add_option("--expect-red", expect_red, "criteria known to fail; reported but not fatal");
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--report", report_path, "also write the result lines to this file");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"hanoi full-transfer bound", hanoi_bound},
      {"solver optimality vs BFS", solver_optimality},
      {"state-count oracle and uniform generators", state_counts},
      {"dataset integrity", dataset_integrity},
      {"loss algebra", loss_algebra},
      {"gradient exactness", gradient_exactness},
      {"ITE correctness", ite_correctness},
      {"scenario classifier", scenario_classifier},
      {"end-to-end desk run", desk_run},
      {"speed mechanism", speed_mechanism},
      {"variance-term property", variance_term},
      {"scope disclosures", disclosures},
  };

  const std::set<int> red(expect_red.begin(), expect_red.end());
  std::FILE* report = report_path.empty() ? nullptr : std::fopen(report_path.c_str(), "w");
  auto emit = [&](const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    if (report) std::fputs(line.c_str(), report);
  };
  int passed = 0, failed = 0, fatal = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    char head[64];
    std::snprintf(head, sizeof head, "criterion %2d: %s  ", id, v.pass ? "PASS" : "FAIL");
    emit(head + criteria[i].first + ": " + v.detail + " [" + fmt("%.1f s", seconds_since(t0)) + "]" +
         (!v.pass && red.count(id) ? " (expected red)" : "") + "\n");
    if (v.pass) {
      ++passed;
    } else {
      ++failed;
      fatal += red.count(id) == 0;
    }
  }
  emit(std::to_string(passed) + " passed, " + std::to_string(failed) + " failed, " +
       std::to_string(fatal) + " unexpected\n");
  if (report) std::fclose(report);
  return fatal == 0 ? 0 : 1;
}
