#include "itelab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include "itelab/error.hpp"

namespace itelab {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::size_t max_len_of(const Params& p, const EvalOptions& opts) {
  return opts.max_len ? opts.max_len : p.config.context_window;
}

SampleOutcome run_one(const Params& p, const Codec& codec, const Sample& s, DecodeMode mode,
                      std::size_t max_len) {
  const auto prompt = codec.test_sequence(s);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = decode(p, codec, prompt, mode, max_len);
  const auto t1 = std::chrono::steady_clock::now();
  auto out = grade_output(s, codec.decode(r.tokens), r.terminated);
  out.invocations = r.invocations;
  out.decode_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return out;
}

void summarize(EvalResult& r) {
  r.buckets.clear();
  std::map<std::size_t, std::vector<double>> times;
  for (const auto& o : r.samples) {
    auto& b = r.buckets[o.bucket];
    ++b.n;
    b.successes += o.success;
    b.parsed += o.parsed;
    b.invocations += o.invocations;
    times[o.bucket].push_back(o.decode_ms);
  }
  for (auto& [k, b] : r.buckets) b.median_ms = median(times[k]);
}

}  // namespace

SampleOutcome grade_output(const Sample& s, const std::string& output, bool terminated) {
  SampleOutcome o;
  o.bucket = s.n_steps;
  o.output = output;
  o.terminated = terminated;
  try {
    const auto steps = parse_pathway(render_test_prompt(s) + output);
    const auto path = parse_steps(s.domain, steps);
    o.parsed = true;
    o.steps = steps.size();
    const auto init = parse_state(s.domain, s.init_text);
    const auto goal = parse_state(s.domain, s.goal_text);
    o.success = terminated && validate_pathway(s.domain, init, goal, path).success();
  } catch (const Error&) {
    o.parsed = false;
    o.success = false;
  }
  return o;
}

EvalResult evaluate_success(const Params& p, const Codec& codec, std::span<const Sample> testset,
                            DecodeMode mode, const EvalOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  EvalResult r;
  r.model = opts.model;
  r.method = opts.method.empty() ? std::string(decode_mode_name(mode)) : opts.method;
  r.mode = mode;
  r.samples.resize(testset.size());
  const std::size_t max_len = max_len_of(p, opts);
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, testset.size()));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < testset.size(); i += workers) {
      r.samples[i] = run_one(p, codec, testset[i], mode, max_len);
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  summarize(r);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

SpeedReport speed_bench(const Params& p, const Codec& codec, std::span<const Sample> testset,
                        std::size_t repetitions, const EvalOptions& opts) {
  if (repetitions < 3) throw Error(ErrorCode::InvalidArgument, "speed bench needs >= 3 repetitions");
  if (testset.empty()) throw Error(ErrorCode::EmptyInput, "speed bench needs samples");
  SpeedReport rep;
  const std::size_t max_len = max_len_of(p, opts);
  EvalResult* results[2] = {&rep.one_shot, &rep.chained};
  const DecodeMode modes[2] = {DecodeMode::OneShot, DecodeMode::Chained};
  for (int m = 0; m < 2; ++m) {
    results[m]->model = opts.model;
    results[m]->method = std::string(decode_mode_name(modes[m]));
    results[m]->mode = modes[m];
  }
  const auto start = std::chrono::steady_clock::now();
  for (const auto& s : testset) {
    std::vector<double> times[2];
    SampleOutcome last[2];
    for (std::size_t k = 0; k < repetitions; ++k) {
      for (int m = 0; m < 2; ++m) {
        // alternate which mode goes first to cancel cache warm-up effects
        const int which = (k % 2 == 0) ? m : 1 - m;
        last[which] = run_one(p, codec, s, modes[which], max_len);
        times[which].push_back(last[which].decode_ms);
      }
    }
    for (int m = 0; m < 2; ++m) {
      last[m].decode_ms = median(times[m]);
      results[m]->samples.push_back(std::move(last[m]));
    }
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto* r : results) {
    summarize(*r);
    r->wall_seconds = wall;
  }
  for (const auto& [b, one] : rep.one_shot.buckets) {
    const double denom = one.median_ms;
    rep.ratio[b] = denom > 0 ? rep.chained.buckets.at(b).median_ms / denom : 0.0;
  }
  return rep;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "markdown" || text == "md") return ReportFormat::Markdown;
  if (text == "csv") return ReportFormat::Csv;
  throw Error(ErrorCode::InvalidArgument, "unknown report format '" + std::string(text) + "'");
}

std::string render_report(std::span<const EvalResult> results, ReportFormat format) {
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "nothing to report");
  std::vector<std::size_t> buckets;
  for (const auto& [b, s] : results.front().buckets) buckets.push_back(b);
  for (const auto& r : results) {
    std::vector<std::size_t> mine;
    for (const auto& [b, s] : r.buckets) mine.push_back(b);
    if (mine != buckets) {
      throw Error(ErrorCode::InconsistentBuckets,
                  "row " + r.model + "/" + r.method + " covers a different bucket set");
    }
  }
  std::string out;
  if (format == ReportFormat::Csv) {
    out = "model,method,bucket,success_rate,n,invocations,median_ms\n";
    for (const auto& r : results) {
      for (const auto& [b, s] : r.buckets) {
        out += r.model + "," + r.method + "," + std::to_string(b) + "," + fixed(s.success_rate(), 2) + "," +
               std::to_string(s.n) + "," + std::to_string(s.invocations) + "," + fixed(s.median_ms, 3) + "\n";
      }
    }
    return out;
  }
  out = "| model | method |";
  std::string rule = "|---|---|";
  for (auto b : buckets) {
    out += " " + std::to_string(b) + "-Step |";
    rule += "---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& r : results) {
    out += "| " + r.model + " | " + r.method + " |";
    for (const auto& [b, s] : r.buckets) out += " " + fixed(s.success_rate(), 2) + " |";
    out += "\n";
  }
  return out;
}

AblationReport ablate(const DatasetSplit& split, const Codec& codec, ModelConfig model,
                      const LossConfig& loss, const TrainConfig& train,
                      const std::vector<std::pair<double, double>>& grid, const EvalOptions& opts) {
  if (std::find(grid.begin(), grid.end(), std::pair<double, double>{0.0, 0.0}) == grid.end()) {
    throw Error(ErrorCode::InvalidConfig, "ablation grid must include (0, 0)");
  }
  AblationReport rep;
  for (const auto& [alpha, beta] : grid) {
    LossConfig lc = loss;
    lc.alpha = alpha;
    lc.beta = beta;
    TrainConfig tc = train;
    if (!tc.checkpoint_dir.empty()) tc.checkpoint_dir /= "a" + fixed(alpha, 4) + "_b" + fixed(beta, 4);
    if (!tc.log_path.empty()) {
      auto name = tc.log_path.stem().string() + "_a" + fixed(alpha, 4) + "_b" + fixed(beta, 4) + ".csv";
      tc.log_path = tc.log_path.parent_path() / name;
    }
    const auto result = itelab::train(split, codec, model, lc, tc);
    AblationRow row;
    row.alpha = alpha;
    row.beta = beta;
    row.init_hash = params_hash(result.initial);
    row.final_loss = result.report.epochs.empty() ? LossBreakdown{} : result.report.epochs.back();
    EvalOptions eo = opts;
    eo.method = "alpha=" + fixed(alpha, 2) + ";beta=" + fixed(beta, 2);
    row.eval = evaluate_success(result.params, codec, split.test, DecodeMode::OneShot, eo);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::string render_ablation(const AblationReport& report, ReportFormat format) {
  if (report.rows.empty()) throw Error(ErrorCode::EmptyInput, "empty ablation report");
  std::vector<EvalResult> evals;
  for (const auto& r : report.rows) evals.push_back(r.eval);
  std::string out = render_report(evals, format);

  const AblationRow* base = nullptr;
  for (const auto& r : report.rows) {
    if (r.alpha == 0 && r.beta == 0) base = &r;
  }
  char hash[32];
  if (format == ReportFormat::Csv) {
    out += "\nalpha,beta,init_hash,ce,e_ite_abs,var_ite,total,ppl\n";
    for (const auto& r : report.rows) {
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.init_hash));
      const auto& l = r.final_loss;
      out += fixed(r.alpha, 4) + "," + fixed(r.beta, 4) + "," + hash + "," + fixed(l.ce, 6) + "," +
             fixed(l.e_ite_abs, 6) + "," + fixed(l.var_ite, 6) + "," + fixed(l.total, 6) + "," + fixed(l.ppl, 6) + "\n";
    }
    out += "\nalpha,beta,bucket,delta_vs_ce_only\n";
    for (const auto& r : report.rows) {
      for (const auto& [b, s] : r.eval.buckets) {
        const double d = base ? s.success_rate() - base->eval.buckets.at(b).success_rate() : 0.0;
        out += fixed(r.alpha, 4) + "," + fixed(r.beta, 4) + "," + std::to_string(b) + "," + fixed(d, 2) + "\n";
      }
    }
    return out;
  }
  out += "\n| alpha | beta | init hash | CE | abs E(ITE) | Var(ITE) | total | PPL |";
  for (const auto& [b, s] : report.rows.front().eval.buckets) out += " delta " + std::to_string(b) + "-Step |";
  out += "\n|---|---|---|---|---|---|---|---|";
  for (std::size_t i = 0; i < report.rows.front().eval.buckets.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& r : report.rows) {
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.init_hash));
    const auto& l = r.final_loss;
    out += "| " + fixed(r.alpha, 2) + " | " + fixed(r.beta, 2) + " | " + hash + " | " + fixed(l.ce, 4) + " | " +
           fixed(l.e_ite_abs, 4) + " | " + fixed(l.var_ite, 4) + " | " + fixed(l.total, 4) + " | " + fixed(l.ppl, 4) + " |";
    for (const auto& [b, s] : r.eval.buckets) {
      const double d = base ? s.success_rate() - base->eval.buckets.at(b).success_rate() : 0.0;
      out += std::string(d >= 0 ? " +" : " ") + fixed(d, 2) + " |";
    }
    out += "\n";
  }
  return out;
}

AuditReport audit_model(const Params& p, const Codec& codec, std::span<const Sample> testset,
                        const AuditOptions& audit, const EvalOptions& opts) {
  AuditReport rep;
  rep.samples = testset.size();
  const auto decoded = evaluate_success(p, codec, testset, DecodeMode::OneShot, opts);
  std::vector<PQRecord> records;
  for (std::size_t i = 0; i < testset.size(); ++i) {
    const auto& s = testset[i];
    std::vector<std::string> steps;
    try {
      steps = parse_pathway(render_test_prompt(s) + decoded.samples[i].output);
    } catch (const Error&) {
      ++rep.unparsed;
      continue;
    }
    const auto init = parse_state(s.domain, s.init_text);
    const auto goal = parse_state(s.domain, s.goal_text);
    const auto r = audit_pathway(s.domain, init, goal, steps);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "model output contains no steps to audit");
  rep.table = audit_contingency(records);

  Rng rng(derive_seed(audit.seed, 0x617564));
  const auto pairs = draw_pairs(codec, testset, audit.pairs, rng, audit.strategy);
  const ModelScorer scorer(p);
  std::vector<double> ites;
  for (const auto& pair : pairs) ites.push_back(estimate_ite(scorer, pair).ite);
  rep.ite = aggregate(ites);
  rep.scenario = classify_scenario(rep.ite, audit.tau_mu, audit.tau_sigma);
  return rep;
}

std::string render_audit(const AuditReport& report) {
  std::string out = contingency_csv(report.table);
  if (!out.empty() && out.back() != '\n') out += '\n';
  const auto n = std::to_string(report.ite.n);
  out += "ite_abs_mean," + fixed(report.ite.abs_mean, 6) + "," + n + "\n";
  out += "ite_var," + fixed(report.ite.var, 6) + "," + n + "\n";
  out += "scenario," + std::string(scenario_name(report.scenario)) + "," + n + "\n";
  out += "unparsed," + std::to_string(report.unparsed) + "," + std::to_string(report.samples) + "\n";
  return out;
}

}  // namespace itelab
