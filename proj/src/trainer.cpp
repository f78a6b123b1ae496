#include "itelab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "itelab/error.hpp"

namespace itelab {

std::string_view outcome_mode_name(OutcomeMode m) noexcept {
  return m == OutcomeMode::Probability ? "probability" : "binary";
}

OutcomeMode parse_outcome_mode(std::string_view text) {
  if (text == "probability") return OutcomeMode::Probability;
  if (text == "binary") return OutcomeMode::Binary;
  throw Error(ErrorCode::InvalidArgument, "unknown outcome mode '" + std::string(text) + "'");
}

void LossConfig::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0 || beta < 0) {
    throw Error(ErrorCode::InvalidConfig, "alpha and beta must be finite and >= 0");
  }
  if (weighted() && pairs_per_batch < 2) {
    throw Error(ErrorCode::InvalidConfig, "ITE terms need pairs_per_batch >= 2");
  }
}

double binary_ce(bool q, double p1, double p0) {
  constexpr double eps = 1e-12;
  return q ? -std::log(std::max(p1, eps)) : -std::log(std::max(p0, eps));
}

LossBreakdown combine_loss(double ce, const ITEEstimate& ite, const LossConfig& cfg) {
  LossBreakdown lb;
  lb.ce = ce;
  lb.e_ite_abs = ite.abs_mean;
  lb.var_ite = ite.var;
  lb.total = ce - cfg.alpha * lb.e_ite_abs + cfg.beta * lb.var_ite;
  lb.ppl = std::exp(ce);
  return lb;
}

namespace {

std::vector<ScoredSpan> ce_spans(std::span<const std::vector<int>> sequences, std::size_t& tokens) {
  std::vector<ScoredSpan> spans;
  tokens = 0;
  for (const auto& s : sequences) {
    if (s.size() < 2) throw Error(ErrorCode::InvalidArgument, "training sequence shorter than 2 tokens");
    spans.push_back({s, 1});
    tokens += s.size() - 1;
  }
  return spans;
}

// Spans y1_0, y0_0, y1_1, y0_1, ... for the pairs.
std::vector<ScoredSpan> ite_spans(std::span<const CounterfactualPair> pairs) {
  std::vector<ScoredSpan> spans;
  for (const auto& pr : pairs) {
    for (const auto* step : {&pr.factual, &pr.corrupted}) {
      ScoredSpan s;
      s.tokens = pr.context;
      s.tokens.insert(s.tokens.end(), step->begin(), step->end());
      s.begin = s.tokens.size();
      s.tokens.insert(s.tokens.end(), pr.target.begin(), pr.target.end());
      spans.push_back(std::move(s));
    }
  }
  return spans;
}

struct IteTerms {
  ITEEstimate estimate;
  std::vector<double> y1, y0;
  bool present = false;
};

IteTerms ite_terms(const Params& p, std::span<const CounterfactualPair> pairs, const LossConfig& cfg,
                   Rng* rng, std::size_t workers) {
  IteTerms t;
  if (pairs.empty()) return t;
  const auto values = span_log_probs(p, ite_spans(pairs), workers);
  std::vector<double> ite;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    double y1 = std::exp(values[2 * i]);
    double y0 = std::exp(values[2 * i + 1]);
    if (cfg.outcome == OutcomeMode::Binary) {
      if (!rng) throw Error(ErrorCode::InvalidArgument, "binary outcome mode needs a random source");
      y1 = rng->unit() < y1 ? 1.0 : 0.0;
      y0 = rng->unit() < y0 ? 1.0 : 0.0;
    }
    t.y1.push_back(y1);
    t.y0.push_back(y0);
    ite.push_back(y1 - y0);
  }
  t.estimate = aggregate(ite);
  t.present = true;
  return t;
}

}  // namespace

LossBreakdown csce_loss(const Params& p, std::span<const std::vector<int>> sequences,
                        std::span<const CounterfactualPair> pairs, const LossConfig& cfg, Rng* rng,
                        std::size_t workers) {
  std::size_t tokens = 0;
  const auto spans = ce_spans(sequences, tokens);
  if (tokens == 0) throw Error(ErrorCode::EmptyInput, "no training tokens");
  const auto values = span_log_probs(p, spans, workers);
  double nll = 0;
  for (double v : values) nll -= v;
  const auto ite = ite_terms(p, pairs, cfg, rng, workers);
  return combine_loss(nll / static_cast<double>(tokens), ite.estimate, cfg);
}

LossBreakdown csce_loss_gradient(const Params& p, std::span<const std::vector<int>> sequences,
                                 std::span<const CounterfactualPair> pairs, const LossConfig& cfg,
                                 std::span<double> grad, Rng* rng, std::size_t workers) {
  std::size_t tokens = 0;
  auto spans = ce_spans(sequences, tokens);
  if (tokens == 0) throw Error(ErrorCode::EmptyInput, "no training tokens");
  const std::size_t n_ce = spans.size();
  std::vector<double> weights(n_ce, -1.0 / static_cast<double>(tokens));

  const auto ite = ite_terms(p, pairs, cfg, rng, workers);
  const bool differentiable =
      ite.present && cfg.weighted() && !cfg.detached && cfg.outcome == OutcomeMode::Probability;
  if (differentiable) {
    // d total / d ite_i, then through ite_i = exp(v1_i) - exp(v0_i)
    const auto& e = ite.estimate;
    const double n = static_cast<double>(e.n);
    const double sign = e.mean > 0 ? 1.0 : (e.mean < 0 ? -1.0 : 0.0);
    auto more = ite_spans(pairs);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double ite_i = ite.y1[i] - ite.y0[i];
      const double d = -cfg.alpha * sign / n + cfg.beta * 2.0 * (ite_i - e.mean) / (n - 1.0);
      weights.push_back(d * ite.y1[i]);
      weights.push_back(-d * ite.y0[i]);
    }
    spans.insert(spans.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }

  std::fill(grad.begin(), grad.end(), 0.0);
  const auto values = accumulate_span_gradient(p, spans, weights, grad, workers);
  double nll = 0;
  for (std::size_t i = 0; i < n_ce; ++i) nll -= values[i];
  return combine_loss(nll / static_cast<double>(tokens), ite.estimate, cfg);
}

std::vector<std::pair<std::string, double>> loss_metrics(const LossBreakdown& lb) {
  return {{"ce", lb.ce}, {"e_ite_abs", lb.e_ite_abs}, {"var_ite", lb.var_ite}, {"total", lb.total}, {"ppl", lb.ppl}};
}

LossBreakdown metrics_loss(const std::vector<std::pair<std::string, double>>& metrics) {
  LossBreakdown lb;
  for (const auto& [k, v] : metrics) {
    if (k == "ce") lb.ce = v;
    else if (k == "e_ite_abs") lb.e_ite_abs = v;
    else if (k == "var_ite") lb.var_ite = v;
    else if (k == "total") lb.total = v;
    else if (k == "ppl") lb.ppl = v;
  }
  return lb;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t version) {
  char name[32];
  std::snprintf(name, sizeof name, "ckpt_v%04llu.ckpt", static_cast<unsigned long long>(version));
  return dir / name;
}

TrainingView training_view(const DatasetSplit& split, const Codec& codec, const LossConfig& loss,
                           const TrainConfig& train) {
  TrainingView v;
  for (const auto& s : split.train) v.sequences.push_back(codec.training_sequence(s));
  if (loss.pairs_per_batch > 0 && !split.train.empty()) {
    Rng rng(derive_seed(train.seed, 3));
    v.eval_pairs = draw_pairs(codec, split.train, std::max<std::size_t>(2, train.eval_pairs), rng, loss.strategy);
  }
  return v;
}

namespace {

void write_log_row(std::ofstream& log, const StepLog& row) {
  char buf[256];
  const auto& l = row.loss;
  std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.step,
                static_cast<unsigned long long>(row.version), l.ce, l.e_ite_abs, l.var_ite, l.total, l.ppl);
  log << buf;
}

bool finite(const LossBreakdown& lb) {
  return std::isfinite(lb.ce) && std::isfinite(lb.e_ite_abs) && std::isfinite(lb.var_ite) &&
         std::isfinite(lb.total);
}

}  // namespace

TrainResult train(const DatasetSplit& split, const Codec& codec, ModelConfig model,
                  const LossConfig& loss, const TrainConfig& cfg) {
  loss.validate();
  if (split.train.empty()) throw Error(ErrorCode::EmptyInput, "training set is empty");
  if (!(cfg.lr > 0) || !std::isfinite(cfg.lr)) throw Error(ErrorCode::InvalidConfig, "lr must be > 0");
  if (cfg.momentum < 0 || cfg.momentum >= 1) throw Error(ErrorCode::InvalidConfig, "momentum must be in [0, 1)");
  if (model.vocab_size == 0) model.vocab_size = codec.size();
  if (model.vocab_size != codec.size()) throw Error(ErrorCode::InvalidConfig, "model vocab differs from codec");

  const auto start = std::chrono::steady_clock::now();
  TrainResult out;
  out.initial = init_params(model, model.seed);
  Params& p = out.params;
  p = out.initial;

  const auto view = training_view(split, codec, loss, cfg);
  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng pair_rng(derive_seed(cfg.seed, 2));
  Rng eval_rng(derive_seed(cfg.seed, 4));

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::binary);
    if (!log) throw Error(ErrorCode::Io, "cannot write training log " + cfg.log_path.string());
    log << "step,version,ce,e_ite_abs,var_ite,total,ppl\n";
  }
  if (!cfg.checkpoint_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.checkpoint_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + cfg.checkpoint_dir.string());
  }

  const std::size_t n = split.train.size();
  const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
  std::vector<double> grad(p.values.size()), velocity(p.values.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  std::uint64_t version = 0;

  auto diverged = [&](const std::string& where) {
    std::string msg = "non-finite loss " + where;
    if (!out.checkpoints.empty()) msg += "; last good checkpoint " + out.checkpoints.back().string();
    throw Error(ErrorCode::DivergenceDetected, msg);
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t at = 0; at < n; at += batch) {
      const std::size_t end = std::min(n, at + batch);
      std::vector<std::vector<int>> seqs;
      std::vector<Sample> samples;
      for (std::size_t i = at; i < end; ++i) {
        seqs.push_back(view.sequences[order[i]]);
        samples.push_back(split.train[order[i]]);
      }
      std::vector<CounterfactualPair> pairs;
      if (loss.pairs_per_batch > 0) pairs = draw_pairs(codec, samples, loss.pairs_per_batch, pair_rng, loss.strategy);

      const auto lb = csce_loss_gradient(p, seqs, pairs, loss, grad, &pair_rng, cfg.workers);
      ++step;
      if (!finite(lb)) diverged("at step " + std::to_string(step));
      StepLog row{step, version + 1, lb};
      if (log.is_open()) write_log_row(log, row);
      out.report.steps.push_back(row);
      for (std::size_t k = 0; k < p.values.size(); ++k) {
        velocity[k] = cfg.momentum * velocity[k] + grad[k];
        p.values[k] -= cfg.lr * velocity[k];
      }
    }
    const auto lb = csce_loss(p, view.sequences, view.eval_pairs, loss, &eval_rng, cfg.workers);
    if (!finite(lb)) diverged("after epoch " + std::to_string(epoch + 1));
    ++version;
    out.report.epochs.push_back(lb);
    if (!cfg.checkpoint_dir.empty()) {
      const auto path = checkpoint_path(cfg.checkpoint_dir, version);
      save_checkpoint(path, Checkpoint{p, version, loss_metrics(lb)});
      out.checkpoints.push_back(path);
    }
    if (log.is_open()) log.flush();
  }
  out.report.final_version = version;
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace itelab
