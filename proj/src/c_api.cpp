#include "itelab.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "itelab/error.hpp"
#include "itelab/eval.hpp"
#include "itelab/run_config.hpp"
#include "json.hpp"

struct itelab_config {
  itelab::RunConfig cfg;
};

struct itelab_dataset {
  itelab::DatasetSplit split;
};

struct itelab_model {
  itelab::Params params;
  itelab::Codec codec;
  std::uint64_t version = 0;
  std::vector<std::pair<std::string, double>> metrics;
};

namespace {

using namespace itelab;
namespace fs = std::filesystem;

thread_local std::string last_error;

itelab_status to_status(ErrorCode code) {
  return static_cast<itelab_status>(static_cast<int>(code) + 1);
}

// Runs `body`, translating exceptions into a status plus the thread-local message.
template <typename F>
itelab_status guard(F&& body) {
  try {
    body();
    last_error.clear();
    return ITELAB_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  }
  return ITELAB_INTERNAL_ERROR;
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Codec codec_for(const DatasetSplit& split) {
  std::vector<Sample> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  return Codec::build(all);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void set_run_dir(TrainConfig& tc, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  tc.checkpoint_dir = dir / "checkpoints";
  tc.log_path = dir / "train_log.csv";
}

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<Sample>& test_side(const itelab_dataset* ds) {
  if (ds->split.test.empty()) throw Error(ErrorCode::EmptyInput, "dataset has no test samples");
  return ds->split.test;
}

}  // namespace

extern "C" {

const char* itelab_status_name(itelab_status status) {
  switch (status) {
    case ITELAB_OK: return "Ok";
    case ITELAB_INTERNAL_ERROR: return "InternalError";
    default: break;
  }
  const int i = static_cast<int>(status) - 1;
  if (i < 0 || i > static_cast<int>(ErrorCode::Io)) return "Unknown";
  return error_code_name(static_cast<ErrorCode>(i)).data();
}

const char* itelab_last_error(void) { return last_error.c_str(); }

void itelab_string_free(char* s) { std::free(s); }

itelab_status itelab_config_new(itelab_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new itelab_config;
  });
}

void itelab_config_free(itelab_config* cfg) { delete cfg; }

size_t itelab_config_key_count(void) { return RunConfig::keys().size(); }

const char* itelab_config_key(size_t index) {
  const auto& keys = RunConfig::keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

itelab_status itelab_config_set(itelab_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

itelab_status itelab_config_get(const itelab_config* cfg, const char* key, char** out) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(out, "out");
    *out = copy_out(cfg->cfg.get(key));
  });
}

itelab_status itelab_config_load(itelab_config* cfg, const char* path) {
  return guard([&] {
    require(cfg, "config");
    require(path, "path");
    cfg->cfg.load(path);
  });
}

itelab_status itelab_config_validate(const itelab_config* cfg) {
  return guard([&] {
    require(cfg, "config");
    cfg->cfg.validate();
  });
}

itelab_status itelab_config_render(const itelab_config* cfg, char** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = copy_out(cfg->cfg.render());
  });
}

itelab_status itelab_gen(const itelab_config* cfg, itelab_dataset** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    const auto samples = gen_dataset(cfg->cfg.gen_config());
    auto* ds = new itelab_dataset;
    ds->split = split_dataset(samples, cfg->cfg.test_fraction, cfg->cfg.seed);
    *out = ds;
  });
}

itelab_status itelab_dataset_load(const char* dir, itelab_dataset** out) {
  return guard([&] {
    require(dir, "dir");
    require(out, "out");
    auto split = read_split(dir);
    *out = new itelab_dataset{std::move(split)};
  });
}

itelab_status itelab_dataset_save(const itelab_dataset* ds, const char* dir) {
  return guard([&] {
    require(ds, "dataset");
    require(dir, "dir");
    write_split(dir, ds->split);
  });
}

size_t itelab_dataset_size(const itelab_dataset* ds, int test_side) {
  if (!ds) return 0;
  return test_side ? ds->split.test.size() : ds->split.train.size();
}

void itelab_dataset_free(itelab_dataset* ds) { delete ds; }

itelab_status itelab_train(const itelab_config* cfg, const itelab_dataset* ds, const char* run_dir,
                           itelab_model** out, char** summary) {
  return guard([&] {
    require(cfg, "config");
    require(ds, "dataset");
    require(out, "out");
    const auto& rc = cfg->cfg;
    rc.validate();
    auto codec = codec_for(ds->split);
    auto tc = rc.train_config();
    if (run_dir) set_run_dir(tc, run_dir);
    auto result = train(ds->split, codec, rc.model_config(), rc.loss_config(), tc);
    const LossBreakdown last = result.report.epochs.empty() ? LossBreakdown{}
                                                            : result.report.epochs.back();
    std::string text;
    if (summary) {
      text += "epochs = " + std::to_string(result.report.epochs.size()) + "\n";
      text += "steps = " + std::to_string(result.report.steps.size()) + "\n";
      text += "vocab_size = " + std::to_string(codec.size()) + "\n";
      text += "init_hash = " + hex(params_hash(result.initial)) + "\n";
      text += "final_hash = " + hex(params_hash(result.params)) + "\n";
      text += "ce = " + fmt("%.6f", last.ce) + "\n";
      text += "ppl = " + fmt("%.6f", last.ppl) + "\n";
      text += "e_ite_abs = " + fmt("%.6f", last.e_ite_abs) + "\n";
      text += "var_ite = " + fmt("%.6f", last.var_ite) + "\n";
      text += "total = " + fmt("%.6f", last.total) + "\n";
      text += "wall_seconds = " + fmt("%.2f", result.report.wall_seconds) + "\n";
    }
    auto* m = new itelab_model{std::move(result.params), std::move(codec),
                               result.report.final_version, loss_metrics(last)};
    if (summary) *summary = copy_out(text);
    *out = m;
  });
}

itelab_status itelab_model_load(const char* dir, itelab_model** out) {
  return guard([&] {
    require(dir, "dir");
    require(out, "out");
    const fs::path root(dir);
    std::ifstream in(root / "vocab.json");
    if (!in) throw Error(ErrorCode::Io, "cannot open " + (root / "vocab.json").string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "vocab.json: " + std::string(e.what()));
    }
    if (!j.contains("pieces") || !j["pieces"].is_array()) {
      throw Error(ErrorCode::ParseError, "vocab.json: missing 'pieces' array");
    }
    auto codec = Codec::from_pieces(j["pieces"].get<std::vector<std::string>>());
    auto ck = load_checkpoint(root / "model.ckpt");
    if (ck.params.config.vocab_size != codec.size()) {
      throw Error(ErrorCode::ParseError, "checkpoint vocab size " +
                                             std::to_string(ck.params.config.vocab_size) +
                                             " does not match vocab.json (" +
                                             std::to_string(codec.size()) + ")");
    }
    *out = new itelab_model{std::move(ck.params), std::move(codec), ck.version,
                            std::move(ck.metrics)};
  });
}

itelab_status itelab_model_save(const itelab_model* model, const char* dir) {
  return guard([&] {
    require(model, "model");
    require(dir, "dir");
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + root.string() + ": " + ec.message());
    save_checkpoint(root / "model.ckpt", Checkpoint{model->params, model->version, model->metrics});
    const nlohmann::json j = {{"pieces", model->codec.pieces()}};
    const auto tmp = root / "vocab.json.tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
      f << j.dump(1) << '\n';
      if (!f) throw Error(ErrorCode::Io, "write failed: " + tmp.string());
    }
    fs::rename(tmp, root / "vocab.json", ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
  });
}

size_t itelab_model_vocab_size(const itelab_model* model) {
  return model ? model->codec.size() : 0;
}

void itelab_model_free(itelab_model* model) { delete model; }

itelab_status itelab_eval(const itelab_config* cfg, const itelab_model* model,
                          const itelab_dataset* ds, char** report) {
  return guard([&] {
    require(cfg, "config");
    require(model, "model");
    require(ds, "dataset");
    require(report, "report");
    const auto& rc = cfg->cfg;
    rc.validate();
    const auto& test = test_side(ds);
    std::vector<EvalResult> results;
    for (auto mode : {DecodeMode::OneShot, DecodeMode::Chained}) {
      if (rc.mode != "both" && parse_decode_mode(rc.mode) != mode) continue;
      results.push_back(evaluate_success(model->params, model->codec, test, mode, rc.eval_options()));
    }
    *report = copy_out(render_report(results, rc.format));
  });
}

itelab_status itelab_bench(const itelab_config* cfg, const itelab_model* model,
                           const itelab_dataset* ds, char** report) {
  return guard([&] {
    require(cfg, "config");
    require(model, "model");
    require(ds, "dataset");
    require(report, "report");
    const auto& rc = cfg->cfg;
    rc.validate();
    auto opts = rc.eval_options();
    opts.workers = 1;
    const auto sr = speed_bench(model->params, model->codec, test_side(ds), rc.repetitions, opts);
    const std::vector<EvalResult> both{sr.one_shot, sr.chained};
    std::string text = render_report(both, rc.format);
    if (rc.format == ReportFormat::Markdown) {
      text += "\n| bucket | one_shot ms | chained ms | chained / one_shot | invocations (one_shot, chained) |\n";
      text += "|---|---|---|---|---|\n";
      for (const auto& [bucket, ratio] : sr.ratio) {
        const auto& a = sr.one_shot.buckets.at(bucket);
        const auto& b = sr.chained.buckets.at(bucket);
        text += "| " + std::to_string(bucket) + " | " + fmt("%.4f", a.median_ms) + " | " +
                fmt("%.4f", b.median_ms) + " | " + fmt("%.3f", ratio) + " | " +
                std::to_string(a.invocations) + ", " + std::to_string(b.invocations) + " |\n";
      }
    }
    *report = copy_out(text);
  });
}

itelab_status itelab_audit(const itelab_config* cfg, const itelab_model* model,
                           const itelab_dataset* ds, char** report) {
  return guard([&] {
    require(cfg, "config");
    require(model, "model");
    require(ds, "dataset");
    require(report, "report");
    const auto& rc = cfg->cfg;
    rc.validate();
    AuditOptions ao;
    ao.pairs = rc.eval_pairs;
    ao.strategy = rc.strategy;
    ao.seed = rc.seed;
    ao.tau_mu = rc.tau_mu;
    ao.tau_sigma = rc.tau_sigma;
    const auto rep = audit_model(model->params, model->codec, test_side(ds), ao, rc.eval_options());
    *report = copy_out(render_audit(rep));
  });
}

itelab_status itelab_ablate(const itelab_config* cfg, const itelab_dataset* ds, const char* run_dir,
                            char** report) {
  return guard([&] {
    require(cfg, "config");
    require(ds, "dataset");
    require(report, "report");
    const auto& rc = cfg->cfg;
    rc.validate();
    test_side(ds);
    const auto codec = codec_for(ds->split);
    auto tc = rc.train_config();
    if (run_dir) set_run_dir(tc, run_dir);
    const auto rep = ablate(ds->split, codec, rc.model_config(), rc.loss_config(), tc, rc.grid,
                            rc.eval_options());
    *report = copy_out(render_ablation(rep, rc.format));
  });
}

}  // extern "C"
