// Command-line front end. Talks to the library through the C API only.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "itelab.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
  itelab_status status;
  std::string message;
};

void check(itelab_status st) {
  if (st != ITELAB_OK) throw Failure{st, itelab_last_error()};
}

[[noreturn]] void fail(itelab_status st, const std::string& msg) { throw Failure{st, msg}; }

int exit_code(itelab_status st) { return st == ITELAB_IO_ERROR ? 2 : 1; }

struct Owned {
  char* s = nullptr;
  ~Owned() { itelab_string_free(s); }
  std::string str() const { return s ? s : ""; }
};

using ConfigPtr = std::unique_ptr<itelab_config, decltype(&itelab_config_free)>;
using DatasetPtr = std::unique_ptr<itelab_dataset, decltype(&itelab_dataset_free)>;
using ModelPtr = std::unique_ptr<itelab_model, decltype(&itelab_model_free)>;

std::string get(const itelab_config* cfg, const char* key) {
  Owned v;
  check(itelab_config_get(cfg, key, &v.s));
  return v.str();
}

// Flag values captured by CLI11 for one subcommand.
struct Flags {
  std::string config_file;
  std::map<std::string, std::string> values;  // config key -> raw value
};

void add_key_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config_file, "key = value config file");
  for (std::size_t i = 0; i < itelab_config_key_count(); ++i) {
    const std::string key = itelab_config_key(i);
    std::string names = "--" + key;
    if (key.find('_') != std::string::npos) {
      std::string dashed = key;
      for (auto& c : dashed) c = c == '_' ? '-' : c;
      names += ",--" + dashed;
    }
    if (key == "objects") names += ",--disks,--blocks";
    sub->add_option(names, flags.values[key], "config key '" + key + "'");
  }
}

ConfigPtr resolve(CLI::App* sub, const Flags& flags) {
  itelab_config* raw = nullptr;
  check(itelab_config_new(&raw));
  ConfigPtr cfg(raw, itelab_config_free);
  if (!flags.config_file.empty()) check(itelab_config_load(cfg.get(), flags.config_file.c_str()));
  for (std::size_t i = 0; i < itelab_config_key_count(); ++i) {
    const std::string key = itelab_config_key(i);
    if (sub->get_option("--" + key)->count() == 0) continue;
    check(itelab_config_set(cfg.get(), key.c_str(), flags.values.at(key).c_str()));
  }
  check(itelab_config_validate(cfg.get()));
  return cfg;
}

std::string rendered(const itelab_config* cfg) {
  Owned text;
  check(itelab_config_render(cfg, &text.s));
  return text.str();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path make_run_dir(const itelab_config* cfg, const std::string& command) {
  std::string root = get(cfg, "out");
  if (root.empty()) root = "runs";
  const std::string base = command + "-seed" + get(cfg, "seed") + "-" + timestamp();
  fs::path dir = fs::path(root) / base;
  for (int k = 1; fs::exists(dir); ++k) dir = fs::path(root) / (base + "-" + std::to_string(k));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ITELAB_IO_ERROR, "cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ITELAB_IO_ERROR, "cannot write " + path.string());
}

std::string require_path(const itelab_config* cfg, const char* key) {
  auto v = get(cfg, key);
  if (v.empty()) fail(ITELAB_INVALID_CONFIG, std::string("missing --") + key);
  return v;
}

DatasetPtr load_dataset(const itelab_config* cfg) {
  itelab_dataset* raw = nullptr;
  check(itelab_dataset_load(require_path(cfg, "data").c_str(), &raw));
  return DatasetPtr(raw, itelab_dataset_free);
}

ModelPtr load_model(const itelab_config* cfg) {
  itelab_model* raw = nullptr;
  check(itelab_model_load(require_path(cfg, "model").c_str(), &raw));
  return ModelPtr(raw, itelab_model_free);
}

std::string report_name(const itelab_config* cfg) {
  return get(cfg, "format") == "csv" ? "report.csv" : "report.md";
}

void echo_config(const std::string& command, const itelab_config* cfg) {
  std::cout << "# itelab " << command << " effective config\n" << rendered(cfg) << "# ---\n";
}

void run(const std::string& command, const itelab_config* cfg) {
  echo_config(command, cfg);

  if (command == "gen") {
    itelab_dataset* raw = nullptr;
    check(itelab_gen(cfg, &raw));
    DatasetPtr ds(raw, itelab_dataset_free);
    const auto out = require_path(cfg, "out");
    check(itelab_dataset_save(ds.get(), out.c_str()));
    std::cout << "train = " << itelab_dataset_size(ds.get(), 0) << "\n"
              << "test = " << itelab_dataset_size(ds.get(), 1) << "\n"
              << "written = " << out << "\n";
    return;
  }

  const auto ds = load_dataset(cfg);
  const auto dir = make_run_dir(cfg, command);
  write_file(dir / "config.txt", rendered(cfg));
  Owned report;

  if (command == "train") {
    itelab_model* raw = nullptr;
    check(itelab_train(cfg, ds.get(), dir.c_str(), &raw, &report.s));
    ModelPtr model(raw, itelab_model_free);
    const auto model_dir = dir / "model";
    check(itelab_model_save(model.get(), model_dir.c_str()));
    write_file(dir / "summary.txt", report.str());
    std::cout << report.str() << "model = " << model_dir.string() << "\n";
  } else if (command == "ablate") {
    check(itelab_ablate(cfg, ds.get(), dir.c_str(), &report.s));
    write_file(dir / report_name(cfg), report.str());
    std::cout << report.str();
  } else {
    const auto model = load_model(cfg);
    if (command == "eval") {
      check(itelab_eval(cfg, model.get(), ds.get(), &report.s));
      write_file(dir / report_name(cfg), report.str());
    } else if (command == "bench") {
      check(itelab_bench(cfg, model.get(), ds.get(), &report.s));
      write_file(dir / report_name(cfg), report.str());
    } else {
      check(itelab_audit(cfg, model.get(), ds.get(), &report.s));
      write_file(dir / "audit.csv", report.str());
    }
    std::cout << report.str();
  }
  std::cout << "# run_dir = " << dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning corpora, a toy causal-loss language model and its evaluation harness"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "generate a dataset split into --out"},
      {"train", "train a model on --data"},
      {"eval", "success rates of --model on the test side of --data"},
      {"ablate", "train and evaluate one model per alpha:beta --grid point"},
      {"audit", "P/Q hallucination table and ITE summary of --model"},
      {"bench", "one-shot vs chained decode timing"},
  };
  std::map<std::string, Flags> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_key_flags(subs[name], flags[name]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      const auto cfg = resolve(sub, flags[name]);
      run(name, cfg.get());
      return 0;
    } catch (const Failure& f) {
      std::cout.flush();
      std::cerr << "itelab " << name << ": " << itelab_status_name(f.status) << ": " << f.message
                << "\n";
      return exit_code(f.status);
    }
  }
  return 1;
}
