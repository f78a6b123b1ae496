#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "itelab/error.hpp"
#include "itelab/run_config.hpp"
#include "text_util.hpp"

namespace itelab {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* want) {
  throw Error(ErrorCode::InvalidConfig, "key '" + std::string(key) + "': '" + std::string(value) +
                                            "' is not " + want);
}

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T as_uint(std::string_view key, std::string_view v) {
  auto x = detail::parse_int<T>(v);
  if (!x) bad_value(key, v, "a non-negative integer");
  return *x;
}

double as_double(std::string_view key, std::string_view v) {
  auto x = detail::parse_double(v);
  if (!x || !std::isfinite(*x)) bad_value(key, v, "a finite number");
  return *x;
}

bool as_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> as_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto part : detail::split(v, ',')) out.push_back(as_uint<std::size_t>(key, detail::trim(part)));
  return out;
}

std::vector<std::pair<double, double>> as_grid(std::string_view key, std::string_view v) {
  std::vector<std::pair<double, double>> out;
  for (auto point : detail::split(v, ',')) {
    auto ab = detail::split(detail::trim(point), ':');
    if (ab.size() != 2) bad_value(key, v, "a list of alpha:beta points");
    out.emplace_back(as_double(key, ab[0]), as_double(key, ab[1]));
  }
  return out;
}

// Wraps the enum parsers so their errors surface as config errors.
template <typename F>
auto as_enum(std::string_view key, std::string_view v, F parse) {
  try {
    return parse(v);
  } catch (const Error&) {
    bad_value(key, v, "a recognised name");
  }
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define UINT_FIELD(name)                                                                  \
  {                                                                                       \
    #name, {                                                                              \
      [](RunConfig& c, std::string_view v) { c.name = as_uint<decltype(c.name)>(#name, v); }, \
          [](const RunConfig& c) { return std::to_string(c.name); }                      \
    }                                                                                     \
  }
#define DOUBLE_FIELD(name)                                                     \
  {                                                                            \
    #name, {                                                                   \
      [](RunConfig& c, std::string_view v) { c.name = as_double(#name, v); }, \
          [](const RunConfig& c) { return fmt_double(c.name); }               \
    }                                                                          \
  }
#define BOOL_FIELD(name)                                                            \
  {                                                                                 \
    #name, {                                                                        \
      [](RunConfig& c, std::string_view v) { c.name = as_bool(#name, v); },        \
          [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); } \
    }                                                                               \
  }
#define STRING_FIELD(name)                                                     \
  {                                                                            \
    #name, {                                                                   \
      [](RunConfig& c, std::string_view v) { c.name = std::string(v); },      \
          [](const RunConfig& c) { return c.name; }                           \
    }                                                                          \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"domain",
       {[](RunConfig& c, std::string_view v) { c.domain = as_enum("domain", v, parse_domain); },
        [](const RunConfig& c) { return std::string(domain_name(c.domain)); }}},
      {"objects",
       {[](RunConfig& c, std::string_view v) { c.objects = as_uint<int>("objects", v); },
        [](const RunConfig& c) { return std::to_string(c.objects); }}},
      UINT_FIELD(rods),
      {"buckets",
       {[](RunConfig& c, std::string_view v) { c.buckets = as_list("buckets", v); },
        [](const RunConfig& c) {
          std::vector<std::string> parts;
          for (auto b : c.buckets) parts.push_back(std::to_string(b));
          return detail::join(parts, ",");
        }}},
      UINT_FIELD(n),
      DOUBLE_FIELD(test_fraction),
      UINT_FIELD(context_window),
      UINT_FIELD(embed_dim),
      UINT_FIELD(hidden_dim),
      BOOL_FIELD(sliding_window),
      DOUBLE_FIELD(alpha),
      DOUBLE_FIELD(beta),
      UINT_FIELD(pairs_per_batch),
      {"strategy",
       {[](RunConfig& c, std::string_view v) {
          c.strategy = as_enum("strategy", v, parse_corruption);
        },
        [](const RunConfig& c) { return std::string(corruption_name(c.strategy)); }}},
      BOOL_FIELD(detached),
      {"outcome",
       {[](RunConfig& c, std::string_view v) {
          c.outcome = as_enum("outcome", v, parse_outcome_mode);
        },
        [](const RunConfig& c) { return std::string(outcome_mode_name(c.outcome)); }}},
      UINT_FIELD(epochs),
      DOUBLE_FIELD(lr),
      DOUBLE_FIELD(momentum),
      UINT_FIELD(batch_size),
      UINT_FIELD(eval_pairs),
      {"grid",
       {[](RunConfig& c, std::string_view v) { c.grid = as_grid("grid", v); },
        [](const RunConfig& c) {
          std::vector<std::string> parts;
          for (auto [a, b] : c.grid) parts.push_back(fmt_double(a) + ":" + fmt_double(b));
          return detail::join(parts, ",");
        }}},
      {"mode",
       {[](RunConfig& c, std::string_view v) {
          if (v != "both") (void)as_enum("mode", v, parse_decode_mode);
          c.mode = std::string(v);
        },
        [](const RunConfig& c) { return c.mode; }}},
      UINT_FIELD(max_len),
      UINT_FIELD(repetitions),
      {"format",
       {[](RunConfig& c, std::string_view v) { c.format = as_enum("format", v, parse_report_format); },
        [](const RunConfig& c) {
          return std::string(c.format == ReportFormat::Csv ? "csv" : "markdown");
        }}},
      STRING_FIELD(tag),
      DOUBLE_FIELD(tau_mu),
      DOUBLE_FIELD(tau_sigma),
      UINT_FIELD(seed),
      UINT_FIELD(workers),
      STRING_FIELD(data),
      STRING_FIELD(model),
      STRING_FIELD(out),
  };
  return table;
}

#undef UINT_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD

const Field& field(std::string_view key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  field(key).set(*this, detail::trim(value));
}

std::string RunConfig::get(std::string_view key) const { return field(key).get(*this); }

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + path.string());
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    std::string_view body = line;
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  path.string() + ":" + std::to_string(no) + ": expected 'key = value'");
    }
    try {
      set(detail::trim(body.substr(0, eq)), body.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

void RunConfig::validate() const {
  auto invalid = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (workers == 0) invalid("workers must be at least 1");
  if (!(test_fraction >= 0 && test_fraction <= 1)) invalid("test_fraction must be within [0, 1]");
  if (lr <= 0) invalid("lr must be positive");
  if (momentum < 0 || momentum >= 1) invalid("momentum must be within [0, 1)");
  if (repetitions < 3) invalid("repetitions must be at least 3");
  if (tau_mu < 0 || tau_sigma < 0) invalid("scenario thresholds must be non-negative");
  if (grid.empty()) invalid("grid is empty");
  // vocab_size comes from the codec later; check the shape fields only
  ModelConfig probe = model_config();
  probe.vocab_size = Codec::kReserved + 1;
  probe.validate();
  loss_config().validate();
}

std::string RunConfig::render() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

GenConfig RunConfig::gen_config() const {
  GenConfig g;
  g.domain = domain;
  g.objects = objects;
  g.rods = rods;
  g.per_bucket = n;
  g.buckets = buckets;
  g.seed = seed;
  return g;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.vocab_size = 0;
  m.context_window = context_window;
  m.embed_dim = embed_dim;
  m.hidden_dim = hidden_dim;
  m.seed = seed;
  m.sliding_window = sliding_window;
  return m;
}

LossConfig RunConfig::loss_config() const {
  LossConfig l;
  l.alpha = alpha;
  l.beta = beta;
  l.pairs_per_batch = pairs_per_batch;
  l.strategy = strategy;
  l.detached = detached;
  l.outcome = outcome;
  return l;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.lr = lr;
  t.momentum = momentum;
  t.batch_size = batch_size;
  t.seed = seed;
  t.workers = workers;
  t.eval_pairs = eval_pairs;
  return t;
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions e;
  e.model = tag;
  e.max_len = max_len;
  e.workers = workers;
  return e;
}

}  // namespace itelab
