#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "itelab/error.hpp"
#include "itelab/run_config.hpp"

using namespace itelab;

namespace {

std::filesystem::path write_config(const std::string& name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / ("itelab_cfg_" + name);
  std::ofstream(p) << body;
  return p;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("config file keys, comments and overrides") {
  const auto path = write_config("ok", R"(# sweep point
domain = blocksworld   # four blocks
objects = 4
buckets = 2, 4,6
alpha = 0.25
grid = 0:0,0.5:0.125
detached = true

strategy = shuffle-tokens
)");
  RunConfig c;
  c.load(path);
  CHECK(c.domain == Domain::Blocksworld);
  CHECK(c.objects == 4);
  CHECK(c.buckets == std::vector<std::size_t>{2, 4, 6});
  CHECK(c.alpha == 0.25);
  CHECK(c.grid == std::vector<std::pair<double, double>>{{0, 0}, {0.5, 0.125}});
  CHECK(c.detached);
  CHECK(c.strategy == CorruptionStrategy::ShuffleTokens);
  c.set("alpha", "0.5");
  CHECK(c.loss_config().alpha == 0.5);
  CHECK(c.gen_config().per_bucket == c.n);
  c.validate();
}

TEST_CASE("rendered config reloads to the same values") {
  RunConfig c;
  c.set("lr", "0.1");
  c.set("seed", "77");
  c.set("mode", "both");
  c.set("data", "some dir/with spaces");
  const auto path = write_config("render", c.render());
  RunConfig d;
  d.load(path);
  CHECK(d.render() == c.render());
  CHECK(d.lr == 0.1);
  CHECK(d.data == "some dir/with spaces");
  const auto text = c.render();
  CHECK(RunConfig::keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST_CASE("config errors") {
  RunConfig c;
  CHECK(code_of([&] { c.set("learning_rate", "1"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { c.set("epochs", "-3"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { c.set("alpha", "nan"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { c.set("mode", "tree"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { c.set("grid", "0.1"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { c.load("/nonexistent/itelab.cfg"); }) == ErrorCode::Io);

  const auto bad = write_config("bad", "epochs = 3\nthis line has no equals\n");
  try {
    c.load(bad);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  RunConfig v;
  v.workers = 0;
  CHECK(code_of([&] { v.validate(); }) == ErrorCode::InvalidConfig);
  v.workers = 1;
  v.alpha = -1;
  CHECK(code_of([&] { v.validate(); }) == ErrorCode::InvalidConfig);
}
