#include <fstream>
#include <sstream>

#include "itelab/corpus.hpp"
#include "itelab/error.hpp"
#include "text_util.hpp"

namespace itelab {

namespace {

void check_field(const std::string& field, const char* what) {
  if (field.find_first_of("\t\n") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " contains a tab or newline");
  }
}

}  // namespace

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  for (const auto& s : samples) {
    check_field(s.init_text, "init state");
    check_field(s.goal_text, "goal state");
    const auto path_text = render_pathway(s.steps);
    check_field(path_text, "pathway");
    out << domain_name(s.domain) << '\t' << s.n_steps << '\t' << s.init_text << '\t'
        << s.goal_text << '\t' << path_text << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<Sample> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 5) {
      throw ParseError(lineno, "expected 5 tab-separated fields, found " + std::to_string(fields.size()));
    }
    Sample s;
    try {
      s.domain = parse_domain(fields[0]);
    } catch (const Error&) {
      throw ParseError(lineno, "unknown domain '" + std::string(fields[0]) + "'");
    }
    auto n = detail::parse_int<std::size_t>(fields[1]);
    if (!n) throw ParseError(lineno, "n_steps is not a non-negative integer");
    s.n_steps = *n;
    s.init_text = fields[2];
    s.goal_text = fields[3];
    try {
      s.steps = parse_pathway("#### " + std::string(fields[4]));
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
    if (s.steps.size() != s.n_steps) {
      throw ParseError(lineno, "n_steps disagrees with the pathway length");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_samples(dir / "train.tsv", split.train);
  write_samples(dir / "test.tsv", split.test);
  std::ofstream meta(dir / "split.txt", std::ios::binary);
  meta << "seed = " << split.seed << '\n';
  if (!meta) throw Error(ErrorCode::Io, "cannot write split.txt in " + dir.string());
}

DatasetSplit read_split(const std::filesystem::path& dir) {
  DatasetSplit split;
  split.train = read_samples(dir / "train.tsv");
  split.test = read_samples(dir / "test.tsv");
  std::ifstream meta(dir / "split.txt");
  if (!meta) throw Error(ErrorCode::Io, "missing split.txt in " + dir.string());
  std::string line;
  std::getline(meta, line);
  const auto eq = line.find('=');
  auto seed = eq == std::string::npos
                  ? std::nullopt
                  : detail::parse_int<std::uint64_t>(detail::trim(std::string_view(line).substr(eq + 1)));
  if (!seed) throw ParseError(1, "split.txt: expected 'seed = <n>'");
  split.seed = *seed;
  return split;
}

}  // namespace itelab
