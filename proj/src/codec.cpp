#include <algorithm>
#include <set>

#include "itelab/corpus.hpp"
#include "itelab/error.hpp"

namespace itelab {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_single(char c) { return c == '<' || c == '>' || c == '|' || c == ';' || c == '[' || c == ']'; }

// Length of the non-space piece starting at text[j].
std::size_t piece_length(std::string_view text, std::size_t j) {
  const auto rest = text.substr(j);
  if (rest.starts_with("||")) return 2;
  if (rest.starts_with("####")) return 4;
  if (rest[0] == '[') {
    const auto close = rest.find_first_of("[]<> \t\r\n", 1);
    if (close != std::string_view::npos && rest[close] == ']') return close + 1;
    return 1;
  }
  if (is_single(rest[0])) return 1;
  std::size_t k = 0;
  while (k < rest.size() && !is_space(rest[k]) && !is_single(rest[k])) ++k;
  return k;
}

const std::vector<std::string>& reserved_pieces() {
  static const std::vector<std::string> r{"<pad>", "<bos>", "<eos>", " ||", " ####", "<"};
  return r;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j == text.size()) {
      out.emplace_back(text.substr(i));
      break;
    }
    const std::size_t end = j + piece_length(text, j);
    out.emplace_back(text.substr(i, end - i));
    i = end;
  }
  return out;
}

Codec::Codec(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (!index_.emplace(pieces_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate vocabulary piece '" + pieces_[i] + "'");
    }
    const auto& p = pieces_[i];
    if (i >= static_cast<std::size_t>(kEos) + 1 && !p.empty() && p.back() == '<' &&
        std::all_of(p.begin(), p.end() - 1, is_space)) {
      step_open_.push_back(static_cast<int>(i));
    }
  }
}

Codec Codec::from_pieces(std::vector<std::string> pieces) {
  const auto& r = reserved_pieces();
  if (pieces.size() < r.size() || !std::equal(r.begin(), r.end(), pieces.begin())) {
    throw Error(ErrorCode::InvalidArgument, "vocabulary does not start with the reserved pieces");
  }
  return Codec(std::move(pieces));
}

Codec Codec::build(std::span<const Sample> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyInput, "cannot build a codec from an empty corpus");
  std::set<std::string> found;
  auto add = [&](std::string_view text) {
    for (auto& p : tokenize(text)) found.insert(std::move(p));
  };
  for (const auto& s : corpus) {
    add(render_training_prompt(s));
    for (const auto& step : step_alphabet(parse_state(s.domain, s.init_text))) {
      add(" <" + step + ">");
      add("<" + step + ">");
    }
  }
  std::vector<std::string> pieces = reserved_pieces();
  for (const auto& r : reserved_pieces()) found.erase(r);
  pieces.insert(pieces.end(), found.begin(), found.end());
  return Codec(std::move(pieces));
}

std::optional<int> Codec::find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Codec::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& p : tokenize(text)) {
    auto id = find(p);
    if (!id || *id <= kEos) {
      throw Error(ErrorCode::UnknownToken, "unknown token '" + p + "'");
    }
    ids.push_back(*id);
  }
  return ids;
}

std::string Codec::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id <= kEos) continue;
    out += piece(id);
  }
  return out;
}

std::vector<int> Codec::training_sequence(const Sample& s) const {
  std::vector<int> seq{kBos};
  const auto body = encode(render_training_prompt(s));
  seq.insert(seq.end(), body.begin(), body.end());
  seq.push_back(kEos);
  return seq;
}

std::vector<int> Codec::test_sequence(const Sample& s) const {
  std::vector<int> seq{kBos};
  const auto body = encode(render_test_prompt(s));
  seq.insert(seq.end(), body.begin(), body.end());
  return seq;
}

bool Codec::is_step_open(int id) const noexcept {
  return std::find(step_open_.begin(), step_open_.end(), id) != step_open_.end();
}

}  // namespace itelab
