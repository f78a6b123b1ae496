#include "itelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <thread>

#include "itelab/error.hpp"

namespace itelab {

void ModelConfig::validate() const {
  if (vocab_size == 0 || context_window == 0 || embed_dim == 0 || hidden_dim == 0) {
    throw Error(ErrorCode::InvalidConfig, "model dimensions must all be >= 1");
  }
}

ParamLayout ParamLayout::of(const ModelConfig& cfg) {
  ParamLayout l;
  const auto V = cfg.vocab_size, C = cfg.context_window, E = cfg.embed_dim, H = cfg.hidden_dim;
  l.tok = 0;
  l.pos = l.tok + V * E;
  l.w1 = l.pos + C * E;
  l.b1 = l.w1 + H * E;
  l.w2 = l.b1 + H;
  l.b2 = l.w2 + V * H;
  l.total = l.b2 + V;
  return l;
}

Params Params::zeros(const ModelConfig& cfg) {
  cfg.validate();
  return Params{cfg, std::vector<double>(ParamLayout::of(cfg).total, 0.0)};
}

Params init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Params p = Params::zeros(cfg);
  const auto l = p.layout();
  Rng rng(seed);
  auto fill = [&](std::size_t from, std::size_t to, double scale) {
    for (std::size_t i = from; i < to; ++i) p.values[i] = rng.uniform(-scale, scale);
  };
  fill(l.tok, l.pos, 1.0);
  fill(l.pos, l.w1, 1.0);
  fill(l.w1, l.b1, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)));
  fill(l.w2, l.b2, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
  return p;
}

std::uint64_t params_hash(const Params& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(p.values.data());
  for (std::size_t i = 0; i < p.values.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

// Scratch buffers for one forward/backward at a single position.
struct Workspace {
  std::vector<double> z, h, logits, dz, dh;
  std::vector<double> dZ;  // per-position dz, non-sliding backward

  explicit Workspace(const ModelConfig& c)
      : z(c.embed_dim), h(c.hidden_dim), logits(c.vocab_size), dz(c.embed_dim), dh(c.hidden_dim) {}
};

class Net {
 public:
  explicit Net(const Params& p) : cfg_(p.config), l_(p.layout()), w_(p.values.data()) {
    if (p.values.size() != l_.total) {
      throw Error(ErrorCode::InvalidArgument, "parameter vector does not match its config");
    }
  }

  const ModelConfig& cfg() const { return cfg_; }
  const double* tok(int id) const { return w_ + l_.tok + static_cast<std::size_t>(id) * cfg_.embed_dim; }
  const double* pos(std::size_t t) const { return w_ + l_.pos + t * cfg_.embed_dim; }

  void check_ids(std::span<const int> ids) const {
    for (int id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
        throw Error(ErrorCode::InvalidArgument, "token id " + std::to_string(id) + " out of range");
      }
    }
  }

  // Pooled embedding of ids[from, to) with positions counted from `from`.
  void pool(std::span<const int> ids, std::size_t from, std::size_t to, double* z) const {
    const std::size_t E = cfg_.embed_dim;
    std::fill(z, z + E, 0.0);
    for (std::size_t t = from; t < to; ++t) {
      const double* a = tok(ids[t]);
      const double* b = pos(t - from);
      for (std::size_t e = 0; e < E; ++e) z[e] += a[e] * b[e];
    }
    if (to > from) {
      const double len = static_cast<double>(to - from);
      for (std::size_t e = 0; e < E; ++e) z[e] /= len;
    }
  }

  // h and logits from z.
  void head(Workspace& ws) const {
    const std::size_t E = cfg_.embed_dim, H = cfg_.hidden_dim, V = cfg_.vocab_size;
    const double* W1 = w_ + l_.w1;
    const double* b1 = w_ + l_.b1;
    for (std::size_t i = 0; i < H; ++i) {
      double a = b1[i];
      const double* row = W1 + i * E;
      for (std::size_t e = 0; e < E; ++e) a += row[e] * ws.z[e];
      ws.h[i] = std::tanh(a);
    }
    const double* W2 = w_ + l_.w2;
    const double* b2 = w_ + l_.b2;
    for (std::size_t v = 0; v < V; ++v) {
      double a = b2[v];
      const double* row = W2 + v * H;
      for (std::size_t i = 0; i < H; ++i) a += row[i] * ws.h[i];
      ws.logits[v] = a;
    }
  }

  // Turns logits into probabilities in place and returns log P(target).
  static double softmax(std::vector<double>& logits, int target) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (double x : logits) sum += std::exp(x - m);
    const double lse = m + std::log(sum);
    const double lp = target >= 0 ? logits[static_cast<std::size_t>(target)] - lse : 0.0;
    for (double& x : logits) x = std::exp(x - lse);
    return lp;
  }

  // Backward through head for d(weight * log P(target)); ws.logits holds
  // probabilities. Leaves dL/dz in ws.dz.
  void head_backward(Workspace& ws, int target, double weight, double* g) const {
    const std::size_t E = cfg_.embed_dim, H = cfg_.hidden_dim, V = cfg_.vocab_size;
    const double* W1 = w_ + l_.w1;
    const double* W2 = w_ + l_.w2;
    std::fill(ws.dh.begin(), ws.dh.end(), 0.0);
    for (std::size_t v = 0; v < V; ++v) {
      const double d = weight * ((static_cast<int>(v) == target ? 1.0 : 0.0) - ws.logits[v]);
      if (d == 0.0) continue;
      g[l_.b2 + v] += d;
      double* gw = g + l_.w2 + v * H;
      const double* row = W2 + v * H;
      for (std::size_t i = 0; i < H; ++i) {
        gw[i] += d * ws.h[i];
        ws.dh[i] += d * row[i];
      }
    }
    std::fill(ws.dz.begin(), ws.dz.end(), 0.0);
    for (std::size_t i = 0; i < H; ++i) {
      const double da = ws.dh[i] * (1.0 - ws.h[i] * ws.h[i]);
      if (da == 0.0) continue;
      g[l_.b1 + i] += da;
      double* gw = g + l_.w1 + i * E;
      const double* row = W1 + i * E;
      for (std::size_t e = 0; e < E; ++e) {
        gw[e] += da * ws.z[e];
        ws.dz[e] += da * row[e];
      }
    }
  }

  // Adds d/d(tok, pos) of dz . pool(ids[from, to)).
  void pool_backward(std::span<const int> ids, std::size_t from, std::size_t to, const double* dz,
                     double* g) const {
    const std::size_t E = cfg_.embed_dim;
    const double len = static_cast<double>(to - from);
    for (std::size_t t = from; t < to; ++t) {
      const double* a = tok(ids[t]);
      const double* b = pos(t - from);
      double* ga = g + l_.tok + static_cast<std::size_t>(ids[t]) * E;
      double* gb = g + l_.pos + (t - from) * E;
      for (std::size_t e = 0; e < E; ++e) {
        const double d = dz[e] / len;
        ga[e] += d * b[e];
        gb[e] += d * a[e];
      }
    }
  }

  // Window [from, L) used to predict ids[L].
  std::size_t window_start(std::size_t L) const {
    if (L <= cfg_.context_window) return 0;
    if (!cfg_.sliding_window) {
      throw Error(ErrorCode::ContextOverflow, "context of " + std::to_string(L) +
                                                  " tokens exceeds window " +
                                                  std::to_string(cfg_.context_window));
    }
    return L - cfg_.context_window;
  }

  // log P(ids[begin..] | ids[..begin)); with g, also adds weight * gradient.
  double span(std::span<const int> ids, std::size_t begin, double weight, double* g,
              Workspace& ws) const {
    const std::size_t n = ids.size();
    if (begin < 1 || begin > n) {
      throw Error(ErrorCode::InvalidArgument, "span target must start after at least one token");
    }
    check_ids(ids);
    if (begin == n) return 0.0;
    window_start(n - 1);  // overflow check up front

    const std::size_t E = cfg_.embed_dim;
    const bool slides = n - 1 > cfg_.context_window;
    double value = 0;
    if (slides) {
      for (std::size_t L = begin; L < n; ++L) {
        const std::size_t from = window_start(L);
        pool(ids, from, L, ws.z.data());
        head(ws);
        value += softmax(ws.logits, ids[L]);
        if (g) {
          head_backward(ws, ids[L], weight, g);
          pool_backward(ids, from, L, ws.dz.data(), g);
        }
      }
      return value;
    }

    // Shared prefix: running sum S_L, and d/dz_L pushed back with suffix sums.
    std::vector<double> S(E, 0.0);
    if (g) ws.dZ.assign(n * E, 0.0);
    for (std::size_t L = 1; L < n; ++L) {
      const double* a = tok(ids[L - 1]);
      const double* b = pos(L - 1);
      for (std::size_t e = 0; e < E; ++e) S[e] += a[e] * b[e];
      if (L < begin) continue;
      const double len = static_cast<double>(L);
      for (std::size_t e = 0; e < E; ++e) ws.z[e] = S[e] / len;
      head(ws);
      value += softmax(ws.logits, ids[L]);
      if (g) {
        head_backward(ws, ids[L], weight, g);
        std::copy(ws.dz.begin(), ws.dz.end(), ws.dZ.begin() + static_cast<std::ptrdiff_t>(L * E));
      }
    }
    if (g) {
      std::vector<double> G(E, 0.0);
      for (std::size_t t = n - 1; t-- > 0;) {
        const std::size_t L = t + 1;
        if (L >= begin) {
          const double len = static_cast<double>(L);
          for (std::size_t e = 0; e < E; ++e) G[e] += ws.dZ[L * E + e] / len;
        }
        const double* a = tok(ids[t]);
        const double* b = pos(t);
        double* ga = g + l_.tok + static_cast<std::size_t>(ids[t]) * E;
        double* gb = g + l_.pos + t * E;
        for (std::size_t e = 0; e < E; ++e) {
          ga[e] += G[e] * b[e];
          gb[e] += G[e] * a[e];
        }
      }
    }
    return value;
  }

  // Logits for predicting the token after `context` (left in ws.logits).
  void next_logits(std::span<const int> context, Workspace& ws) const {
    check_ids(context);
    const std::size_t from = window_start(context.size());
    pool(context, from, context.size(), ws.z.data());
    head(ws);
  }

 private:
  const ModelConfig& cfg_;
  ParamLayout l_;
  const double* w_;
};

constexpr std::size_t kChunks = 16;

// Runs fn(chunk) for every chunk index, spread over up to `workers` threads.
template <typename Fn>
void for_chunks(std::size_t chunks, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, chunks));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex mu;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) fn(c);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<double> forward(const Params& p, std::span<const int> context) {
  Net net(p);
  Workspace ws(p.config);
  net.next_logits(context, ws);
  Net::softmax(ws.logits, -1);
  return ws.logits;
}

SequenceNll sequence_nll(const Params& p, std::span<const int> tokens) {
  if (tokens.size() < 2) throw Error(ErrorCode::InvalidArgument, "sequence needs at least 2 tokens");
  Net net(p);
  Workspace ws(p.config);
  const double total = -net.span(tokens, 1, 0.0, nullptr, ws);
  return {total, total / static_cast<double>(tokens.size() - 1)};
}

double perplexity(const Params& p, std::span<const std::vector<int>> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyInput, "perplexity of an empty corpus");
  double total = 0;
  std::size_t count = 0;
  for (const auto& seq : corpus) {
    total += sequence_nll(p, seq).total;
    count += seq.size() - 1;
  }
  return std::exp(total / static_cast<double>(count));
}

double span_log_prob(const Params& p, const ScoredSpan& s) {
  Net net(p);
  Workspace ws(p.config);
  return net.span(s.tokens, s.begin, 0.0, nullptr, ws);
}

std::vector<double> span_log_probs(const Params& p, std::span<const ScoredSpan> spans,
                                   std::size_t workers) {
  Net net(p);
  std::vector<double> out(spans.size());
  const std::size_t chunks = std::min(kChunks, spans.size());
  for_chunks(chunks, workers, [&](std::size_t c) {
    Workspace ws(p.config);
    for (std::size_t i = c; i < spans.size(); i += chunks) {
      out[i] = net.span(spans[i].tokens, spans[i].begin, 0.0, nullptr, ws);
    }
  });
  return out;
}

std::vector<double> accumulate_span_gradient(const Params& p, std::span<const ScoredSpan> spans,
                                             std::span<const double> weights,
                                             std::span<double> grad, std::size_t workers) {
  if (weights.size() != spans.size() || grad.size() != p.values.size()) {
    throw Error(ErrorCode::InvalidArgument, "gradient buffers do not match spans/params");
  }
  Net net(p);
  std::vector<double> out(spans.size());
  const std::size_t chunks = std::min(kChunks, spans.size());
  std::vector<std::vector<double>> partial(chunks);
  for_chunks(chunks, workers, [&](std::size_t c) {
    Workspace ws(p.config);
    partial[c].assign(p.values.size(), 0.0);
    for (std::size_t i = c; i < spans.size(); i += chunks) {
      out[i] = net.span(spans[i].tokens, spans[i].begin, weights[i], partial[c].data(), ws);
    }
  });
  for (const auto& part : partial) {
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += part[k];
  }
  return out;
}

double loss_gradient(const Params& p, std::span<const ScoredSpan> spans,
                     const SpanObjective& objective, std::span<double> grad, std::size_t workers) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto values = span_log_probs(p, spans, workers);
  std::vector<double> dvalues(values.size(), 0.0);
  const double loss = objective(values, dvalues);
  accumulate_span_gradient(p, spans, dvalues, grad, workers);
  return loss;
}

// ---------------------------------------------------------------------------

std::string_view decode_mode_name(DecodeMode m) noexcept {
  return m == DecodeMode::OneShot ? "one_shot" : "chained";
}

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "one_shot" || text == "one-shot" || text == "oneshot") return DecodeMode::OneShot;
  if (text == "chained") return DecodeMode::Chained;
  throw Error(ErrorCode::InvalidArgument, "unknown decode mode '" + std::string(text) + "'");
}

namespace {

// Incremental greedy session: keeps the running pooled sum of its context.
class Session {
 public:
  Session(const Net& net, std::vector<int> context)
      : net_(net), ws_(net.cfg()), ids_(std::move(context)), sum_(net.cfg().embed_dim, 0.0) {
    net_.check_ids(ids_);
    net_.window_start(ids_.size());
    for (std::size_t t = 0; t < ids_.size(); ++t) add(t);
  }

  bool full() const {
    return !net_.cfg().sliding_window && ids_.size() > net_.cfg().context_window;
  }

  int argmax() {
    const std::size_t n = ids_.size();
    if (n > net_.cfg().context_window) {
      net_.pool(ids_, n - net_.cfg().context_window, n, ws_.z.data());
    } else {
      const double len = static_cast<double>(n);
      for (std::size_t e = 0; e < sum_.size(); ++e) ws_.z[e] = n ? sum_[e] / len : 0.0;
    }
    net_.head(ws_);
    const auto it = std::max_element(ws_.logits.begin(), ws_.logits.end());
    return static_cast<int>(it - ws_.logits.begin());
  }

  void push(int id) {
    ids_.push_back(id);
    add(ids_.size() - 1);
  }

  const std::vector<int>& ids() const { return ids_; }

 private:
  void add(std::size_t t) {
    if (t >= net_.cfg().context_window) return;  // sliding windows are re-pooled
    const double* a = net_.tok(ids_[t]);
    const double* b = net_.pos(t);
    for (std::size_t e = 0; e < sum_.size(); ++e) sum_[e] += a[e] * b[e];
  }

  const Net& net_;
  Workspace ws_;
  std::vector<int> ids_;
  std::vector<double> sum_;
};

}  // namespace

DecodeResult decode(const Params& p, const Codec& codec, std::span<const int> prompt,
                    DecodeMode mode, std::size_t max_len) {
  Net net(p);
  if (codec.size() != p.config.vocab_size) {
    throw Error(ErrorCode::InvalidArgument, "codec and model vocabularies differ");
  }
  DecodeResult out;
  std::vector<int> so_far(prompt.begin(), prompt.end());

  if (mode == DecodeMode::OneShot) {
    Session s(net, so_far);
    out.invocations = 1;
    while (out.tokens.size() < max_len && !s.full()) {
      const int id = s.argmax();
      out.tokens.push_back(id);
      s.push(id);
      if (id == Codec::kEos) {
        out.terminated = true;
        break;
      }
    }
    return out;
  }

  for (;;) {
    // Fresh session over re-encoded text; raw ids are kept when the text no
    // longer tokenizes back into the vocabulary.
    std::vector<int> context = so_far;
    if (!out.tokens.empty()) {
      try {
        const auto body = codec.encode(codec.decode(so_far));
        context.assign(1, Codec::kBos);
        context.insert(context.end(), body.begin(), body.end());
      } catch (const Error&) {
      }
    }
    Session s(net, std::move(context));
    ++out.invocations;
    bool opened = false;
    for (;;) {
      if (out.tokens.size() >= max_len || s.full()) return out;
      const int id = s.argmax();
      if (codec.is_step_open(id)) {
        if (opened) break;
        opened = true;
      }
      out.tokens.push_back(id);
      so_far.push_back(id);
      s.push(id);
      if (id == Codec::kEos) {
        out.terminated = true;
        return out;
      }
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'I', 'T', 'L', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits, 8);
  }
  void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& data() const { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : buf_(std::move(data)) {}
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[at_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    at_ += static_cast<std::size_t>(n);
    return v;
  }
  double f64() {
    const std::uint64_t bits = le(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(at_, n);
    at_ += n;
    return s;
  }
  bool done() const { return at_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - at_ < n) throw ParseError(1, "checkpoint truncated");
  }
  std::string buf_;
  std::size_t at_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& c = ckpt.params.config;
  Writer w;
  w.bytes(kMagic, 8);
  w.u64(c.vocab_size);
  w.u64(c.context_window);
  w.u64(c.embed_dim);
  w.u64(c.hidden_dim);
  w.u64(c.seed);
  w.u8(c.sliding_window ? 1 : 0);
  w.u64(ckpt.version);
  w.u32(static_cast<std::uint32_t>(ckpt.metrics.size()));
  for (const auto& [name, value] : ckpt.metrics) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.f64(value);
  }
  w.u64(ckpt.params.values.size());
  for (double v : ckpt.params.values) w.f64(v);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot move checkpoint into " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));
  if (r.bytes(8) != std::string(kMagic, 8)) throw ParseError(1, "not a checkpoint file");
  Checkpoint ck;
  ModelConfig c;
  c.vocab_size = r.le(8);
  c.context_window = r.le(8);
  c.embed_dim = r.le(8);
  c.hidden_dim = r.le(8);
  c.seed = r.le(8);
  c.sliding_window = r.le(1) != 0;
  ck.version = r.le(8);
  const auto n_metrics = r.le(4);
  for (std::uint64_t i = 0; i < n_metrics; ++i) {
    auto name = r.bytes(r.le(2));
    ck.metrics.emplace_back(std::move(name), r.f64());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw ParseError(1, std::string("checkpoint config: ") + e.what());
  }
  const auto n = r.le(8);
  if (n != ParamLayout::of(c).total) throw ParseError(1, "parameter count disagrees with config");
  ck.params.config = c;
  ck.params.values.resize(n);
  for (auto& v : ck.params.values) v = r.f64();
  if (!r.done()) throw ParseError(1, "trailing bytes after parameters");
  return ck;
}

}  // namespace itelab
