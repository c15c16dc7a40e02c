#include "uagc/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <zlib.h>

#include "uagc/activity.hpp"
#include "uagc/error.hpp"

namespace uagc::models {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

// (B, T, N) slice at time t -> (B, N, 1)
Tensor time_slice(const Tensor& series, std::size_t t) {
  const std::size_t b = series.dim(0), len = series.dim(1), n = series.dim(2);
  Tensor out(Shape{b, n, 1});
  for (std::size_t i = 0; i < b; ++i)
    std::copy_n(series.data() + (i * len + t) * n, n, out.data() + i * n);
  return out;
}

}  // namespace

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::gcrn: return "GCRN";
    case Architecture::gctf: return "GCTF";
    case Architecture::lstm: return "LSTM";
    case Architecture::tf: return "TF";
  }
  return "?";
}

std::string to_string(EmbeddingMode m) {
  switch (m) {
    case EmbeddingMode::activity: return "AE";
    case EmbeddingMode::timestamp: return "TE";
    case EmbeddingMode::none: return "none";
  }
  return "?";
}

Architecture parse_architecture(std::string_view text) {
  const auto s = upper(text);
  if (s == "GCRN" || s == "UAGCRN") return Architecture::gcrn;
  if (s == "GCTF" || s == "UAGCTRANSFORMER") return Architecture::gctf;
  if (s == "LSTM" || s == "UA-LSTM") return Architecture::lstm;
  if (s == "TF" || s == "UA-TRANSFORMER") return Architecture::tf;
  throw UsageError("unknown architecture '" + std::string(text) + "' (expected GCRN, GCTF, LSTM or TF)");
}

EmbeddingMode parse_embedding_mode(std::string_view text) {
  const auto s = upper(text);
  if (s == "AE") return EmbeddingMode::activity;
  if (s == "TE") return EmbeddingMode::timestamp;
  if (s == "NONE") return EmbeddingMode::none;
  throw UsageError("unknown embedding mode '" + std::string(text) + "' (expected AE, TE or none)");
}

std::size_t ModelConfig::context_width() const {
  switch (embedding) {
    case EmbeddingMode::activity: return n_categories;
    case EmbeddingMode::timestamp: return kTimestampFeatureSize;
    case EmbeddingMode::none: return 0;
  }
  return 0;
}

void ModelConfig::validate() const {
  if (n_sensors == 0) throw UsageError("model: sensor count must be positive");
  if (d_model == 0) throw UsageError("model: hidden dimension must be positive");
  if (p == 0 || q == 0) throw UsageError("model: P and Q must be positive");
  if (k_diffusion == 0) throw UsageError("model: diffusion steps K must be >= 1");
  if (is_transformer() && n_heads * d_key != d_model)
    throw UsageError("model: n_heads * d_key (" + std::to_string(n_heads * d_key) +
                     ") must equal D (" + std::to_string(d_model) + ")");
  if (embedding == EmbeddingMode::activity && n_categories == 0)
    throw UsageError("model: activity embedding needs at least one category");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"architecture", to_string(c.architecture)},
          {"n_sensors", c.n_sensors},
          {"d_model", c.d_model},
          {"p", c.p},
          {"q", c.q},
          {"k_diffusion", c.k_diffusion},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"d_key", c.d_key},
          {"n_categories", c.n_categories},
          {"embedding", to_string(c.embedding)},
          {"sensor_embedding", c.sensor_embedding}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.architecture = parse_architecture(j.at("architecture").get<std::string>());
    c.n_sensors = j.at("n_sensors").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.p = j.at("p").get<std::size_t>();
    c.q = j.at("q").get<std::size_t>();
    c.k_diffusion = j.at("k_diffusion").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_key = j.at("d_key").get<std::size_t>();
    c.n_categories = j.at("n_categories").get<std::size_t>();
    c.embedding = parse_embedding_mode(j.at("embedding").get<std::string>());
    c.sensor_embedding = j.at("sensor_embedding").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model config: ") + e.what());
  }
}

GraphOperators GraphOperators::from(const SensorAdjacency& adj) {
  return {ad::make_sparse_operator(adj.fwd), ad::make_sparse_operator(adj.bwd)};
}

Var dual_walk_gconv(const Var& z, const GraphOperators& g, const std::vector<Var>& w_fwd,
                    const std::vector<Var>& w_bwd, const Var& w_self, const Var& bias,
                    std::size_t sensor_axis) {
  if (w_fwd.size() != w_bwd.size()) throw ShapeError("gconv: forward/backward weight count differ");
  if (!w_fwd.empty() && g.empty()) throw UsageError("gconv: no graph operators bound");
  std::vector<Var> xs{z}, ws{w_self};
  Var zf = z, zb = z;
  for (std::size_t k = 0; k < w_fwd.size(); ++k) {
    zf = ad::sparse_matmul(g.fwd, zf, sensor_axis);
    zb = ad::sparse_matmul(g.bwd, zb, sensor_axis);
    xs.insert(xs.end(), {zf, zb});
    ws.insert(ws.end(), {w_fwd[k], w_bwd[k]});
  }
  return ad::affine(xs, ws, bias);
}

Tensor sinusoidal_encoding(std::size_t length, std::size_t d, std::size_t offset) {
  Tensor pe(Shape{length, d});
  for (std::size_t t = 0; t < length; ++t) {
    const double pos = static_cast<double>(t + offset);
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(i - i % 2) / static_cast<double>(d));
      pe[t * d + i] = (i % 2 == 0) ? std::sin(pos / rate) : std::cos(pos / rate);
    }
  }
  return pe;
}

// ---- construction ----------------------------------------------------------

void Model::add_weight(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor w(Shape{rows, cols});
  for (auto& v : w.values()) v = rng.uniform(-a, a);
  params_.add(name, std::move(w));
}

void Model::add_bias(const std::string& name, std::size_t n) { params_.add(name, Tensor(Shape{n}, 0.0)); }

void Model::add_norm(const std::string& name, std::size_t n) {
  params_.add(name + ".g", Tensor(Shape{n}, 1.0));
  params_.add(name + ".b", Tensor(Shape{n}, 0.0));
}

void Model::add_gconv(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  add_weight(prefix + ".self", in, out, rng);
  if (config_.uses_graph()) {
    for (std::size_t k = 1; k <= config_.k_diffusion; ++k) {
      add_weight(prefix + ".fwd" + std::to_string(k), in, out, rng);
      add_weight(prefix + ".bwd" + std::to_string(k), in, out, rng);
    }
  }
  add_bias(prefix + ".b", out);
}

void Model::add_attention(const std::string& prefix, Rng& rng) {
  const std::size_t d = config_.d_model;
  for (const char* part : {".q", ".k", ".v", ".o"}) {
    add_weight(prefix + part + ".w", d, d, rng);
    add_bias(prefix + part + ".b", d);
  }
}

Model::Model(ModelConfig config, GraphOperators graph, std::uint64_t seed)
    : config_(config), graph_(std::move(graph)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  if (config_.sensor_embedding) {
    Tensor se(Shape{config_.n_sensors, d});
    for (auto& v : se.values()) v = 0.01 * rng.normal();
    params_.add("se", std::move(se));
  }
  if (const std::size_t f = config_.context_width(); f > 0) {
    add_weight("ctx.l1.w", f, d, rng);
    add_bias("ctx.l1.b", d);
    add_weight("ctx.l2.w", d, d, rng);
    add_bias("ctx.l2.b", d);
    add_norm("ctx.norm", d);
  }
  add_weight("in.w", 1, d, rng);
  add_bias("in.b", d);
  if (config_.is_transformer()) {
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
      const std::string e = "enc" + std::to_string(l);
      add_attention(e + ".self", rng);
      add_norm(e + ".n1", d);
      if (config_.uses_graph()) {
        add_gconv(e + ".gc", d, d, rng);
        add_norm(e + ".n2", d);
      }
      add_weight(e + ".ff.l1.w", d, 4 * d, rng);
      add_bias(e + ".ff.l1.b", 4 * d);
      add_weight(e + ".ff.l2.w", 4 * d, d, rng);
      add_bias(e + ".ff.l2.b", d);
      add_norm(e + ".n3", d);
    }
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
      const std::string e = "dec" + std::to_string(l);
      add_attention(e + ".self", rng);
      add_norm(e + ".n1", d);
      add_attention(e + ".cross", rng);
      add_norm(e + ".n2", d);
      if (config_.uses_graph()) {
        add_gconv(e + ".gc", d, d, rng);
        add_norm(e + ".n3", d);
      }
      add_weight(e + ".ff.l1.w", d, 4 * d, rng);
      add_bias(e + ".ff.l1.b", 4 * d);
      add_weight(e + ".ff.l2.w", 4 * d, d, rng);
      add_bias(e + ".ff.l2.b", d);
      add_norm(e + ".n4", d);
    }
  } else {
    for (const char* cell : {"enc", "dec"}) {
      add_gconv(std::string(cell) + ".ru", 2 * d, 2 * d, rng);
      add_gconv(std::string(cell) + ".c", 2 * d, d, rng);
    }
  }
  add_weight("out.w", d, 1, rng);
  add_bias("out.b", 1);
}

void Model::set_graph(GraphOperators graph) { graph_ = std::move(graph); }

std::size_t count_parameters(const ModelConfig& config) {
  return Model(config, {}, 0).parameter_count();
}

// ---- building blocks -------------------------------------------------------

Var Model::gconv(Tape& tape, const std::string& prefix, const Var& z, std::size_t sensor_axis) {
  std::vector<Var> wf, wb;
  if (config_.uses_graph()) {
    for (std::size_t k = 1; k <= config_.k_diffusion; ++k) {
      wf.push_back(p(tape, prefix + ".fwd" + std::to_string(k)));
      wb.push_back(p(tape, prefix + ".bwd" + std::to_string(k)));
    }
  }
  return dual_walk_gconv(z, graph_, wf, wb, p(tape, prefix + ".self"), p(tape, prefix + ".b"),
                         sensor_axis);
}

Var Model::gru_cell(Tape& tape, const std::string& prefix, const Var& input, const Var& h) {
  const std::size_t d = config_.d_model;
  const std::size_t last = h.rank() - 1;
  const Var ru = ad::sigmoid(gconv(tape, prefix + ".ru", ad::concat({input, h}, last)));
  const Var r = ad::slice(ru, last, 0, d);
  const Var u = ad::slice(ru, last, d, d);
  const Var c = ad::tanh(gconv(tape, prefix + ".c", ad::concat({input, ad::mul(r, h)}, last)));
  // u*h + (1-u)*c
  return ad::add(c, ad::mul(u, ad::sub(h, c)));
}

Var Model::step_input(Tape& tape, const Var& x, const Var& embedding) {
  Var y = dense(tape, "in", x);
  if (config_.sensor_embedding) y = ad::add(y, p(tape, "se"));
  if (embedding.valid()) y = ad::add(y, embedding);
  return y;
}

Var Model::dense(Tape& tape, const std::string& prefix, const Var& x) {
  return ad::affine({x}, {p(tape, prefix + ".w")}, p(tape, prefix + ".b"));
}

Var Model::norm(Tape& tape, const std::string& prefix, const Var& x) {
  return ad::layer_norm(x, p(tape, prefix + ".g"), p(tape, prefix + ".b"));
}

Var Model::context_embedding(Tape& tape, const Batch& batch) {
  const std::size_t f = config_.context_width();
  if (f == 0) return {};
  const Shape want{batch.size, config_.p + config_.q, f};
  if (batch.context.shape() != want)
    throw ShapeError("model: context shape " + ad::to_string(batch.context.shape()) + ", expected " +
                     ad::to_string(want));
  const Var c = tape.constant(batch.context);
  const Var h = ad::relu(dense(tape, "ctx.l1", c));
  return norm(tape, "ctx.norm", dense(tape, "ctx.l2", h));
}

Var Model::attention(Tape& tape, const std::string& prefix, const Var& x, const Var& memory,
                     bool causal) {
  const Var q = dense(tape, prefix + ".q", x);
  const Var k = dense(tape, prefix + ".k", memory);
  const Var v = dense(tape, prefix + ".v", memory);
  return dense(tape, prefix + ".o", ad::scaled_dot_attention(q, k, v, config_.n_heads, causal));
}

Var Model::feed_forward(Tape& tape, const std::string& prefix, const Var& x) {
  return dense(tape, prefix + ".l2", ad::relu(dense(tape, prefix + ".l1", x)));
}

// ---- recurrent -------------------------------------------------------------

Var Model::forward(Tape& tape, const Batch& batch, const ForwardOptions& options) {
  const std::size_t b = batch.size, n = config_.n_sensors;
  if (batch.history.shape() != Shape{b, config_.p, n})
    throw ShapeError("model: history shape " + ad::to_string(batch.history.shape()) + ", expected " +
                     ad::to_string(Shape{b, config_.p, n}));
  if (options.teacher_forcing && batch.target.shape() != Shape{b, config_.q, n})
    throw ShapeError("model: target shape " + ad::to_string(batch.target.shape()) + ", expected " +
                     ad::to_string(Shape{b, config_.q, n}));
  if (config_.uses_graph() && (graph_.empty() || graph_.fwd->matrix.rows() != n))
    throw ShapeError("model: adjacency does not match " + std::to_string(n) + " sensors");
  return config_.is_transformer() ? forward_transformer(tape, batch, options)
                                  : forward_recurrent(tape, batch, options);
}

Var Model::forward_recurrent(Tape& tape, const Batch& batch, const ForwardOptions& options) {
  const std::size_t b = batch.size, n = config_.n_sensors, d = config_.d_model;
  const std::size_t P = config_.p, Q = config_.q;
  const Var ctx = context_embedding(tape, batch);
  auto ctx_at = [&](std::size_t t) { return ctx.valid() ? ad::slice(ctx, 1, t, 1) : Var{}; };

  Var h = tape.constant(Tensor(Shape{b, n, d}, 0.0));
  for (std::size_t t = 0; t < P; ++t) {
    const Var x = tape.constant(time_slice(batch.history, t));
    h = gru_cell(tape, "enc", step_input(tape, x, ctx_at(t)), h);
  }

  std::vector<Var> outs;
  Var prev = tape.constant(Tensor(Shape{b, n, 1}, 0.0));  // go token
  for (std::size_t q = 0; q < Q; ++q) {
    h = gru_cell(tape, "dec", step_input(tape, prev, ctx_at(P + q)), h);
    const Var y = dense(tape, "out", h);
    outs.push_back(ad::reshape(y, Shape{b, 1, n}));
    if (q + 1 == Q) break;
    bool use_truth = options.teacher_forcing;
    if (use_truth && options.teacher_probability < 1.0 && options.sampler)
      use_truth = options.sampler->bernoulli(options.teacher_probability);
    prev = use_truth ? tape.constant(time_slice(batch.target, q)) : y;
  }
  return ad::concat(outs, 1);
}

// ---- transformer -----------------------------------------------------------

Var Model::embed_tokens(Tape& tape, const Tensor& values, const Var& ctx, std::size_t ctx_offset,
                        std::size_t pos_offset) {
  const std::size_t b = values.dim(0), n = values.dim(1), t = values.dim(2), d = config_.d_model;
  const Var x = tape.constant(values.reshaped(Shape{b, n, t, 1}));
  Var y = dense(tape, "in", x);
  if (config_.sensor_embedding) y = ad::add(y, ad::reshape(p(tape, "se"), Shape{n, 1, d}));
  if (ctx.valid()) y = ad::add(y, ad::reshape(ad::slice(ctx, 1, ctx_offset, t), Shape{b, 1, t, d}));
  return ad::add(y, tape.constant(sinusoidal_encoding(t, d, pos_offset)));
}

Var Model::encode(Tape& tape, const Var& tokens) {
  Var x = tokens;
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string e = "enc" + std::to_string(l);
    x = norm(tape, e + ".n1", ad::add(x, attention(tape, e + ".self", x, x, false)));
    if (config_.uses_graph()) x = norm(tape, e + ".n2", ad::add(x, gconv(tape, e + ".gc", x, 1)));
    x = norm(tape, e + ".n3", ad::add(x, feed_forward(tape, e + ".ff", x)));
  }
  return x;
}

Var Model::decode(Tape& tape, const Var& tokens, const Var& memory) {
  Var x = tokens;
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string e = "dec" + std::to_string(l);
    x = norm(tape, e + ".n1", ad::add(x, attention(tape, e + ".self", x, x, true)));
    x = norm(tape, e + ".n2", ad::add(x, attention(tape, e + ".cross", x, memory, false)));
    if (config_.uses_graph()) x = norm(tape, e + ".n3", ad::add(x, gconv(tape, e + ".gc", x, 1)));
    x = norm(tape, e + ".n4", ad::add(x, feed_forward(tape, e + ".ff", x)));
  }
  return x;
}

Var Model::forward_transformer(Tape& tape, const Batch& batch, const ForwardOptions& options) {
  const std::size_t b = batch.size, n = config_.n_sensors;
  const std::size_t P = config_.p, Q = config_.q;
  const Var ctx = context_embedding(tape, batch);

  // (B, P, N) -> (B, N, P)
  Tensor hist(Shape{b, n, P});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < P; ++t)
      for (std::size_t s = 0; s < n; ++s) hist[(i * n + s) * P + t] = batch.history[(i * P + t) * n + s];
  const Var memory = encode(tape, embed_tokens(tape, hist, ctx, 0, 0));

  // Decoder tokens: last observed value, then the previous step's value.
  Tensor tokens(Shape{b, n, Q}, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < n; ++s) tokens[(i * n + s) * Q] = hist[(i * n + s) * P + P - 1];
  if (options.teacher_forcing)
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t q = 1; q < Q; ++q)
        for (std::size_t s = 0; s < n; ++s)
          tokens[(i * n + s) * Q + q] = batch.target[(i * Q + q - 1) * n + s];

  auto run = [&] {
    const Var y = dense(tape, "out", decode(tape, embed_tokens(tape, tokens, ctx, P, P), memory));
    return ad::reshape(y, Shape{b, n, Q});
  };
  Var y = run();
  if (!options.teacher_forcing) {
    // Causal masking makes output q depend only on tokens <= q, so each pass
    // fixes one more token; the final pass holds every step.
    for (std::size_t q = 0; q + 1 < Q; ++q) {
      const Tensor& yv = y.value();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t s = 0; s < n; ++s) tokens[(i * n + s) * Q + q + 1] = yv[(i * n + s) * Q + q];
      y = run();
    }
  }
  return ad::permute(y, {0, 2, 1});
}

// ---- checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'U', 'A', 'G', 'C'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw InputError("checkpoint: truncated file");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ad::ParameterSet& params, std::ostream& out) {
  std::string buf(kMagic, 4);
  put_le<std::uint16_t>(buf, kVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
    buf += p.name;
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
    for (const double v : p.value.values())
      put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size()));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(crc));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw InputError("checkpoint: write failed");
}

void load_checkpoint(ad::ParameterSet& params, std::istream& in) {
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 14 || std::memcmp(data.data(), kMagic, 4) != 0)
    throw InputError("checkpoint: bad magic");
  const std::string_view payload(data.data(), data.size() - 4);
  Reader tail(std::string_view(data).substr(data.size() - 4));
  const auto stored = tail.get<std::uint32_t>();
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
  if (stored != static_cast<std::uint32_t>(crc)) throw InputError("checkpoint: CRC mismatch");

  Reader r(payload);
  r.bytes(4);
  if (const auto v = r.get<std::uint16_t>(); v != kVersion)
    throw InputError("checkpoint: unsupported version " + std::to_string(v));
  const auto count = r.get<std::uint32_t>();
  if (count != params.size())
    throw InputError("checkpoint: holds " + std::to_string(count) + " parameters, model has " +
                     std::to_string(params.size()));
  std::vector<Tensor> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name(r.bytes(r.get<std::uint32_t>()));
    auto& p = params[i];
    if (name != p.name) throw InputError("checkpoint: parameter " + std::to_string(i) + " is '" + name +
                                         "', expected '" + p.name + "'");
    Shape shape(r.get<std::uint32_t>());
    for (auto& d : shape) d = r.get<std::uint32_t>();
    if (shape != p.value.shape())
      throw InputError("checkpoint: '" + name + "' has shape " + ad::to_string(shape) + ", expected " +
                       ad::to_string(p.value.shape()));
    Tensor t(shape);
    for (auto& v : t.values()) v = static_cast<double>(std::bit_cast<float>(r.get<std::uint32_t>()));
    loaded.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw InputError("checkpoint: trailing bytes");
  for (std::size_t i = 0; i < loaded.size(); ++i) params[i].value = std::move(loaded[i]);
}

}  // namespace uagc::models
