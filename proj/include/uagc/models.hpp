#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "uagc/graphbuild.hpp"
#include "uagc/ops.hpp"
#include "uagc/rng.hpp"

namespace uagc::models {

enum class Architecture { gcrn, gctf, lstm, tf };
enum class EmbeddingMode { activity, timestamp, none };

std::string to_string(Architecture a);
std::string to_string(EmbeddingMode m);
Architecture parse_architecture(std::string_view text);  // GCRN, GCTF, LSTM, TF
EmbeddingMode parse_embedding_mode(std::string_view text);  // AE, TE, none

struct ModelConfig {
  Architecture architecture = Architecture::gcrn;
  std::size_t n_sensors = 0;
  std::size_t d_model = 64;
  std::size_t p = 12;
  std::size_t q = 12;
  std::size_t k_diffusion = 1;
  std::size_t n_layers = 3;  // transformer layers
  std::size_t n_heads = 8;
  std::size_t d_key = 8;
  std::size_t n_categories = 9;
  EmbeddingMode embedding = EmbeddingMode::activity;
  bool sensor_embedding = true;

  bool uses_graph() const {
    return architecture == Architecture::gcrn || architecture == Architecture::gctf;
  }
  bool is_transformer() const {
    return architecture == Architecture::gctf || architecture == Architecture::tf;
  }
  /// Width of the per-step context vector fed to the embedding MLP (0 for none).
  std::size_t context_width() const;
  void validate() const;  // throws UsageError

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

/// One mini-batch in standardized units. Missing entries are filled with 0
/// (the standardized mean) and flagged in `mask`.
struct Batch {
  std::size_t size = 0;
  ad::Tensor history;  // (B, P, N)
  ad::Tensor target;   // (B, Q, N)
  ad::Tensor mask;     // (B, Q, N), 1 = observed
  ad::Tensor context;  // (B, P+Q, F) activity rows or timestamp one-hots; empty when unused
};

struct GraphOperators {
  ad::SparseOperatorPtr fwd;  // D_out^-1 A
  ad::SparseOperatorPtr bwd;  // D_in^-1 A^T
  static GraphOperators from(const SensorAdjacency& adj);
  bool empty() const { return !fwd || !bwd; }
};

/// Dual-walk diffusion convolution over the sensor axis of z:
///   z W_self + sum_k (A_fwd^k z) W_fwd[k] + (A_bwd^k z) W_bwd[k] + bias.
/// The walk powers are applied iteratively; K = w_fwd.size().
ad::Var dual_walk_gconv(const ad::Var& z, const GraphOperators& g, const std::vector<ad::Var>& w_fwd,
                        const std::vector<ad::Var>& w_bwd, const ad::Var& w_self,
                        const ad::Var& bias, std::size_t sensor_axis = 1);

/// Sinusoidal positional encoding rows [offset, offset+length) of width d.
ad::Tensor sinusoidal_encoding(std::size_t length, std::size_t d, std::size_t offset = 0);

struct ForwardOptions {
  bool teacher_forcing = false;
  /// Recurrent decoders only: probability of feeding the ground truth at each
  /// step when teacher forcing is on (1 = always). Draws come from `sampler`.
  double teacher_probability = 1.0;
  Rng* sampler = nullptr;
};

class Model {
 public:
  Model(ModelConfig config, GraphOperators graph, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }
  void set_graph(GraphOperators graph);

  /// Predictions (B, Q, N) in standardized units.
  ad::Var forward(ad::Tape& tape, const Batch& batch, const ForwardOptions& options = {});

  // Building blocks, exposed for testing.
  ad::Var gconv(ad::Tape& tape, const std::string& prefix, const ad::Var& z,
                std::size_t sensor_axis = 1);
  ad::Var gru_cell(ad::Tape& tape, const std::string& prefix, const ad::Var& input, const ad::Var& h);
  /// proj(x) + SE + embedding, for x of shape (B, N, 1) and embedding (B, 1, D) or invalid.
  ad::Var step_input(ad::Tape& tape, const ad::Var& x, const ad::Var& embedding);
  /// Embedding MLP over context (B, T, F) -> (B, T, D); invalid Var when the mode is none.
  ad::Var context_embedding(ad::Tape& tape, const Batch& batch);

 private:
  void add_weight(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);
  void add_bias(const std::string& name, std::size_t n);
  void add_norm(const std::string& name, std::size_t n);
  void add_gconv(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
  void add_attention(const std::string& prefix, Rng& rng);
  ad::Var dense(ad::Tape& tape, const std::string& prefix, const ad::Var& x);
  ad::Var norm(ad::Tape& tape, const std::string& prefix, const ad::Var& x);
  ad::Var attention(ad::Tape& tape, const std::string& prefix, const ad::Var& x,
                    const ad::Var& memory, bool causal);
  ad::Var feed_forward(ad::Tape& tape, const std::string& prefix, const ad::Var& x);
  ad::Var p(ad::Tape& tape, const std::string& name) { return tape.parameter(params_.at(name)); }

  ad::Var forward_recurrent(ad::Tape& tape, const Batch& batch, const ForwardOptions& options);
  ad::Var forward_transformer(ad::Tape& tape, const Batch& batch, const ForwardOptions& options);
  ad::Var encode(ad::Tape& tape, const ad::Var& tokens);
  ad::Var decode(ad::Tape& tape, const ad::Var& tokens, const ad::Var& memory);
  ad::Var embed_tokens(ad::Tape& tape, const ad::Tensor& values, const ad::Var& ctx,
                       std::size_t ctx_offset, std::size_t pos_offset);

  ModelConfig config_;
  GraphOperators graph_;
  ad::ParameterSet params_;
};

/// Trainable scalar count of a freshly built model of this configuration.
std::size_t count_parameters(const ModelConfig& config);

/// Binary checkpoint: "UAGC", u16 version, u32 record count, then per
/// parameter (u32 name length, name, u32 rank, u32 dims, f32 LE values) and a
/// trailing CRC32 over every preceding byte.
void save_checkpoint(const ad::ParameterSet& params, std::ostream& out);
/// Loads values into matching parameters (names and shapes must agree).
void load_checkpoint(ad::ParameterSet& params, std::istream& in);

}  // namespace uagc::models
