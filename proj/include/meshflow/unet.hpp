#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meshflow/autodiff.hpp"
#include "meshflow/checkpoint.hpp"
#include "meshflow/config.hpp"
#include "meshflow/conv.hpp"
#include "meshflow/graph.hpp"
#include "meshflow/norm.hpp"
#include "meshflow/pooling.hpp"

namespace meshflow {

enum class Operator { gcn_vanilla, gcn_improved, gcn_improved_weighted, gmm };
enum class SkipMerge { concat };

struct ModelConfig {
  Operator op = Operator::gmm;
  std::size_t kernels = 1;
  /// Encoder channel schedule; first entry is the input window, last is 1.
  std::vector<std::size_t> channels{20, 15, 10, 5, 1};
  /// Pooling ratio per level, or no pooling at all.
  std::optional<double> pooling_ratio = 0.6;
  NormKind norm = NormKind::layer;
  /// Layer norm over a single channel always returns beta; by default such
  /// layers are left unnormalised. Set to keep them exactly as configured.
  bool layer_norm_single_channel = false;
  SkipMerge skip_merge = SkipMerge::concat;
  bool gmm_self_loops = true;
  bool bias = true;
  GateActivation gate = GateActivation::tanh;
  bool power2_adjacency = false;
  /// Mean edge length of the training meshes; sets the GMM kernel start values.
  double edge_scale = 1.0;
  std::uint64_t seed = 0;

  std::size_t window() const { return channels.front(); }
  std::size_t levels() const { return channels.size() - 1; }
  /// Throws DataError when the schedule is inconsistent.
  void validate() const;
};

std::string to_string(Operator op);
std::string to_string(NormKind kind);
std::string to_string(GateActivation gate);
Operator parse_operator(const std::string& s);
NormKind parse_norm(const std::string& s);
GateActivation parse_gate(const std::string& s);

/// Pooling trace of one forward pass, finest level first.
struct ForwardTrace {
  std::vector<PoolRecord> records;
};

/// Graph U-Net: encoder blocks (conv, norm, ELU, optional gPool), a bridge
/// block, and decoder blocks (gUnpool, concat skip, conv, norm, ELU). The last
/// decoder conv has neither norm nor activation and produces one channel.
class GraphUNet {
 public:
  explicit GraphUNet(ModelConfig config);
  GraphUNet(const GraphUNet&) = delete;
  GraphUNet& operator=(const GraphUNet&) = delete;
  GraphUNet(GraphUNet&&) = default;
  GraphUNet& operator=(GraphUNet&&) = default;

  /// window is N x W (oldest snapshot first); returns N x 1.
  Var forward(Tape& tape, const Graph& g, const Var& window, ForwardTrace* trace = nullptr);
  /// Forward pass without keeping gradients around.
  Matrix predict(const Graph& g, const Matrix& window);

  const ModelConfig& config() const { return config_; }
  /// Every trainable parameter in a fixed order.
  const std::vector<Parameter*>& parameters() const { return params_; }
  std::size_t num_pool_layers() const { return pools_.size(); }
  PoolLayer& pool(std::size_t level) { return *pools_[level]; }
  ConvLayer& encoder_conv(std::size_t level) { return *encoder_convs_[level]; }
  ConvLayer& bridge_conv() { return *bridge_conv_; }
  ConvLayer& decoder_conv(std::size_t level) { return *decoder_convs_[level]; }

 private:
  std::unique_ptr<NormLayer> make_norm(const std::string& name, std::size_t channels) const;
  std::unique_ptr<ConvLayer> make_conv(const std::string& name, std::size_t in, std::size_t out, bool first,
                                       std::mt19937_64& rng) const;

  ModelConfig config_;
  std::vector<std::unique_ptr<ConvLayer>> encoder_convs_;
  std::vector<std::unique_ptr<NormLayer>> encoder_norms_;
  std::vector<std::unique_ptr<PoolLayer>> pools_;
  std::unique_ptr<ConvLayer> bridge_conv_;
  std::unique_ptr<NormLayer> bridge_norm_;
  // Indexed by level; decoder level 0 is the output layer.
  std::vector<std::unique_ptr<ConvLayer>> decoder_convs_;
  std::vector<std::unique_ptr<NormLayer>> decoder_norms_;
  std::vector<Parameter*> params_;
};

/// Writes/reads the "model.*" keys.
void model_config_to_keys(const ModelConfig& config, KeyValues& kv);
ModelConfig model_config_from_keys(const KeyValues& kv, ModelConfig base = {});

/// Model checkpoint: "meshflow-model" line, config as key=value lines, "end"
/// line, then the binary parameter payload.
void write_model_config(std::ostream& os, const ModelConfig& config);
void save_model(std::ostream& os, const GraphUNet& model);
GraphUNet load_model(std::istream& is);
void save_model(const std::string& path, const GraphUNet& model);
GraphUNet load_model(const std::string& path);

}  // namespace meshflow
