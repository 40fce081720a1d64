#include "meshflow/unet.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "meshflow/error.hpp"
#include "meshflow/io.hpp"

namespace meshflow {

void ModelConfig::validate() const {
  if (channels.size() < 2) throw DataError("model.channels needs at least two entries");
  if (channels.back() != 1) throw DataError("model.channels must end with 1");
  for (std::size_t c : channels) {
    if (c == 0) throw DataError("model.channels entries must be positive");
  }
  if (kernels == 0) throw DataError("model.kernels must be at least 1");
  if (pooling_ratio && !(*pooling_ratio > 0.0 && *pooling_ratio <= 1.0)) {
    throw DataError("model.pooling_ratio must lie in (0, 1] or be 'none'");
  }
}

std::string to_string(Operator op) {
  switch (op) {
    case Operator::gcn_vanilla:
      return "gcn";
    case Operator::gcn_improved:
      return "igcn";
    case Operator::gcn_improved_weighted:
      return "iwgcn";
    case Operator::gmm:
      return "gmm";
  }
  return "gmm";
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::none:
      return "none";
    case NormKind::layer:
      return "layer";
    case NormKind::graph:
      return "graph";
  }
  return "none";
}

std::string to_string(GateActivation gate) { return gate == GateActivation::tanh ? "tanh" : "sigmoid"; }

Operator parse_operator(const std::string& s) {
  if (s == "gcn" || s == "gcn_vanilla") return Operator::gcn_vanilla;
  if (s == "igcn" || s == "gcn_improved") return Operator::gcn_improved;
  if (s == "iwgcn" || s == "gcn_improved_weighted") return Operator::gcn_improved_weighted;
  if (s == "gmm") return Operator::gmm;
  throw DataError("unknown operator '" + s + "' (expected gcn, igcn, iwgcn or gmm)");
}

NormKind parse_norm(const std::string& s) {
  if (s == "none") return NormKind::none;
  if (s == "layer" || s == "ln") return NormKind::layer;
  if (s == "graph" || s == "gn") return NormKind::graph;
  throw DataError("unknown normalisation '" + s + "' (expected none, layer or graph)");
}

GateActivation parse_gate(const std::string& s) {
  if (s == "tanh") return GateActivation::tanh;
  if (s == "sigmoid") return GateActivation::sigmoid;
  throw DataError("unknown gate activation '" + s + "'");
}

GraphUNet::GraphUNet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const std::size_t levels = config_.levels();
  const auto& ch = config_.channels;

  for (std::size_t l = 0; l < levels; ++l) {
    const std::string name = "enc" + std::to_string(l);
    encoder_convs_.push_back(make_conv(name, ch[l], ch[l + 1], l == 0, rng));
    encoder_norms_.push_back(make_norm(name + ".norm", ch[l + 1]));
    if (config_.pooling_ratio) {
      pools_.push_back(std::make_unique<PoolLayer>("pool" + std::to_string(l), ch[l + 1], *config_.pooling_ratio, rng,
                                                   config_.power2_adjacency, config_.gate));
    }
  }
  bridge_conv_ = make_conv("bridge", ch[levels], 1, false, rng);
  bridge_norm_ = make_norm("bridge.norm", 1);

  decoder_convs_.resize(levels);
  decoder_norms_.resize(levels);
  for (std::size_t l = levels; l-- > 0;) {
    const std::string name = "dec" + std::to_string(l);
    decoder_convs_[l] = make_conv(name, 1 + ch[l + 1], 1, false, rng);
    if (l > 0) decoder_norms_[l] = make_norm(name + ".norm", 1);
  }

  auto append = [this](const std::vector<Parameter*>& ps) { params_.insert(params_.end(), ps.begin(), ps.end()); };
  for (std::size_t l = 0; l < levels; ++l) {
    append(encoder_convs_[l]->parameters());
    append(encoder_norms_[l]->parameters());
    if (!pools_.empty()) params_.push_back(&pools_[l]->projection());
  }
  append(bridge_conv_->parameters());
  append(bridge_norm_->parameters());
  for (std::size_t l = levels; l-- > 0;) {
    append(decoder_convs_[l]->parameters());
    if (decoder_norms_[l]) append(decoder_norms_[l]->parameters());
  }
}

std::unique_ptr<NormLayer> GraphUNet::make_norm(const std::string& name, std::size_t channels) const {
  NormKind kind = config_.norm;
  if (kind == NormKind::layer && channels == 1 && !config_.layer_norm_single_channel) kind = NormKind::none;
  return std::make_unique<NormLayer>(name, kind, channels);
}

std::unique_ptr<ConvLayer> GraphUNet::make_conv(const std::string& name, std::size_t in, std::size_t out, bool first,
                                                std::mt19937_64& rng) const {
  switch (config_.op) {
    case Operator::gcn_vanilla:
      return std::make_unique<GcnLayer>(name, in, out, GcnVariant::vanilla, rng, config_.bias, first);
    case Operator::gcn_improved:
      return std::make_unique<GcnLayer>(name, in, out, GcnVariant::improved, rng, config_.bias, first);
    case Operator::gcn_improved_weighted:
      return std::make_unique<GcnLayer>(name, in, out, GcnVariant::improved_weighted, rng, config_.bias, first);
    case Operator::gmm:
      return std::make_unique<GmmLayer>(name, in, out, config_.kernels, config_.edge_scale, rng,
                                        config_.gmm_self_loops, config_.bias);
  }
  throw DataError("unknown operator");
}

Var GraphUNet::forward(Tape& tape, const Graph& g, const Var& window, ForwardTrace* trace) {
  if (static_cast<std::size_t>(window.rows()) != g.num_nodes()) {
    throw ShapeError("forward: window has " + std::to_string(window.rows()) + " rows, graph has " +
                     std::to_string(g.num_nodes()) + " nodes");
  }
  if (static_cast<std::size_t>(window.cols()) != config_.window()) {
    throw ShapeError("forward: window has " + std::to_string(window.cols()) + " snapshots, model expects " +
                     std::to_string(config_.window()));
  }
  // Non-owning handle: the caller's graph outlives the pass.
  std::shared_ptr<const Graph> graph(std::shared_ptr<const Graph>{}, &g);
  const std::size_t levels = config_.levels();

  Var h = window;
  std::vector<Var> skips;
  std::vector<PoolRecord> records;
  for (std::size_t l = 0; l < levels; ++l) {
    h = ad::elu(encoder_norms_[l]->forward(tape, encoder_convs_[l]->forward(tape, *graph, h)));
    skips.push_back(h);
    if (!pools_.empty()) {
      PoolOutput pooled = pools_[l]->forward(tape, graph, h);
      graph = std::move(pooled.graph);
      h = pooled.x;
      records.push_back(std::move(pooled.record));
    }
  }
  h = ad::elu(bridge_norm_->forward(tape, bridge_conv_->forward(tape, *graph, h)));

  for (std::size_t l = levels; l-- > 0;) {
    if (!pools_.empty()) {
      UnpoolOutput up = gunpool(records[l], h);
      graph = std::move(up.graph);
      h = up.x;
    }
    h = decoder_convs_[l]->forward(tape, *graph, ad::concat_cols(h, skips[l]));
    if (l > 0) h = ad::elu(decoder_norms_[l]->forward(tape, h));
  }
  if (trace) trace->records = std::move(records);
  return h;
}

Matrix GraphUNet::predict(const Graph& g, const Matrix& window) {
  Tape tape(false);
  return forward(tape, g, tape.constant(window)).value();
}

void model_config_to_keys(const ModelConfig& c, KeyValues& kv) {
  std::string channels;
  for (std::size_t i = 0; i < c.channels.size(); ++i) channels += (i ? "," : "") + std::to_string(c.channels[i]);
  kv.set("model.operator", to_string(c.op));
  kv.set("model.kernels", std::to_string(c.kernels));
  kv.set("model.channels", channels);
  kv.set("model.pooling_ratio", c.pooling_ratio ? format_double(*c.pooling_ratio) : "none");
  kv.set("model.norm", to_string(c.norm));
  kv.set("model.skip_merge", "concat");
  kv.set("model.layer_norm_single_channel", c.layer_norm_single_channel ? "true" : "false");
  kv.set("model.gmm_self_loops", c.gmm_self_loops ? "true" : "false");
  kv.set("model.bias", c.bias ? "true" : "false");
  kv.set("model.gate", to_string(c.gate));
  kv.set("model.power2_adjacency", c.power2_adjacency ? "true" : "false");
  kv.set("model.edge_scale", format_double(c.edge_scale));
  kv.set("model.seed", std::to_string(c.seed));
}

ModelConfig model_config_from_keys(const KeyValues& kv, ModelConfig c) {
  if (auto v = kv.get("model.operator")) c.op = parse_operator(*v);
  c.kernels = kv.get_size("model.kernels", c.kernels);
  if (auto v = kv.get("model.channels")) {
    c.channels.clear();
    for (const auto& item : split_list(*v)) {
      KeyValues one;
      one.set("x", item);
      c.channels.push_back(one.get_size("x", 0));
    }
  }
  if (auto v = kv.get("model.pooling_ratio")) {
    if (*v == "none") {
      c.pooling_ratio.reset();
    } else {
      c.pooling_ratio = kv.get_double("model.pooling_ratio", 0.0);
    }
  }
  if (auto v = kv.get("model.norm")) c.norm = parse_norm(*v);
  if (auto v = kv.get("model.skip_merge"); v && *v != "concat") throw DataError("model.skip_merge supports only concat");
  c.layer_norm_single_channel = kv.get_bool("model.layer_norm_single_channel", c.layer_norm_single_channel);
  c.gmm_self_loops = kv.get_bool("model.gmm_self_loops", c.gmm_self_loops);
  c.bias = kv.get_bool("model.bias", c.bias);
  if (auto v = kv.get("model.gate")) c.gate = parse_gate(*v);
  c.power2_adjacency = kv.get_bool("model.power2_adjacency", c.power2_adjacency);
  c.edge_scale = kv.get_double("model.edge_scale", c.edge_scale);
  c.seed = kv.get_u64("model.seed", c.seed);
  c.validate();
  return c;
}

void write_model_config(std::ostream& os, const ModelConfig& config) {
  KeyValues kv;
  model_config_to_keys(config, kv);
  kv.write(os);
}

void save_model(std::ostream& os, const GraphUNet& model) {
  os << "meshflow-model\n";
  write_model_config(os, model.config());
  os << "end\n";
  const auto& params = model.parameters();
  std::vector<const Parameter*> cparams(params.begin(), params.end());
  write_parameters(os, cparams);
}

GraphUNet load_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "meshflow-model") throw DataError("not a model checkpoint");
  std::stringstream header;
  bool terminated = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      terminated = true;
      break;
    }
    header << line << '\n';
  }
  if (!terminated) throw DataError("model checkpoint header is not terminated");
  GraphUNet model(model_config_from_keys(KeyValues::parse(header)));
  const auto records = read_parameter_records(is);
  apply_records(records, model.parameters());
  return model;
}

void save_model(const std::string& path, const GraphUNet& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  save_model(os, model);
}

GraphUNet load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  try {
    return load_model(is);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace meshflow
