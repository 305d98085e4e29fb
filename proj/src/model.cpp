#include "ventseq/model.hpp"

#include <cstring>
#include <fstream>
#include <utility>

#include <json.hpp>

namespace ventseq {

namespace {

constexpr char kMagic[5] = {'V', 'S', 'E', 'Q', '1'};
constexpr int kFormatVersion = 1;

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"input_features", c.input_features},
          {"stem_units", c.stem_units},
          {"block_units", c.block_units},
          {"tail_units", c.tail_units},
          {"dense_hidden", c.dense_hidden},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_features = j.at("input_features").get<std::size_t>();
  c.stem_units = j.at("stem_units").get<std::size_t>();
  const auto blocks = j.at("block_units").get<std::vector<std::size_t>>();
  if (blocks.size() != 4) throw FormatError("checkpoint: block_units must have 4 entries");
  std::copy(blocks.begin(), blocks.end(), c.block_units.begin());
  c.tail_units = j.at("tail_units").get<std::size_t>();
  c.dense_hidden = j.at("dense_hidden").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

} // namespace

HybridModel HybridModel::build(const ModelConfig& config) {
  if (config.input_features == 0 || config.stem_units == 0 || config.tail_units == 0)
    throw UsageError("model config: widths must be positive");
  for (std::size_t u : config.block_units)
    if (u == 0) throw UsageError("model config: block units must be positive");

  HybridModel m;
  m.cfg_ = config;
  auto& nodes = m.nodes_;

  auto add_birnn = [&](LayerKind kind, const std::string& name, int input_id,
                       std::size_t input_width, std::size_t units) {
    Node n{kind, name, {input_id}, BiRnnLayer(kind, name, input_width, units)};
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size() - 1);
  };

  // stem: input -> Bi-LSTM -> Bi-LSTM
  int prev = add_birnn(LayerKind::BiLstm, "stem1", -1, config.input_features, config.stem_units);
  prev = add_birnn(LayerKind::BiLstm, "stem2", prev, 2 * config.stem_units, config.stem_units);
  std::size_t width = 2 * config.stem_units;

  // fusion blocks: parallel Bi-LSTM / Bi-GRU -> multiply -> batchnorm
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t u = config.block_units[i];
    const std::string base = "block" + std::to_string(i + 1);
    int a = add_birnn(LayerKind::BiLstm, base + ".lstm", prev, width, u);
    int b = add_birnn(LayerKind::BiGru, base + ".gru", prev, width, u);
    nodes.push_back(Node{LayerKind::Multiply, base + ".mul", {a, b}, MultiplyLayer{}});
    int mul = static_cast<int>(nodes.size() - 1);
    nodes.push_back(
        Node{LayerKind::BatchNorm, base + ".bn", {mul}, BatchNormLayer(base + ".bn", 2 * u)});
    prev = static_cast<int>(nodes.size() - 1);
    width = 2 * u;
  }

  // tail: Bi-LSTM -> Bi-GRU -> batchnorm
  prev = add_birnn(LayerKind::BiLstm, "tail.lstm", prev, width, config.tail_units);
  prev = add_birnn(LayerKind::BiGru, "tail.gru", prev, 2 * config.tail_units, config.tail_units);
  width = 2 * config.tail_units;
  nodes.push_back(
      Node{LayerKind::BatchNorm, "tail.bn", {prev}, BatchNormLayer("tail.bn", width)});
  prev = static_cast<int>(nodes.size() - 1);

  // dense head: optional SELU hidden layer, then linear width-1 output
  if (config.dense_hidden > 0) {
    nodes.push_back(Node{LayerKind::Dense, "head.hidden", {prev},
                         DenseLayer("head.hidden", width, config.dense_hidden, DenseAct::Selu)});
    prev = static_cast<int>(nodes.size() - 1);
    width = config.dense_hidden;
  }
  nodes.push_back(Node{LayerKind::Dense, "head.out", {prev},
                       DenseLayer("head.out", width, 1, DenseAct::Linear)});

  Rng rng(config.seed);
  for (auto& node : m.nodes_) {
    if (auto* rnn = std::get_if<BiRnnLayer>(&node.impl)) rnn->init(rng);
    if (auto* dense = std::get_if<DenseLayer>(&node.impl)) dense->init(rng);
  }

  m.check_census();
  return m;
}

Census HybridModel::census() const {
  Census c;
  for (const auto& node : nodes_) {
    switch (node.kind) {
      case LayerKind::BiLstm: ++c.bilstm; break;
      case LayerKind::BiGru: ++c.bigru; break;
      case LayerKind::Multiply: ++c.multiply; break;
      case LayerKind::BatchNorm: ++c.batchnorm; break;
      case LayerKind::Dense: ++c.dense; break;
    }
  }
  return c;
}

void HybridModel::check_census() const {
  const Census c = census();
  if (c.bilstm != 7 || c.bigru != 5 || c.multiply != 4 || c.batchnorm != 5 || c.dense < 1)
    throw Error("internal: layer census is not (7 bilstm, 5 bigru, 4 multiply, 5 batchnorm)");
}

Tensor HybridModel::forward(const Tensor& x, bool train) {
  if (x.rank() != 3 || x.dim(2) != cfg_.input_features)
    throw DimensionError("model forward: input " + x.shape_str() + " needs last dim " +
                         std::to_string(cfg_.input_features));
  std::vector<Tensor> outs(nodes_.size());
  auto input_of = [&](int id) -> const Tensor& { return id < 0 ? x : outs[id]; };

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    if (auto* rnn = std::get_if<BiRnnLayer>(&node.impl)) {
      outs[i] = rnn->forward(input_of(node.inputs[0]), train);
    } else if (auto* mul = std::get_if<MultiplyLayer>(&node.impl)) {
      outs[i] = mul->forward(input_of(node.inputs[0]), input_of(node.inputs[1]), train);
    } else if (auto* bn = std::get_if<BatchNormLayer>(&node.impl)) {
      outs[i] = bn->forward(input_of(node.inputs[0]), train);
    } else {
      outs[i] = std::get<DenseLayer>(node.impl).forward(input_of(node.inputs[0]), train);
    }
  }
  has_cache_ = train;
  cached_batch_ = x.dim(0);
  cached_T_ = x.dim(1);
  return outs.back();
}

void HybridModel::backward(const Tensor& grad_out) {
  if (!has_cache_) throw UsageError("model backward: no train-mode forward cache");
  if (grad_out.rank() != 3 || grad_out.dim(0) != cached_batch_ || grad_out.dim(1) != cached_T_ ||
      grad_out.dim(2) != 1)
    throw DimensionError("model backward: grad " + grad_out.shape_str() +
                         " does not match cached forward output");

  std::vector<Tensor> grads(nodes_.size());
  grads.back() = grad_out;
  auto accumulate = [&](int id, Tensor&& g) {
    if (id < 0) return; // gradient w.r.t. the model input is not needed
    if (grads[id].empty())
      grads[id] = std::move(g);
    else
      grads[id] = ew(EwOp::Add, grads[id], g);
  };

  for (std::size_t ri = nodes_.size(); ri-- > 0;) {
    Node& node = nodes_[ri];
    if (grads[ri].empty()) continue;
    if (auto* rnn = std::get_if<BiRnnLayer>(&node.impl)) {
      accumulate(node.inputs[0], rnn->backward(grads[ri]));
    } else if (auto* mul = std::get_if<MultiplyLayer>(&node.impl)) {
      auto [da, db] = mul->backward(grads[ri]);
      accumulate(node.inputs[0], std::move(da));
      accumulate(node.inputs[1], std::move(db));
    } else if (auto* bn = std::get_if<BatchNormLayer>(&node.impl)) {
      accumulate(node.inputs[0], bn->backward(grads[ri]));
    } else {
      accumulate(node.inputs[0], std::get<DenseLayer>(node.impl).backward(grads[ri]));
    }
  }
  has_cache_ = false;
}

std::vector<Param*> HybridModel::params() {
  std::vector<Param*> out;
  for (auto& node : nodes_) {
    if (auto* rnn = std::get_if<BiRnnLayer>(&node.impl)) rnn->collect_params(out);
    if (auto* bn = std::get_if<BatchNormLayer>(&node.impl)) bn->collect_params(out);
    if (auto* dense = std::get_if<DenseLayer>(&node.impl)) dense->collect_params(out);
  }
  return out;
}

void HybridModel::zero_grads() {
  for (Param* p : params()) p->zero_grad();
}

std::vector<double> HybridModel::flatten_params() {
  std::vector<double> flat;
  for (Param* p : params())
    flat.insert(flat.end(), p->value.vec().begin(), p->value.vec().end());
  return flat;
}

std::vector<Tensor*> HybridModel::running_stats() {
  std::vector<Tensor*> out;
  for (auto& node : nodes_)
    if (auto* bn = std::get_if<BatchNormLayer>(&node.impl)) {
      out.push_back(&bn->running_mean());
      out.push_back(&bn->running_var());
    }
  return out;
}

std::vector<const Tensor*> HybridModel::running_stats() const {
  std::vector<const Tensor*> out;
  for (const auto& node : nodes_)
    if (const auto* bn = std::get_if<BatchNormLayer>(&node.impl)) {
      out.push_back(&bn->running_mean());
      out.push_back(&bn->running_var());
    }
  return out;
}

void HybridModel::save(const std::string& path, const ScalerParams* scaler,
                       const ImputeParams* impute) {
  std::vector<const Tensor*> param_values;
  for (Param* p : params()) param_values.push_back(&p->value);
  const std::vector<const Tensor*> stats = std::as_const(*this).running_stats();

  std::size_t param_count = 0, stats_count = 0;
  for (const Tensor* t : param_values) param_count += t->size();
  for (const Tensor* t : stats) stats_count += t->size();

  const Census c = census();
  nlohmann::json manifest = {
      {"version", kFormatVersion},
      {"config", config_to_json(cfg_)},
      {"census",
       {{"bilstm", c.bilstm},
        {"bigru", c.bigru},
        {"multiply", c.multiply},
        {"batchnorm", c.batchnorm},
        {"dense", c.dense}}},
      {"param_count", param_count},
      {"running_stats_count", stats_count},
  };
  if (scaler) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& col : scaler->columns)
      cols.push_back({{"column", col.column}, {"median", col.median}, {"iqr", col.iqr}});
    manifest["scaler"] = cols;
  }
  if (impute) {
    nlohmann::json med = nlohmann::json::object();
    for (const auto& [col, m] : impute->medians) med[col] = m;
    manifest["impute"] = med;
  }
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor* t : param_values)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  for (const Tensor* t : stats)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  if (!out) throw FormatError("failed writing checkpoint '" + path + "'");
}

HybridModel HybridModel::load(const std::string& path, ScalerParams* scaler_out,
                              ImputeParams* impute_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("'" + path + "' is not a VSEQ1 checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw FormatError("'" + path + "': truncated manifest length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("'" + path + "': truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': bad manifest: " + e.what());
  }
  if (manifest.at("version").get<int>() != kFormatVersion)
    throw FormatError("'" + path + "': unsupported checkpoint version");

  HybridModel m = build(config_from_json(manifest.at("config")));
  const auto& jc = manifest.at("census");
  const Census c = m.census();
  if (jc.at("bilstm").get<std::size_t>() != c.bilstm ||
      jc.at("bigru").get<std::size_t>() != c.bigru ||
      jc.at("multiply").get<std::size_t>() != c.multiply ||
      jc.at("batchnorm").get<std::size_t>() != c.batchnorm)
    throw FormatError("'" + path + "': census mismatch");

  std::vector<Param*> ps = m.params();
  std::size_t param_count = 0;
  for (Param* p : ps) param_count += p->value.size();
  if (manifest.at("param_count").get<std::size_t>() != param_count)
    throw FormatError("'" + path + "': parameter count mismatch");

  for (Param* p : ps) {
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!in) throw FormatError("'" + path + "': truncated parameter blob");
  }
  for (Tensor* t : m.running_stats()) {
    in.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(t->size() * sizeof(double)));
    if (!in) throw FormatError("'" + path + "': truncated running stats");
  }

  if (scaler_out) {
    scaler_out->columns.clear();
    if (manifest.contains("scaler"))
      for (const auto& col : manifest.at("scaler"))
        scaler_out->columns.push_back({col.at("column").get<std::string>(),
                                       col.at("median").get<double>(),
                                       col.at("iqr").get<double>()});
  }
  if (impute_out) {
    impute_out->medians.clear();
    if (manifest.contains("impute"))
      for (const auto& [col, med] : manifest.at("impute").items())
        impute_out->medians[col] = med.get<double>();
  }
  return m;
}

std::size_t lstm_layer_params(std::size_t input, std::size_t hidden) {
  return 4 * (input * hidden + hidden * hidden + hidden);
}

std::size_t gru_layer_params(std::size_t input, std::size_t hidden) {
  return 3 * (hidden * (hidden + input) + hidden);
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t total = 0;
  // stem
  total += 2 * lstm_layer_params(config.input_features, config.stem_units);
  total += 2 * lstm_layer_params(2 * config.stem_units, config.stem_units);
  std::size_t width = 2 * config.stem_units;
  // fusion blocks
  for (std::size_t u : config.block_units) {
    total += 2 * lstm_layer_params(width, u);
    total += 2 * gru_layer_params(width, u);
    total += 2 * (2 * u); // batchnorm gamma, beta
    width = 2 * u;
  }
  // tail
  total += 2 * lstm_layer_params(width, config.tail_units);
  total += 2 * gru_layer_params(2 * config.tail_units, config.tail_units);
  width = 2 * config.tail_units;
  total += 2 * width;
  // head
  if (config.dense_hidden > 0) {
    total += config.dense_hidden * (width + 1);
    width = config.dense_hidden;
  }
  total += 1 * (width + 1);
  return total;
}

} // namespace ventseq
