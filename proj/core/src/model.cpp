#include "c2s/model.hpp"

#include <algorithm>
#include <cmath>

#include "c2s/errors.hpp"
#include "c2s/json_reader.hpp"
#include "c2s/random.hpp"

namespace c2s {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::linear: return "linear";
    case Variant::resnet: return "resnet";
    case Variant::wavenet: return "wavenet";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "linear") return Variant::linear;
  if (name == "resnet") return Variant::resnet;
  if (name == "wavenet") return Variant::wavenet;
  throw ConfigError("unknown model variant '" + std::string(name) + "' (expected linear, resnet or wavenet)");
}

ModelConfig ModelConfig::defaults(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be >= 1");
  };
  positive(in_channels, "in_channels");
  positive(out_channels, "out_channels");
  if (!(dropout >= 0.0f) || dropout >= 1.0f) throw ConfigError("dropout must lie in [0, 1)");
  if (!(bn_momentum >= 0.0f) || bn_momentum >= 1.0f) throw ConfigError("bn_momentum must lie in [0, 1)");
  if (!(bn_epsilon > 0.0f)) throw ConfigError("bn_epsilon must be positive");
  switch (variant) {
    case Variant::linear:
      positive(linear.filter, "linear.filter");
      break;
    case Variant::resnet:
      positive(resnet.blocks, "resnet.blocks");
      positive(resnet.filter, "resnet.filter");
      positive(resnet.features, "resnet.features");
      break;
    case Variant::wavenet: {
      const auto& w = wavenet;
      positive(w.initial_filter, "wavenet.initial_filter");
      positive(w.initial_features, "wavenet.initial_features");
      positive(w.dilated_filter, "wavenet.dilated_filter");
      positive(w.dilated_features, "wavenet.dilated_features");
      positive(w.residual_filter, "wavenet.residual_filter");
      positive(w.residual_features, "wavenet.residual_features");
      positive(w.skip_filter, "wavenet.skip_filter");
      positive(w.skip_features, "wavenet.skip_features");
      positive(w.post_features, "wavenet.post_features");
      if (w.residual_features != w.initial_features) {
        throw ConfigError("wavenet.residual_features must equal wavenet.initial_features (residual sum)");
      }
      if (w.dilations.empty()) throw ConfigError("wavenet.dilations must list one rate per residual block");
      for (int d : w.dilations) {
        if (d < 1) throw ConfigError("wavenet.dilations entries must be >= 1, got " + std::to_string(d));
      }
      break;
    }
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["variant"] = to_string(c.variant);
  j["in_channels"] = c.in_channels;
  j["out_channels"] = c.out_channels;
  j["dropout"] = c.dropout;
  j["bn_momentum"] = c.bn_momentum;
  j["bn_epsilon"] = c.bn_epsilon;
  const auto& w = c.wavenet;
  j["wavenet"] = {{"initial_filter", w.initial_filter},     {"initial_features", w.initial_features},
                  {"dilated_filter", w.dilated_filter},     {"dilated_features", w.dilated_features},
                  {"residual_filter", w.residual_filter},   {"residual_features", w.residual_features},
                  {"skip_filter", w.skip_filter},           {"skip_features", w.skip_features},
                  {"post_features", w.post_features},       {"dilations", w.dilations}};
  j["resnet"] = {{"blocks", c.resnet.blocks}, {"filter", c.resnet.filter}, {"features", c.resnet.features}};
  j["linear"] = {{"filter", c.linear.filter}};
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& pointer) {
  JsonReader r(j, pointer);
  ModelConfig c;
  std::string variant;
  if (r.read("variant", variant)) {
    try {
      c.variant = parse_variant(variant);
    } catch (const ConfigError& e) {
      JsonReader::fail(r.path("variant"), e.what());
    }
  }
  r.read("in_channels", c.in_channels);
  r.read("out_channels", c.out_channels);
  r.read("dropout", c.dropout);
  r.read("bn_momentum", c.bn_momentum);
  r.read("bn_epsilon", c.bn_epsilon);
  if (const auto* wj = r.child("wavenet")) {
    JsonReader w(*wj, r.path("wavenet"));
    auto& o = c.wavenet;
    w.read("initial_filter", o.initial_filter);
    w.read("initial_features", o.initial_features);
    w.read("dilated_filter", o.dilated_filter);
    w.read("dilated_features", o.dilated_features);
    w.read("residual_filter", o.residual_filter);
    w.read("residual_features", o.residual_features);
    w.read("skip_filter", o.skip_filter);
    w.read("skip_features", o.skip_features);
    w.read("post_features", o.post_features);
    w.read("dilations", o.dilations);
    w.finish();
  }
  if (const auto* rj = r.child("resnet")) {
    JsonReader s(*rj, r.path("resnet"));
    s.read("blocks", c.resnet.blocks);
    s.read("filter", c.resnet.filter);
    s.read("features", c.resnet.features);
    s.finish();
  }
  if (const auto* lj = r.child("linear")) {
    JsonReader s(*lj, r.path("linear"));
    s.read("filter", c.linear.filter);
    s.finish();
  }
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    JsonReader::fail(pointer.empty() ? "/" : pointer, e.what());
  }
  return c;
}

std::size_t receptive_field(const ModelConfig& c) {
  c.validate();
  switch (c.variant) {
    case Variant::linear:
      return c.linear.filter;
    case Variant::resnet:
      return 1 + c.resnet.blocks * 2 * (c.resnet.filter - 1);
    case Variant::wavenet: {
      const auto& w = c.wavenet;
      // Longest chain: initial conv, the residual stream through blocks 0..j-1,
      // then block j's gated unit and skip conv.
      std::size_t stream = w.initial_filter - 1;
      std::size_t longest = 0;
      for (int d : w.dilations) {
        const std::size_t gated = (w.dilated_filter - 1) * static_cast<std::size_t>(d);
        longest = std::max(longest, stream + gated + (w.skip_filter - 1));
        stream += gated + (w.residual_filter - 1);
      }
      return 1 + longest;
    }
  }
  return 1;
}

namespace {

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return in * out * k + out; }
std::size_t norm_params(std::size_t c) { return 2 * c; }

}  // namespace

std::size_t count_params(const ModelConfig& c) {
  c.validate();
  switch (c.variant) {
    case Variant::linear:
      return conv_params(c.in_channels, c.out_channels, c.linear.filter);
    case Variant::resnet: {
      const auto& r = c.resnet;
      return conv_params(c.in_channels, r.features, 1) + norm_params(r.features) +
             r.blocks * 2 * (conv_params(r.features, r.features, r.filter) + norm_params(r.features)) +
             conv_params(r.features, c.out_channels, 1);
    }
    case Variant::wavenet: {
      const auto& w = c.wavenet;
      const std::size_t block = 2 * conv_params(w.initial_features, w.dilated_features, w.dilated_filter) +
                                2 * norm_params(w.dilated_features) +
                                conv_params(w.dilated_features, w.residual_features, w.residual_filter) +
                                conv_params(w.dilated_features, w.skip_features, w.skip_filter);
      return conv_params(c.in_channels, w.initial_features, w.initial_filter) + norm_params(w.initial_features) +
             w.dilations.size() * block -
             conv_params(w.dilated_features, w.residual_features, w.residual_filter) +
             conv_params(w.skip_features, w.post_features, 1) +
             norm_params(w.post_features) + conv_params(w.post_features, c.out_channels, 1);
    }
  }
  return 0;
}

namespace {

Conv1dLayer make_conv(std::string name, std::size_t in, std::size_t out, std::size_t k, int dilation, Rng& rng) {
  // Zero-mean uniform on [-1, 1] scaled by sqrt(2 / fan_in).
  const double fan_in = static_cast<double>(in * k);
  const double limit = std::sqrt(2.0 / fan_in);
  std::vector<float> w(out * in * k);
  for (auto& v : w) v = static_cast<float>(rng.uniform(-limit, limit));
  Conv1dLayer layer;
  layer.name = std::move(name);
  layer.weight = Tensor({out, in, k}, std::move(w), true);
  layer.bias = Tensor::zeros({out}, true);
  layer.dilation = dilation;
  return layer;
}

NormLayer make_norm(std::string name, std::size_t channels, const ModelConfig& c) {
  return NormLayer{std::move(name), BatchNormState::create(channels, c.bn_momentum, c.bn_epsilon)};
}

}  // namespace

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  Rng rng(derive_seed(seed, 0x1417));
  const auto in = config.in_channels, out = config.out_channels;
  switch (config.variant) {
    case Variant::linear:
      m.convs_.push_back(make_conv("linear", in, out, config.linear.filter, 1, rng));
      break;
    case Variant::resnet: {
      const auto& r = config.resnet;
      m.convs_.push_back(make_conv("input", in, r.features, 1, 1, rng));
      m.norms_.push_back(make_norm("input_norm", r.features, config));
      for (std::size_t b = 0; b < r.blocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        m.convs_.push_back(make_conv(p + ".conv1", r.features, r.features, r.filter, 1, rng));
        m.convs_.push_back(make_conv(p + ".conv2", r.features, r.features, r.filter, 1, rng));
        m.norms_.push_back(make_norm(p + ".norm1", r.features, config));
        m.norms_.push_back(make_norm(p + ".norm2", r.features, config));
      }
      m.convs_.push_back(make_conv("head", r.features, out, 1, 1, rng));
      break;
    }
    case Variant::wavenet: {
      const auto& w = config.wavenet;
      m.convs_.push_back(make_conv("initial", in, w.initial_features, w.initial_filter, 1, rng));
      m.norms_.push_back(make_norm("initial_norm", w.initial_features, config));
      for (std::size_t b = 0; b < w.dilations.size(); ++b) {
        const std::string p = "block" + std::to_string(b);
        const int d = w.dilations[b];
        m.convs_.push_back(make_conv(p + ".filter", w.initial_features, w.dilated_features, w.dilated_filter, d, rng));
        m.convs_.push_back(make_conv(p + ".gate", w.initial_features, w.dilated_features, w.dilated_filter, d, rng));
        // The last block's residual output would feed nothing, so it has no residual conv.
        if (b + 1 < w.dilations.size()) {
          m.convs_.push_back(
              make_conv(p + ".residual", w.dilated_features, w.residual_features, w.residual_filter, 1, rng));
        }
        m.convs_.push_back(make_conv(p + ".skip", w.dilated_features, w.skip_features, w.skip_filter, 1, rng));
        m.norms_.push_back(make_norm(p + ".filter_norm", w.dilated_features, config));
        m.norms_.push_back(make_norm(p + ".gate_norm", w.dilated_features, config));
      }
      m.convs_.push_back(make_conv("post", w.skip_features, w.post_features, 1, 1, rng));
      m.norms_.push_back(make_norm("post_norm", w.post_features, config));
      m.convs_.push_back(make_conv("output", w.post_features, out, 1, 1, rng));
      break;
    }
  }
  return m;
}

Tensor Model::forward(const Tensor& x, Mode mode, std::uint64_t dropout_seed) {
  const std::size_t channel_axis = x.ndim() == 3 ? 1 : 0;
  if ((x.ndim() != 2 && x.ndim() != 3) || x.dim(channel_axis) != config_.in_channels) {
    throw ShapeError("model expects [" + std::to_string(config_.in_channels) + " x T] input, got " +
                     shape_string(x.shape()));
  }
  switch (config_.variant) {
    case Variant::linear: return forward_linear(x);
    case Variant::resnet: return forward_resnet(x, mode, dropout_seed);
    case Variant::wavenet: return forward_wavenet(x, mode, dropout_seed);
  }
  return {};
}

Tensor Model::forward_linear(const Tensor& x) { return convs_[0].forward(x); }

Tensor Model::forward_resnet(const Tensor& x, Mode mode, std::uint64_t seed) {
  const float rate = config_.dropout;
  Tensor h = relu(batchnorm1d(convs_[0].forward(x), norms_[0].state, mode));
  for (std::size_t b = 0; b < config_.resnet.blocks; ++b) {
    auto& c1 = convs_[1 + 2 * b];
    auto& c2 = convs_[2 + 2 * b];
    Tensor y = relu(batchnorm1d(c1.forward(h), norms_[1 + 2 * b].state, mode));
    y = dropout(y, rate, mode, derive_seed(seed, b));
    y = batchnorm1d(c2.forward(y), norms_[2 + 2 * b].state, mode);
    h = relu(add(h, y));
  }
  return convs_.back().forward(h);
}

Tensor Model::forward_wavenet(const Tensor& x, Mode mode, std::uint64_t seed) {
  const float rate = config_.dropout;
  const std::size_t blocks = config_.wavenet.dilations.size();
  std::size_t c = 0;
  Tensor h = batchnorm1d(convs_[c++].forward(x), norms_[0].state, mode);
  h = dropout(h, rate, mode, derive_seed(seed, 0));
  Tensor skips;
  for (std::size_t b = 0; b < blocks; ++b) {
    Tensor f = tanh(batchnorm1d(convs_[c++].forward(h), norms_[1 + 2 * b].state, mode));
    Tensor g = sigmoid(batchnorm1d(convs_[c++].forward(h), norms_[2 + 2 * b].state, mode));
    Tensor z = dropout(mul(f, g), rate, mode, derive_seed(seed, 1 + b));
    if (b + 1 < blocks) h = add(h, convs_[c++].forward(z));
    Tensor s = convs_[c++].forward(z);
    skips = skips.defined() ? add(skips, s) : s;
  }
  Tensor y = relu(skips);
  y = relu(batchnorm1d(convs_[c++].forward(y), norms_.back().state, mode));
  y = dropout(y, rate, mode, derive_seed(seed, 1 + blocks));
  return convs_[c].forward(y);
}

std::vector<NamedParameter> Model::parameters() {
  std::vector<NamedParameter> out;
  for (auto& c : convs_) {
    out.push_back({c.name + ".weight", c.weight});
    out.push_back({c.name + ".bias", c.bias});
  }
  for (auto& n : norms_) {
    out.push_back({n.name + ".gamma", n.state.gamma});
    out.push_back({n.name + ".beta", n.state.beta});
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : convs_) n += c.weight.numel() + c.bias.numel();
  for (const auto& nl : norms_) n += nl.state.gamma.numel() + nl.state.beta.numel();
  return n;
}

std::map<std::string, Tensor> Model::state() const {
  std::map<std::string, Tensor> out;
  for (const auto& c : convs_) {
    out[c.name + ".weight"] = c.weight.detach();
    out[c.name + ".bias"] = c.bias.detach();
  }
  for (const auto& n : norms_) {
    const std::size_t ch = n.state.running_mean.size();
    out[n.name + ".gamma"] = n.state.gamma.detach();
    out[n.name + ".beta"] = n.state.beta.detach();
    out[n.name + ".running_mean"] = Tensor({ch}, n.state.running_mean);
    out[n.name + ".running_var"] = Tensor({ch}, n.state.running_var);
  }
  return out;
}

void Model::load_state(const std::map<std::string, Tensor>& tensors) {
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(it->second.shape()) +
                        ", model expects " + shape_string(shape));
    }
    return it->second;
  };
  auto copy_into = [](Tensor& dst, const Tensor& src) {
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  };
  for (auto& c : convs_) {
    copy_into(c.weight, fetch(c.name + ".weight", c.weight.shape()));
    copy_into(c.bias, fetch(c.name + ".bias", c.bias.shape()));
  }
  for (auto& n : norms_) {
    const Shape ch{n.state.running_mean.size()};
    copy_into(n.state.gamma, fetch(n.name + ".gamma", ch));
    copy_into(n.state.beta, fetch(n.name + ".beta", ch));
    const auto& rm = fetch(n.name + ".running_mean", ch);
    const auto& rv = fetch(n.name + ".running_var", ch);
    n.state.running_mean.assign(rm.data().begin(), rm.data().end());
    n.state.running_var.assign(rv.data().begin(), rv.data().end());
  }
}

ModelSnapshot Model::snapshot() const {
  ModelSnapshot s;
  for (const auto& c : convs_) {
    s.tensors.emplace_back(c.weight.data().begin(), c.weight.data().end());
    s.tensors.emplace_back(c.bias.data().begin(), c.bias.data().end());
  }
  for (const auto& n : norms_) {
    s.tensors.emplace_back(n.state.gamma.data().begin(), n.state.gamma.data().end());
    s.tensors.emplace_back(n.state.beta.data().begin(), n.state.beta.data().end());
    s.tensors.push_back(n.state.running_mean);
    s.tensors.push_back(n.state.running_var);
  }
  return s;
}

void Model::restore(const ModelSnapshot& s) {
  std::size_t i = 0;
  auto put = [&](Tensor& t) {
    const auto& src = s.tensors.at(i++);
    std::copy(src.begin(), src.end(), t.mutable_data().begin());
  };
  for (auto& c : convs_) {
    put(c.weight);
    put(c.bias);
  }
  for (auto& n : norms_) {
    put(n.state.gamma);
    put(n.state.beta);
    n.state.running_mean = s.tensors.at(i++);
    n.state.running_var = s.tensors.at(i++);
  }
}

std::vector<LayerInfo> Model::layers() const {
  std::vector<LayerInfo> out;
  for (const auto& c : convs_) {
    out.push_back({c.name, "conv1d", c.weight.shape(), c.dilation, c.weight.numel() + c.bias.numel()});
  }
  for (const auto& n : norms_) {
    out.push_back({n.name, "batchnorm1d", n.state.gamma.shape(), 1, 2 * n.state.gamma.numel()});
  }
  return out;
}

}  // namespace c2s
