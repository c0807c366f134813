#include "manifold/spec_json.hpp"

namespace manifold {

using nlohmann::json;

namespace {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw Error(ErrorKind::config, "unknown activation: " + s);
}

}  // namespace

json layer_spec_to_json(const LayerSpec& spec) {
  json j;
  j["kind"] = spec.kind_name();
  switch (spec.kind) {
    case LayerKind::dense:
      j["in"] = spec.in_dim;
      j["out"] = spec.out_dim;
      break;
    case LayerKind::bias:
      j["dim"] = spec.in_dim;
      break;
    case LayerKind::elementwise:
      j["act"] = activation_name(spec.act);
      if (spec.act == Activation::leaky_relu) j["slope"] = spec.slope;
      break;
    case LayerKind::transposed_conv2d:
      j["in_ch"] = spec.in_ch;
      j["out_ch"] = spec.out_ch;
      j["kernel"] = spec.kernel;
      j["stride"] = spec.stride;
      j["pad"] = spec.pad;
      break;
    case LayerKind::reshape:
      j["shape"] = spec.target_shape;
      break;
  }
  return j;
}

LayerSpec layer_spec_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dense") return LayerSpec::Dense(j.at("in").get<int>(), j.at("out").get<int>());
  if (kind == "bias") return LayerSpec::Bias(j.at("dim").get<int>());
  if (kind == "elementwise")
    return LayerSpec::Elementwise(activation_from_name(j.at("act").get<std::string>()),
                                  j.value("slope", 0.0));
  if (kind == "transposed_conv2d")
    return LayerSpec::TransposedConv2d(j.at("in_ch").get<int>(), j.at("out_ch").get<int>(),
                                       j.at("kernel").get<int>(), j.at("stride").get<int>(),
                                       j.at("pad").get<int>());
  if (kind == "reshape") return LayerSpec::Reshape(j.at("shape").get<std::vector<int>>());
  throw Error(ErrorKind::config, "unknown layer kind: " + kind);
}

json generator_spec_to_json(const GeneratorSpec& spec) {
  json arch = json::array();
  for (const auto& l : spec.architecture) arch.push_back(layer_spec_to_json(l));
  json latent;
  if (spec.latent.kind == LatentKind::gaussian) {
    latent = {{"kind", "gaussian"}};
  } else {
    latent = {{"kind", "truncated_gaussian"}, {"limit", spec.latent.limit}};
  }
  return {{"architecture", arch},
          {"latent_dim", spec.latent_dim},
          {"output_shape", spec.output_shape},
          {"init_seed", spec.init_seed},
          {"latent", latent}};
}

GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec spec;
  for (const auto& l : j.at("architecture")) spec.architecture.push_back(layer_spec_from_json(l));
  spec.latent_dim = j.at("latent_dim").get<int>();
  spec.output_shape = j.at("output_shape").get<std::vector<int>>();
  spec.init_seed = j.at("init_seed").get<std::uint64_t>();
  if (j.contains("latent")) {
    const auto& l = j.at("latent");
    const std::string kind = l.at("kind").get<std::string>();
    if (kind == "gaussian") {
      spec.latent.kind = LatentKind::gaussian;
    } else if (kind == "truncated_gaussian") {
      spec.latent.kind = LatentKind::truncated_gaussian;
      spec.latent.limit = l.at("limit").get<double>();
    } else {
      throw Error(ErrorKind::config, "unknown latent distribution: " + kind);
    }
  }
  spec.validate();
  return spec;
}

}  // namespace manifold
