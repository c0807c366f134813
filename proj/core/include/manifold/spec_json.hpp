#pragma once

#include <json.hpp>

#include "manifold/generators.hpp"

namespace manifold {

nlohmann::json layer_spec_to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const nlohmann::json& j);

nlohmann::json generator_spec_to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

}  // namespace manifold
