#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "knobo/concept_gen.hpp"
#include "knobo/grounding.hpp"
#include "knobo/predictor.hpp"
#include "knobo/synth.hpp"

namespace knobo::cli {

/// Every tunable of the pipeline as one JSON document. Defaults come from
/// the library structs; a --config file is merged over them (JSON merge
/// patch), then command-line flags override individual keys.
nlohmann::json default_config();
nlohmann::json load_config(const std::optional<std::filesystem::path>& path);

/// Typed views of the resolved config. Unknown keys are rejected when the
/// config is loaded, so a typo cannot silently fall back to a default.
SyntheticConfig synth_config(const nlohmann::json& cfg);
GenerationConfig generation_config(const nlohmann::json& cfg);
SamplingConfig sampling_config(const nlohmann::json& cfg);
LogisticConfig grounding_config(const nlohmann::json& cfg);
TrainConfig train_config(const nlohmann::json& cfg, const std::string& section = "train");

bool mock_mode(const nlohmann::json& cfg);

}  // namespace knobo::cli
