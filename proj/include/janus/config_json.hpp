#pragma once

#include <string>

#include "json.hpp"

#include "janus/data.hpp"
#include "janus/inversion.hpp"
#include "janus/model.hpp"
#include "janus/trainer.hpp"

namespace janus {

// All parsers reject unknown keys (ParseError) and start from the passed-in
// defaults, overriding only the keys present.

nlohmann::json janus_config_to_json(const JanusConfig& c);
JanusConfig janus_config_from_json(const nlohmann::json& j, JanusConfig base);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json inversion_config_to_json(const InversionConfig& c);
InversionConfig inversion_config_from_json(const nlohmann::json& j, InversionConfig base = {});

nlohmann::json microgen_params_to_json(const MicroGenParams& p);
MicroGenParams microgen_params_from_json(const nlohmann::json& j, MicroGenParams base = {});

}  // namespace janus
