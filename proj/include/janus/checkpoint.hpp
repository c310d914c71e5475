#pragma once

#include <string>

#include "janus/model.hpp"

namespace janus {

// Binary model container: magic "JNSC", u8 version, length-prefixed JSON
// header (config + epoch), then a named float64 tensor table. Round-trips
// bitwise.
void save_checkpoint(const std::string& path, const JanusModel& m);

JanusModel load_checkpoint(const std::string& path);

// Fails with ConfigError when the stored config differs from `expected`.
JanusModel load_checkpoint(const std::string& path, const JanusConfig& expected);

}  // namespace janus
