/*
 * Copyright 2026 The gnndcm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GNNDCM_APP_APP_HPP
#define GNNDCM_APP_APP_HPP

#include <string>

#include "json.hpp"

namespace gnndcm {

// Subcommand drivers. Each takes a flat JSON configuration (keys listed in
// README.md), writes its outputs under config["out"] and returns a summary.
// Errors surface as UsageError, DataError or NumericalError.
//
// Commands: fit, cv, predict, elasticity, ice, submap, verify, synth.
nlohmann::json run_command(const std::string& command, const nlohmann::json& config);

/// Hash of a resolved configuration with output-only keys removed.
std::string config_hash_of(const nlohmann::json& resolved);

} // namespace gnndcm

#endif
