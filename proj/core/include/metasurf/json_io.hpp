// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "metasurf/channel.hpp"

namespace metasurf {

/// Parses a scene object. `where` prefixes error messages (e.g. "scene").
SceneConfig scene_from_json(const nlohmann::json& j, const std::string& where = "scene");
nlohmann::json scene_to_json(const SceneConfig& cfg);

ChannelSet channels_from_json(const nlohmann::json& j);
nlohmann::json channels_to_json(const ChannelSet& channels);

}  // namespace metasurf
