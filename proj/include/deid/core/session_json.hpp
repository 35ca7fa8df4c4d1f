#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "deid/core/types.hpp"

namespace deid {

// JSON field names used here are the persisted contract; see docs/formats.md.

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const BoxGeom& box);
ordered_json to_json(const FaceObservation& obs);
ordered_json to_json(const SessionManifest& manifest);
ordered_json to_json(const DetectionSet& detections);
ordered_json to_json(const FaceChain& chain);

BoxGeom box_from_json(const nlohmann::json& j);
FaceObservation observation_from_json(const nlohmann::json& j);
SessionManifest manifest_from_json(const nlohmann::json& j);
DetectionSet detections_from_json(const nlohmann::json& j);

ordered_json session_to_json(const AnnotationSession& session);
AnnotationSession session_from_json(const nlohmann::json& j);

/// Session persistence document.
std::string serialize_session(const AnnotationSession& session);

/// Throws ParseError carrying the byte offset of malformed input.
AnnotationSession deserialize_session(std::string_view bytes);

std::string serialize_detections(const DetectionSet& detections);
DetectionSet deserialize_detections(std::string_view bytes);

}  // namespace deid
