#pragma once

#include <string>
#include <variant>

#include <json.hpp>

#include "enkbf/models.hpp"

namespace enkbf {

using ModelSpec = std::variant<LinearModel, TwoScaleModel>;

/// {"kind": "linear"|"two_scale", "A": [[...]], "gamma": g, "M": [[...]], "epsilon": e}
ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const LinearModel& model);
nlohmann::json model_to_json(const TwoScaleModel& model);

ModelSpec parse_model_spec(const std::string& text);
ModelSpec load_model_spec(const std::string& path);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const char* name);

} // namespace enkbf
