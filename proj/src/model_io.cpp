#include "enkbf/model_io.hpp"

#include <fstream>
#include <sstream>

#include "enkbf/errors.hpp"

namespace enkbf {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string(name) + " must be a non-empty array of rows");
    const auto rows = j.size();
    const auto cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ConfigError(std::string(name) + " rows must be non-empty arrays");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ConfigError(std::string(name) + " is ragged");
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw ConfigError(std::string(name) + " has a non-numeric entry");
            m(i, k) = j[i][k].get<double>();
        }
    }
    return m;
}

namespace {

double number_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError(std::string("model spec: missing numeric field '") + key + "'");
    return j[key].get<double>();
}

} // namespace

ModelSpec model_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model spec must be a JSON object");
    const std::string kind = j.value("kind", std::string("linear"));
    if (!j.contains("A")) throw ConfigError("model spec: missing 'A'");
    LinearModel base(matrix_from_json(j["A"], "A"), number_field(j, "gamma"));
    if (kind == "linear") return base;
    if (kind == "two_scale") {
        if (!j.contains("M")) throw ConfigError("model spec: two_scale requires 'M'");
        return TwoScaleModel(std::move(base), matrix_from_json(j["M"], "M"), number_field(j, "epsilon"));
    }
    throw ConfigError("model spec: unknown kind '" + kind + "'");
}

nlohmann::json model_to_json(const LinearModel& model) {
    return {{"kind", "linear"}, {"A", matrix_to_json(model.A())}, {"gamma", model.gamma()}};
}

nlohmann::json model_to_json(const TwoScaleModel& model) {
    return {{"kind", "two_scale"},
            {"A", matrix_to_json(model.base().A())},
            {"gamma", model.base().gamma()},
            {"M", matrix_to_json(model.M())},
            {"epsilon", model.epsilon()}};
}

ModelSpec parse_model_spec(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("model spec: invalid JSON: ") + e.what());
    }
    return model_from_json(j);
}

ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model spec '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_spec(ss.str());
}

} // namespace enkbf
