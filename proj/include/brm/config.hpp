#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "brm/risk_spec.hpp"

namespace brm {

using json = nlohmann::json;

inline Matrix parse_matrix(const json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ValidationError(name + " must be a nested array of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(j[r].size()) != cols)
            throw ValidationError(name + " rows have inconsistent lengths");
        for (int c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ValidationError(name + " entries must be numbers");
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

inline Vector parse_vector(const json& j, const std::string& name) {
    if (!j.is_array()) throw ValidationError(name + " must be an array");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError(name + " entries must be numbers");
        v[static_cast<int>(i)] = j[i].get<double>();
    }
    return v;
}

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValidationError("unknown key \"" + it.key() + "\" in " + where);
}

// Problem instance from a JSON config. Accepts sigma, gamma or both;
// unknown keys are rejected so typos fail loudly.
inline RiskSpec parse_risk_spec(const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    reject_unknown_keys(j, {"sigma", "gamma", "a", "c", "u", "k", "s_start", "t_end"}, "spec");
    require(j.contains("a"), "config needs \"a\"");
    Vector a = parse_vector(j["a"], "a");
    const int d = static_cast<int>(a.size());

    CovModel model = [&] {
        if (j.contains("gamma") && j.contains("sigma"))
            return CovModel::from_gamma_and_sigma(parse_matrix(j["gamma"], "gamma"),
                                                  parse_matrix(j["sigma"], "sigma"));
        if (j.contains("gamma")) return CovModel::from_gamma(parse_matrix(j["gamma"], "gamma"));
        if (j.contains("sigma")) return CovModel::from_sigma(parse_matrix(j["sigma"], "sigma"));
        throw ValidationError("config needs \"sigma\" or \"gamma\"");
    }();
    require(model.dim() == d, "a and sigma dimensions disagree");

    Vector c = Vector::Zero(d);
    if (j.contains("c")) c = parse_vector(j["c"], "c");
    require(c.size() == d, "c and a dimensions disagree");

    RiskSpec spec{std::move(model), std::move(a), std::move(c), 1.0, 1, 0.0, 1.0, false};
    if (j.contains("u")) spec.u = j["u"].get<double>();
    if (j.contains("k")) spec.k = j["k"].get<int>();
    if (j.contains("s_start")) spec.s_start = j["s_start"].get<double>();
    if (j.contains("t_end")) {
        if (j["t_end"].is_string()) {
            std::string s = j["t_end"].get<std::string>();
            require(s == "inf", "t_end must be a number or \"inf\"");
            spec.infinite_horizon = true;
        } else {
            spec.t_end = j["t_end"].get<double>();
        }
    }
    spec.validate_basic();
    return spec;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    return j;
}

}  // namespace brm
