#ifndef AIMM_SERIALIZATION_HPP
#define AIMM_SERIALIZATION_HPP

// JSON forms of model configs, calibration settings and reports. Doubles are
// written by nlohmann::json's shortest round-trip formatting, so
// write -> read reproduces every value exactly.

#include <aimm/calibrator.hpp>
#include <aimm/errors.hpp>
#include <aimm/market_model.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace aimm {

using Json = nlohmann::ordered_json;

namespace detail {

inline const Json& field(const Json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string(where) + ": missing field '" + key + "'");
    return j.at(key);
}

inline double number(const Json& j, const char* key, const char* where) {
    const Json& v = field(j, key, where);
    if (!v.is_number()) throw SchemaError(std::string(where) + ": field '" + key + "' must be a number");
    return v.get<double>();
}

inline std::vector<double> numbers(const Json& v, const std::string& where) {
    if (!v.is_array()) throw SchemaError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw SchemaError(where + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

/// Reads `key` into `out` when present, keeping the default otherwise.
template <class T>
void optional_field(const Json& j, const char* key, T& out, const char* where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw SchemaError(std::string(where) + ": field '" + key + "' has the wrong type");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Components and model configs

inline Json to_json(const AffineComponent& c) {
    Json j;
    j["kind"] = std::string(to_string(c.kind));
    for (const auto& name : parameter_names(c.kind)) j[name] = parameter(c, name);
    return j;
}

inline AffineComponent component_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("component must be an object");
    const Json& kind = detail::field(j, "kind", "component");
    if (!kind.is_string()) throw SchemaError("component: 'kind' must be a string");
    AffineComponent c;
    c.kind = process_kind_from_string(kind.get<std::string>());
    const auto names = parameter_names(c.kind);
    for (const auto& name : names) parameter(c, name) = detail::number(j, name.c_str(), "component");
    for (const auto& [key, _] : j.items())
        if (key != "kind" && std::find(names.begin(), names.end(), key) == names.end())
            throw SchemaError("component " + kind.get<std::string>() + ": unexpected field '" + key + "'");
    return c;
}

inline Json to_json(const ModelConfig& cfg) {
    Json j;
    j["tenor"] = {{"delta", cfg.tenor().delta}, {"N", cfg.N()}};
    j["numeraire_discount"] = cfg.numeraire_discount();
    Json comps = Json::array();
    for (const auto& c : cfg.process().components()) comps.push_back(to_json(c));
    j["components"] = comps;
    if (const auto& g = cfg.generators()) {
        j["generators"] = {{"utilde", g->utilde}, {"ubar", g->ubar}, {"vtilde", g->vtilde}, {"vbar", g->vbar}};
    } else {
        Json u = Json::array(), v = Json::array();
        for (int k = 1; k <= cfg.N(); ++k) {
            u.push_back(cfg.u(k));
            v.push_back(cfg.v(k));
        }
        j["u"] = u;
        j["v"] = v;
    }
    return j;
}

inline ModelConfig model_config_from_json(const Json& j) {
    const Json& t = detail::field(j, "tenor", "model");
    TenorStructure tenor;
    tenor.delta = detail::number(t, "delta", "model.tenor");
    const Json& n = detail::field(t, "N", "model.tenor");
    if (!n.is_number_integer()) throw SchemaError("model.tenor: 'N' must be an integer");
    tenor.N = n.get<int>();
    if (auto why = tenor.check(); !why.empty()) throw ValidationError(why);
    const double P = detail::number(j, "numeraire_discount", "model");
    const Json& cj = detail::field(j, "components", "model");
    if (!cj.is_array()) throw SchemaError("model: 'components' must be an array");
    std::vector<AffineComponent> comps;
    for (const auto& c : cj) comps.push_back(component_from_json(c));
    ProductProcess process(comps, tenor.horizon());
    if (j.contains("generators")) {
        const Json& g = j.at("generators");
        ParameterGenerators gen;
        gen.utilde = detail::numbers(detail::field(g, "utilde", "model.generators"), "model.generators.utilde");
        gen.ubar = detail::numbers(detail::field(g, "ubar", "model.generators"), "model.generators.ubar");
        gen.vtilde = detail::numbers(detail::field(g, "vtilde", "model.generators"), "model.generators.vtilde");
        gen.vbar = detail::numbers(detail::field(g, "vbar", "model.generators"), "model.generators.vbar");
        return ModelConfig::from_generators(std::move(process), tenor, std::move(gen), P);
    }
    auto rows = [&](const char* key) {
        const Json& a = detail::field(j, key, "model");
        if (!a.is_array()) throw SchemaError(std::string("model: '") + key + "' must be an array");
        std::vector<std::vector<double>> out;
        for (const auto& r : a) out.push_back(detail::numbers(r, std::string("model.") + key));
        return out;
    };
    return ModelConfig(std::move(process), tenor, rows("u"), rows("v"), P);
}

// ---------------------------------------------------------------------------
// Settings

inline Json to_json(const ParameterSet& p) { return {{"names", p.names}, {"lower", p.lower}, {"upper", p.upper}}; }

inline ParameterSet parameter_set_from_json(const Json& j, ProcessKind kind, const char* where) {
    ParameterSet p;
    detail::optional_field(j, "names", p.names, where);
    detail::optional_field(j, "lower", p.lower, where);
    detail::optional_field(j, "upper", p.upper, where);
    if (p.names.size() != p.lower.size() || p.names.size() != p.upper.size())
        throw SchemaError(std::string(where) + ": names, lower and upper must have equal length");
    const auto valid = parameter_names(kind);
    for (std::size_t i = 0; i < p.names.size(); ++i) {
        if (std::find(valid.begin(), valid.end(), p.names[i]) == valid.end())
            throw SchemaError(std::string(where) + ": '" + p.names[i] + "' is not a " +
                              std::string(to_string(kind)) + " parameter");
        if (!(p.lower[i] <= p.upper[i])) throw SchemaError(std::string(where) + ": lower bound above upper bound");
    }
    return p;
}

inline Json to_json(const CalibrationSettings& s) {
    Json j;
    j["common"] = to_json(s.common);
    j["nominal_initial"] = to_json(s.nominal_initial);
    j["nominal_free"] = to_json(s.nominal_free);
    j["inflation_initial"] = to_json(s.inflation_initial);
    j["inflation_free"] = to_json(s.inflation_free);
    j["nominal_objective"] = std::string(to_string(s.nominal_objective));
    j["inflation_objective"] = std::string(to_string(s.inflation_objective));
    j["half_variance_utilde"] = s.half_variance_utilde;
    j["utilde_constant"] = s.utilde_constant;
    j["tilt_c"] = s.tilt_c;
    j["two_root_policy"] = std::string(to_string(s.two_root));
    j["roots"] = {{"tol", s.roots.tol}, {"xtol", s.roots.xtol}, {"max_iter", s.roots.max_iter}};
    j["optimizer"] = {{"max_evaluations", s.optimizer.max_evaluations},
                      {"ftol", s.optimizer.ftol},
                      {"xtol", s.optimizer.xtol},
                      {"initial_step", s.optimizer.initial_step}};
    j["starts"] = s.starts;
    j["seed"] = s.seed;
    j["good_enough"] = s.good_enough;
    const ContourSpec& c = s.contour;
    j["contour"] = {{"damping", std::isnan(c.damping) ? Json(nullptr) : Json(c.damping)},
                    {"damping_cap", c.damping_cap},
                    {"margin", c.margin},
                    {"nodes", c.nodes},
                    {"rel_tol", c.rel_tol},
                    {"abs_tol", c.abs_tol},
                    {"tail_tol", c.tail_tol},
                    {"max_upper", c.max_upper},
                    {"max_evaluations", c.max_evaluations},
                    {"fail_tol", c.fail_tol}};
    return j;
}

/// Settings from JSON; absent fields keep their defaults.
inline CalibrationSettings settings_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("settings must be a JSON object");
    CalibrationSettings s;
    if (j.contains("common")) s.common = component_from_json(j["common"]);
    if (j.contains("nominal_initial")) s.nominal_initial = component_from_json(j["nominal_initial"]);
    if (j.contains("inflation_initial")) s.inflation_initial = component_from_json(j["inflation_initial"]);
    if (s.common.kind != ProcessKind::Cir) throw SchemaError("settings: common factor must be CIR");
    if (s.nominal_initial.kind != ProcessKind::CirJump) throw SchemaError("settings: nominal_initial must be CIRJump");
    if (s.inflation_initial.kind != ProcessKind::OuJump) throw SchemaError("settings: inflation_initial must be OUJump");
    if (j.contains("nominal_free"))
        s.nominal_free = parameter_set_from_json(j["nominal_free"], ProcessKind::CirJump, "settings.nominal_free");
    if (j.contains("inflation_free"))
        s.inflation_free = parameter_set_from_json(j["inflation_free"], ProcessKind::OuJump, "settings.inflation_free");
    std::string text;
    if (text.clear(), detail::optional_field(j, "nominal_objective", text, "settings"); !text.empty())
        s.nominal_objective = objective_kind_from_string(text);
    if (text.clear(), detail::optional_field(j, "inflation_objective", text, "settings"); !text.empty())
        s.inflation_objective = objective_kind_from_string(text);
    if (text.clear(), detail::optional_field(j, "two_root_policy", text, "settings"); !text.empty())
        s.two_root = two_root_policy_from_string(text);
    detail::optional_field(j, "half_variance_utilde", s.half_variance_utilde, "settings");
    detail::optional_field(j, "utilde_constant", s.utilde_constant, "settings");
    detail::optional_field(j, "tilt_c", s.tilt_c, "settings");
    detail::optional_field(j, "starts", s.starts, "settings");
    detail::optional_field(j, "seed", s.seed, "settings");
    detail::optional_field(j, "good_enough", s.good_enough, "settings");
    if (j.contains("roots")) {
        const Json& r = j["roots"];
        detail::optional_field(r, "tol", s.roots.tol, "settings.roots");
        detail::optional_field(r, "xtol", s.roots.xtol, "settings.roots");
        detail::optional_field(r, "max_iter", s.roots.max_iter, "settings.roots");
    }
    if (j.contains("optimizer")) {
        const Json& o = j["optimizer"];
        detail::optional_field(o, "max_evaluations", s.optimizer.max_evaluations, "settings.optimizer");
        detail::optional_field(o, "ftol", s.optimizer.ftol, "settings.optimizer");
        detail::optional_field(o, "xtol", s.optimizer.xtol, "settings.optimizer");
        detail::optional_field(o, "initial_step", s.optimizer.initial_step, "settings.optimizer");
    }
    if (j.contains("contour")) {
        const Json& c = j["contour"];
        ContourSpec& k = s.contour;
        if (c.contains("damping") && !c["damping"].is_null())
            detail::optional_field(c, "damping", k.damping, "settings.contour");
        detail::optional_field(c, "damping_cap", k.damping_cap, "settings.contour");
        detail::optional_field(c, "margin", k.margin, "settings.contour");
        detail::optional_field(c, "nodes", k.nodes, "settings.contour");
        detail::optional_field(c, "rel_tol", k.rel_tol, "settings.contour");
        detail::optional_field(c, "abs_tol", k.abs_tol, "settings.contour");
        detail::optional_field(c, "tail_tol", k.tail_tol, "settings.contour");
        detail::optional_field(c, "max_upper", k.max_upper, "settings.contour");
        detail::optional_field(c, "max_evaluations", k.max_evaluations, "settings.contour");
        detail::optional_field(c, "fail_tol", k.fail_tol, "settings.contour");
    }
    if (s.starts < 1) throw SchemaError("settings: starts must be >= 1");
    return s;
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const CalibrationReport& r) {
    Json j;
    j["inflation_calibrated"] = r.inflation_calibrated;
    j["failed_stage"] = r.failed_stage.empty() ? Json(nullptr) : Json(r.failed_stage);
    j["max_relative_curve_error"] = r.max_relative_curve_error();
    if (r.inflation_calibrated) j["max_zciis_error"] = r.max_zciis_error();
    Json stages = Json::array();
    for (const auto& s : r.stages) {
        Json params;
        for (std::size_t i = 0; i < s.names.size(); ++i) params[s.names[i]] = s.values[i];
        stages.push_back({{"stage", s.stage},
                          {"year", s.year},
                          {"component", s.component},
                          {"parameters", params},
                          {"objective", s.objective},
                          {"evaluations", s.evaluations},
                          {"converged", s.converged},
                          {"rank_deficient", s.rank_deficient},
                          {"quotes", s.quotes},
                          {"message", s.message}});
    }
    j["stages"] = stages;
    Json roots = Json::array();
    for (const auto& d : r.roots)
        roots.push_back({{"sequence", d.sequence},
                         {"k", d.k},
                         {"value", d.value},
                         {"residual", d.residual},
                         {"iterations", d.iterations},
                         {"roots_found", d.roots_found},
                         {"note", d.note}});
    j["roots"] = roots;
    Json res = Json::array();
    for (const auto& x : r.residuals)
        res.push_back({{"instrument", x.instrument},
                       {"maturity", x.maturity},
                       {"strike", x.strike},
                       {"market", x.market},
                       {"model", x.model},
                       {"error", x.error()},
                       {"unit", x.unit}});
    j["residuals"] = res;
    j["log"] = r.log;
    if (r.config.dim() > 0) j["model"] = to_json(r.config);
    return j;
}

// ---------------------------------------------------------------------------
// Files

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

inline void write_json_file(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

inline ModelConfig load_model(const std::filesystem::path& path) {
    return model_config_from_json(read_json_file(path));
}

inline CalibrationSettings load_settings(const std::filesystem::path& path) {
    return settings_from_json(read_json_file(path));
}

} // namespace aimm

#endif // AIMM_SERIALIZATION_HPP
