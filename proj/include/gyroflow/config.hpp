#pragma once

// JSON configuration for intrinsics, timing, estimator, fusion and scene
// specs. Missing keys keep their defaults; unknown keys are rejected so a
// typo cannot silently fall back to a default.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gyroflow/estimator.hpp"
#include "gyroflow/fusion.hpp"
#include "gyroflow/gyro_field.hpp"
#include "gyroflow/synthetic.hpp"

namespace gyroflow {

using Json = nlohmann::ordered_json;

namespace detail {

class JsonReader {
public:
    JsonReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.emplace_back(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ValidationError(where_ + "." + key + ": wrong type (" + it->type_name() + ")");
        }
    }

    const Json* child(const char* key) {
        seen_.emplace_back(key);
        const auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    std::string path(const char* key) const { return where_ + "." + key; }

    //! call after every get(); throws on keys nobody asked for
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ValidationError(where_ + ": unknown key '" + it.key() + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::vector<std::string> seen_;
};

inline Vec3 vec3_from(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ValidationError(where + ": expected [x, y, z]");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) throw ValidationError(where + ": expected numbers");
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

inline Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

} // namespace detail

inline CameraIntrinsics intrinsics_from_json(const Json& j, const std::string& where = "intrinsics") {
    CameraIntrinsics k;
    detail::JsonReader r(j, where);
    r.get("fx", k.fx);
    r.get("fy", k.fy);
    r.get("cx", k.cx);
    r.get("cy", k.cy);
    r.get("skew", k.skew);
    r.finish();
    k.validate();
    return k;
}

inline Json to_json(const CameraIntrinsics& k) {
    return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"skew", k.skew}};
}

//! `readout_defaulted`, when given, reports whether readout_ns was absent
inline FrameTiming timing_from_json(const Json& j, const std::string& where = "timing",
                                    bool* readout_defaulted = nullptr) {
    FrameTiming t;
    detail::JsonReader r(j, where);
    r.get("start_a_ns", t.start_a);
    r.get("start_b_ns", t.start_b);
    if (readout_defaulted) *readout_defaulted = !j.contains("readout_ns");
    r.get("readout_ns", t.readout_ns);
    r.finish();
    t.validate();
    return t;
}

inline Json to_json(const FrameTiming& t) {
    return {{"start_a_ns", t.start_a}, {"start_b_ns", t.start_b}, {"readout_ns", t.readout_ns}};
}

inline EstimatorConfig estimator_from_json(const Json& j, EstimatorConfig c = {},
                                           const std::string& where = "estimator") {
    detail::JsonReader r(j, where);
    std::string data = c.data_term == DataTerm::census ? "census" : "ssd";
    r.get("levels", c.levels);
    r.get("iterations", c.iterations);
    r.get("lambda", c.lambda);
    r.get("data_term", data);
    r.get("inner_iterations", c.inner_iterations);
    r.get("sor_omega", c.sor_omega);
    r.get("census_epsilon", c.census_epsilon);
    r.get("gradient_floor", c.gradient_floor);
    r.get("robust_epsilon", c.robust_epsilon);
    r.get("median_radius", c.median_radius);
    r.get("edge_kappa", c.edge_kappa);
    r.finish();
    if (data == "census")
        c.data_term = DataTerm::census;
    else if (data == "ssd")
        c.data_term = DataTerm::intensity_ssd;
    else
        throw ValidationError(where + ".data_term: expected 'census' or 'ssd', got '" + data + "'");
    c.validate();
    return c;
}

inline Json to_json(const EstimatorConfig& c) {
    return {{"levels", c.levels},
            {"iterations", c.iterations},
            {"lambda", c.lambda},
            {"data_term", c.data_term == DataTerm::census ? "census" : "ssd"},
            {"inner_iterations", c.inner_iterations},
            {"sor_omega", c.sor_omega},
            {"census_epsilon", c.census_epsilon},
            {"gradient_floor", c.gradient_floor},
            {"robust_epsilon", c.robust_epsilon},
            {"median_radius", c.median_radius},
            {"edge_kappa", c.edge_kappa}};
}

inline FusionConfig fusion_from_json(const Json& j, FusionConfig c = {}, const std::string& where = "fusion") {
    detail::JsonReader r(j, where);
    r.get("sigma", c.sigma);
    r.get("smoothing_radius", c.smoothing_radius);
    r.get("census_radius", c.census_radius);
    r.get("dilation", c.dilation);
    r.get("levels", c.levels);
    r.get("subtract_noise_floor", c.subtract_noise_floor);
    r.get("presmooth", c.presmooth);
    r.finish();
    c.validate();
    return c;
}

inline Json to_json(const FusionConfig& c) {
    return {{"sigma", c.sigma},
            {"smoothing_radius", c.smoothing_radius},
            {"census_radius", c.census_radius},
            {"dilation", c.dilation},
            {"levels", c.levels},
            {"subtract_noise_floor", c.subtract_noise_floor},
            {"presmooth", c.presmooth}};
}

inline SceneSpec scene_from_json(const Json& j, const std::string& where = "scene") {
    SceneSpec s;
    detail::JsonReader r(j, where);
    r.get("width", s.width);
    r.get("height", s.height);
    if (const Json* k = r.child("intrinsics")) s.intrinsics = intrinsics_from_json(*k, r.path("intrinsics"));
    r.get("start_a_ns", s.start_a_ns);
    r.get("frame_interval_ns", s.frame_interval_ns);
    r.get("readout_ns", s.readout_ns);
    if (const Json* rot = r.child("rotation")) {
        detail::JsonReader rr(*rot, r.path("rotation"));
        if (const Json* keys = rr.child("keyframes")) {
            if (!keys->is_array() || keys->empty())
                throw SpecError(rr.path("keyframes") + ": expected a non-empty array");
            std::vector<OmegaKeyframe> kf;
            for (std::size_t i = 0; i < keys->size(); ++i) {
                const std::string at = rr.path("keyframes") + "[" + std::to_string(i) + "]";
                detail::JsonReader kr((*keys)[i], at);
                OmegaKeyframe k;
                kr.get("t_ns", k.t_ns);
                const Json* om = kr.child("omega");
                if (!om) throw SpecError(at + ": missing omega");
                k.omega = detail::vec3_from(*om, at + ".omega");
                kr.finish();
                kf.push_back(k);
            }
            s.rotation = RotationHistory(std::move(kf));
        }
        rr.finish();
    }
    if (const Json* rc = r.child("rect")) {
        MovingRect m;
        detail::JsonReader rr(*rc, r.path("rect"));
        rr.get("x", m.x);
        rr.get("y", m.y);
        rr.get("width", m.width);
        rr.get("height", m.height);
        rr.get("dx", m.dx);
        rr.get("dy", m.dy);
        rr.get("texture_seed", m.texture_seed);
        rr.finish();
        s.rect = m;
    }
    r.get("texture_seed", s.texture_seed);
    r.get("seed", s.seed);
    if (const Json* g = r.child("gyro")) {
        detail::JsonReader gr(*g, r.path("gyro"));
        gr.get("rate_hz", s.gyro.rate_hz);
        if (const Json* b = gr.child("bias")) s.gyro.bias = detail::vec3_from(*b, gr.path("bias"));
        gr.get("noise_std", s.gyro.noise_std);
        gr.finish();
    }
    if (const Json* d = r.child("degradation")) {
        detail::JsonReader dr(*d, r.path("degradation"));
        dr.get("dark", s.degradation.dark);
        dr.get("fog", s.degradation.fog);
        dr.get("rain", s.degradation.rain);
        dr.get("sensor_noise", s.degradation.sensor_noise);
        dr.finish();
    }
    std::string cat = category_name(s.category);
    r.get("category", cat);
    r.finish();
    try {
        s.category = parse_category(cat);
    } catch (const InvalidArgument& e) {
        throw SpecError(where + ".category: " + e.what());
    }
    return s;
}

//! the fully resolved spec: every default written out explicitly
inline Json to_json(const SceneSpec& s) {
    Json keys = Json::array();
    for (const auto& k : s.rotation.keyframes()) keys.push_back({{"t_ns", k.t_ns}, {"omega", detail::vec3_json(k.omega)}});
    Json j = {{"width", s.width},
              {"height", s.height},
              {"intrinsics", to_json(s.resolved_intrinsics())},
              {"start_a_ns", s.start_a_ns},
              {"frame_interval_ns", s.frame_interval_ns},
              {"readout_ns", s.readout_ns},
              {"rotation", {{"keyframes", keys}}}};
    if (s.rect)
        j["rect"] = {{"x", s.rect->x},           {"y", s.rect->y},   {"width", s.rect->width},
                     {"height", s.rect->height}, {"dx", s.rect->dx}, {"dy", s.rect->dy},
                     {"texture_seed", s.rect->texture_seed}};
    else
        j["rect"] = nullptr;
    j["texture_seed"] = s.texture_seed;
    j["seed"] = s.seed;
    j["gyro"] = {{"rate_hz", s.gyro.rate_hz}, {"bias", detail::vec3_json(s.gyro.bias)}, {"noise_std", s.gyro.noise_std}};
    j["degradation"] = {{"dark", s.degradation.dark},
                        {"fog", s.degradation.fog},
                        {"rain", s.degradation.rain},
                        {"sensor_noise", s.degradation.sensor_noise}};
    j["category"] = category_name(s.category);
    return j;
}

//! JSON text to a tree; syntax errors become ParseError with the line
inline Json parse_json(const std::string& text, const std::string& name) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) line += text[i] == '\n';
        throw ParseError(name + ": " + e.what(), line);
    }
}

inline Json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_json(ss.str(), path);
}

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: '" + path + "'");
}

//! FNV-1a over the compact dump, as 16 hex digits
inline std::string config_hash(const Json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace gyroflow
