#pragma once

// Machine-readable run reports: canonical JSON (sorted keys, stable digests),
// a flat CSV export, and a small structural validator matching
// docs/report.schema.json. Timestamps never enter the report body; they go
// to a sidecar so identical runs stay byte-identical.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <limits>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "certwatch/confidence.hpp"
#include "certwatch/eval.hpp"
#include "certwatch/metrics.hpp"
#include "certwatch/rng.hpp"
#include "certwatch/trainer.hpp"

namespace certwatch {

using json = nlohmann::json;

// 16-hex-digit digest of the resolved config; embedded in every report so
// no run is unidentifiable.
inline std::string config_hash(const json& cfg) {
    std::string bytes = cfg.dump();
    std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

inline json finite_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline json to_json(const ConfusionCounts& c) {
    return json{{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}};
}

inline json to_json(const ConfusionTable& t) {
    return json{{"confident", to_json(t.confident)},
                {"non_confident", to_json(t.non_confident)}};
}

inline json to_json(const MetricSet& m) {
    json j;
    j["sensitivity"] = m.sensitivity ? json(*m.sensitivity) : json(nullptr);
    j["precision"] = m.precision ? json(*m.precision) : json(nullptr);
    j["accuracy"] = m.accuracy ? json(*m.accuracy) : json(nullptr);
    return j;
}

inline json to_json(const LRBaselines& b) {
    return json{{"lr_total", finite_or_null(b.lr_total)},
                {"lr_pos", b.n_pos > 0 ? finite_or_null(b.lr_pos) : json(nullptr)},
                {"lr_neg", b.n_neg > 0 ? finite_or_null(b.lr_neg) : json(nullptr)},
                {"n_total", b.n_total},
                {"n_pos", b.n_pos},
                {"n_neg", b.n_neg},
                {"source", b.source}};
}

inline json to_json(const DriftVerdict& v) {
    return json{{"ratio_total", finite_or_null(v.ratio_total)},
                {"ratio_pos", finite_or_null(v.ratio_pos)},
                {"ratio_neg", finite_or_null(v.ratio_neg)},
                {"threshold", v.threshold},
                {"retrain", v.retrain}};
}

inline json to_json(const EpochStats& s) {
    return json{{"epoch", s.epoch},       {"mean_loss", s.mean_loss},
                {"lr", s.lr},             {"kl_weight", s.kl_weight},
                {"ibp_weight", s.ibp_weight}, {"eps", s.eps}};
}

// Common envelope every subcommand report shares.
inline json report_envelope(const std::string& kind, const json& config,
                            std::uint64_t seed) {
    json j;
    j["kind"] = kind;
    j["config"] = config;
    j["config_hash"] = config_hash(config);
    j["seed"] = seed;
    return j;
}

inline json eval_report(const EvalResult& r, const json& config, std::uint64_t seed) {
    json j = report_envelope("eval", config, seed);
    j["table"] = to_json(r.table);
    j["metrics"] = to_json(r.metrics);
    j["lr_baselines"] = to_json(r.baselines);
    j["deployable"] = r.deployable;
    return j;
}

inline json train_report(const TrainResult& r, const json& config, std::uint64_t seed) {
    json j = report_envelope("train", config, seed);
    j["curve"] = json::array();
    for (const EpochStats& s : r.curve) j["curve"].push_back(to_json(s));
    return j;
}

// One table cell per (attack, eps): survival ratio, perceptual quality of
// the attacked frames, and the certified lower bound at the same radius.
struct AttackCell {
    std::string attack;
    double eps = 0.0;
    int tp_clean = 0;
    int tp_attack = 0;
    bool ratio_defined = false;
    double ratio = 0.0;
    double haarpsi_mean = std::numeric_limits<double>::quiet_NaN();
    double ibp_bound = std::numeric_limits<double>::quiet_NaN();
};

inline json to_json(const AttackCell& c) {
    return json{{"attack", c.attack},
                {"eps", c.eps},
                {"tp_clean", c.tp_clean},
                {"tp_attack", c.tp_attack},
                {"ratio", c.ratio_defined ? json(c.ratio) : json(nullptr)},
                {"haarpsi_mean", finite_or_null(c.haarpsi_mean)},
                {"ibp_bound", finite_or_null(c.ibp_bound)}};
}

inline json attack_report(const std::vector<AttackCell>& cells, const json& config,
                          std::uint64_t seed) {
    json j = report_envelope("attack", config, seed);
    j["rows"] = json::array();
    for (const AttackCell& c : cells) j["rows"].push_back(to_json(c));
    return j;
}

inline json cert_report(const std::vector<std::pair<double, double>>& eps_fraction,
                        const json& config, std::uint64_t seed) {
    json j = report_envelope("cert", config, seed);
    j["rows"] = json::array();
    for (const auto& [eps, frac] : eps_fraction)
        j["rows"].push_back(json{{"eps", eps}, {"certified_fraction", frac}});
    return j;
}

inline json drift_report(const LRBaselines& train_b, const LRBaselines& field_b,
                         const DriftVerdict& v, const json& config, std::uint64_t seed) {
    json j = report_envelope("drift", config, seed);
    j["train_baselines"] = to_json(train_b);
    j["field_baselines"] = to_json(field_b);
    j["verdict"] = to_json(v);
    return j;
}

// Canonical serialization: 2-space indent, keys sorted (nlohmann objects are
// key-ordered maps), trailing newline. Identical content -> identical bytes.
inline std::string report_bytes(const json& j) { return j.dump(2) + "\n"; }

inline void write_json_report(const json& j, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    f << report_bytes(j);
    if (!f) throw std::runtime_error("report: short write to " + path);
    // wall-clock info lives next to the report, never inside it
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    json meta{{"written_at", buf}};
    std::ofstream mf(path + ".meta", std::ios::binary);
    if (mf) mf << meta.dump(2) << "\n";
}

inline json read_json_report(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("report: malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

// ---- CSV flat export -------------------------------------------------------

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return csv_escape(v.get<std::string>());
    return v.dump();
}

// Flattens a report into rows. Reports with a "rows" array export one CSV
// line per cell; scalar reports collapse nested keys into dotted columns.
inline void flatten_into(const json& j, const std::string& prefix, json& flat) {
    for (const auto& [key, val] : j.items()) {
        std::string name = prefix.empty() ? key : prefix + "." + key;
        if (val.is_object())
            flatten_into(val, name, flat);
        else if (!val.is_array())
            flat[name] = val;
    }
}

inline std::string report_csv(const json& report) {
    std::vector<json> rows;
    json common;
    flatten_into(report, "", common);
    if (report.contains("rows") && report["rows"].is_array()) {
        for (const json& cell : report["rows"]) {
            json row = common;
            flatten_into(cell, "", row);
            rows.push_back(row);
        }
    } else if (report.contains("curve") && report["curve"].is_array()) {
        for (const json& cell : report["curve"]) {
            json row = common;
            flatten_into(cell, "", row);
            rows.push_back(row);
        }
    } else {
        rows.push_back(common);
    }
    std::set<std::string> cols;
    for (const json& r : rows)
        for (const auto& [key, val] : r.items()) {
            (void)val;
            cols.insert(key);
        }
    std::ostringstream out;
    bool first = true;
    for (const std::string& c : cols) {
        if (!first) out << ",";
        out << csv_escape(c);
        first = false;
    }
    out << "\n";
    for (const json& r : rows) {
        first = true;
        for (const std::string& c : cols) {
            if (!first) out << ",";
            if (r.contains(c)) out << csv_cell(r.at(c));
            first = false;
        }
        out << "\n";
    }
    return out.str();
}

inline void write_csv_report(const json& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    f << report_csv(report);
    if (!f) throw std::runtime_error("report: short write to " + path);
}

// ---- structural validation (mirrors docs/report.schema.json) ---------------

inline void validate_report(const json& j) {
    auto need = [&](const char* key, bool ok) {
        if (!j.contains(key) || !ok)
            throw std::runtime_error(std::string("report: missing or invalid '") + key + "'");
    };
    need("kind", j.contains("kind") && j["kind"].is_string());
    need("config", j.contains("config") && j["config"].is_object());
    need("config_hash", j.contains("config_hash") && j["config_hash"].is_string() &&
                            j["config_hash"].get<std::string>().size() == 16);
    need("seed", j.contains("seed") && j["seed"].is_number_unsigned());
    if (j["config_hash"].get<std::string>() != config_hash(j["config"]))
        throw std::runtime_error("report: config_hash does not match config");
    const std::string kind = j["kind"].get<std::string>();
    auto require_key = [&](const char* key, const char* type) {
        bool ok = j.contains(key);
        if (ok) {
            const json& v = j[key];
            std::string t = type;
            if (t == "object") ok = v.is_object();
            else if (t == "array") ok = v.is_array();
            else if (t == "boolean") ok = v.is_boolean();
        }
        if (!ok)
            throw std::runtime_error("report: kind '" + kind + "' needs " + type +
                                     " field '" + key + "'");
    };
    if (kind == "eval") {
        require_key("table", "object");
        require_key("metrics", "object");
        require_key("lr_baselines", "object");
        require_key("deployable", "boolean");
    } else if (kind == "train") {
        require_key("curve", "array");
    } else if (kind == "attack" || kind == "cert") {
        require_key("rows", "array");
    } else if (kind == "drift") {
        require_key("train_baselines", "object");
        require_key("field_baselines", "object");
        require_key("verdict", "object");
    } else if (kind != "gen-data") {
        throw std::runtime_error("report: unknown kind '" + kind + "'");
    }
}

} // namespace certwatch
