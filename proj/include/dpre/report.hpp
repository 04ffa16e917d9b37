#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dpre {

struct CheckRecord {
    std::string check;
    std::int64_t n = 0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    double oracle = 0.0;
    double oracle_stderr = 0.0;
    double z = 0.0; // per-check error measure (z-score or relative error)
    bool pass = false;
};

struct TrendRecord {
    std::string check;
    bool non_increasing = false;
};

struct RunReport {
    nlohmann::json config_echo; // config without runtime-only fields
    std::vector<CheckRecord> checks;
    std::vector<TrendRecord> trends;
    bool all_pass = false;
    // environment: excluded from the deterministic payload
    std::uint64_t seed = 0;
    int workers = 1;
    double wall_time_s = 0.0;

    // Deterministic part of the report: identical bytes for identical
    // (config, seed), regardless of worker count or wall time.
    nlohmann::json payload_json() const {
        nlohmann::json j;
        j["config"] = config_echo;
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : checks) {
            arr.push_back({{"check", c.check},
                           {"N", c.n},
                           {"estimate", c.estimate},
                           {"stderr", c.stderr_},
                           {"oracle", c.oracle},
                           {"oracle_stderr", c.oracle_stderr},
                           {"z", c.z},
                           {"pass", c.pass}});
        }
        j["checks"] = arr;
        nlohmann::json tr = nlohmann::json::array();
        for (const auto& t : trends)
            tr.push_back({{"check", t.check}, {"non_increasing", t.non_increasing}});
        j["trends"] = tr;
        j["all_pass"] = all_pass;
        return j;
    }

    nlohmann::json full_json() const {
        nlohmann::json j = payload_json();
        j["environment"] = {{"seed", seed},
                            {"workers", workers},
                            {"wall_time_s", wall_time_s},
                            {"version", "1.0"}};
        return j;
    }

    std::string csv() const {
        std::string out = "N,check,estimate,stderr,oracle,z,pass\n";
        char line[512];
        for (const auto& c : checks) {
            std::snprintf(line, sizeof(line), "%lld,%s,%.17g,%.17g,%.17g,%.17g,%d\n",
                          static_cast<long long>(c.n), c.check.c_str(), c.estimate,
                          c.stderr_, c.oracle, c.z, c.pass ? 1 : 0);
            out += line;
        }
        return out;
    }
};

// Minimal structural validation of a serialized report.
inline bool validate_report_json(const nlohmann::json& j, std::string* why = nullptr) {
    auto fail = [&](const char* msg) {
        if (why) *why = msg;
        return false;
    };
    if (!j.is_object()) return fail("root must be an object");
    if (!j.contains("config") || !j["config"].is_object()) return fail("missing config");
    if (!j.contains("checks") || !j["checks"].is_array()) return fail("missing checks");
    for (const auto& c : j["checks"]) {
        for (const char* key : {"check", "N", "estimate", "stderr", "oracle", "z", "pass"})
            if (!c.contains(key)) return fail("check record missing a field");
        if (!c["check"].is_string() || !c["estimate"].is_number() || !c["pass"].is_boolean())
            return fail("check record field has wrong type");
    }
    if (!j.contains("trends") || !j["trends"].is_array()) return fail("missing trends");
    if (!j.contains("all_pass") || !j["all_pass"].is_boolean()) return fail("missing all_pass");
    return true;
}

// temp file + rename so partially written reports are never observed
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("write_file_atomic: cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write_file_atomic: write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void emit_report(const RunReport& report, const std::filesystem::path& dir) {
    write_file_atomic(dir / "report.json", report.full_json().dump(2) + "\n");
    write_file_atomic(dir / "report.csv", report.csv());
}

} // namespace dpre
