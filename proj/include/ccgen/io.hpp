#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ccgen/error.hpp"
#include "ccgen/rng.hpp"

namespace ccgen {

using json = nlohmann::json;

/// Calls `fn(record, line_number)` for each non-blank line of a JSON-lines file.
inline void for_each_jsonl(const std::string& path, const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        fn(j, lineno);
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path + ": malformed JSON: " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write '" + path + "'");
    out << content;
    if (!out) throw RuntimeError("write failed for '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Fixed-point rendering used by golden files; identical to printf("%.6f").
inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// Provenance block stamped into every artifact this harness writes.
struct Provenance {
    std::string config_hash = "0000000000000000";
    std::uint64_t seed = 0;

    json to_json() const { return {{"config_hash", config_hash}, {"seed", seed}}; }
    static Provenance from_json(const json& j) {
        Provenance p;
        if (j.contains("config_hash")) p.config_hash = j.at("config_hash").get<std::string>();
        if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
        return p;
    }
};

}  // namespace ccgen
