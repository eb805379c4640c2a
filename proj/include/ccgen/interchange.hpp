#pragma once

// Prediction interchange files: JSON lines, one record per line,
//
//   {"input": str, "slots": [{"position": int, "concept": str, "valid": bool,
//     "explanation": str?}], "raw_text": str, "source": str,
//    "prefix_len": int?, "truncated": bool?}
//
// optionally preceded by a header line carrying "schema": "ccgen.predictions".

#include <string>
#include <vector>

#include "ccgen/core.hpp"
#include "ccgen/io.hpp"

namespace ccgen {

inline constexpr int kPredictionSchemaVersion = 1;

inline json prediction_to_json(const PredictionRecord& r) {
    json slots = json::array();
    for (const auto& s : r.slots) {
        json js = {{"position", s.position}, {"concept", s.text}, {"valid", s.valid()}};
        if (s.explanation) js["explanation"] = *s.explanation;
        slots.push_back(std::move(js));
    }
    json j = {{"input", r.input}, {"slots", slots}, {"raw_text", r.raw_text}, {"source", r.source}};
    if (r.prefix_len) j["prefix_len"] = r.prefix_len;
    if (r.truncated) j["truncated"] = true;
    return j;
}

/// Schema problems of one record; empty when valid.
inline std::vector<std::string> validate_prediction_json(const json& j) {
    std::vector<std::string> errs;
    if (!j.is_object()) return {"record is not an object"};
    auto need = [&](const char* key, json::value_t type, const char* tname) {
        if (!j.contains(key)) errs.push_back(std::string("missing field '") + key + "'");
        else if (j.at(key).type() != type) errs.push_back(std::string("field '") + key + "' must be " + tname);
    };
    need("input", json::value_t::string, "a string");
    need("raw_text", json::value_t::string, "a string");
    need("source", json::value_t::string, "a string");
    if (!j.contains("slots") || !j.at("slots").is_array()) {
        errs.push_back("field 'slots' must be an array");
        return errs;
    }
    if (j.contains("prefix_len") && !j.at("prefix_len").is_number_integer()) errs.push_back("'prefix_len' must be an integer");
    int expected = 1;
    for (const auto& s : j.at("slots")) {
        const std::string where = "slots[" + std::to_string(expected - 1) + "]";
        if (!s.is_object()) {
            errs.push_back(where + " is not an object");
            ++expected;
            continue;
        }
        if (!s.contains("position") || !s.at("position").is_number_integer())
            errs.push_back(where + ".position must be an integer");
        else if (s.at("position").get<int>() != expected)
            errs.push_back(where + ".position must be " + std::to_string(expected));
        if (!s.contains("concept") || !s.at("concept").is_string()) errs.push_back(where + ".concept must be a string");
        if (!s.contains("valid") || !s.at("valid").is_boolean()) errs.push_back(where + ".valid must be a boolean");
        if (s.contains("explanation") && !s.at("explanation").is_string())
            errs.push_back(where + ".explanation must be a string");
        ++expected;
    }
    return errs;
}

/// Validity is re-derived from the concept set rather than trusted.
inline PredictionRecord prediction_from_json(const json& j, const ConceptSet& set, MatchMode match = MatchMode::exact) {
    auto errs = validate_prediction_json(j);
    if (!errs.empty()) throw DataError("invalid prediction record: " + errs.front());
    PredictionRecord r;
    r.input = normalize_surface(j.at("input").get<std::string>());
    if (const Concept* c = set.lookup(r.input, match)) r.input_id = c->id;
    r.raw_text = j.at("raw_text").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.prefix_len = j.value("prefix_len", 0);
    r.truncated = j.value("truncated", false);
    for (const auto& s : j.at("slots")) {
        Slot slot;
        slot.position = s.at("position").get<int>();
        slot.text = normalize_surface(s.at("concept").get<std::string>());
        if (const Concept* c = slot.text.empty() ? nullptr : set.lookup(slot.text, match)) slot.concept_id = c->id;
        if (s.contains("explanation")) slot.explanation = s.at("explanation").get<std::string>();
        r.slots.push_back(std::move(slot));
    }
    return r;
}

/// Header line. `extra` carries run metadata such as the prefix mode tag or
/// the positions a record set should be scored at.
inline json prediction_header(const Provenance& p, const json& extra = json::object()) {
    json h = {{"schema", "ccgen.predictions"}, {"version", kPredictionSchemaVersion}, {"provenance", p.to_json()}};
    for (const auto& [k, v] : extra.items()) h[k] = v;
    return h;
}

inline std::string predictions_to_text(const std::vector<PredictionRecord>& records, const Provenance& p,
                                       const json& extra = json::object()) {
    std::string out = prediction_header(p, extra).dump() + "\n";
    for (const auto& r : records) out += prediction_to_json(r).dump() + "\n";
    return out;
}

inline void write_predictions(const std::string& path, const std::vector<PredictionRecord>& records,
                              const Provenance& p, const json& extra = json::object()) {
    write_text_file(path, predictions_to_text(records, p, extra));
}

struct PredictionFile {
    json header;  // null when the file has none
    std::vector<PredictionRecord> records;
};

inline PredictionFile read_prediction_file(const std::string& path, const ConceptSet& set,
                                           MatchMode match = MatchMode::exact) {
    PredictionFile f;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        if (j.contains("schema")) {
            if (j.at("schema") != "ccgen.predictions")
                throw DataError(path + ":" + std::to_string(line) + ": unexpected schema " + j.at("schema").dump());
            if (j.value("version", 0) != kPredictionSchemaVersion)
                throw DataError(path + ":" + std::to_string(line) + ": unsupported prediction schema version");
            f.header = j;
            return;
        }
        try {
            f.records.push_back(prediction_from_json(j, set, match));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return f;
}

inline std::vector<PredictionRecord> read_predictions(const std::string& path, const ConceptSet& set,
                                                      MatchMode match = MatchMode::exact) {
    return read_prediction_file(path, set, match).records;
}

/// Schema errors of every record in a file, as "line N: message".
inline std::vector<std::string> validate_prediction_file(const std::string& path) {
    std::vector<std::string> errs;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        if (j.contains("schema")) return;
        for (const auto& e : validate_prediction_json(j)) errs.push_back("line " + std::to_string(line) + ": " + e);
    });
    return errs;
}

}  // namespace ccgen
