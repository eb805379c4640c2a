#include <gtest/gtest.h>

#include "ccgen/interchange.hpp"
#include "support/test_support.hpp"

using namespace ccgen;

namespace {

json good_record() {
    return json::parse(R"({"input": "Digital Cameras", "raw_text": "", "source": "external",
        "slots": [{"position": 1, "concept": "Batteries", "valid": true},
                  {"position": 2, "concept": "Warp Coils", "valid": false, "explanation": "why not"}]})");
}

}  // namespace

TEST(Schema, AcceptsWellFormedRecord) { EXPECT_TRUE(validate_prediction_json(good_record()).empty()); }

TEST(Schema, ReportsEachProblem) {
    auto j = good_record();
    j.erase("source");
    j["slots"][1]["position"] = 3;
    j["slots"][0]["concept"] = 7;
    j["slots"][0].erase("valid");
    j["prefix_len"] = "two";
    auto errs = validate_prediction_json(j);
    ASSERT_EQ(errs.size(), 5u);
    EXPECT_EQ(errs[0], "missing field 'source'");
    EXPECT_EQ(errs[1], "'prefix_len' must be an integer");
    EXPECT_EQ(errs[2], "slots[0].concept must be a string");
    EXPECT_EQ(errs[3], "slots[0].valid must be a boolean");
    EXPECT_EQ(errs[4], "slots[1].position must be 2");
    EXPECT_FALSE(validate_prediction_json(json::array()).empty());
    auto s = good_record();
    s["slots"] = "none";
    EXPECT_EQ(validate_prediction_json(s).back(), "field 'slots' must be an array");
}

TEST(Records, ValidityIsRederived) {
    auto set = support::six_concept_set();
    auto j = good_record();
    j["input"] = "Alpha Cams";
    j["slots"][0]["concept"] = "Not Listed";  // claims valid
    j["slots"][1]["concept"] = "Beta Lenses";  // claims invalid
    auto r = prediction_from_json(j, set);
    EXPECT_FALSE(r.slots[0].valid());
    EXPECT_TRUE(r.slots[1].valid());
    EXPECT_EQ(r.slots[1].explanation, std::optional<std::string>("why not"));
    EXPECT_EQ(r.input_id, std::optional<ConceptId>(0));
    j["slots"][0].erase("position");
    EXPECT_THROW(prediction_from_json(j, set), DataError);
}

TEST(Files, WriteReadRoundTrip) {
    auto set = support::six_concept_set();
    auto r = support::to_prediction({0, {1, std::nullopt, 2}}, set);
    r.raw_text = "raw";
    r.source = "test";
    r.prefix_len = 1;
    r.truncated = true;
    r.slots[2].explanation = "because";
    support::TempDir dir("pred");
    write_predictions(dir.file("p.jsonl"), {r, r}, {"abc", 3}, {{"mode", "+1"}});
    auto f = read_prediction_file(dir.file("p.jsonl"), set);
    ASSERT_EQ(f.records.size(), 2u);
    EXPECT_EQ(f.header.at("mode"), "+1");
    EXPECT_EQ(f.header.at("provenance").at("seed"), 3);
    EXPECT_EQ(f.header.at("schema"), "ccgen.predictions");
    EXPECT_EQ(prediction_to_json(f.records[0]), prediction_to_json(r));
    EXPECT_TRUE(validate_prediction_file(dir.file("p.jsonl")).empty());
}

TEST(Files, BadLinesCarryLineNumbers) {
    auto set = support::six_concept_set();
    support::TempDir dir("bad");
    write_text_file(dir.file("p.jsonl"), good_record().dump() + "\n" + R"({"input": "x"})" + "\n");
    try {
        read_predictions(dir.file("p.jsonl"), set);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    auto errs = validate_prediction_file(dir.file("p.jsonl"));
    ASSERT_FALSE(errs.empty());
    EXPECT_EQ(errs[0].rfind("line 2:", 0), 0u);
    write_text_file(dir.file("v.jsonl"), R"({"schema": "ccgen.predictions", "version": 7})" "\n");
    EXPECT_THROW(read_predictions(dir.file("v.jsonl"), set), DataError);
}

TEST(Files, HandWrittenFixtureValidates) {
    EXPECT_TRUE(validate_prediction_file(support::fixture("golden20/predictions.jsonl")).empty());
}
