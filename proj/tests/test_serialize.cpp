#include <gtest/gtest.h>

#include <set>

#include "ccgen/serialize.hpp"
#include "support/test_support.hpp"

using namespace ccgen;

namespace {

const std::vector<std::string> kCameraTargets = {"Camera Lenses", "Batteries", "Memory Cards", "Camera Cases", "Tripods"};

ConceptSet camera_set() {
    ConceptSet s;
    for (const auto& n : {"Digital Cameras", "Camera Lenses", "Batteries", "Memory Cards", "Camera Cases", "Tripods"})
        s.intern(n);
    s.freeze();
    return s;
}

std::vector<std::string> surfaces(const PredictionRecord& r) {
    std::vector<std::string> out;
    for (const auto& s : r.slots) out.push_back(s.text);
    return out;
}

// Random surface drawn from a small alphabet of words; never hits the grammar.
std::string random_surface(std::mt19937_64& rng) {
    static const std::vector<std::string> words = {"Camera", "Lens", "USB", "Cables", "&", "Point", "Shoot", "Kits",
                                                   "4K",     "Pro",  "Mini", "Cases", "-",  "Wall",  "Mounts"};
    std::string s;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return s;
}

}  // namespace

TEST(Encode, DigitalCamerasReference) {
    auto ex = encode_ordered("Digital Cameras", kCameraTargets);
    EXPECT_EQ(ex.text,
              "[SOS] Digital Cameras are purchased with 1) Camera Lenses 2) Batteries 3) Memory Cards "
              "4) Camera Cases 5) Tripods [EOS]");
}

TEST(Encode, ExplanationsAndSingleTarget) {
    auto ex = encode_with_explanations("Digital Cameras", {"Batteries", "Tripods"}, {"power the camera", "steady shots"});
    EXPECT_EQ(ex.text,
              "[SOS] Digital Cameras are purchased with 1) Batteries: power the camera 2) Tripods: steady shots [EOS]");
    EXPECT_EQ(encode_single_target("Digital Cameras", "Batteries").text,
              "[SOS] Digital Cameras are purchased with Batteries [EOS]");
    EXPECT_THROW(encode_with_explanations("x", {"a", "b"}, {"e"}), DataError);
    EXPECT_THROW(encode_with_explanations("x", {"a"}, {"see 2) below"}), DataError);
    EXPECT_THROW(encode_ordered("x", {}), DataError);
    EXPECT_THROW(encode_ordered("  ", {"a"}), DataError);
}

TEST(Encode, CustomRelation) {
    Grammar g{"are bought with"};
    EXPECT_EQ(encode_ordered("A", {"B"}, g).text, "[SOS] A are bought with 1) B [EOS]");
}

TEST(PrefixPrompt, Shapes) {
    EXPECT_EQ(build_prefix_prompt("Digital Cameras", {}).text, "[SOS] Digital Cameras are purchased with");
    EXPECT_EQ(build_prefix_prompt("Digital Cameras", {"Camera Lenses", "Batteries"}).text,
              "[SOS] Digital Cameras are purchased with 1) Camera Lenses 2) Batteries 3)");
}

TEST(Decode, ReferenceString) {
    auto set = camera_set();
    auto ex = encode_ordered("Digital Cameras", kCameraTargets);
    auto rec = decode_list(ex.text, set);
    EXPECT_EQ(rec.input, "Digital Cameras");
    EXPECT_EQ(rec.input_id, std::optional<ConceptId>(0));
    EXPECT_EQ(surfaces(rec), kCameraTargets);
    EXPECT_FALSE(rec.truncated);
    for (std::size_t i = 0; i < rec.slots.size(); ++i) {
        EXPECT_EQ(rec.slots[i].position, static_cast<int>(i + 1));
        EXPECT_EQ(rec.slots[i].concept_id, std::optional<ConceptId>(i + 1));
    }
}

TEST(Decode, InvalidAndDuplicateSlotsArePreserved) {
    auto set = camera_set();
    auto rec = decode_list("[SOS] Digital Cameras are purchased with 1) Batteries 2) Flux Capacitors 3) Batteries [EOS]",
                           set);
    ASSERT_EQ(rec.slots.size(), 3u);
    EXPECT_TRUE(rec.slots[0].valid());
    EXPECT_FALSE(rec.slots[1].valid());
    EXPECT_EQ(rec.slots[1].text, "Flux Capacitors");
    EXPECT_EQ(rec.slots[2].concept_id, rec.slots[0].concept_id);
}

TEST(Decode, MalformedInputSetsTruncated) {
    auto set = camera_set();
    EXPECT_TRUE(decode_list("[SOS] Digital Cameras are purchased with Batteries", set).truncated);
    auto skip = decode_list("[SOS] Digital Cameras are purchased with 1) Batteries 3) Tripods [EOS]", set);
    EXPECT_TRUE(skip.truncated);
    EXPECT_EQ(skip.slots.size(), 1u);
    auto none = decode_list("Digital Cameras go with Batteries", set);
    EXPECT_TRUE(none.slots.empty());
    EXPECT_TRUE(none.truncated);
    EXPECT_TRUE(decode_list("", set).slots.empty());
}

TEST(Decode, CaseInsensitiveMatchIsOptIn) {
    auto set = camera_set();
    const std::string t = "[SOS] digital cameras are purchased with 1) batteries [EOS]";
    EXPECT_FALSE(decode_list(t, set).slots[0].valid());
    DecodeOptions o;
    o.match = MatchMode::case_insensitive;
    EXPECT_TRUE(decode_list(t, set, o).slots[0].valid());
}

TEST(Decode, ExplanationsAndSingleTarget) {
    auto set = camera_set();
    DecodeOptions o;
    o.expect_explanations = true;
    auto rec = decode_list("[SOS] Digital Cameras are purchased with 1) Batteries: keep it running 2) Tripods: [EOS]",
                           set, o);
    ASSERT_EQ(rec.slots.size(), 2u);
    EXPECT_EQ(rec.slots[0].explanation, std::optional<std::string>("keep it running"));
    EXPECT_TRUE(rec.slots[1].valid());
    DecodeOptions s;
    s.single_target = true;
    auto one = decode_list(encode_single_target("Digital Cameras", "Tripods").text, set, s);
    ASSERT_EQ(one.slots.size(), 1u);
    EXPECT_EQ(one.slots[0].text, "Tripods");
}

TEST(RoundTrip, ThousandRandomPlainAndExplainedLists) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        ConceptSet set;
        const std::string x = random_surface(rng) + " Hub";
        set.intern(x);
        std::vector<std::string> ys, es;
        const int k = 1 + static_cast<int>(rng() % 10);
        for (int i = 0; i < k; ++i) {
            ys.push_back(normalize_surface(random_surface(rng)));
            set.intern(ys.back());
            es.push_back("pairs well " + random_surface(rng));
        }
        set.freeze();
        auto plain = decode_list(encode_ordered(x, ys).text, set);
        ASSERT_EQ(surfaces(plain), ys) << encode_ordered(x, ys).text;
        EXPECT_FALSE(plain.truncated);
        EXPECT_EQ(plain.input, x);

        DecodeOptions o;
        o.expect_explanations = true;
        auto ex = decode_list(encode_with_explanations(x, ys, es).text, set, o);
        ASSERT_EQ(surfaces(ex), ys);
        for (int i = 0; i < k; ++i) EXPECT_EQ(ex.slots[i].explanation, std::optional<std::string>(normalize_surface(es[i])));
    }
}

TEST(Decode, NeverThrowsOnGarbage) {
    auto set = camera_set();
    std::mt19937_64 rng(5);
    const std::vector<std::string> pieces = {"[SOS]", "[EOS]", "1)", "2)", "3)", ")", ":", ": ", " ", "Batteries",
                                             "are purchased with", "9999999)", "x", "\t", "0)"};
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        const int n = static_cast<int>(rng() % 12);
        for (int j = 0; j < n; ++j) s += pieces[rng() % pieces.size()] + (rng() % 2 ? " " : "");
        DecodeOptions o;
        o.expect_explanations = rng() % 2;
        EXPECT_NO_THROW(decode_list(s, set, o)) << s;
    }
}

TEST(Permutations, TenDistinctAndMultisetPreserving) {
    auto set = camera_set();
    auto b = sample_permutations("Digital Cameras", kCameraTargets, 10, 3);
    ASSERT_EQ(b.count(), 10u);
    std::set<std::string> distinct;
    const std::multiset<std::string> want(kCameraTargets.begin(), kCameraTargets.end());
    for (const auto& p : b.permutations) {
        distinct.insert(p.text);
        auto rec = decode_list(p.text, set);
        auto got = surfaces(rec);
        EXPECT_EQ(std::multiset<std::string>(got.begin(), got.end()), want);
        EXPECT_EQ(p.kind, ExampleKind::permuted);
    }
    EXPECT_EQ(distinct.size(), 10u);
    auto again = sample_permutations("Digital Cameras", kCameraTargets, 10, 3);
    EXPECT_EQ(again.orders, b.orders);
}

TEST(Permutations, SmallSpacesAndErrors) {
    auto b = sample_permutations("A", {"B", "C"}, 2, 0);
    std::set<std::vector<std::size_t>> orders(b.orders.begin(), b.orders.end());
    EXPECT_EQ(orders.size(), 2u);
    EXPECT_THROW(sample_permutations("A", {"B", "C", "D"}, 7, 0), DataError);
    EXPECT_THROW(sample_permutations("A", {"B"}, 1, 0), DataError);
    EXPECT_NO_THROW(sample_permutations("A", {"B", "C", "D"}, 6, 0));
}

TEST(Permutations, LargeListsUseRejectionSampling) {
    std::vector<std::string> ys;
    for (int i = 0; i < 10; ++i) ys.push_back("Item " + std::string(1, static_cast<char>('A' + i)));
    auto b = sample_permutations("Root", ys, 50, 9);
    std::set<std::vector<std::size_t>> orders(b.orders.begin(), b.orders.end());
    EXPECT_EQ(orders.size(), 50u);
}

TEST(Markers, Detection) {
    EXPECT_TRUE(contains_serial_marker("Lens 2) Caps"));
    EXPECT_TRUE(contains_serial_marker("10)"));
    EXPECT_FALSE(contains_serial_marker("Lens2) Caps"));
    EXPECT_FALSE(contains_serial_marker("4K TVs"));
    EXPECT_FALSE(contains_serial_marker("(2)"));
    EXPECT_TRUE(grammar_violation("Cables: USB").has_value());
    EXPECT_FALSE(grammar_violation("USB-C Cables").has_value());
}
