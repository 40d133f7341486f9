#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "clrlog/codec.hpp"
#include "test_helpers.hpp"

using namespace clrlog;
using testutil::TempDir;

TEST_CASE("codec reproduces the f0 worked example") {
    auto codec = testutil::f0_codec();
    CHECK(codec.encode_activity("Method/MemoryAllocatedForJitCode") == U'a');
    CHECK(codec.encode_activity("Method/LoadVerbose") == U'b');
    CHECK(codec.encode_activity("GC/SampledObjectAllocation") == U'c');
    CHECK(codec.encode_activity("Buffer/Returned") == U'd');

    const auto trace = testutil::make_trace(
        31237, {"Method/MemoryAllocatedForJitCode", "GC/SampledObjectAllocation",
                "Method/LoadVerbose", "Buffer/Returned"});
    const auto encoded = codec.encode_trace(trace, false);
    CHECK(encoded.sequence == U"acbd");

    const auto decoded = codec.decode_sequence(U"acbd");
    REQUIRE(decoded.size() == 4);
    CHECK(decoded[0] == "Method/MemoryAllocatedForJitCode");
    CHECK(decoded[1] == "GC/SampledObjectAllocation");
    CHECK(decoded[2] == "Method/LoadVerbose");
    CHECK(decoded[3] == "Buffer/Returned");
}

TEST_CASE("codec edge cases") {
    ActivityCodec codec;
    CHECK(codec.encode_trace(Trace{1, {}}, false).sequence.empty());
    CHECK(codec.decode_sequence(U"").empty());
    CHECK_THROWS_AS(codec.encode_activity("unseen"), DataError);
    CHECK_THROWS_AS(codec.decode_scalar(U'z'), DataError);
    CHECK_THROWS_AS(codec.assign(""), DataError);

    // extend=false rejects unknown activities.
    const auto t = testutil::make_trace(1, {"GC/Start"});
    CHECK_THROWS_AS(codec.encode_trace(t, false), DataError);
    auto mutable_codec = ActivityCodec{};
    CHECK(mutable_codec.encode_trace(t, true).sequence.size() == 1);
}

TEST_CASE("codec round-trips random traces and stays bijective") {
    std::mt19937_64 rng(11);
    ActivityCodec codec;
    std::vector<std::string> names;
    for (int i = 0; i < 150; ++i) {
        names.push_back("Activity/Kind" + std::to_string(i));
    }

    Trace trace;
    trace.trace_id = 9;
    for (int i = 0; i < 100; ++i) {
        trace.events.push_back(TraceEvent{names[rng() % names.size()],
                                          static_cast<std::int64_t>(i)});
    }
    const auto encoded = codec.encode_trace(trace, true);
    REQUIRE(encoded.sequence.size() == trace.events.size());
    const auto decoded = codec.decode_sequence(encoded.sequence);
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        CHECK(decoded[i] == trace.events[i].activity);
    }

    // Bijection after extension.
    for (const auto& [activity, code] : codec.forward()) {
        CHECK(codec.reverse().at(code) == activity);
    }
    CHECK(codec.forward().size() == codec.reverse().size());
}

TEST_CASE("codec never assigns reserved or special scalars") {
    ActivityCodec codec;
    // Enough activities to march well past the BMP trouble spots.
    for (int i = 0; i < 60000; ++i) {
        codec.assign("a" + std::to_string(i));
    }
    for (const auto& [activity, code] : codec.forward()) {
        CHECK(code != kPadChar);
        CHECK(code != kUnkChar);
        CHECK(code != kMaskChar);
        CHECK(code >= 0x20);
        CHECK_FALSE(code >= 0x7F && code <= 0x9F);
        CHECK_FALSE(code >= 0xD800 && code <= 0xDFFF);
        CHECK_FALSE((code & 0xFFFF) == 0xFFFE || (code & 0xFFFF) == 0xFFFF);
    }
}

TEST_CASE("codec deterministic over identical logs") {
    ActivityCodec c1, c2;
    const auto trace = testutil::make_trace(1, {"x/A", "x/B", "x/A", "x/C", "x/B", "x/D"});
    CHECK(c1.encode_trace(trace, true).sequence == c2.encode_trace(trace, true).sequence);
    CHECK(c1.encode_trace(trace, false).sequence == U"abacbd");
}

TEST_CASE("codec save/load round-trip") {
    TempDir dir;

    SECTION("f0") {
        auto codec = testutil::f0_codec();
        codec.save(dir.file("codec.tsv"));
        const auto loaded = ActivityCodec::load(dir.file("codec.tsv"));
        CHECK(loaded.forward() == codec.forward());
        CHECK(loaded.reverse() == codec.reverse());
    }

    SECTION("empty codec file loads an empty bijection") {
        testutil::write_file(dir.file("empty.tsv"), "");
        const auto loaded = ActivityCodec::load(dir.file("empty.tsv"));
        CHECK(loaded.size() == 0);
    }

    SECTION("200-activity codec") {
        ActivityCodec codec;
        for (int i = 0; i < 200; ++i) {
            codec.assign("Runtime/Event" + std::to_string(i));
        }
        codec.save(dir.file("big.tsv"));
        auto loaded = ActivityCodec::load(dir.file("big.tsv"));
        CHECK(loaded.forward() == codec.forward());
        // Assignment continues past loaded scalars without collisions.
        const auto fresh = loaded.assign("Runtime/New");
        CHECK(codec.reverse().count(fresh) == 0);
    }

    SECTION("corrupt file") {
        testutil::write_file(dir.file("corrupt.tsv"), "notanumber\tX\n");
        CHECK_THROWS_AS(ActivityCodec::load(dir.file("corrupt.tsv")), IoError);
        testutil::write_file(dir.file("dup.tsv"), "97\tX\n97\tY\n");
        CHECK_THROWS_AS(ActivityCodec::load(dir.file("dup.tsv")), IoError);
        CHECK_THROWS_AS(ActivityCodec::load(dir.file("missing.tsv")), IoError);
    }
}
