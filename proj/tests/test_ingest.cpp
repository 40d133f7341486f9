#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "clrlog/ingest.hpp"
#include "clrlog/sha256.hpp"
#include "test_helpers.hpp"

using namespace clrlog;
using testutil::TempDir;

TEST_CASE("sha256 known answers") {
    CHECK(Sha256::hash_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::hash_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // Multi-block message.
    CHECK(Sha256::hash_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("timestamp parsing") {
    CHECK(parse_timestamp("14:27:57") == 14 * 3600LL * 1000000000LL +
                                             27 * 60LL * 1000000000LL +
                                             57 * 1000000000LL);
    CHECK(parse_timestamp("00:00:00") == 0);
    CHECK(parse_timestamp("00:00:00.5") == 500000000LL);
    // 1970-01-01 is day zero.
    CHECK(parse_timestamp("1970-01-01T00:00:10") == 10 * 1000000000LL);
    CHECK(parse_timestamp("1970-01-02 00:00:00") == 86400LL * 1000000000LL);
    CHECK(parse_timestamp("1970-01-01T01:00:00+01:00") == 0);
    CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
    CHECK_FALSE(parse_timestamp("").has_value());
    CHECK_FALSE(parse_timestamp("not a time").has_value());
    CHECK_FALSE(parse_timestamp("25:00:00").has_value());
}

TEST_CASE("read_log csv: Table 1 fragment") {
    TempDir dir;
    const auto path = dir.file("log.csv");
    testutil::write_file(path, testutil::kTable1Csv);

    const auto result = read_log(path, LogFormat::csv);
    REQUIRE(result.records.size() == 4);
    CHECK(result.dropped_count == 0);
    CHECK(result.records[0].activity == "Method/MemoryAllocatedForJitCode");
    CHECK(result.records[1].trace_id == kSystemTraceId);
    CHECK(result.records[1].activity == "Method/LoadVerbose");
    CHECK(result.records[3].activity == "Buffer/Returned");
    CHECK(result.records[0].ts_ns == result.records[1].ts_ns);
}

TEST_CASE("read_log csv: header only and dropped rows") {
    TempDir dir;
    const auto empty = dir.file("empty.csv");
    testutil::write_file(empty, "trace_id,activity,timestamp\n");
    const auto r = read_log(empty, LogFormat::csv);
    CHECK(r.records.empty());
    CHECK(r.dropped_count == 0);

    const auto blank_ts = dir.file("blank.csv");
    testutil::write_file(blank_ts, "trace_id,activity,timestamp\n1,GC/Start,\n");
    const auto r2 = read_log(blank_ts, LogFormat::csv);
    CHECK(r2.records.empty());
    CHECK(r2.dropped_count == 1);

    const auto bad = dir.file("bad.csv");
    testutil::write_file(bad,
                         "trace_id,activity,timestamp\n"
                         "x,GC/Start,14:00:00\n"       // non-numeric id
                         "2,,14:00:00\n"               // empty activity
                         "3,GC/Start\n"                // missing column
                         "4,GC/Start,14:00:01\n");     // good
    const auto r3 = read_log(bad, LogFormat::csv);
    CHECK(r3.records.size() == 1);
    CHECK(r3.dropped_count == 3);
}

TEST_CASE("read_log csv: structural errors") {
    TempDir dir;
    CHECK_THROWS_AS(read_log(dir.file("missing.csv"), LogFormat::csv), IoError);

    const auto wrong = dir.file("wrong.csv");
    testutil::write_file(wrong, "a,b\n1,2\n");
    CHECK_THROWS_AS(read_log(wrong, LogFormat::csv), IoError);
}

TEST_CASE("read_log xes: Table 1 fragment") {
    TempDir dir;
    const auto path = dir.file("log.xes");
    testutil::write_file(path, R"(<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="run-1"/>
    <event>
      <int key="thread:id" value="31237"/>
      <string key="concept:name" value="Method/MemoryAllocatedForJitCode"/>
      <date key="time:timestamp" value="2024-03-01T14:27:57Z"/>
    </event>
    <event>
      <int key="thread:id" value="-1"/>
      <string key="concept:name" value="Method/LoadVerbose"/>
      <date key="time:timestamp" value="2024-03-01T14:27:57Z"/>
    </event>
    <event>
      <int key="thread:id" value="31237"/>
      <string key="concept:name" value="GC/SampledObjectAllocation"/>
      <date key="time:timestamp" value="2024-03-01T14:27:57Z"/>
    </event>
    <event>
      <int key="thread:id" value="31237"/>
      <string key="concept:name" value="Buffer/Returned"/>
      <date key="time:timestamp" value="2024-03-01T15:37:34Z"/>
    </event>
  </trace>
</log>)");

    const auto result = read_log(path, LogFormat::xes);
    REQUIRE(result.records.size() == 4);
    CHECK(result.records[1].trace_id == -1);
    CHECK(result.records[2].activity == "GC/SampledObjectAllocation");

    const auto report = extract_traces(result.records);
    REQUIRE(report.traces.size() == 1);
    CHECK(report.outlier_count == 1);
}

TEST_CASE("read_log xes: trace-level thread id and malformed file") {
    TempDir dir;
    const auto path = dir.file("byTrace.xes");
    testutil::write_file(path, R"(<log>
  <trace>
    <int key="thread:id" value="7"/>
    <event>
      <string key="concept:name" value="GC/Start"/>
      <date key="time:timestamp" value="2024-03-01T10:00:00Z"/>
    </event>
    <event>
      <string key="concept:name" value="GC/Stop"/>
      <date key="time:timestamp" value="2024-03-01T10:00:01Z"/>
    </event>
  </trace>
</log>)");
    const auto result = read_log(path, LogFormat::xes);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].trace_id == 7);

    const auto broken = dir.file("broken.xes");
    testutil::write_file(broken, "<log><trace></log>");
    CHECK_THROWS_AS(read_log(broken, LogFormat::xes), IoError);

    const auto noroot = dir.file("noroot.xes");
    testutil::write_file(noroot, "<other/>");
    CHECK_THROWS_AS(read_log(noroot, LogFormat::xes), IoError);
}

TEST_CASE("extract_traces: Table 1 worked example") {
    TempDir dir;
    const auto path = dir.file("log.csv");
    testutil::write_file(path, testutil::kTable1Csv);
    const auto report = ingest_file(path, LogFormat::csv);

    REQUIRE(report.traces.size() == 1);
    CHECK(report.outlier_count == 1);
    CHECK(report.dropped_count == 0);
    const auto& tr = report.traces[0];
    CHECK(tr.trace_id == 31237);
    REQUIRE(tr.events.size() == 4);
    CHECK(tr.events[0].activity == "Method/MemoryAllocatedForJitCode");
    CHECK(tr.events[1].activity == "GC/SampledObjectAllocation");
    CHECK(tr.events[2].activity == "Method/LoadVerbose");
    CHECK(tr.events[3].activity == "Buffer/Returned");
}

TEST_CASE("extract_traces: grouping without outliers") {
    std::vector<EventRecord> records = {
        {5, "A", 100, 0}, {6, "B", 50, 1}, {5, "C", 90, 2}, {6, "D", 60, 3}};
    const auto report = extract_traces(records);
    REQUIRE(report.traces.size() == 2);
    CHECK(report.outlier_count == 0);
    CHECK(report.traces[0].trace_id == 5);
    CHECK(report.traces[0].events[0].activity == "C");  // sorted by timestamp
    CHECK(report.traces[1].trace_id == 6);
    CHECK(report.traces[1].events[1].activity == "D");
}

TEST_CASE("extract_traces: nearest-preceding outlier placement") {
    // Trace A at t=1,2; trace B at t=5; outlier at t=3 attaches to A.
    std::vector<EventRecord> records = {
        {1, "a1", 1, 0}, {1, "a2", 2, 1}, {2, "b1", 5, 2}, {-1, "out", 3, 3}};
    const auto report = extract_traces(records);
    REQUIRE(report.traces.size() == 2);
    const auto& a = report.traces[0];
    REQUIRE(a.events.size() == 3);
    CHECK(a.events[2].activity == "out");
    CHECK(report.traces[1].events.size() == 1);
}

TEST_CASE("extract_traces: outlier before everything attaches to earliest trace") {
    std::vector<EventRecord> records = {
        {1, "a1", 10, 0}, {2, "b1", 5, 1}, {-1, "out", 1, 2}};
    const auto report = extract_traces(records);
    REQUIRE(report.traces.size() == 2);
    const auto& b = report.traces[1];  // trace_id 2 starts earliest
    REQUIRE(b.events.size() == 2);
    CHECK(b.events[0].activity == "out");
    CHECK(b.events[1].activity == "b1");
}

TEST_CASE("extract_traces: only system events form a system trace") {
    std::vector<EventRecord> records = {{-1, "x", 2, 0}, {-1, "y", 1, 1}};
    const auto report = extract_traces(records);
    REQUIRE(report.traces.size() == 1);
    CHECK(report.traces[0].trace_id == kSystemTraceId);
    CHECK(report.traces[0].events[0].activity == "y");
    CHECK(report.outlier_count == 2);
}

TEST_CASE("extract_traces: permutation safety, conservation, sortedness") {
    std::mt19937_64 rng(7);
    std::vector<EventRecord> records;
    std::int64_t ts = 0;
    for (int i = 0; i < 200; ++i) {
        // Distinct timestamps; ~15% system events.
        const std::int64_t id = (rng() % 100 < 15) ? -1 : static_cast<std::int64_t>(rng() % 4);
        ts += 1 + static_cast<std::int64_t>(rng() % 5);
        records.push_back({id, "act" + std::to_string(rng() % 10), ts, records.size()});
    }

    const auto baseline = extract_traces(records);

    std::size_t total_events = 0;
    for (const auto& tr : baseline.traces) {
        total_events += tr.events.size();
        for (std::size_t i = 1; i < tr.events.size(); ++i) {
            CHECK(tr.events[i - 1].ts_ns <= tr.events[i].ts_ns);
        }
    }
    CHECK(total_events == records.size());
    CHECK(baseline.outlier_count ==
          static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                 [](const EventRecord& r) {
                                                     return r.trace_id == kSystemTraceId;
                                                 })));

    auto shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
        shuffled[i].file_index = i;
    }
    const auto again = extract_traces(shuffled);
    REQUIRE(again.traces.size() == baseline.traces.size());
    for (std::size_t t = 0; t < again.traces.size(); ++t) {
        CHECK(again.traces[t].trace_id == baseline.traces[t].trace_id);
        REQUIRE(again.traces[t].events.size() == baseline.traces[t].events.size());
        for (std::size_t i = 0; i < again.traces[t].events.size(); ++i) {
            CHECK(again.traces[t].events[i].activity == baseline.traces[t].events[i].activity);
        }
    }
}

TEST_CASE("extract_traces: empty input") {
    const auto report = extract_traces({});
    CHECK(report.traces.empty());
    CHECK(report.outlier_count == 0);
}
