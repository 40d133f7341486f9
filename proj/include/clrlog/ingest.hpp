#pragma once

// Raw CLR event-log ingestion: parse XES or CSV rows into event records and
// assemble per-thread traces, folding system-thread events (trace id -1)
// into the application traces by timestamp.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "clrlog/errors.hpp"

namespace clrlog {

/// Thread id reserved for system-thread (outlier) events.
inline constexpr std::int64_t kSystemTraceId = -1;

struct EventRecord {
    std::int64_t trace_id = 0;
    std::string activity;
    std::int64_t ts_ns = 0;     // nanoseconds; date-less inputs count from midnight
    std::size_t file_index = 0; // original row position, used for stable ties
};

struct TraceEvent {
    std::string activity;
    std::int64_t ts_ns = 0;
};

struct Trace {
    std::int64_t trace_id = 0;
    std::vector<TraceEvent> events;
};

struct IngestReport {
    std::vector<Trace> traces;
    std::size_t outlier_count = 0;
    std::size_t dropped_count = 0;
};

enum class LogFormat { xes, csv };

struct IngestOptions {
    std::string activity_key = "concept:name";
    std::string trace_id_key = "thread:id";
    std::string timestamp_key = "time:timestamp";
};

namespace detail {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_uint(std::string_view s, std::size_t& pos, int digits, long& out) {
    long v = 0;
    for (int i = 0; i < digits; ++i) {
        if (pos >= s.size() || s[pos] < '0' || s[pos] > '9') {
            return false;
        }
        v = v * 10 + (s[pos] - '0');
        ++pos;
    }
    out = v;
    return true;
}

}  // namespace detail

/// Parses `HH:MM:SS[.frac]` or `YYYY-MM-DD[T ]HH:MM:SS[.frac][Z|±HH:MM]`
/// into nanoseconds. Returns nullopt for anything else.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
    // Trim surrounding whitespace.
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) {
        return std::nullopt;
    }

    std::size_t pos = 0;
    std::int64_t day_ns = 0;
    const bool has_date = s.size() > 8 && s.find('-') != std::string_view::npos;
    if (has_date) {
        long y = 0, mo = 0, d = 0;
        if (!detail::parse_uint(s, pos, 4, y) || pos >= s.size() || s[pos] != '-') return std::nullopt;
        ++pos;
        if (!detail::parse_uint(s, pos, 2, mo) || pos >= s.size() || s[pos] != '-') return std::nullopt;
        ++pos;
        if (!detail::parse_uint(s, pos, 2, d)) return std::nullopt;
        if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
        if (pos >= s.size() || (s[pos] != 'T' && s[pos] != ' ')) return std::nullopt;
        ++pos;
        day_ns = detail::days_from_civil(static_cast<int>(y), static_cast<unsigned>(mo),
                                         static_cast<unsigned>(d)) *
                 86400LL * 1000000000LL;
    }

    long hh = 0, mm = 0, ss = 0;
    if (!detail::parse_uint(s, pos, 2, hh) || pos >= s.size() || s[pos] != ':') return std::nullopt;
    ++pos;
    if (!detail::parse_uint(s, pos, 2, mm) || pos >= s.size() || s[pos] != ':') return std::nullopt;
    ++pos;
    if (!detail::parse_uint(s, pos, 2, ss)) return std::nullopt;
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;

    std::int64_t frac_ns = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::int64_t scale = 100000000LL;
        bool any = false;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            frac_ns += (s[pos] - '0') * scale;
            scale /= 10;
            ++pos;
            any = true;
        }
        if (!any) return std::nullopt;
    }

    std::int64_t offset_ns = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            pos = s.size();
        } else if (s[pos] == '+' || s[pos] == '-') {
            const int sign = s[pos] == '+' ? 1 : -1;
            ++pos;
            long oh = 0, om = 0;
            if (!detail::parse_uint(s, pos, 2, oh)) return std::nullopt;
            if (pos < s.size() && s[pos] == ':') ++pos;
            if (pos < s.size() && !detail::parse_uint(s, pos, 2, om)) return std::nullopt;
            offset_ns = sign * (oh * 3600LL + om * 60LL) * 1000000000LL;
            if (pos != s.size()) return std::nullopt;
        } else {
            return std::nullopt;
        }
    }

    return day_ns + (hh * 3600LL + mm * 60LL + ss) * 1000000000LL + frac_ns - offset_ns;
}

struct ReadLogResult {
    std::vector<EventRecord> records;
    std::size_t dropped_count = 0;
};

namespace detail {

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) {
        return std::nullopt;
    }
    std::size_t i = 0;
    bool neg = false;
    if (s[0] == '-' || s[0] == '+') {
        neg = s[0] == '-';
        i = 1;
        if (i == s.size()) return std::nullopt;
    }
    std::int64_t v = 0;
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        v = v * 10 + (s[i] - '0');
    }
    return neg ? -v : v;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
    // Minimal CSV: comma-separated with optional double-quoted fields.
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline ReadLogResult read_csv_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open log file: " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("CSV log is empty (missing header): " + path.string());
    }
    {
        const auto header = split_csv_row(line);
        if (header.size() != 3 || header[0] != "trace_id" || header[1] != "activity" ||
            header[2] != "timestamp") {
            throw IoError("CSV header must be exactly 'trace_id,activity,timestamp': " +
                          path.string());
        }
    }
    ReadLogResult result;
    std::size_t file_index = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = split_csv_row(line);
        const std::size_t idx = file_index++;
        if (fields.size() != 3) {
            ++result.dropped_count;
            continue;
        }
        const auto id = parse_int(fields[0]);
        const auto ts = parse_timestamp(fields[2]);
        if (!id || !ts || fields[1].empty()) {
            ++result.dropped_count;
            continue;
        }
        result.records.push_back(EventRecord{*id, fields[1], *ts, idx});
    }
    return result;
}

inline ReadLogResult read_xes_log(const std::filesystem::path& path,
                                  const IngestOptions& opts) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_xml(path.string(), tree);
    } catch (const pt::xml_parser_error& e) {
        throw IoError("structurally invalid XES: " + std::string(e.what()));
    }
    const auto log = tree.get_child_optional("log");
    if (!log) {
        throw IoError("structurally invalid XES: missing <log> root: " + path.string());
    }

    // Value of an attribute child like <string key="..." value="..."/>.
    const auto attr_value = [](const pt::ptree& node,
                               const std::string& key) -> std::optional<std::string> {
        for (const auto& [tag, child] : node) {
            if (tag == "string" || tag == "int" || tag == "date" || tag == "float") {
                const auto k = child.get_optional<std::string>("<xmlattr>.key");
                if (k && *k == key) {
                    const auto v = child.get_optional<std::string>("<xmlattr>.value");
                    if (v) {
                        return *v;
                    }
                }
            }
        }
        return std::nullopt;
    };

    ReadLogResult result;
    std::size_t file_index = 0;
    const auto consume_event = [&](const pt::ptree& event,
                                   std::optional<std::int64_t> inherited_id) {
        const std::size_t idx = file_index++;
        const auto activity = attr_value(event, opts.activity_key);
        const auto ts_raw = attr_value(event, opts.timestamp_key);
        std::optional<std::int64_t> id;
        if (const auto own = attr_value(event, opts.trace_id_key)) {
            id = parse_int(*own);
        } else {
            id = inherited_id;
        }
        const auto ts = ts_raw ? parse_timestamp(*ts_raw) : std::nullopt;
        if (!activity || activity->empty() || !ts || !id) {
            ++result.dropped_count;
            return;
        }
        result.records.push_back(EventRecord{*id, *activity, *ts, idx});
    };

    for (const auto& [tag, node] : *log) {
        if (tag == "event") {
            consume_event(node, std::nullopt);
        } else if (tag == "trace") {
            std::optional<std::int64_t> trace_level_id;
            if (const auto raw = attr_value(node, opts.trace_id_key)) {
                trace_level_id = parse_int(*raw);
            } else if (const auto name = attr_value(node, "concept:name")) {
                trace_level_id = parse_int(*name);
            }
            for (const auto& [etag, enode] : node) {
                if (etag == "event") {
                    consume_event(enode, trace_level_id);
                }
            }
        }
    }
    return result;
}

}  // namespace detail

/// Reads a raw event log. Rows missing any mandatory attribute are dropped
/// and counted, not errors; a structurally broken file throws IoError.
inline ReadLogResult read_log(const std::filesystem::path& path, LogFormat format,
                              const IngestOptions& opts = {}) {
    if (format == LogFormat::csv) {
        return detail::read_csv_log(path);
    }
    return detail::read_xes_log(path, opts);
}

/// Groups records by thread id, sorts each trace by (timestamp, file order),
/// then folds every system-thread record into the trace holding the event
/// with the latest timestamp <= the outlier's timestamp. An outlier earlier
/// than every thread event attaches to the trace whose first event is
/// earliest. When there are no thread traces at all, outliers form a single
/// trace under the system id so no event is lost.
inline IngestReport extract_traces(const std::vector<EventRecord>& records) {
    IngestReport report;

    std::map<std::int64_t, std::vector<const EventRecord*>> by_id;
    std::vector<const EventRecord*> outliers;
    for (const auto& rec : records) {
        if (rec.trace_id == kSystemTraceId) {
            outliers.push_back(&rec);
        } else {
            by_id[rec.trace_id].push_back(&rec);
        }
    }

    const auto event_order = [](const EventRecord* a, const EventRecord* b) {
        if (a->ts_ns != b->ts_ns) {
            return a->ts_ns < b->ts_ns;
        }
        return a->file_index < b->file_index;
    };
    std::sort(outliers.begin(), outliers.end(), event_order);

    // Assemble traces with the source rows kept alongside, so outlier
    // placement can compare (timestamp, file order) of existing events.
    struct Assembled {
        std::int64_t trace_id;
        std::vector<const EventRecord*> events;
    };
    std::vector<Assembled> assembled;
    assembled.reserve(by_id.size());
    for (auto& [id, evs] : by_id) {
        std::sort(evs.begin(), evs.end(), event_order);
        assembled.push_back(Assembled{id, std::move(evs)});
    }

    if (assembled.empty() && !outliers.empty()) {
        assembled.push_back(Assembled{kSystemTraceId, {}});
        for (const auto* rec : outliers) {
            assembled[0].events.push_back(rec);
        }
        report.outlier_count = outliers.size();
        outliers.clear();
    }

    for (const auto* out : outliers) {
        Assembled* target = nullptr;
        std::size_t insert_pos = 0;
        const EventRecord* best = nullptr;
        for (auto& tr : assembled) {
            // Last event with ts <= outlier ts; events are sorted.
            std::size_t lo = 0, hi = tr.events.size();
            while (lo < hi) {
                const std::size_t mid = (lo + hi) / 2;
                if (tr.events[mid]->ts_ns <= out->ts_ns) {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            if (lo == 0) {
                continue;
            }
            const EventRecord* cand = tr.events[lo - 1];
            if (best == nullptr || event_order(best, cand)) {
                best = cand;
                target = &tr;
                insert_pos = lo;
            }
        }
        if (target == nullptr) {
            // Precedes every thread event: fall back to the earliest trace.
            for (auto& tr : assembled) {
                if (target == nullptr ||
                    event_order(tr.events.front(), target->events.front())) {
                    target = &tr;
                }
            }
            insert_pos = 0;
        }
        target->events.insert(target->events.begin() + static_cast<std::ptrdiff_t>(insert_pos), out);
        ++report.outlier_count;
    }

    report.traces.reserve(assembled.size());
    for (const auto& tr : assembled) {
        Trace t;
        t.trace_id = tr.trace_id;
        t.events.reserve(tr.events.size());
        for (const auto* rec : tr.events) {
            t.events.push_back(TraceEvent{rec->activity, rec->ts_ns});
        }
        report.traces.push_back(std::move(t));
    }
    return report;
}

/// read_log + extract_traces with the dropped-row count carried over.
inline IngestReport ingest_file(const std::filesystem::path& path, LogFormat format,
                                const IngestOptions& opts = {}) {
    const auto read = read_log(path, format, opts);
    IngestReport report = extract_traces(read.records);
    report.dropped_count = read.dropped_count;
    return report;
}

}  // namespace clrlog
