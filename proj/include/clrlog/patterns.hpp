#pragma once

// Recurring-pattern reporting: every learned token that actually occurs in
// the tokenized corpus is a pattern. Also exports the per-trace token
// strip data behind the LoA visualizations as CSV (and an optional SVG).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clrlog/codec.hpp"
#include "clrlog/errors.hpp"
#include "clrlog/tokenizer.hpp"
#include "clrlog/unicode.hpp"

namespace clrlog {

struct PatternEntry {
    TokenId token_id = 0;
    std::string token;                     // UTF-8 scalar string
    std::vector<std::string> activities;   // decoded through the codec
    std::size_t frequency = 0;             // occurrences in the tokenized corpus
    std::size_t char_length = 0;           // events covered per occurrence
};

struct TraceCompression {
    std::int64_t trace_id = 0;
    std::size_t event_count = 0;
    std::size_t token_count = 0;
    double ratio = 0.0;  // token_count / event_count, in (0, 1]
};

struct PatternReport {
    std::vector<PatternEntry> entries;
    std::vector<TraceCompression> compression;
    LoaConfig loa;

    double mean_ratio() const {
        if (compression.empty()) {
            return 0.0;
        }
        double sum = 0.0;
        for (const auto& c : compression) {
            sum += c.ratio;
        }
        return sum / static_cast<double>(compression.size());
    }

    nlohmann::json to_json() const {
        nlohmann::json entries_json = nlohmann::json::array();
        for (const auto& e : entries) {
            entries_json.push_back({{"token", e.token},
                                    {"token_id", e.token_id},
                                    {"activities", e.activities},
                                    {"frequency", e.frequency},
                                    {"char_length", e.char_length}});
        }
        nlohmann::json comp_json = nlohmann::json::array();
        for (const auto& c : compression) {
            comp_json.push_back({{"trace_id", c.trace_id},
                                 {"event_count", c.event_count},
                                 {"token_count", c.token_count},
                                 {"ratio", c.ratio}});
        }
        nlohmann::json loa_json = {{"level", loa.level}, {"vocab_size", loa.vocab_size}};
        if (loa.max_token_chars) {
            loa_json["max_token_chars"] = *loa.max_token_chars;
        }
        return nlohmann::json{{"format", "clrlog-patterns"},
                              {"loa", loa_json},
                              {"entries", entries_json},
                              {"compression", comp_json},
                              {"mean_ratio", mean_ratio()}};
    }
};

/// Counts token frequencies over the tokenized corpus and decodes each
/// pattern back to its activity list. [UNK] occurrences are excluded (they
/// stand for events outside the training alphabet, not patterns); a
/// non-special token that fails to decode signals a codec/model mismatch.
inline PatternReport build_pattern_report(const std::vector<TokenizedTrace>& traces,
                                          const ActivityCodec& codec,
                                          const TokenizerModel& model) {
    PatternReport report;
    report.loa = model.loa();

    std::vector<std::size_t> freq(model.vocab_size(), 0);
    for (const auto& trace : traces) {
        std::size_t event_count = 0;
        for (TokenId id : trace.token_ids) {
            if (id >= freq.size()) {
                throw DataError("token id outside the model vocabulary");
            }
            ++freq[id];
            // [UNK] always covers exactly one source event.
            event_count += id == kUnkId ? 1 : model.token(id).size();
        }
        TraceCompression comp;
        comp.trace_id = trace.trace_id;
        comp.event_count = event_count;
        comp.token_count = trace.token_ids.size();
        comp.ratio = event_count == 0
                         ? 0.0
                         : static_cast<double>(comp.token_count) /
                               static_cast<double>(comp.event_count);
        report.compression.push_back(comp);
    }

    for (TokenId id = 0; id < freq.size(); ++id) {
        if (freq[id] == 0 || model.is_special(id)) {
            continue;
        }
        PatternEntry entry;
        entry.token_id = id;
        const auto& scalars = model.token(id);
        entry.token = to_utf8(scalars);
        entry.char_length = scalars.size();
        entry.frequency = freq[id];
        entry.activities.reserve(scalars.size());
        for (char32_t cp : scalars) {
            entry.activities.push_back(codec.decode_scalar(cp));
        }
        report.entries.push_back(std::move(entry));
    }

    std::sort(report.entries.begin(), report.entries.end(),
              [](const PatternEntry& a, const PatternEntry& b) {
                  if (a.frequency != b.frequency) {
                      return a.frequency > b.frequency;
                  }
                  if (a.char_length != b.char_length) {
                      return a.char_length > b.char_length;
                  }
                  return a.token < b.token;
              });
    return report;
}

/// Long-format CSV `trace_id,position,token_id`, one row per token.
/// Identical inputs produce byte-identical files.
inline void export_trace_plot_data(const std::vector<TokenizedTrace>& traces,
                                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write plot data: " + path.string());
    }
    out << "trace_id,position,token_id\n";
    for (const auto& trace : traces) {
        for (std::size_t i = 0; i < trace.token_ids.size(); ++i) {
            out << trace.trace_id << ',' << i << ',' << trace.token_ids[i] << '\n';
        }
    }
    if (!out) {
        throw IoError("failed writing plot data: " + path.string());
    }
}

/// Presentation-only strip chart: one column per trace, one cell per token,
/// colored by token id.
inline void export_trace_plot_svg(const std::vector<TokenizedTrace>& traces,
                                  const std::filesystem::path& path) {
    std::size_t max_tokens = 0;
    for (const auto& t : traces) {
        max_tokens = std::max(max_tokens, t.token_ids.size());
    }
    const double cell_w = 18.0;
    const double cell_h = 3.0;
    const double width = cell_w * static_cast<double>(traces.size()) + 40.0;
    const double height = cell_h * static_cast<double>(max_tokens) + 20.0;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write plot SVG: " + path.string());
    }
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const auto& trace = traces[t];
        for (std::size_t i = 0; i < trace.token_ids.size(); ++i) {
            // Scatter token ids over the hue wheel.
            const unsigned hue = (trace.token_ids[i] * 47u) % 360u;
            out << "<rect x=\"" << 20.0 + cell_w * static_cast<double>(t) << "\" y=\""
                << height - 10.0 - cell_h * static_cast<double>(i + 1) << "\" width=\""
                << cell_w - 2.0 << "\" height=\"" << cell_h << "\" fill=\"hsl(" << hue
                << ",70%,50%)\"/>\n";
        }
    }
    out << "</svg>\n";
}

}  // namespace clrlog
