#pragma once

// BPE tokenizers over encoded traces at 13 levels of abstraction (LoA).
// Training merges the most frequent adjacent token pair until the vocabulary
// budget is reached or no pair occurs twice; ties go to the lexicographically
// smallest (left, right) token-string pair so training is deterministic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "clrlog/codec.hpp"
#include "clrlog/errors.hpp"
#include "clrlog/sha256.hpp"
#include "clrlog/unicode.hpp"

namespace clrlog {

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kMaskId = 2;
inline constexpr std::size_t kSpecialTokenCount = 3;

struct LoaConfig {
    int level = 0;  // 1..13, or 0 for an explicit ad-hoc config
    std::size_t vocab_size = 0;
    std::optional<std::size_t> max_token_chars;
};

/// The 13-tokenizer registry: vocabulary sizes follow a geometric
/// progression from 512 (level 1) to 20000 (level 13); level 13 also caps
/// tokens at 300 characters.
inline std::vector<LoaConfig> loa_registry() {
    std::vector<LoaConfig> out;
    out.reserve(13);
    for (int level = 1; level <= 13; ++level) {
        LoaConfig cfg;
        cfg.level = level;
        cfg.vocab_size = static_cast<std::size_t>(
            std::llround(512.0 * std::pow(20000.0 / 512.0, (level - 1) / 12.0)));
        if (level == 13) {
            cfg.max_token_chars = 300;
        }
        out.push_back(cfg);
    }
    return out;
}

inline LoaConfig loa_config(int level) {
    if (level < 1 || level > 13) {
        throw DataError("LoA level must be in 1..13, got " + std::to_string(level));
    }
    return loa_registry()[static_cast<std::size_t>(level - 1)];
}

struct TokenizedTrace {
    std::int64_t trace_id = 0;
    std::vector<TokenId> token_ids;
    std::vector<std::string> token_strings;  // UTF-8
};

class TokenizerModel {
public:
    TokenizerModel() = default;

    /// Builds a model from an explicit base alphabet and merge list (merge
    /// parts must already be known tokens, left to right).
    static TokenizerModel from_merges(
        LoaConfig loa, const std::vector<char32_t>& alphabet,
        const std::vector<std::pair<std::u32string, std::u32string>>& merges) {
        TokenizerModel model;
        model.loa_ = loa;
        model.init_base(alphabet);
        for (const auto& [left, right] : merges) {
            const auto li = model.vocab_.find(left);
            const auto ri = model.vocab_.find(right);
            if (li == model.vocab_.end() || ri == model.vocab_.end()) {
                throw DataError("merge references unknown token");
            }
            model.push_merge(li->second, ri->second);
        }
        return model;
    }

    const LoaConfig& loa() const { return loa_; }
    std::size_t vocab_size() const { return id_to_token_.size(); }
    const std::vector<std::u32string>& tokens() const { return id_to_token_; }
    const std::u32string& token(TokenId id) const { return id_to_token_.at(id); }

    const std::vector<std::pair<std::u32string, std::u32string>>& merges() const {
        return merge_strings_;
    }

    std::optional<TokenId> lookup(const std::u32string& token) const {
        const auto it = vocab_.find(token);
        if (it == vocab_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    bool is_special(TokenId id) const { return id < kSpecialTokenCount; }

    /// Applies the merge list in training order; scalars outside the base
    /// alphabet become [UNK].
    TokenizedTrace tokenize(const EncodedTrace& trace) const {
        TokenizedTrace out;
        out.trace_id = trace.trace_id;
        std::vector<TokenId> toks;
        toks.reserve(trace.sequence.size());
        for (char32_t cp : trace.sequence) {
            const auto it = scalar_to_id_.find(cp);
            toks.push_back(it == scalar_to_id_.end() ? kUnkId : it->second);
        }
        for (const auto& op : merge_ops_) {
            apply_merge(toks, op.left, op.right, op.merged);
        }
        out.token_ids = std::move(toks);
        out.token_strings.reserve(out.token_ids.size());
        for (TokenId id : out.token_ids) {
            out.token_strings.push_back(to_utf8(id_to_token_[id]));
        }
        return out;
    }

    /// Inverse of tokenize for [UNK]-free traces.
    std::u32string detokenize(const TokenizedTrace& tokens) const {
        std::u32string out;
        for (TokenId id : tokens.token_ids) {
            if (id == kUnkId) {
                throw DataError("cannot detokenize a trace containing [UNK]");
            }
            if (id >= id_to_token_.size()) {
                throw DataError("token id out of range: " + std::to_string(id));
            }
            out += id_to_token_[id];
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json merges = nlohmann::json::array();
        for (const auto& [l, r] : merge_strings_) {
            merges.push_back({to_utf8(l), to_utf8(r)});
        }
        nlohmann::json vocab = nlohmann::json::object();
        for (TokenId id = 0; id < id_to_token_.size(); ++id) {
            vocab[to_utf8(id_to_token_[id])] = id;
        }
        nlohmann::json loa = {{"level", loa_.level}, {"vocab_size", loa_.vocab_size}};
        if (loa_.max_token_chars) {
            loa["max_token_chars"] = *loa_.max_token_chars;
        }
        return nlohmann::json{
            {"format", "clrlog-tokenizer"},
            {"version", 1},
            {"loa", loa},
            {"merges", merges},
            {"vocab", vocab},
            {"special_tokens",
             {{"[PAD]", kPadId}, {"[UNK]", kUnkId}, {"[MASK]", kMaskId}}}};
    }

    static TokenizerModel from_json(const nlohmann::json& j) {
        if (!j.is_object() || j.value("format", "") != "clrlog-tokenizer") {
            throw IoError("not a tokenizer file");
        }
        if (j.value("version", 0) != 1) {
            throw IoError("unsupported tokenizer file version");
        }
        TokenizerModel model;
        const auto& loa = j.at("loa");
        model.loa_.level = loa.value("level", 0);
        model.loa_.vocab_size = loa.at("vocab_size").get<std::size_t>();
        if (loa.contains("max_token_chars")) {
            model.loa_.max_token_chars = loa.at("max_token_chars").get<std::size_t>();
        }

        const auto& vocab = j.at("vocab");
        model.id_to_token_.resize(vocab.size());
        std::vector<bool> seen(vocab.size(), false);
        for (auto it = vocab.begin(); it != vocab.end(); ++it) {
            const auto id = it.value().get<TokenId>();
            if (id >= model.id_to_token_.size() || seen[id]) {
                throw IoError("tokenizer vocab ids are not dense");
            }
            seen[id] = true;
            model.id_to_token_[id] = from_utf8(it.key());
        }
        const std::u32string expected_specials[] = {
            std::u32string(1, kPadChar), std::u32string(1, kUnkChar),
            std::u32string(1, kMaskChar)};
        for (TokenId id = 0; id < kSpecialTokenCount; ++id) {
            if (model.id_to_token_.size() <= id || model.id_to_token_[id] != expected_specials[id]) {
                throw IoError("tokenizer special tokens corrupt");
            }
        }
        for (TokenId id = 0; id < model.id_to_token_.size(); ++id) {
            model.vocab_.emplace(model.id_to_token_[id], id);
            if (id >= kSpecialTokenCount && model.id_to_token_[id].size() == 1) {
                model.scalar_to_id_.emplace(model.id_to_token_[id][0], id);
            }
        }
        for (const auto& m : j.at("merges")) {
            const auto left = from_utf8(m.at(0).get<std::string>());
            const auto right = from_utf8(m.at(1).get<std::string>());
            const auto li = model.vocab_.find(left);
            const auto ri = model.vocab_.find(right);
            const auto mi = model.vocab_.find(left + right);
            if (li == model.vocab_.end() || ri == model.vocab_.end() ||
                mi == model.vocab_.end()) {
                throw IoError("tokenizer merge list inconsistent with vocab");
            }
            model.merge_strings_.emplace_back(left, right);
            model.merge_ops_.push_back(MergeOp{li->second, ri->second, mi->second});
        }
        return model;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot write tokenizer file: " + path.string());
        }
        out << to_json().dump(2) << '\n';
        if (!out) {
            throw IoError("failed writing tokenizer file: " + path.string());
        }
    }

    static TokenizerModel load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw IoError("cannot open tokenizer file: " + path.string());
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt tokenizer file: " + std::string(e.what()));
        }
        return from_json(j);
    }

    /// Digest of the canonical serialized form; part of the score-cache key.
    std::string fingerprint() const { return Sha256::hash_hex(to_json().dump()); }

    friend TokenizerModel train_bpe(const std::vector<EncodedTrace>&, const LoaConfig&);

private:
    struct MergeOp {
        TokenId left;
        TokenId right;
        TokenId merged;
    };

    void init_base(std::vector<char32_t> alphabet) {
        id_to_token_.clear();
        vocab_.clear();
        scalar_to_id_.clear();
        id_to_token_.push_back(std::u32string(1, kPadChar));
        id_to_token_.push_back(std::u32string(1, kUnkChar));
        id_to_token_.push_back(std::u32string(1, kMaskChar));
        std::sort(alphabet.begin(), alphabet.end());
        alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
        for (char32_t cp : alphabet) {
            const TokenId id = static_cast<TokenId>(id_to_token_.size());
            id_to_token_.push_back(std::u32string(1, cp));
            scalar_to_id_.emplace(cp, id);
        }
        for (TokenId id = 0; id < id_to_token_.size(); ++id) {
            vocab_.emplace(id_to_token_[id], id);
        }
    }

    TokenId push_merge(TokenId left, TokenId right) {
        const std::u32string merged = id_to_token_[left] + id_to_token_[right];
        const TokenId id = static_cast<TokenId>(id_to_token_.size());
        id_to_token_.push_back(merged);
        vocab_.emplace(merged, id);
        merge_strings_.emplace_back(id_to_token_[left], id_to_token_[right]);
        merge_ops_.push_back(MergeOp{left, right, id});
        return id;
    }

    /// One greedy left-to-right pass replacing (left,right) with merged.
    static void apply_merge(std::vector<TokenId>& toks, TokenId left, TokenId right,
                            TokenId merged) {
        std::size_t w = 0;
        std::size_t r = 0;
        while (r < toks.size()) {
            if (r + 1 < toks.size() && toks[r] == left && toks[r + 1] == right) {
                toks[w++] = merged;
                r += 2;
            } else {
                toks[w++] = toks[r++];
            }
        }
        toks.resize(w);
    }

    LoaConfig loa_;
    std::vector<std::u32string> id_to_token_;
    std::unordered_map<std::u32string, TokenId> vocab_;
    std::unordered_map<char32_t, TokenId> scalar_to_id_;
    std::vector<std::pair<std::u32string, std::u32string>> merge_strings_;
    std::vector<MergeOp> merge_ops_;
};

/// Trains a BPE tokenizer over the corpus. Pair frequencies are maintained
/// incrementally; sequences containing the merged pair are re-counted in
/// full, which keeps the counts exactly equal to a from-scratch recount.
inline TokenizerModel train_bpe(const std::vector<EncodedTrace>& corpus,
                                const LoaConfig& loa) {
    if (corpus.empty()) {
        throw DataError("BPE training corpus is empty");
    }

    std::vector<char32_t> alphabet;
    for (const auto& trace : corpus) {
        alphabet.insert(alphabet.end(), trace.sequence.begin(), trace.sequence.end());
    }
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());

    if (loa.vocab_size < alphabet.size() + kSpecialTokenCount) {
        throw DataError("vocab_size " + std::to_string(loa.vocab_size) +
                        " is smaller than base alphabet plus special tokens (" +
                        std::to_string(alphabet.size() + kSpecialTokenCount) + ")");
    }

    TokenizerModel model;
    model.loa_ = loa;
    model.init_base(alphabet);

    std::vector<std::vector<TokenId>> seqs;
    seqs.reserve(corpus.size());
    for (const auto& trace : corpus) {
        std::vector<TokenId> toks;
        toks.reserve(trace.sequence.size());
        for (char32_t cp : trace.sequence) {
            toks.push_back(model.scalar_to_id_.at(cp));
        }
        seqs.push_back(std::move(toks));
    }

    const auto pair_key = [](TokenId a, TokenId b) {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    };

    std::unordered_map<std::uint64_t, std::int64_t> counts;
    std::unordered_map<std::uint64_t, std::unordered_set<std::size_t>> occurs_in;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        const auto& seq = seqs[s];
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            const auto key = pair_key(seq[i], seq[i + 1]);
            ++counts[key];
            occurs_in[key].insert(s);
        }
    }

    const std::size_t max_len =
        loa.max_token_chars ? *loa.max_token_chars : std::numeric_limits<std::size_t>::max();

    while (model.vocab_size() < loa.vocab_size) {
        // Best = highest count, ties to the smallest (left,right) strings.
        std::int64_t best_count = 0;
        std::uint64_t best_key = 0;
        const std::u32string* best_left = nullptr;
        const std::u32string* best_right = nullptr;
        for (const auto& [key, count] : counts) {
            if (count < 2) {
                continue;
            }
            const TokenId a = static_cast<TokenId>(key >> 32);
            const TokenId b = static_cast<TokenId>(key & 0xFFFFFFFFu);
            const auto& sa = model.id_to_token_[a];
            const auto& sb = model.id_to_token_[b];
            if (sa.size() + sb.size() > max_len) {
                continue;
            }
            if (count > best_count ||
                (count == best_count &&
                 (sa < *best_left || (sa == *best_left && sb < *best_right)))) {
                best_count = count;
                best_key = key;
                best_left = &sa;
                best_right = &sb;
            }
        }
        if (best_count < 2) {
            break;  // merging singletons adds no pattern value
        }

        const TokenId left = static_cast<TokenId>(best_key >> 32);
        const TokenId right = static_cast<TokenId>(best_key & 0xFFFFFFFFu);
        const TokenId merged = model.push_merge(left, right);

        // Re-count every sequence that contains the pair.
        auto holders_it = occurs_in.find(best_key);
        const std::unordered_set<std::size_t> holders = std::move(holders_it->second);
        occurs_in.erase(holders_it);
        for (std::size_t s : holders) {
            auto& seq = seqs[s];
            for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
                const auto key = pair_key(seq[i], seq[i + 1]);
                auto it = counts.find(key);
                if (--(it->second) == 0) {
                    counts.erase(it);
                }
                auto oit = occurs_in.find(key);
                if (oit != occurs_in.end()) {
                    oit->second.erase(s);
                    if (oit->second.empty()) {
                        occurs_in.erase(oit);
                    }
                }
            }
            TokenizerModel::apply_merge(seq, left, right, merged);
            for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
                const auto key = pair_key(seq[i], seq[i + 1]);
                ++counts[key];
                occurs_in[key].insert(s);
            }
        }
    }
    return model;
}

/// Number of tokens the model produces for a sequence (phi in the LoA docs).
inline std::size_t token_count(const TokenizerModel& model, const EncodedTrace& trace) {
    return model.tokenize(trace).token_ids.size();
}

}  // namespace clrlog
