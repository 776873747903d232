#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "lexicon.hpp"
#include "text.hpp"
#include "time.hpp"

namespace cityalert {

struct Coordinates {
    double lat = 0.0;
    double lon = 0.0;

    bool valid() const { return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0; }
    friend bool operator==(const Coordinates&, const Coordinates&) = default;
};

struct RawPost {
    std::string id;
    std::string text;
    std::optional<Coordinates> coords;
    Timestamp timestamp{};
    std::string author;
};

// Throws FormatError when the post breaks its field invariants.
inline void validate(const RawPost& post) {
    if (post.id.empty()) throw FormatError("post id is empty");
    if (text::trim(post.text).empty()) throw FormatError("post " + post.id + ": empty text");
    if (post.coords && !post.coords->valid()) {
        throw FormatError("post " + post.id + ": coordinates out of range");
    }
}

struct StageRecord {
    std::string stage;
    std::string before;
    std::string after;
};

struct SanitizedPost {
    std::string source_id;
    std::vector<std::string> tokens;
    std::vector<StageRecord> stage_log;  // cleaning, compression, normalization, spelling

    std::string text() const { return text::join(tokens, " "); }
};

namespace detail {

inline bool is_word_byte(char c) {
    return text::is_ascii_alnum(c) || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

inline bool starts_with_icase(std::string_view s, std::size_t pos, std::string_view prefix) {
    if (pos + prefix.size() > s.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char c = s[pos + i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c != prefix[i]) return false;
    }
    return true;
}

inline bool url_starts_at(std::string_view s, std::size_t pos) {
    if (pos > 0 && text::is_ascii_alnum(s[pos - 1])) return false;
    return starts_with_icase(s, pos, "http://") || starts_with_icase(s, pos, "https://") ||
           starts_with_icase(s, pos, "www.");
}

} // namespace detail

// Strips URLs, @-mentions and #-tags (with their attached word), turns every
// other ASCII punctuation mark except the comma into a space, isolates commas
// as standalone tokens and collapses whitespace. Apostrophes are deleted so
// contractions stay one token. Case is preserved.
inline std::string clean(std::string_view input) {
    std::string spaced;
    spaced.reserve(input.size() + 8);
    std::size_t i = 0;
    while (i < input.size()) {
        char c = input[i];
        if (detail::url_starts_at(input, i)) {
            while (i < input.size() && !text::is_ascii_space(input[i])) ++i;
            spaced.push_back(' ');
            continue;
        }
        if (c == '@' || c == '#') {
            std::size_t j = i + 1;
            bool mention = c == '@';
            while (j < input.size() &&
                   (mention ? (text::is_ascii_alnum(input[j]) || input[j] == '_')
                            : detail::is_word_byte(input[j]))) {
                ++j;
            }
            spaced.push_back(' ');
            i = j;
            continue;
        }
        if (c == ',') {
            spaced += " , ";
        } else if (c == '\'') {
            // dropped
        } else if (text::is_ascii_punct(c) || text::is_ascii_space(c)) {
            spaced.push_back(' ');
        } else {
            spaced.push_back(c);
        }
        ++i;
    }
    return text::join(text::split_whitespace(spaced), " ");
}

namespace detail {

struct Run {
    char32_t ch;
    std::size_t len;
};

inline std::vector<Run> runs_of(std::u32string_view s) {
    std::vector<Run> runs;
    for (char32_t c : s) {
        if (!runs.empty() && runs.back().ch == c) {
            ++runs.back().len;
        } else {
            runs.push_back({c, 1});
        }
    }
    return runs;
}

} // namespace detail

// Most windows enumerated exhaustively; tokens with more double-letter windows
// than this fall back to the run-compressed form.
inline constexpr std::size_t kMaxCompressionWindows = 16;

// Collapses stretched characters ("fiiiirreeeeee") toward a dictionary word.
// Runs of three or more become two; each remaining double is then either kept
// or halved, and the best-ranked dictionary hit among the 2^n variants wins
// (higher count, then shorter, then lexicographically first).
inline std::string compress_token(std::string_view token, const Dictionary& dict) {
    std::string lower = text::to_lower(token);
    if (dict.contains(lower)) return std::string(token);

    auto runs = detail::runs_of(text::utf8_decode(lower));
    std::vector<std::size_t> windows;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        runs[r].len = std::min<std::size_t>(runs[r].len, 2);
        if (runs[r].len == 2) windows.push_back(r);
    }

    auto render = [&](std::uint32_t halved) {
        std::u32string out;
        std::size_t w = 0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            std::size_t len = runs[r].len;
            if (w < windows.size() && windows[w] == r) {
                if (halved & (1u << w)) len = 1;
                ++w;
            }
            out.append(len, runs[r].ch);
        }
        return text::utf8_encode(out);
    };

    std::string compressed = render(0);
    if (windows.size() > kMaxCompressionWindows) return compressed;

    std::optional<std::string> best;
    std::uint64_t best_freq = 0;
    const std::uint32_t limit = 1u << windows.size();
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
        std::string cand = render(mask);
        if (!dict.contains(cand)) continue;
        std::uint64_t f = dict.frequency(cand);
        bool better = !best || f > best_freq ||
                      (f == best_freq && (cand.size() < best->size() ||
                                          (cand.size() == best->size() && cand < *best)));
        if (better) {
            best = std::move(cand);
            best_freq = f;
        }
    }
    return best ? *best : compressed;
}

// Greedy longest-match phrase replacement. A span is replaceable only when
// none of its tokens is a dictionary word; among a key's alternatives the one
// maximizing count * P(words) under the smoothed unigram model wins.
inline std::vector<std::string> normalize_tokens(const std::vector<std::string>& tokens,
                                                 const NormalizationMap& map,
                                                 const Dictionary& dict) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    std::size_t i = 0;
    while (i < tokens.size()) {
        const std::vector<NormalizationCandidate>* cands = nullptr;
        std::size_t matched = 0;
        std::size_t longest = std::min(map.max_key_tokens(), tokens.size() - i);
        for (std::size_t len = longest; len >= 1 && !cands; --len) {
            bool has_word = false;
            for (std::size_t k = i; k < i + len; ++k) {
                if (dict.contains(tokens[k])) {
                    has_word = true;
                    break;
                }
            }
            if (has_word) continue;
            std::string key = tokens[i];
            for (std::size_t k = i + 1; k < i + len; ++k) key += " " + tokens[k];
            if ((cands = map.find(key))) matched = len;
        }
        if (!cands) {
            out.push_back(tokens[i++]);
            continue;
        }
        const NormalizationCandidate* best = nullptr;
        double best_score = -1.0;
        for (const auto& c : *cands) {
            double score = static_cast<double>(c.count);
            for (const auto& w : text::split_whitespace(c.phrase)) {
                score *= dict.smoothed_probability(w);
            }
            if (score > best_score || (score == best_score && c.phrase < best->phrase)) {
                best = &c;
                best_score = score;
            }
        }
        for (auto& w : text::split_whitespace(best->phrase)) out.push_back(std::move(w));
        i += matched;
    }
    return out;
}

// Unrestricted Damerau-Levenshtein distance (adjacent transpositions may be
// combined with other edits), over bytes.
inline std::size_t damerau_levenshtein(std::string_view a, std::string_view b) {
    const std::size_t n = a.size(), m = b.size();
    const std::size_t inf = n + m;
    std::vector<std::size_t> d((n + 2) * (m + 2), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 2) + j]; };
    at(0, 0) = inf;
    for (std::size_t i = 0; i <= n; ++i) {
        at(i + 1, 0) = inf;
        at(i + 1, 1) = i;
    }
    for (std::size_t j = 0; j <= m; ++j) {
        at(0, j + 1) = inf;
        at(1, j + 1) = j;
    }
    std::array<std::size_t, 256> last_row{};
    for (std::size_t i = 1; i <= n; ++i) {
        std::size_t last_match_col = 0;
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t i1 = last_row[static_cast<unsigned char>(b[j - 1])];
            std::size_t j1 = last_match_col;
            std::size_t cost = 1;
            if (a[i - 1] == b[j - 1]) {
                cost = 0;
                last_match_col = j;
            }
            at(i + 1, j + 1) = std::min({at(i, j) + cost, at(i + 1, j) + 1, at(i, j + 1) + 1,
                                         at(i1, j1) + (i - i1 - 1) + 1 + (j - j1 - 1)});
        }
        last_row[static_cast<unsigned char>(a[i - 1])] = i;
    }
    return at(n + 1, m + 1);
}

// Consonant skeleton used to prefer sound-alike corrections: first letter,
// then the remaining letters minus vowels and h/w/y, with repeats collapsed.
inline std::string phonetic_key(std::string_view word) {
    std::string key;
    for (std::size_t i = 0; i < word.size(); ++i) {
        char c = word[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (i > 0 && std::string_view("aeiouhwy").find(c) != std::string_view::npos) continue;
        if (!key.empty() && key.back() == c) continue;
        key.push_back(c);
    }
    return key;
}

inline constexpr std::size_t kMaxSpellDistance = 2;

// Best dictionary replacement for one letters-only token, if any lies within
// kMaxSpellDistance. Ranking: smaller distance, then sound-alike, then higher
// count, then lexicographic.
inline std::optional<std::string> spelling_suggestion(const std::string& token,
                                                      const Dictionary& dict) {
    struct Cand {
        std::size_t dist;
        bool phonetic;
        std::uint64_t freq;
        const std::string* word;
    };
    std::optional<Cand> best;
    const std::string key = phonetic_key(token);
    const std::size_t lo = token.size() > kMaxSpellDistance ? token.size() - kMaxSpellDistance : 1;
    const std::size_t hi = token.size() + kMaxSpellDistance;
    for (std::size_t len = lo; len <= hi; ++len) {
        for (const auto& w : dict.words_of_length(len)) {
            std::size_t dist = damerau_levenshtein(token, w);
            if (dist == 0 || dist > kMaxSpellDistance) continue;
            Cand c{dist, phonetic_key(w) == key, dict.frequency(w), &w};
            bool better = !best || c.dist < best->dist ||
                          (c.dist == best->dist &&
                           (c.phonetic > best->phonetic ||
                            (c.phonetic == best->phonetic &&
                             (c.freq > best->freq || (c.freq == best->freq && *c.word < *best->word)))));
            if (better) best = c;
        }
    }
    if (!best) return std::nullopt;
    return *best->word;
}

inline std::vector<std::string> spell_correct(const std::vector<std::string>& tokens,
                                              const Dictionary& dict) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (dict.contains(t) || !text::all_ascii_alpha(t)) {
            out.push_back(t);
            continue;
        }
        auto fix = spelling_suggestion(t, dict);
        out.push_back(fix ? *fix : t);
    }
    return out;
}

// clean -> lowercase tokenization -> compression -> normalization -> spelling.
// Throws EmptyAfterCleaning when nothing survives cleaning.
inline SanitizedPost sanitize(const RawPost& post, const Dictionary& dict,
                              const NormalizationMap& map) {
    SanitizedPost out;
    out.source_id = post.id;

    std::string cleaned = clean(post.text);
    out.stage_log.push_back({"cleaning", post.text, cleaned});
    auto tokens = text::split_whitespace(text::to_lower(cleaned));
    if (tokens.empty()) throw EmptyAfterCleaning("post " + post.id + " has no content after cleaning");

    std::string before = text::join(tokens, " ");
    for (auto& t : tokens) t = compress_token(t, dict);
    std::string after = text::join(tokens, " ");
    out.stage_log.push_back({"compression", before, after});

    tokens = normalize_tokens(tokens, map, dict);
    before = std::move(after);
    after = text::join(tokens, " ");
    out.stage_log.push_back({"normalization", before, after});

    tokens = spell_correct(tokens, dict);
    before = std::move(after);
    after = text::join(tokens, " ");
    out.stage_log.push_back({"spelling", before, after});

    out.tokens = std::move(tokens);
    return out;
}

} // namespace cityalert
