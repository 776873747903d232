#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <set>

#include <cityalert/preprocess.hpp>

#include "test_support.hpp"

using namespace cityalert;
using cityalert::testing::bundled_dictionary;
using cityalert::testing::bundled_normalization;

namespace {

const char* kHelpFireInput =
    "@user heellllllppp!!! Firrreee at powai, lake lucene bldng 4th flor, hlp! #fire";
const char* kHelpFireCleaned = "heellllllppp Firrreee at powai , lake lucene bldng 4th flor , hlp";

Dictionary small_dict(std::initializer_list<std::pair<const char*, std::uint64_t>> words) {
    Dictionary d;
    for (auto [w, c] : words) d.add(w, c);
    return d;
}

// Every string reachable by shrinking each maximal run of the input to one
// or two characters (runs of one stay). Built directly from the input.
void enumerate_run_variants(const std::string& s, std::size_t pos, std::string prefix,
                            std::set<std::string>& out) {
    if (pos == s.size()) {
        out.insert(prefix);
        return;
    }
    std::size_t end = pos;
    while (end < s.size() && s[end] == s[pos]) ++end;
    enumerate_run_variants(s, end, prefix + s[pos], out);
    if (end - pos >= 2) enumerate_run_variants(s, end, prefix + s[pos] + s[pos], out);
}

std::string oracle_compress(const std::string& token, const Dictionary& dict) {
    std::string lower = text::to_lower(token);
    if (dict.contains(lower)) return token;
    std::set<std::string> variants;
    enumerate_run_variants(lower, 0, "", variants);
    std::vector<std::string> hits;
    for (const auto& v : variants) {
        if (dict.contains(v)) hits.push_back(v);
    }
    if (hits.empty()) {
        std::string capped;
        for (char c : lower) {
            if (capped.size() >= 2 && capped[capped.size() - 1] == c && capped[capped.size() - 2] == c) continue;
            capped.push_back(c);
        }
        return capped;
    }
    std::sort(hits.begin(), hits.end(), [&](const std::string& a, const std::string& b) {
        if (dict.frequency(a) != dict.frequency(b)) return dict.frequency(a) > dict.frequency(b);
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    return hits.front();
}

bool has_triple_run(const std::string& s) {
    auto cps = text::utf8_decode(s);
    for (std::size_t i = 2; i < cps.size(); ++i) {
        if (cps[i] == cps[i - 1] && cps[i] == cps[i - 2]) return true;
    }
    return false;
}

std::string random_text(std::mt19937& rng) {
    static const std::vector<std::string> pieces = {
        "fire", "  ", "!!!", "@bob", "#tag", "http://t.co/x", ",", "hlp", "aaa", "Bldng", "'",
        "é", "www.x.org", ".", "(", ")", "?", "\t", "##", "@", "drunk", "x,y", "don't", ";:"};
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1), len(0, 12);
    std::string s;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) {
        s += pieces[pick(rng)];
        if (rng() % 2) s += ' ';
    }
    return s;
}

} // namespace

TEST(Clean, ReproducesCleaningTable) { EXPECT_EQ(clean(kHelpFireInput), kHelpFireCleaned); }

TEST(Clean, EmptyInput) { EXPECT_EQ(clean(""), ""); }

TEST(Clean, RemovesUrlsTagsAndMentions) {
    EXPECT_EQ(clean("help http://t.co/abc #fire @john now"), "help now");
    EXPECT_EQ(clean("see https://x.y/z?q=1 and www.site.com/page ok"), "see and ok");
    EXPECT_EQ(clean("#fire"), "");
}

TEST(Clean, PunctuationRules) {
    EXPECT_EQ(clean("a;b:c/d\\e(f)g*h&i%j$k\"l"), "a b c d e f g h i j k l");
    EXPECT_EQ(clean("fire,smoke"), "fire , smoke");
    EXPECT_EQ(clean("don't"), "dont");
    EXPECT_EQ(clean("Help ME"), "Help ME");
}

TEST(Clean, IsIdempotent) {
    std::mt19937 rng(7);
    for (int i = 0; i < 2000; ++i) {
        std::string s = random_text(rng);
        std::string once = clean(s);
        EXPECT_EQ(clean(once), once) << "input: " << s;
        EXPECT_EQ(once.find('@'), std::string::npos);
        EXPECT_EQ(once.find('#'), std::string::npos);
        EXPECT_EQ(once.find("://"), std::string::npos);
    }
}

TEST(CompressToken, ReproducesCompressionTable) {
    const auto& dict = bundled_dictionary();
    EXPECT_EQ(compress_token("fiiiirreeeeee", dict), "fire");
    EXPECT_EQ(compress_token("helllllp", dict), "help");
    EXPECT_EQ(compress_token("sttuuuuuccckk", dict), "stuck");
}

TEST(CompressToken, DictionaryWordIsIdentity) {
    EXPECT_EQ(compress_token("fire", bundled_dictionary()), "fire");
    EXPECT_EQ(compress_token("Fire", bundled_dictionary()), "Fire");
}

TEST(CompressToken, FallsBackToRunCompressedForm) {
    auto dict = small_dict({{"fire", 1}});
    EXPECT_EQ(compress_token("xyyyzz", dict), "xyyzz");
}

TEST(CompressToken, TieBreakPrefersFrequencyThenLength) {
    auto dict = small_dict({{"too", 5}, {"to", 5}, {"tooo", 9}});
    EXPECT_EQ(compress_token("tttoooo", dict), "to");
    auto freq = small_dict({{"too", 6}, {"to", 5}});
    EXPECT_EQ(compress_token("tttoooo", freq), "too");
}

TEST(CompressToken, MatchesExhaustiveOracle) {
    std::mt19937 rng(11);
    auto dict = small_dict({{"fire", 40}, {"help", 30}, {"stuck", 5}, {"so", 90}, {"soo", 1},
                            {"too", 20}, {"to", 50}, {"book", 8}, {"bok", 1}, {"aab", 3},
                            {"abb", 3}, {"ab", 2}, {"cool", 6}, {"col", 6}});
    const std::string alphabet = "abcoflt";
    std::uniform_int_distribution<std::size_t> letter(0, alphabet.size() - 1), runlen(1, 4),
        nruns(1, 6);
    std::size_t checked = 0;
    for (int i = 0; i < 3000; ++i) {
        std::string tok;
        for (std::size_t r = 0, n = nruns(rng); r < n; ++r) tok.append(runlen(rng), alphabet[letter(rng)]);
        EXPECT_EQ(compress_token(tok, dict), oracle_compress(tok, dict)) << tok;
        ++checked;
    }
    for (const char* tok : {"fiiiirreeeeee", "ssooooo", "ttttooooo", "bbooookkk", "aaabbb", "cooooll"}) {
        EXPECT_EQ(compress_token(tok, dict), oracle_compress(tok, dict)) << tok;
    }
    EXPECT_EQ(checked, 3000u);
}

TEST(CompressToken, Properties) {
    std::mt19937 rng(3);
    const auto& dict = bundled_dictionary();
    const std::string alphabet = "aeilnoprstu";
    std::uniform_int_distribution<std::size_t> letter(0, alphabet.size() - 1), runlen(1, 5),
        nruns(1, 7);
    for (int i = 0; i < 2000; ++i) {
        std::string tok;
        for (std::size_t r = 0, n = nruns(rng); r < n; ++r) tok.append(runlen(rng), alphabet[letter(rng)]);
        std::string out = compress_token(tok, dict);
        EXPECT_FALSE(has_triple_run(out)) << tok << " -> " << out;
        EXPECT_LE(out.size(), tok.size());
        if (dict.contains(text::to_lower(tok))) EXPECT_EQ(out, tok);
    }
    EXPECT_FALSE(has_triple_run(compress_token("ééééé", dict)));
}

TEST(CompressToken, ManyWindowsStillTerminates) {
    std::string tok;
    for (char c = 'a'; c <= 'z'; ++c) tok += std::string(3, c);
    std::string out = compress_token(tok, bundled_dictionary());
    EXPECT_EQ(out.size(), 52u);
}

TEST(Normalize, ReproducesNormalizationTable) {
    const auto& dict = bundled_dictionary();
    std::vector<std::string> in{"bldng", "4th", "flor", ",", "hlp"};
    auto out = normalize_tokens(in, bundled_normalization(), dict);
    EXPECT_EQ(out, (std::vector<std::string>{"building", "4th", "flor", ",", "help"}));
}

TEST(Normalize, UnmatchedPassesThrough) {
    auto out = normalize_tokens({"fire"}, bundled_normalization(), bundled_dictionary());
    EXPECT_EQ(out, std::vector<std::string>{"fire"});
}

TEST(Normalize, SingleEntryMap) {
    NormalizationMap map;
    map.add("2mrw", "tomorrow", 1);
    auto out = normalize_tokens({"2mrw"}, map, small_dict({{"tomorrow", 3}}));
    EXPECT_EQ(out, std::vector<std::string>{"tomorrow"});
}

TEST(Normalize, LongestMatchAndWeightedChoice) {
    NormalizationMap map;
    map.add("b4", "before", 1);
    map.add("b4 u", "before you", 1);
    map.add("ur", "your", 2);
    map.add("ur", "you are", 10);
    auto dict = small_dict({{"before", 10}, {"you", 100}, {"your", 50}, {"are", 80}});
    auto out = normalize_tokens({"b4", "u", "ur"}, map, dict);
    // "you are": 10 * P(you) * P(are) vs "your": 2 * P(your)
    double p_you_are = 10.0 * dict.smoothed_probability("you") * dict.smoothed_probability("are");
    double p_your = 2.0 * dict.smoothed_probability("your");
    std::vector<std::string> expected{"before", "you"};
    if (p_you_are > p_your) {
        expected.insert(expected.end(), {"you", "are"});
    } else {
        expected.push_back("your");
    }
    EXPECT_EQ(out, expected);
}

TEST(Normalize, DictionaryWordsAreNeverRewritten) {
    NormalizationMap map;
    map.add("fire", "blaze", 5);
    auto out = normalize_tokens({"fire"}, map, small_dict({{"fire", 1}, {"blaze", 1}}));
    EXPECT_EQ(out, std::vector<std::string>{"fire"});
}

TEST(NormalizationMap, IgnoresIdentityPairsAndLowercasesKeys) {
    NormalizationMap map;
    map.add("Hlp", "help", 2);
    map.add("same", "same", 3);
    EXPECT_NE(map.find("hlp"), nullptr);
    EXPECT_EQ(map.find("same"), nullptr);
    EXPECT_THROW(map.add("x", "y", 0), FormatError);
}

TEST(DamerauLevenshtein, KnownDistances) {
    EXPECT_EQ(damerau_levenshtein("flor", "floor"), 1u);
    EXPECT_EQ(damerau_levenshtein("halp", "help"), 1u);
    EXPECT_EQ(damerau_levenshtein("ab", "ba"), 1u);
    EXPECT_EQ(damerau_levenshtein("ca", "abc"), 2u);  // unrestricted variant
    EXPECT_EQ(damerau_levenshtein("", "abc"), 3u);
    EXPECT_EQ(damerau_levenshtein("kitten", "sitting"), 3u);
    EXPECT_EQ(damerau_levenshtein("same", "same"), 0u);
}

TEST(SpellCorrect, FixesFloorExample) {
    std::vector<std::string> in{"building", "4th", "flor", ",", "help"};
    auto out = spell_correct(in, bundled_dictionary());
    EXPECT_EQ(out, (std::vector<std::string>{"building", "4th", "floor", ",", "help"}));
}

TEST(SpellCorrect, DictionaryWordIdentity) {
    EXPECT_EQ(spell_correct({"help"}, bundled_dictionary()), std::vector<std::string>{"help"});
}

TEST(SpellCorrect, FrequencyBreaksDistanceOneTie) {
    auto dict = small_dict({{"help", 10}, {"half", 4}});
    EXPECT_EQ(spell_correct({"halp"}, dict), std::vector<std::string>{"help"});
}

TEST(SpellCorrect, DistanceOneBeatsDistanceTwo) {
    auto dict = small_dict({{"cart", 1}, {"chart", 1000}});
    EXPECT_EQ(spell_correct({"crt"}, dict), std::vector<std::string>{"cart"});
}

TEST(SpellCorrect, LeavesDigitsPunctuationAndFarTokens) {
    auto dict = small_dict({{"fire", 1}});
    EXPECT_EQ(spell_correct({"4th", ",", "xqzvw", "fir3"}, dict),
              (std::vector<std::string>{"4th", ",", "xqzvw", "fir3"}));
}

TEST(Sanitize, HelpFirePost) {
    RawPost post{"t1", kHelpFireInput, Coordinates{19.1176, 72.9060}, {}, "user"};
    auto s = sanitize(post, bundled_dictionary(), bundled_normalization());
    EXPECT_EQ(s.tokens, (std::vector<std::string>{"help", "fire", "at", "powai", ",", "lake", "lucene",
                                                  "building", "4th", "floor", ",", "help"}));
    ASSERT_EQ(s.stage_log.size(), 4u);
    EXPECT_EQ(s.stage_log[0].after, kHelpFireCleaned);
    EXPECT_EQ(s.stage_log[1].after, "help fire at powai , lake lucene bldng 4th flor , hlp");
    EXPECT_EQ(s.stage_log[2].after, "help fire at powai , lake lucene building 4th flor , help");
    EXPECT_EQ(s.stage_log[3].after, s.text());
    EXPECT_EQ(s.source_id, "t1");
}

TEST(Sanitize, HashtagOnlyPostIsEmpty) {
    RawPost post{"t2", "#fire", std::nullopt, {}, "u"};
    EXPECT_THROW(sanitize(post, bundled_dictionary(), bundled_normalization()), EmptyAfterCleaning);
}

TEST(Sanitize, PlainWordIsIdentity) {
    RawPost post{"t3", "fire", std::nullopt, {}, "u"};
    EXPECT_EQ(sanitize(post, bundled_dictionary(), bundled_normalization()).tokens,
              std::vector<std::string>{"fire"});
}

TEST(Sanitize, DeterministicAndInvariantsHold) {
    std::mt19937 rng(5);
    for (int i = 0; i < 300; ++i) {
        std::string t = random_text(rng);
        if (clean(t).empty()) continue;
        RawPost post{"p", t, std::nullopt, {}, "u"};
        auto a = sanitize(post, bundled_dictionary(), bundled_normalization());
        auto b = sanitize(post, bundled_dictionary(), bundled_normalization());
        EXPECT_EQ(a.tokens, b.tokens);
        EXPECT_EQ(a.stage_log.size(), 4u);
        for (const auto& tok : a.tokens) {
            EXPECT_FALSE(has_triple_run(tok)) << tok;
            EXPECT_EQ(tok.find_first_of("@#"), std::string::npos);
        }
    }
}

TEST(Sanitize, DictionaryWordsSurviveNormalizationAndSpelling) {
    const auto& dict = bundled_dictionary();
    std::vector<std::string> words{"fire", "at", "the", "mall", "help", "people", "trapped"};
    EXPECT_EQ(normalize_tokens(words, bundled_normalization(), dict), words);
    EXPECT_EQ(spell_correct(words, dict), words);
}

TEST(RawPost, Validation) {
    EXPECT_THROW(validate(RawPost{"a", "   ", std::nullopt, {}, ""}), FormatError);
    EXPECT_THROW(validate(RawPost{"a", "x", Coordinates{91, 0}, {}, ""}), FormatError);
    EXPECT_NO_THROW(validate(RawPost{"a", "x", Coordinates{-90, 180}, {}, ""}));
}

TEST(Lexicon, LoadsBundledFiles) {
    EXPECT_GT(bundled_dictionary().size(), 15000u);
    EXPECT_GT(bundled_normalization().size(), 200u);
}
