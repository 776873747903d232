#include <gtest/gtest.h>

#include <random>

#include <cityalert/features.hpp>

#include "test_support.hpp"

using namespace cityalert;

namespace {
using Docs = std::vector<std::vector<std::string>>;
FeatureOptions unigrams() { return FeatureOptions{1, true, false}; }
FeatureOptions trigrams(bool fallback = false) { return FeatureOptions{3, fallback, false}; }
} // namespace

TEST(FitVocabulary, Unigrams) {
    Docs docs{{"fire", "in", "mall"}};
    auto v = fit_vocabulary(docs, unigrams());
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(*v.index_of("fire"), 0u);
    EXPECT_EQ(*v.index_of("in"), 1u);
    EXPECT_EQ(*v.index_of("mall"), 2u);
}

TEST(FitVocabulary, SingleTrigram) {
    Docs docs{{"fire", "in", "mall"}};
    auto v = fit_vocabulary(docs, trigrams());
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v.feature(0), "fire in mall");
}

TEST(FitVocabulary, DeduplicatesAcrossDocs) {
    Docs docs{{"a", "b"}, {"a", "b"}};
    EXPECT_EQ(fit_vocabulary(docs, unigrams()).size(), 2u);
}

TEST(FitVocabulary, ShortDocsWithoutFallbackYieldNothing) {
    Docs docs{{"fire"}, {"fire", "now"}};
    EXPECT_THROW(fit_vocabulary(docs, trigrams(false)), EmptyVocabulary);
    auto v = fit_vocabulary(docs, trigrams(true));
    EXPECT_EQ(v.features(), (std::vector<std::string>{"<s> fire </s>", "<s> fire now", "fire now </s>"}));
}

TEST(FitVocabulary, RejectsBadOrder) {
    Docs docs{{"a", "b"}};
    EXPECT_THROW(fit_vocabulary(docs, FeatureOptions{2, false, false}), std::invalid_argument);
}

TEST(Vectorize, CountsAndIgnoresOov) {
    Docs docs{{"fire", "in", "mall"}};
    auto v = fit_vocabulary(docs, unigrams());
    auto fv = vectorize(std::vector<std::string>{"fire", "fire", "in"}, v, unigrams());
    EXPECT_EQ(fv.entries, (std::vector<std::pair<std::uint32_t, double>>{{0, 2.0}, {1, 1.0}}));
    EXPECT_EQ(fv.dimension, 3u);
    EXPECT_TRUE(vectorize(std::vector<std::string>{"flood"}, v, unigrams()).empty());
    FeatureOptions binary = unigrams();
    binary.binary = true;
    EXPECT_EQ(vectorize(std::vector<std::string>{"fire", "fire"}, v, binary).entries.front().second, 1.0);
}

TEST(Vectorize, FiveTokenDocHasThreeTrigrams) {
    std::vector<std::string> doc{"a", "b", "c", "d", "e"};
    EXPECT_EQ(extract_ngrams(doc, trigrams()).size(), 3u);
}

TEST(FeatureProperties, CountsIndicesDeterminismAndLeakage) {
    std::mt19937 rng(9);
    const std::vector<std::string> words{"fire", "help", "at", "mall", "smoke", ",", "now", "x"};
    std::uniform_int_distribution<std::size_t> w(0, words.size() - 1), len(0, 9);
    for (int round = 0; round < 200; ++round) {
        Docs train, test;
        for (int d = 0; d < 6; ++d) {
            std::vector<std::string> doc;
            for (std::size_t i = 0, n = len(rng); i < n; ++i) doc.push_back(words[w(rng)]);
            (d < 4 ? train : test).push_back(doc);
        }
        test.back().push_back("sentinel-only-in-test");
        for (std::size_t order : {1u, 3u}) {
            FeatureOptions opts{order, false, false};
            for (const auto& doc : train) {
                std::size_t expected = doc.size() >= order ? doc.size() - order + 1 : 0;
                EXPECT_EQ(extract_ngrams(doc, opts).size(), expected);
            }
            Vocabulary v1, v2;
            try {
                v1 = fit_vocabulary(train, opts);
                v2 = fit_vocabulary(train, opts);
            } catch (const EmptyVocabulary&) {
                continue;
            }
            EXPECT_EQ(v1.features(), v2.features());
            for (const auto& f : v1.features()) {
                EXPECT_EQ(text::split_whitespace(f).size(), order);
            }
            for (const auto& doc : test) {
                auto fv = vectorize(doc, v1, opts);
                for (auto [idx, val] : fv.entries) {
                    EXPECT_LT(idx, v1.size());
                    EXPECT_GT(val, 0.0);
                }
                for (std::size_t i = 1; i < fv.entries.size(); ++i) {
                    EXPECT_LT(fv.entries[i - 1].first, fv.entries[i].first);
                }
            }
            EXPECT_FALSE(v1.contains("sentinel-only-in-test"));
        }
    }
}

TEST(Vocabulary, SaveLoadPreservesIndexAndHash) {
    cityalert::testing::TempDir dir("vocab");
    Docs docs{{"huge", "fire", "near", "powai"}, {"fire", "at", "mall"}};
    auto v = fit_vocabulary(docs, trigrams());
    v.save(dir.file("v.tsv"));
    auto loaded = Vocabulary::load(dir.file("v.tsv"));
    EXPECT_EQ(loaded.features(), v.features());
    EXPECT_EQ(loaded.order(), 3u);
    EXPECT_EQ(loaded.hash(), v.hash());
}
