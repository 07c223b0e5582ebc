#include <gtest/gtest.h>

#include <json.hpp>

#include "medsum/metrics.hpp"
#include "support/expect_error.hpp"
#include "support/rouge_cases.hpp"
#include "support/test_support.hpp"

using namespace medsum;

namespace {

void expect_prf(const RougeScore& s, const fixtures::PRF& want, const std::string& what) {
    EXPECT_NEAR(s.precision, want.p, 1e-9) << what << " precision";
    EXPECT_NEAR(s.recall, want.r, 1e-9) << what << " recall";
    EXPECT_NEAR(s.f1, want.f, 1e-9) << what << " f1";
}

TokenSequence toks(std::initializer_list<const char*> t) { return TokenSequence(t.begin(), t.end()); }

ExampleSet small_set() {
    return ExampleSet({{"1", "Doctor: you have a cough and a fever today", "patient has a cough and a fever", {}, Task::B},
                       {"2", "Doctor: your knee is swollen after the fall", "knee swollen after a fall", {}, Task::B},
                       {"3", "Doctor: any allergies? Patient: penicillin", "allergic to penicillin", {}, Task::B}},
                      Task::B);
}

}  // namespace

TEST(Tokenize, Rules) {
    EXPECT_EQ(tokenize("Doctor: How are you?"), toks({"doctor", "how", "are", "you"}));
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_EQ(tokenize("A  b\tC"), toks({"a", "b", "c"}));
    EXPECT_EQ(tokenize("BP 120/80, pt's"), toks({"bp", "120", "80", "pt", "s"}));
    EXPECT_EQ(tokenize("caf\xC3\xA9 ok"), toks({"caf\xC3\xA9", "ok"}));
}

TEST(Rouge, HandCountedCases) {
    for (const auto& c : fixtures::rouge_cases()) {
        expect_prf(rouge_n(c.candidate, c.reference, 1), c.r1, std::string(c.name) + " R1");
        expect_prf(rouge_n(c.candidate, c.reference, 2), c.r2, std::string(c.name) + " R2");
        expect_prf(rouge_l(c.candidate, c.reference), c.rl, std::string(c.name) + " RL");
    }
}

TEST(Rouge, BothEmptyScoresOne) {
    EXPECT_EQ(rouge_n({}, {}, 1).f1, 1.0);
    EXPECT_EQ(rouge_l({}, {}).f1, 1.0);
    EXPECT_EQ(rouge_l({}, toks({"a"})).f1, 0.0);
    EXPECT_EQ(rouge_l(toks({"a"}), {}).f1, 0.0);
}

TEST(Rouge, UnsupportedOrder) { EXPECT_MEDSUM_ERROR(rouge_n(toks({"a"}), toks({"a"}), 3), ErrorCode::InvalidArgument); }

TEST(Rouge, SymmetryAndBoundsProperty) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 500; ++i) {
        const auto a = fixtures::random_tokens(rng, 12, 5, 1);
        const auto b = fixtures::random_tokens(rng, 12, 5, 1);
        for (int n : {1, 2}) {
            const auto ab = rouge_n(a, b, n);
            const auto ba = rouge_n(b, a, n);
            ASSERT_NEAR(ab.precision, ba.recall, 1e-15);
            ASSERT_NEAR(ab.f1, ba.f1, 1e-15);
            ASSERT_GE(ab.f1, 0.0);
            ASSERT_LE(ab.f1, 1.0);
        }
        const auto l = rouge_l(a, b);
        ASSERT_NEAR(l.f1, rouge_l(b, a).f1, 1e-15);
        // LCS never exceeds the clipped unigram overlap.
        ASSERT_LE(l.f1, rouge_n(a, b, 1).f1 + 1e-12);
        ASSERT_EQ(rouge_n(a, a, 1).f1, 1.0);
        ASSERT_EQ(rouge_l(a, a).f1, 1.0);
    }
}

TEST(Lcs, MatchesExhaustiveSubsequenceSearch) {
    std::mt19937_64 rng(22);
    for (int i = 0; i < 200; ++i) {
        const auto a = fixtures::random_tokens(rng, 8, 3);
        const auto b = fixtures::random_tokens(rng, 8, 3);
        // Largest subsequence of `a` (by bitmask) that is also a subsequence of `b`.
        std::size_t best = 0;
        for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
            std::size_t pos = 0, len = 0;
            bool ok = true;
            for (std::size_t t = 0; t < a.size() && ok; ++t) {
                if (!(mask >> t & 1u)) continue;
                while (pos < b.size() && b[pos] != a[t]) ++pos;
                if (pos == b.size()) ok = false;
                else { ++pos; ++len; }
            }
            if (ok) best = std::max(best, len);
        }
        ASSERT_EQ(lcs_length(a, b), best);
    }
}

TEST(Fragments, SpecCases) {
    EXPECT_EQ(extractive_fragments(toks({"a", "b", "c", "d"}), toks({"b", "c"})),
              (std::vector<Fragment>{{1, 0, 2}}));
    EXPECT_TRUE(extractive_fragments(toks({"a", "b"}), toks({"x", "y"})).empty());
    EXPECT_EQ(extractive_fragments(toks({"a", "b", "a", "b", "c"}), toks({"a", "b", "c"})),
              (std::vector<Fragment>{{2, 0, 3}}));
}

TEST(Fragments, LongestMatchAnywhereNotSkipAhead) {
    // A forward-only scan would pair the summary's "a a" with article 0..1 and
    // lose the trailing "b"; the longest match from position 0 is "a a b".
    EXPECT_EQ(extractive_fragments(toks({"a", "a", "a", "b"}), toks({"a", "a", "b"})),
              (std::vector<Fragment>{{1, 0, 3}}));
}

TEST(Fragments, MatchBruteForceOracle) {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 500; ++i) {
        const auto article = fixtures::random_tokens(rng, 20, 4);
        const auto summary = fixtures::random_tokens(rng, 10, 4);
        ASSERT_EQ(extractive_fragments(article, summary), fixtures::fragment_oracle(article, summary)) << i;
    }
}

TEST(Extractiveness, Algebra) {
    // whole summary copied as a block of m = 3 from a 6-token article
    const auto e = extractiveness(toks({"x", "a", "b", "c", "y", "z"}), toks({"a", "b", "c"}));
    EXPECT_DOUBLE_EQ(e.coverage, 1.0);
    EXPECT_DOUBLE_EQ(e.density, 3.0);
    EXPECT_DOUBLE_EQ(e.compression, 2.0);

    const auto none = extractiveness(toks({"a", "b"}), toks({"x"}));
    EXPECT_EQ(none.coverage, 0.0);
    EXPECT_EQ(none.density, 0.0);

    // fragments {2, 1} over a 4-token summary of a 10-token article
    const auto mixed = extractiveness(toks({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}), toks({"a", "b", "x", "e"}));
    EXPECT_DOUBLE_EQ(mixed.coverage, 0.75);
    EXPECT_DOUBLE_EQ(mixed.density, 1.25);
    EXPECT_DOUBLE_EQ(mixed.compression, 2.5);
}

TEST(Extractiveness, Errors) {
    EXPECT_MEDSUM_ERROR(extractiveness(toks({"a"}), {}), ErrorCode::EmptySummary);
    EXPECT_MEDSUM_ERROR(extractiveness({}, toks({"a"})), ErrorCode::EmptyArticle);
}

TEST(Extractiveness, IdentitiesProperty) {
    std::mt19937_64 rng(24);
    for (int i = 0; i < 500; ++i) {
        const auto article = fixtures::random_tokens(rng, 20, 4, 1);
        const auto summary = fixtures::random_tokens(rng, 10, 4, 1);
        const auto e = extractiveness(article, summary);
        std::size_t total = 0;
        for (const auto& f : extractive_fragments(article, summary)) total += f.length;
        ASSERT_GE(e.density + 1e-12, e.coverage);
        ASSERT_NEAR(static_cast<double>(total), e.coverage * static_cast<double>(summary.size()), 1e-9);
        ASSERT_LE(e.coverage, 1.0);
    }
}

TEST(LengthStats, Cases) {
    const auto one = length_diff_stats({{100, 40}});
    EXPECT_EQ(one.mean, 60.0);
    const auto two = length_diff_stats({{10, 10}, {20, 10}});
    EXPECT_EQ(two.differences, (std::vector<long long>{0, 10}));
    EXPECT_EQ(two.mean, 5.0);
    EXPECT_EQ(two.median, 5.0);
    const auto neg = length_diff_stats({{5, 60}, {120, 10}}, 50);
    ASSERT_EQ(neg.histogram.size(), 5u);
    EXPECT_EQ(neg.histogram.front().lower, -100);
    EXPECT_EQ(neg.histogram.front().count, 1u);
    EXPECT_EQ(neg.histogram.back().lower, 100);
    EXPECT_MEDSUM_ERROR(length_diff_stats({}), ErrorCode::EmptySet);
    EXPECT_MEDSUM_ERROR(length_diff_stats({{1, 1}}, 0), ErrorCode::InvalidArgument);
}

TEST(Report, MacroAveragesOverScoredExamples) {
    const auto set = small_set();
    const auto report = corpus_report(set, {{"1", "patient has a cough and a fever"}, {"2", "unrelated words"}, {"3", "  "}});
    EXPECT_EQ(report.evaluated, 2u);
    EXPECT_EQ(report.missing, std::vector<std::string>{"3"});
    EXPECT_NEAR(report.macro.at("rouge1_f1"), (1.0 + 0.0) / 2.0, 1e-12);
    EXPECT_EQ(report.averaging, "macro");
}

TEST(Report, UnknownIdAndExternalMerge) {
    const auto set = small_set();
    EXPECT_MEDSUM_ERROR(corpus_report(set, {{"99", "x"}}), ErrorCode::UnknownId);
    auto report = corpus_report(set, {{"1", "cough"}, {"2", "knee"}});
    auto json = nlohmann::json::parse(report.to_json());
    EXPECT_TRUE(json["bertscore_f1"].is_null());
    merge_external_metrics(report, {{"1", {{"bertscore_f1", 0.8}}}, {"2", {{"bertscore_f1", 0.6}}}});
    EXPECT_NEAR(report.macro.at("bertscore_f1"), 0.7, 1e-12);
    json = nlohmann::json::parse(report.to_json());
    EXPECT_NEAR(json["bertscore_f1"].get<double>(), 0.7, 1e-12);
    EXPECT_MEDSUM_ERROR(merge_external_metrics(report, {{"3", {{"bleurt", 0.1}}}}), ErrorCode::UnknownId);
    EXPECT_NE(report.to_csv().find("bertscore_f1"), std::string::npos);
}

TEST(Report, SerializationIsStable) {
    const auto set = small_set();
    const std::map<std::string, std::string> gen{{"1", "a cough"}, {"2", "swollen knee"}, {"3", "penicillin"}};
    EXPECT_EQ(corpus_report(set, gen).to_json(), corpus_report(set, gen).to_json());
    EXPECT_EQ(corpus_report(set, gen).to_text(), corpus_report(set, gen).to_text());
}
