#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "medsum/embedding.hpp"
#include "support/expect_error.hpp"
#include "support/test_support.hpp"

using namespace medsum;

namespace {

ExampleSet three_examples() {
    return ExampleSet({{"a", "chest pain on exertion", "", SectionHeader::CC, Task::A},
                       {"b", "dry cough at night", "", SectionHeader::Ros, Task::A},
                       {"c", "rash on both arms", "", SectionHeader::Exam, Task::A}},
                      Task::A);
}

// Counts batches and fails on request.
class CountingEmbedder final : public EmbeddingProvider {
  public:
    std::string tag() const override { return "counting"; }
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedInput> inputs) override {
        ++batches;
        std::vector<EmbeddingVector> out;
        for (const auto& in : inputs) {
            if (in.id == fail_id) throw std::runtime_error("backend down");
            seen_lengths.push_back(in.text.size());
            out.emplace_back(std::vector<double>{static_cast<double>(in.text.size()), 1.0});
        }
        return out;
    }
    int batches = 0;
    std::string fail_id;
    std::vector<std::size_t> seen_lengths;
};

}  // namespace

TEST(Cosine, AnalyticCases) {
    const EmbeddingVector a({1.0, 0.0}), b({0.0, 1.0}), c({1.0, 1.0}), d({3.0, -2.0});
    EXPECT_NEAR(cosine_similarity(d, d), 1.0, 1e-9);
    EXPECT_EQ(cosine_similarity(a, b), 0.0);
    EXPECT_NEAR(cosine_similarity(a, c), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(cosine_similarity(a, EmbeddingVector({-2.0, 0.0})), -1.0, 1e-12);
}

TEST(Cosine, Errors) {
    EXPECT_MEDSUM_ERROR(cosine_similarity(EmbeddingVector({1.0}), EmbeddingVector({1.0, 2.0})),
                        ErrorCode::DimensionMismatch);
    EXPECT_MEDSUM_ERROR(cosine_similarity(EmbeddingVector({0.0, 0.0}), EmbeddingVector({1.0, 2.0})),
                        ErrorCode::ZeroVector);
    EXPECT_MEDSUM_ERROR(EmbeddingVector({1.0, std::numeric_limits<double>::quiet_NaN()}), ErrorCode::NonFiniteValue);
    EXPECT_MEDSUM_ERROR(EmbeddingVector({std::numeric_limits<double>::infinity()}), ErrorCode::NonFiniteValue);
}

TEST(Cosine, BoundedAndSymmetricProperty) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        const EmbeddingVector a(fixtures::random_vector(rng, 6, i % 2 == 0));
        const EmbeddingVector b(fixtures::random_vector(rng, 6, i % 3 == 0));
        const double s = cosine_similarity(a, b);
        ASSERT_GE(s, -1.0);
        ASSERT_LE(s, 1.0);
        ASSERT_NEAR(s, cosine_similarity(b, a), 1e-15);
    }
}

TEST(HashEmbed, DeterministicAndUnit) {
    const auto a = hash_embed("the patient has a cough", 64, 1);
    EXPECT_EQ(a, hash_embed("the patient has a cough", 64, 1));
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
    EXPECT_NE(a, hash_embed("the patient has a cough", 64, 2));
}

TEST(HashEmbed, RepetitionKeepsDirection) {
    EXPECT_NEAR(cosine_similarity(hash_embed("a a", 128), hash_embed("a", 128)), 1.0, 1e-6);
}

TEST(HashEmbed, DisjointTokensRegression) {
    // Pinned from the first run; a change means the hashing scheme changed and
    // every stored index and manifest tag must be regenerated.
    const double s = cosine_similarity(hash_embed("alpha beta gamma delta", 1024, 7),
                                       hash_embed("epsilon zeta eta theta", 1024, 7));
    EXPECT_LT(std::abs(s), 0.5);
    EXPECT_DOUBLE_EQ(s, HASH_REGRESSION_VALUE);
}

TEST(HashEmbed, Errors) {
    EXPECT_MEDSUM_ERROR(hash_embed("   ", 16), ErrorCode::EmptyText);
    EXPECT_MEDSUM_ERROR(hash_embed("x", 1), ErrorCode::InvalidArgument);
}

TEST(EmbedCorpus, UnitNormsAndDeterminism) {
    HashEmbedder e(32, 0);
    const auto set = three_examples();
    const auto index = embed_corpus(e, set);
    ASSERT_EQ(index.size(), 3u);
    for (std::size_t i = 0; i < index.size(); ++i) EXPECT_NEAR(index.vector(i).norm(), 1.0, 1e-6);
    EXPECT_EQ(index.ids(), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(index, embed_corpus(e, set));
    EXPECT_EQ(index.provider_tag(), e.tag());
}

TEST(EmbedCorpus, EmptySet) {
    HashEmbedder e(32, 0);
    EXPECT_MEDSUM_ERROR(embed_corpus(e, ExampleSet({}, Task::A)), ErrorCode::EmptySet);
}

TEST(EmbedCorpus, BatchingAndParallelismDoNotChangeResult) {
    HashEmbedder e(64, 5);
    const auto set = parse_examples(fixtures::synthetic_task_a_csv(45), ColumnMapping::defaults_for(Task::A), Task::A);
    const auto serial = embed_corpus(e, set, {1, 1, 0});
    EXPECT_EQ(serial, embed_corpus(e, set, {7, 4, 0}));
    CountingEmbedder counting;
    embed_corpus(counting, set, {10, 1, 0});
    EXPECT_EQ(counting.batches, 5);
}

TEST(EmbedCorpus, FailureNamesTheBatch) {
    CountingEmbedder counting;
    counting.fail_id = "b";
    try {
        embed_corpus(counting, three_examples(), {1, 1, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ProviderFailure);
        EXPECT_NE(std::string(e.what()).find("example b"), std::string::npos) << e.what();
    }
}

TEST(EmbedCorpus, TruncationAtUtf8Boundary) {
    CountingEmbedder counting;
    const ExampleSet set({{"x", "h\xC3\xA9llo world", "", {}, Task::B}}, Task::B);
    embed_corpus(counting, set, {32, 1, 2});
    ASSERT_EQ(counting.seen_lengths.size(), 1u);
    EXPECT_EQ(counting.seen_lengths[0], 1u);
    EXPECT_EQ(truncate_utf8("h\xC3\xA9llo", 3), "h\xC3\xA9");
    EXPECT_EQ(truncate_utf8("abc", 10), "abc");
}

TEST(Index, SaveLoadRoundTripThroughPrecomputed) {
    fixtures::TempDir dir;
    HashEmbedder e(16, 9);
    const auto set = three_examples();
    const auto index = embed_corpus(e, set);
    index.save(dir / "vectors.txt");
    auto pre = PrecomputedEmbedder::load(dir / "vectors.txt");
    EXPECT_EQ(pre.size(), 3u);
    EXPECT_EQ(pre.dimension(), 16u);
    const auto again = embed_corpus(pre, set);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again.vector(i), index.vector(i));
}

TEST(Index, PrecomputedErrors) {
    fixtures::TempDir dir;
    {
        std::ofstream(dir / "bad.txt") << "a 1 2\nb 1 2 3\n";
    }
    EXPECT_MEDSUM_ERROR(PrecomputedEmbedder::load(dir / "bad.txt"), ErrorCode::DimensionMismatch);
    {
        std::ofstream(dir / "nan.txt") << "a 1 x\n";
    }
    EXPECT_MEDSUM_ERROR(PrecomputedEmbedder::load(dir / "nan.txt"), ErrorCode::MalformedFile);
    {
        std::ofstream(dir / "ok.txt") << "a 1 0\n";
    }
    auto pre = PrecomputedEmbedder::load(dir / "ok.txt");
    const std::vector<EmbedInput> missing{{"zzz", "text"}};
    EXPECT_MEDSUM_ERROR(pre.embed_batch(missing), ErrorCode::ProviderFailure);
}

TEST(Index, SubsetAndDuplicates) {
    const EmbeddingIndex index({"a", "b", "c"}, {EmbeddingVector({1, 0}), EmbeddingVector({0, 2}), EmbeddingVector({1, 1})},
                               "t");
    const std::vector<std::string> pick{"c", "a"};
    const auto sub = index.subset(pick);
    EXPECT_EQ(sub.ids(), pick);
    EXPECT_NEAR(sub.find("c")->norm(), 1.0, 1e-12);
    EXPECT_EQ(index.find("zz"), nullptr);
    EXPECT_MEDSUM_ERROR(EmbeddingIndex({"a", "a"}, {EmbeddingVector({1, 0}), EmbeddingVector({0, 1})}, "t"),
                        ErrorCode::DuplicateId);
    EXPECT_MEDSUM_ERROR(EmbeddingIndex({"a", "b"}, {EmbeddingVector({1, 0}), EmbeddingVector({0, 1, 1})}, "t"),
                        ErrorCode::DimensionMismatch);
}
