#include <benchmark/benchmark.h>

#include <random>

#include "medsum/embedding.hpp"
#include "medsum/metrics.hpp"
#include "medsum/selection.hpp"

using namespace medsum;

namespace {

// Roughly the size of the Task A training split.
EmbeddingIndex make_index(std::size_t n, std::size_t dim) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> vecs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(dim);
        for (auto& x : v) x = g(rng);
        ids.push_back("e" + std::to_string(i));
        vecs.emplace_back(std::move(v));
    }
    return EmbeddingIndex(ids, vecs, "bench");
}

TokenSequence make_tokens(std::size_t n, int alphabet, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> sym(0, alphabet - 1);
    TokenSequence out(n);
    for (auto& t : out) t = "w" + std::to_string(sym(rng));
    return out;
}

void BM_TopK(benchmark::State& state) {
    const auto index = make_index(static_cast<std::size_t>(state.range(0)), 1536);
    const EmbeddingVector query = index.vector(0);
    for (auto _ : state) benchmark::DoNotOptimize(top_k_similar(index, query, 7));
}
BENCHMARK(BM_TopK)->Arg(1200)->Arg(5000);

void BM_Mmr(benchmark::State& state) {
    const auto index = make_index(static_cast<std::size_t>(state.range(0)), 1536);
    const EmbeddingVector query = index.vector(0);
    for (auto _ : state) benchmark::DoNotOptimize(mmr_select(index, query, 7, 0.5));
}
BENCHMARK(BM_Mmr)->Arg(1200)->Arg(5000);

void BM_HashEmbed(benchmark::State& state) {
    HashEmbedder embedder(1536, 0);
    std::string dialogue;
    for (const auto& t : make_tokens(static_cast<std::size_t>(state.range(0)), 500, 2)) dialogue += t + " ";
    const EmbedInput input{"q", dialogue};
    for (auto _ : state) benchmark::DoNotOptimize(embedder.embed_batch({&input, 1}));
}
BENCHMARK(BM_HashEmbed)->Arg(200)->Arg(2000);

void BM_Rouge(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = make_tokens(n, 300, 3);
    const auto b = make_tokens(n, 300, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rouge_n(a, b, 1));
        benchmark::DoNotOptimize(rouge_n(a, b, 2));
        benchmark::DoNotOptimize(rouge_l(a, b));
    }
}
BENCHMARK(BM_Rouge)->Arg(100)->Arg(600);

void BM_Fragments(benchmark::State& state) {
    const auto article = make_tokens(static_cast<std::size_t>(state.range(0)), 300, 5);
    const auto summary = make_tokens(static_cast<std::size_t>(state.range(0)) / 3, 300, 6);
    for (auto _ : state) benchmark::DoNotOptimize(extractive_fragments(article, summary));
}
BENCHMARK(BM_Fragments)->Arg(300)->Arg(1500);

}  // namespace

BENCHMARK_MAIN();
