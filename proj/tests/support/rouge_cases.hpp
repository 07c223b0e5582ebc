#pragma once

// Hand-counted ROUGE values. Each expectation was worked out by hand from
// clipped n-gram multisets and an explicit LCS; none comes from the library.

#include <string>
#include <vector>

#include "medsum/metrics.hpp"

namespace medsum::fixtures {

struct PRF {
    double p, r, f;
};

struct RougeCase {
    const char* name;
    TokenSequence candidate;
    TokenSequence reference;
    PRF r1, r2, rl;
};

inline const std::vector<RougeCase>& rouge_cases() {
    static const std::vector<RougeCase> cases = {
        // unigrams {the,cat} shared of 3 each; bigram "the cat" shared of 2; LCS "the cat"
        {"the_cat_sat_vs_ran", {"the", "cat", "sat"}, {"the", "cat", "ran"},
         {2. / 3, 2. / 3, 2. / 3}, {.5, .5, .5}, {2. / 3, 2. / 3, 2. / 3}},
        // LCS a,b,d (or a,c,d) = 3 of 4; no shared bigram
        {"swap_middle", {"a", "b", "c", "d"}, {"a", "c", "b", "d"},
         {1, 1, 1}, {0, 0, 0}, {.75, .75, .75}},
        {"identity", {"the", "patient", "is", "well"}, {"the", "patient", "is", "well"},
         {1, 1, 1}, {1, 1, 1}, {1, 1, 1}},
        {"disjoint", {"x", "y"}, {"z", "w"}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}},
        // "the" x4 clipped to 1: P=1/4, R=1/2, F=1/3; LCS=1
        {"clipping", {"the", "the", "the", "the"}, {"the", "cat"},
         {.25, .5, 1. / 3}, {0, 0, 0}, {.25, .5, 1. / 3}},
        // prefix of the reference: bigram "a b" of {ab,bc,cd}: P=1, R=1/3, F=1/2
        {"short_prefix", {"a", "b"}, {"a", "b", "c", "d"},
         {1, .5, 2. / 3}, {1, 1. / 3, .5}, {1, .5, 2. / 3}},
        // bigrams cand {ab:2, ba:1}, ref {ab, bb, ba}: overlap 2 of 3 each; LCS 3
        {"repeated_bigrams", {"a", "b", "a", "b"}, {"a", "b", "b", "a"},
         {1, 1, 1}, {2. / 3, 2. / 3, 2. / 3}, {.75, .75, .75}},
        // reversed: every unigram shared, no bigram, LCS 1
        {"reversed", {"a", "b", "c"}, {"c", "b", "a"},
         {1, 1, 1}, {0, 0, 0}, {1. / 3, 1. / 3, 1. / 3}},
        {"empty_candidate", {}, {"a"}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}},
        // 3 of 5 unigrams; no shared bigram; LCS a,c,e
        {"interleaved", {"a", "b", "c", "d", "e"}, {"a", "x", "c", "y", "e"},
         {.6, .6, .6}, {0, 0, 0}, {.6, .6, .6}},
        // subsequence with gaps: LCS 3, P=1, R=1/2; bigrams all broken
        {"gapped_subsequence", {"a", "b", "c"}, {"a", "x", "b", "y", "c", "z"},
         {1, .5, 2. / 3}, {0, 0, 0}, {1, .5, 2. / 3}},
        // single identical token: no bigrams on either side -> R2 = 0
        {"single_token", {"a"}, {"a"}, {1, 1, 1}, {0, 0, 0}, {1, 1, 1}},
    };
    return cases;
}

}  // namespace medsum::fixtures
