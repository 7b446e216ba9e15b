#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace peasi::metrics {

// One question's ranked candidates with binary relevance judgments, already
// in rank order (best first).
struct JudgedRanking {
    std::vector<std::string> ids;
    std::vector<std::uint8_t> relevant;
};

// Fraction of questions whose top candidate is relevant. Questions with no
// relevant candidate count as misses, keeping the denominator fixed across
// pipeline comparisons.
double p_at_1(std::span<const JudgedRanking> rankings);

// AP per question = mean over relevant ranks r of (relevant count up to r)/r;
// zero-relevant questions contribute AP 0.
double mean_average_precision(std::span<const JudgedRanking> rankings);

// Mean of 1/(rank of first relevant candidate); 0 when none is relevant.
double mean_reciprocal_rank(std::span<const JudgedRanking> rankings);

}  // namespace peasi::metrics
