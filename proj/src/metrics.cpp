#include "peasi/metrics.hpp"

#include "peasi/errors.hpp"

namespace peasi::metrics {

namespace {

void validate(std::span<const JudgedRanking> rankings) {
    if (rankings.empty()) throw EmptyInput("no rankings given");
    for (const auto& r : rankings) {
        if (r.relevant.empty()) throw EmptyInput("ranking with no candidates");
        if (!r.ids.empty() && r.ids.size() != r.relevant.size())
            throw ShapeMismatch("ranking ids [" + std::to_string(r.ids.size()) +
                                "] vs labels [" + std::to_string(r.relevant.size()) + "]");
    }
}

}  // namespace

double p_at_1(std::span<const JudgedRanking> rankings) {
    validate(rankings);
    long hits = 0;
    for (const auto& r : rankings)
        if (r.relevant.front() != 0) ++hits;
    return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double mean_average_precision(std::span<const JudgedRanking> rankings) {
    validate(rankings);
    double total = 0.0;
    for (const auto& r : rankings) {
        long seen_relevant = 0;
        double ap = 0.0;
        for (std::size_t i = 0; i < r.relevant.size(); ++i) {
            if (r.relevant[i] == 0) continue;
            ++seen_relevant;
            ap += static_cast<double>(seen_relevant) / static_cast<double>(i + 1);
        }
        if (seen_relevant > 0) total += ap / static_cast<double>(seen_relevant);
    }
    return total / static_cast<double>(rankings.size());
}

double mean_reciprocal_rank(std::span<const JudgedRanking> rankings) {
    validate(rankings);
    double total = 0.0;
    for (const auto& r : rankings) {
        for (std::size_t i = 0; i < r.relevant.size(); ++i) {
            if (r.relevant[i] != 0) {
                total += 1.0 / static_cast<double>(i + 1);
                break;
            }
        }
    }
    return total / static_cast<double>(rankings.size());
}

}  // namespace peasi::metrics
