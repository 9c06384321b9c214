#pragma once

// Ranking metrics over a query x item score matrix: per-query rank of the
// true item, recall at K, and the (lower) median rank.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "bicnet/errors.hpp"

namespace bicnet {

struct ScoreMatrix {
    std::size_t queries = 0;
    std::size_t items = 0;
    std::vector<double> scores;            // row-major queries x items
    std::vector<std::size_t> ground_truth; // per query: index of the true item

    double at(std::size_t q, std::size_t v) const { return scores[q * items + v]; }
    double& at(std::size_t q, std::size_t v) { return scores[q * items + v]; }

    void validate() const;
    ScoreMatrix transposed() const; // swaps directions; ground truth must be re-assigned
};

// rank = 1 + #items scoring strictly above the truth
//          + #equal-scoring items with a smaller index (deterministic ties).
std::vector<std::size_t> rank_of_truth(const ScoreMatrix& m);

// Fraction of queries with rank <= k.
double recall_at_k(const std::vector<std::size_t>& ranks, std::size_t k);

// Lower median: element at 1-based index ceil(n/2) of the sorted ranks.
std::size_t median_rank(const std::vector<std::size_t>& ranks);

struct RetrievalMetrics {
    std::map<std::size_t, double> r_at; // K -> fraction
    std::size_t med_r = 0;

    static RetrievalMetrics from_ranks(const std::vector<std::size_t>& ranks,
                                       const std::vector<std::size_t>& ks = {1, 5, 10});
};

// One machine-parseable line per (direction, metric) pair, e.g.
//   t2v.r1 0.968750
//   t2v.medr 1
std::string format_metric_records(const std::string& direction_prefix,
                                  const RetrievalMetrics& m);

} // namespace bicnet
