#include "bicnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bicnet {

void ScoreMatrix::validate() const {
    if (queries == 0 || items == 0) throw UsageError("score matrix must be non-empty");
    if (scores.size() != queries * items)
        throw DimensionError("score matrix buffer does not match queries x items");
    if (ground_truth.size() != queries)
        throw DimensionError("score matrix needs one ground-truth index per query");
    for (std::size_t g : ground_truth)
        if (g >= items) throw UsageError("ground-truth index out of range");
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericError("non-finite score in score matrix");
}

ScoreMatrix ScoreMatrix::transposed() const {
    ScoreMatrix t;
    t.queries = items;
    t.items = queries;
    t.scores.resize(scores.size());
    for (std::size_t q = 0; q < queries; ++q)
        for (std::size_t v = 0; v < items; ++v) t.scores[v * queries + q] = scores[q * items + v];
    return t;
}

std::vector<std::size_t> rank_of_truth(const ScoreMatrix& m) {
    m.validate();
    std::vector<std::size_t> ranks(m.queries);
    for (std::size_t q = 0; q < m.queries; ++q) {
        const double truth = m.at(q, m.ground_truth[q]);
        std::size_t rank = 1;
        for (std::size_t v = 0; v < m.items; ++v) {
            const double s = m.at(q, v);
            if (s > truth) ++rank;
            else if (s == truth && v < m.ground_truth[q]) ++rank;
        }
        ranks[q] = rank;
    }
    return ranks;
}

double recall_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
    if (k < 1) throw UsageError("recall_at_k: K must be at least 1");
    if (ranks.empty()) throw UsageError("recall_at_k: no queries");
    std::size_t hits = 0;
    for (std::size_t r : ranks)
        if (r <= k) ++hits;
    return double(hits) / double(ranks.size());
}

std::size_t median_rank(const std::vector<std::size_t>& ranks) {
    if (ranks.empty()) throw UsageError("median_rank: no queries");
    std::vector<std::size_t> sorted(ranks);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t idx = (sorted.size() + 1) / 2; // 1-based ceil(n/2)
    return sorted[idx - 1];
}

RetrievalMetrics RetrievalMetrics::from_ranks(const std::vector<std::size_t>& ranks,
                                              const std::vector<std::size_t>& ks) {
    RetrievalMetrics m;
    for (std::size_t k : ks) m.r_at[k] = recall_at_k(ranks, k);
    m.med_r = median_rank(ranks);
    return m;
}

std::string format_metric_records(const std::string& direction_prefix, const RetrievalMetrics& m) {
    std::ostringstream os;
    for (const auto& [k, v] : m.r_at) {
        os << direction_prefix << ".r" << k << ' ';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        os << buf << '\n';
    }
    os << direction_prefix << ".medr " << m.med_r << '\n';
    return os.str();
}

} // namespace bicnet
