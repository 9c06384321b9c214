#pragma once

// Variant sweep: trains all five residual variants from the same seed and
// dataset, evaluates each, and renders one comparison table.

#include <cstdio>
#include <ostream>
#include <string>

#include "bicnet/evaluate.hpp"
#include "bicnet/train.hpp"

namespace bicnet {

struct AblationRow {
    SRTVariant variant;
    RetrievalMetrics t2v, v2t;
};

struct AblationTable {
    std::vector<AblationRow> rows;

    std::string render() const {
        std::string out;
        char line[256];
        std::snprintf(line, sizeof line, "%-20s %7s %7s %7s %8s %7s %7s %7s %8s\n", "variant",
                      "t2v.r1", "t2v.r5", "t2v.r10", "t2v.medr", "v2t.r1", "v2t.r5", "v2t.r10",
                      "v2t.medr");
        out += line;
        for (const auto& r : rows) {
            std::snprintf(line, sizeof line, "%-20s %7.4f %7.4f %7.4f %8zu %7.4f %7.4f %7.4f %8zu\n",
                          to_string(r.variant), r.t2v.r_at.at(1), r.t2v.r_at.at(5),
                          r.t2v.r_at.at(10), r.t2v.med_r, r.v2t.r_at.at(1), r.v2t.r_at.at(5),
                          r.v2t.r_at.at(10), r.v2t.med_r);
            out += line;
        }
        return out;
    }
};

template <typename S>
AblationTable ablate(const TrainConfig& base, const Dataset& data, std::ostream* progress = nullptr) {
    AblationTable table;
    for (SRTVariant variant : kAllVariants) {
        TrainConfig cfg = base;
        cfg.variant = variant;
        if (progress) (*progress) << "training variant " << to_string(variant) << "\n";
        auto result = train<S>(cfg, data);
        auto eval = evaluate(result.checkpoint.model, data);
        table.rows.push_back({variant, eval.t2v, eval.v2t});
    }
    return table;
}

} // namespace bicnet
