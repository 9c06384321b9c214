#pragma once

// Flat key-value run configuration. Unknown keys are errors; missing keys
// keep their desk-scale defaults.

#include <cstdint>
#include <string>

#include "bicnet/relation.hpp"
#include "bicnet/tensor.hpp"

namespace bicnet {

struct TrainConfig {
    double lambda = 0.5;        // similarity trade-off
    double margin = 0.2;        // hinge margin
    std::size_t layers = 2;     // L, shared by all stacks
    std::size_t heads = 4;      // M
    std::size_t embed_dim = 64; // d_*
    std::size_t global_dim = 64; // d_g, must equal embed_dim
    std::size_t mlp_hidden = 0; // d_m, 0 means 4 * embed_dim
    double learning_rate = 2e-4;
    std::size_t batch_size = 8;
    std::size_t epochs = 500;
    std::uint64_t seed = 1;
    SRTVariant variant = SRTVariant::FullSRT;
    bool pe_temporal = true;   // frame-order tables (relation temporal + global)
    bool pe_proposals = false; // proposal-order table (order-free detections)
    ScalarKind scalar_kind = ScalarKind::Training32;
    bool hard_negatives = false;

    void validate() const;
    std::string serialize() const;
};

TrainConfig parse_train_config(const std::string& text, const std::string& origin = "config");
TrainConfig load_train_config(const std::string& path);

} // namespace bicnet
