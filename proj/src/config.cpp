#include "bicnet/config.hpp"

#include <fstream>
#include <sstream>

#include "bicnet/errors.hpp"

namespace bicnet {

namespace {

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
    }
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        long long n = std::stoll(v, &used);
        if (used != v.size() || n < 0) throw std::invalid_argument("");
        return std::size_t(n);
    } catch (...) {
        throw ConfigError("config key '" + key + "': not a non-negative integer: '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

ScalarKind parse_kind(const std::string& v, const std::string& key) {
    if (v == "training32") return ScalarKind::Training32;
    if (v == "verification64") return ScalarKind::Verification64;
    throw ConfigError("config key '" + key + "': expected training32 or verification64, got '" +
                      v + "'");
}

} // namespace

void TrainConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("lambda must lie in [0,1], got " + std::to_string(lambda));
    if (!(margin > 0.0 && margin <= 1.0))
        throw ConfigError("margin must lie in (0,1], got " + std::to_string(margin));
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (the loss needs a negative)");
    if (layers == 0) throw ConfigError("layers must be positive");
    if (heads == 0) throw ConfigError("heads must be positive");
    if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
    if (embed_dim % heads != 0)
        throw ConfigError("embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
                          std::to_string(heads));
    if (global_dim != embed_dim)
        throw ConfigError("global_dim must equal embed_dim (joint space is shared), got " +
                          std::to_string(global_dim) + " vs " + std::to_string(embed_dim));
    if (learning_rate < 0) throw ConfigError("learning_rate must be non-negative");
    if (epochs == 0) throw ConfigError("epochs must be positive");
}

std::string TrainConfig::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "lambda " << lambda << '\n'
       << "margin " << margin << '\n'
       << "layers " << layers << '\n'
       << "heads " << heads << '\n'
       << "embed_dim " << embed_dim << '\n'
       << "global_dim " << global_dim << '\n'
       << "mlp_hidden " << mlp_hidden << '\n'
       << "learning_rate " << learning_rate << '\n'
       << "batch_size " << batch_size << '\n'
       << "epochs " << epochs << '\n'
       << "seed " << seed << '\n'
       << "variant " << to_string(variant) << '\n'
       << "pe_temporal " << (pe_temporal ? "true" : "false") << '\n'
       << "pe_proposals " << (pe_proposals ? "true" : "false") << '\n'
       << "scalar_kind " << to_string(scalar_kind) << '\n'
       << "hard_negatives " << (hard_negatives ? "true" : "false") << '\n';
    return os.str();
}

TrainConfig parse_train_config(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key, value, extra;
        ls >> key >> value;
        if (key.empty()) continue;
        if (value.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                              "' has no value");
        if (ls >> extra)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": trailing token '" +
                              extra + "'");
        if (key == "lambda") cfg.lambda = parse_double(value, key);
        else if (key == "margin") cfg.margin = parse_double(value, key);
        else if (key == "layers") cfg.layers = parse_size(value, key);
        else if (key == "heads") cfg.heads = parse_size(value, key);
        else if (key == "embed_dim") cfg.embed_dim = parse_size(value, key);
        else if (key == "global_dim") cfg.global_dim = parse_size(value, key);
        else if (key == "mlp_hidden") cfg.mlp_hidden = parse_size(value, key);
        else if (key == "learning_rate") cfg.learning_rate = parse_double(value, key);
        else if (key == "batch_size") cfg.batch_size = parse_size(value, key);
        else if (key == "epochs") cfg.epochs = parse_size(value, key);
        else if (key == "seed") cfg.seed = parse_size(value, key);
        else if (key == "variant") cfg.variant = srt_variant_from_string(value);
        else if (key == "pe_temporal") cfg.pe_temporal = parse_bool(value, key);
        else if (key == "pe_proposals") cfg.pe_proposals = parse_bool(value, key);
        else if (key == "scalar_kind") cfg.scalar_kind = parse_kind(value, key);
        else if (key == "hard_negatives") cfg.hard_negatives = parse_bool(value, key);
        else
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown config key '" +
                              key + "'");
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_train_config(ss.str(), path);
}

} // namespace bicnet
