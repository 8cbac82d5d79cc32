#include "percept/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "percept/errors.hpp"

namespace percept {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const int64_t v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + value + "'");
    }
}

uint64_t parse_uint(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(value, &used);
        if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid unsigned integer for " + key + ": '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid real for " + key + ": '" + value + "'");
    }
}

bool parse_flag(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool apply_stream_entry(StreamConfig& stream, const std::string& key, const std::string& subkey,
                        const std::string& value) {
    if (subkey == "input_channels") {
        stream.input_channels = parse_int(key, value);
    } else if (subkey == "input_size") {
        stream.input_size = parse_int(key, value);
    } else if (subkey == "latent_dim") {
        stream.latent_dim = parse_int(key, value);
    } else if (subkey == "encoder_depth") {
        stream.encoder_depth = parse_int(key, value);
    } else if (subkey == "decoder_depth") {
        stream.decoder_depth = parse_int(key, value);
    } else if (subkey == "base_channels") {
        stream.base_channels = parse_int(key, value);
    } else if (subkey == "feature_layer_index") {
        stream.feature_layer_index = parse_int(key, value);
    } else if (subkey == "beta") {
        stream.beta = parse_real(key, value);
    } else if (subkey == "learning_rate") {
        stream.learning_rate = parse_real(key, value);
    } else if (subkey == "weight_decay") {
        stream.weight_decay = parse_real(key, value);
    } else {
        return false;
    }
    return true;
}

}  // namespace

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.context.input_channels = 1;
    return cfg;
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    constexpr const char kFacePrefix[] = "stream.face.";
    constexpr const char kContextPrefix[] = "stream.context.";
    if (key.rfind(kFacePrefix, 0) == 0) {
        if (apply_stream_entry(cfg.face, key, key.substr(sizeof(kFacePrefix) - 1), value)) return;
    } else if (key.rfind(kContextPrefix, 0) == 0) {
        if (apply_stream_entry(cfg.context, key, key.substr(sizeof(kContextPrefix) - 1), value)) {
            return;
        }
    } else if (key == "seed") {
        cfg.seed = parse_uint(key, value);
        return;
    } else if (key == "data.manifest") {
        cfg.manifest = value;
        return;
    } else if (key == "data.classes") {
        cfg.classes = parse_list(value);
        return;
    } else if (key == "data.frames_per_clip") {
        cfg.frames_per_clip = parse_int(key, value);
        return;
    } else if (key == "train.folds") {
        cfg.folds = parse_int(key, value);
        return;
    } else if (key == "train.pretrain_epochs") {
        cfg.pretrain_epochs = parse_int(key, value);
        return;
    } else if (key == "train.epochs") {
        cfg.epochs = parse_int(key, value);
        return;
    } else if (key == "train.batch_size") {
        cfg.batch_size = parse_int(key, value);
        return;
    } else if (key == "train.learning_rate") {
        cfg.learning_rate = parse_real(key, value);
        return;
    } else if (key == "train.weight_decay") {
        cfg.weight_decay = parse_real(key, value);
        return;
    } else if (key == "train.head_epochs") {
        cfg.head_epochs = parse_int(key, value);
        return;
    } else if (key == "train.head_learning_rate") {
        cfg.head_learning_rate = parse_real(key, value);
        return;
    } else if (key == "train.head_weight_decay") {
        cfg.head_weight_decay = parse_real(key, value);
        return;
    } else if (key == "train.alpha") {
        cfg.alpha = parse_real(key, value);
        return;
    } else if (key == "train.gamma") {
        cfg.gamma = parse_real(key, value);
        return;
    } else if (key == "train.swap_augment") {
        cfg.swap_augment = parse_flag(key, value);
        return;
    } else if (key == "train.flip_augment") {
        cfg.flip_augment = parse_flag(key, value);
        return;
    } else if (key == "train.mode") {
        cfg.mode = ablation_mode_from_string(value);
        return;
    } else if (key == "train.lr_milestones") {
        cfg.schedule.milestones.clear();
        for (const auto& item : parse_list(value)) {
            cfg.schedule.milestones.push_back(parse_int(key, item));
        }
        return;
    } else if (key == "train.lr_factor") {
        cfg.schedule.factor = parse_real(key, value);
        return;
    }
    throw ConfigError("unknown config key: " + key);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    RunConfig cfg = default_run_config();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        try {
            apply_config_entry(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override must be key=value: '" + assignment + "'");
    }
    apply_config_entry(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void validate_run_config(const RunConfig& cfg) {
    cfg.face.validate();
    cfg.context.validate();
    if (!std::isfinite(cfg.gamma) || cfg.gamma < 0.0) {
        throw ConfigError("train.gamma must be finite and nonnegative");
    }
    if (!std::isfinite(cfg.alpha) || cfg.alpha < 0.0) {
        throw ConfigError("train.alpha must be finite and nonnegative");
    }
    if (cfg.folds < 2) {
        throw ConfigError("train.folds must be at least 2");
    }
    if (cfg.frames_per_clip < 1) {
        throw ConfigError("data.frames_per_clip must be positive");
    }
    if (cfg.pretrain_epochs < 1 || cfg.epochs < 1) {
        throw ConfigError("epoch counts must be positive");
    }
    if (cfg.head_epochs < 0) {
        throw ConfigError("train.head_epochs must be nonnegative");
    }
    if (cfg.batch_size < 1) {
        throw ConfigError("train.batch_size must be positive");
    }
}

}  // namespace percept
