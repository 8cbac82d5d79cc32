#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percept/classifier.hpp"
#include "percept/stream.hpp"

namespace percept {

struct RunConfig {
    uint64_t seed = 7;
    StreamConfig face;
    StreamConfig context;

    std::string manifest;
    std::vector<std::string> classes;
    int64_t frames_per_clip = 16;
    int64_t folds = 10;

    int64_t pretrain_epochs = 30;
    int64_t epochs = 20;
    int64_t batch_size = 16;
    double learning_rate = 3e-5;
    double weight_decay = 0.01;
    int64_t head_epochs = 200;
    double head_learning_rate = 0.05;
    double head_weight_decay = 0.0;

    double alpha = 1e-5;
    double gamma = 1.0;
    bool swap_augment = true;
    bool flip_augment = true;
    AblationMode mode = AblationMode::face_context;
    LrSchedule schedule;
};

RunConfig default_run_config();

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig load_run_config(const std::string& path);

void apply_override(RunConfig& cfg, const std::string& assignment);

void validate_run_config(const RunConfig& cfg);

}  // namespace percept
