#pragma once

#include <string>
#include <vector>

#include "percept/config.hpp"
#include "percept/synth.hpp"

namespace percept {

void cmd_synth_data(const std::string& out_dir, const SynthOptions& opts);

void cmd_pretrain(const RunConfig& cfg, const std::string& which, const std::string& out_dir);

void cmd_init_head(const RunConfig& cfg, const std::string& face_ckpt, const std::string& out_dir);

void cmd_train(const RunConfig& cfg, const std::string& face_ckpt, const std::string& context_ckpt,
               const std::string& out_dir);

void cmd_ablate(const RunConfig& cfg, const std::string& face_ckpt,
                const std::string& context_ckpt, const std::vector<std::string>& modes,
                const std::string& out_dir);

void cmd_confusion(const RunConfig& cfg, const std::string& model_ckpt,
                   const std::string& out_dir);

void cmd_embed(const RunConfig& cfg, const std::string& model_ckpt,
               const std::vector<std::string>& identities, const std::string& out_dir);

void cmd_generate(const RunConfig& cfg, const std::string& model_ckpt,
                  const std::string& face_image, const std::string& context_audio,
                  double timestamp, int64_t gamma_steps, const std::string& out_dir);

}  // namespace percept
