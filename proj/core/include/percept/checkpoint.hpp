#ifndef PERCEPT_CHECKPOINT_HPP
#define PERCEPT_CHECKPOINT_HPP

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "percept/attention.hpp"
#include "percept/classifier.hpp"
#include "percept/stream.hpp"

namespace percept {

/// Self-describing tensor container: a JSON header (metadata plus a tensor
/// directory) followed by raw little-endian payloads. Save/load round trips
/// are bit-exact.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, torch::Tensor>> tensors;

    const torch::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json stream_config_to_json(const StreamConfig& cfg);
StreamConfig stream_config_from_json(const nlohmann::json& j);

/// Copies `src` tensors named `prefix + dst[i].first` onto the destination
/// parameters; missing names or shape mismatches raise a data error.
void copy_named_tensors(const Checkpoint& src, const std::string& prefix,
                        const std::vector<std::pair<std::string, torch::Tensor>>& dst);

/// One pretrained stream with its config. `kind` tags the stream role
/// ("face" or "context").
void save_stream_checkpoint(const std::string& path, const ReconstructionStream& stream,
                            const std::string& kind);
std::unique_ptr<ReconstructionStream> load_stream_checkpoint(const std::string& path,
                                                             std::string* kind = nullptr);

/// Everything needed for downstream inference: both frozen streams, the
/// attention layers, the head, the class set, and the context weight.
struct ModelBundle {
    std::unique_ptr<ReconstructionStream> face;
    std::unique_ptr<ReconstructionStream> context;
    ContextAttention can{nullptr};
    HeadParams head;
    std::vector<std::string> classes;
    std::vector<std::string> test_identities;
    std::string mode = "face_context";
    double gamma = 1.0;
};

/// Non-owning view over the pieces of a model bundle, for saving without
/// transferring stream ownership.
struct ModelBundleView {
    const ReconstructionStream& face;
    const ReconstructionStream& context;
    const ContextAttention& can;
    const HeadParams& head;
    const std::vector<std::string>& classes;
    const std::vector<std::string>& test_identities;
    const std::string& mode;
    double gamma = 1.0;
};

void save_model_bundle(const std::string& path, const ModelBundleView& bundle);
ModelBundle load_model_bundle(const std::string& path);

}  // namespace percept

#endif
