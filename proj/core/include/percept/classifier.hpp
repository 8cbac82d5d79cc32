#ifndef PERCEPT_CLASSIFIER_HPP
#define PERCEPT_CLASSIFIER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "percept/attention.hpp"
#include "percept/latent.hpp"
#include "percept/stream.hpp"

namespace percept {

/// Single linear classification layer over latent means.
struct HeadParams {
    torch::Tensor weight;  // C x d
    torch::Tensor bias;    // C

    int64_t num_classes() const { return weight.size(0); }
    int64_t dim() const { return weight.size(1); }
};

struct LossWeights {
    double alpha = 1e-5;  // shift regularizer
};

/// What feeds the classifier: the trained shift, a self-shift (face queried
/// by face), or a single layer on raw face / context means. strict_audio is
/// the trained shift learned without context-swap augmentation.
enum class AblationMode { face_context, face_face, audio_only, face_only, strict_audio };

AblationMode ablation_mode_from_string(const std::string& name);
std::string to_string(AblationMode mode);

/// Head with weights ~ N(0, 0.02^2) and zero bias, drawn from a private
/// generator.
HeadParams make_head(int64_t classes, int64_t dim, uint64_t seed);

/// logits = weight . mean + bias, for a single (d) vector or a (B, d) batch.
torch::Tensor classify(const HeadParams& head, const torch::Tensor& mean);

/// Cross-entropy against the label plus alpha * KL(face || shifted),
/// averaged over the batch for batched inputs.
torch::Tensor joint_loss_batch(const torch::Tensor& logits, const torch::Tensor& labels,
                               const GaussianLatent& face, const GaussianLatent& shifted,
                               const LossWeights& w);
double joint_loss(const torch::Tensor& logits, int64_t label, const GaussianLatent& face,
                  const GaussianLatent& shifted, const LossWeights& w);

/// Trains a fresh head by full-batch cross-entropy on raw latent means.
/// epochs = 0 returns the initialization unchanged.
HeadParams init_head(const torch::Tensor& means, const torch::Tensor& labels, int64_t classes,
                     int64_t epochs, double lr, double weight_decay, uint64_t seed);

/// Swap partners grouped by (identity, expression class). swap() maps each
/// batch position to the dataset index whose context it should use: with
/// probability 0.5 a uniformly drawn other member of the sample's group,
/// otherwise (or when the group has no other member) the sample itself.
/// Face samples and labels are never touched.
class SwapPools {
public:
    SwapPools(const std::vector<std::string>& identity_of_frame,
              const std::vector<int64_t>& label_of_frame);

    std::vector<int64_t> swap(const std::vector<int64_t>& batch, uint64_t seed) const;
    const std::vector<int64_t>& group_of(int64_t frame) const;

private:
    std::vector<std::vector<int64_t>> groups_;
    std::vector<int64_t> group_of_frame_;
};

/// Modal class over per-frame predictions; ties broken by the highest mean
/// softmax probability (over the whole list) among the tied classes, then by
/// the smallest class index.
int64_t majority_vote(const std::vector<std::pair<int64_t, torch::Tensor>>& frames);

/// Latent that feeds the classifier under a given condition at context
/// weight `gamma`.
GaussianLatent condition_latent(AblationMode mode, const ContextAttention& can,
                                const GaussianLatent& face, const GaussianLatent& context,
                                double gamma);

/// Precomputed per-frame training data on frozen streams: face latents,
/// context trunk features (ahead of the two trainable head layers), labels,
/// and grouping metadata.
struct CanData {
    torch::Tensor face_mean;      // N x d
    torch::Tensor face_logvar;    // N x d
    torch::Tensor context_feat;   // N x trunk feature dim
    torch::Tensor labels;         // N int64
    std::vector<int64_t> clip_of_frame;
    std::vector<std::string> identity_of_frame;

    int64_t size() const { return labels.defined() ? labels.size(0) : 0; }
    CanData select(const std::vector<int64_t>& rows) const;
};

struct CanTrainOptions {
    AblationMode mode = AblationMode::face_context;  // face_face, strict_audio also train here
    int64_t epochs = 20;
    int64_t batch_size = 16;
    double lr = 3e-5;
    double weight_decay = 0.01;
    LossWeights weights{};
    bool swap_augment = true;
    uint64_t seed = 0;
};

struct CanTrainResult {
    std::vector<double> epoch_loss;
    std::vector<double> val_accuracy;  // voted, percent
    int64_t best_epoch = -1;
};

/// Joint CAN + head training (Eq. 14 objective) at context weight 1, with
/// per-batch context-swap augmentation. Updates the attention layers, the
/// head, and the context encoder's two head layers; everything else stays
/// frozen (the face stream must already be frozen). Keeps the epoch with the
/// best voted validation accuracy.
CanTrainResult train_can_and_head(const ReconstructionStream& face_stream,
                                  ReconstructionStream& context_stream, ContextAttention& can,
                                  HeadParams& head, const CanData& train_data,
                                  const CanData& val_data, const CanTrainOptions& opts);

/// Per-frame logits for a condition over whole-data tensors.
torch::Tensor condition_logits(AblationMode mode, const ContextAttention& can,
                               const ReconstructionStream& context_stream, const HeadParams& head,
                               const CanData& data, double gamma);

/// Clip-level voted evaluation: accuracy (percent) and raw C x C confusion
/// counts with true labels on rows.
struct VotedEval {
    double accuracy_pct = 0.0;
    torch::Tensor confusion_counts;  // C x C int64
};

VotedEval evaluate_clips(const torch::Tensor& logits, const torch::Tensor& labels,
                         const std::vector<int64_t>& clip_of_frame, int64_t num_classes);

}  // namespace percept

#endif
