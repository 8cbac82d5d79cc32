#include "percept/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "percept/errors.hpp"
#include "percept/runtime.hpp"

namespace percept {

namespace {

double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void check_labels(const torch::Tensor& labels, int64_t classes) {
    if (labels.numel() == 0) {
        throw ArgumentError("labels are empty");
    }
    const auto lo = labels.min().item<int64_t>();
    const auto hi = labels.max().item<int64_t>();
    if (lo < 0 || hi >= classes) {
        throw ArgumentError("label outside [0, classes)");
    }
}

}  // namespace

AblationMode ablation_mode_from_string(const std::string& name) {
    if (name == "face_context") return AblationMode::face_context;
    if (name == "face_face") return AblationMode::face_face;
    if (name == "audio_only") return AblationMode::audio_only;
    if (name == "face_only") return AblationMode::face_only;
    if (name == "strict_audio") return AblationMode::strict_audio;
    throw ArgumentError("unknown ablation mode: " + name);
}

std::string to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::face_context: return "face_context";
        case AblationMode::face_face: return "face_face";
        case AblationMode::audio_only: return "audio_only";
        case AblationMode::face_only: return "face_only";
        case AblationMode::strict_audio: return "strict_audio";
    }
    throw ArgumentError("unknown ablation mode");
}

HeadParams make_head(int64_t classes, int64_t dim, uint64_t seed) {
    if (classes < 2) {
        throw ArgumentError("head needs at least two classes");
    }
    if (dim <= 0) {
        throw ArgumentError("head dimension must be positive");
    }
    auto gen = make_generator(seed);
    HeadParams head;
    head.weight = torch::randn({classes, dim}, gen, torch::kFloat32) * 0.02;
    head.bias = torch::zeros({classes}, torch::kFloat32);
    return head;
}

torch::Tensor classify(const HeadParams& head, const torch::Tensor& mean) {
    if (!mean.defined() || mean.size(-1) != head.dim()) {
        throw DimensionError("mean length does not match head dimension");
    }
    return torch::linear(mean, head.weight, head.bias);
}

torch::Tensor joint_loss_batch(const torch::Tensor& logits, const torch::Tensor& labels,
                               const GaussianLatent& face, const GaussianLatent& shifted,
                               const LossWeights& w) {
    if (!std::isfinite(w.alpha) || w.alpha < 0.0) {
        throw ArgumentError("alpha must be finite and non-negative");
    }
    check_labels(labels, logits.size(-1));
    auto ce = torch::nn::functional::cross_entropy(logits, labels);
    auto kl = kl_between_batch(face, shifted).mean();
    return ce + w.alpha * kl;
}

double joint_loss(const torch::Tensor& logits, int64_t label, const GaussianLatent& face,
                  const GaussianLatent& shifted, const LossWeights& w) {
    if (logits.dim() != 1) {
        throw DimensionError("expected a single logits vector");
    }
    auto labels = torch::tensor({label}, torch::kInt64);
    return joint_loss_batch(logits.unsqueeze(0), labels, face, shifted, w).item<double>();
}

HeadParams init_head(const torch::Tensor& means, const torch::Tensor& labels, int64_t classes,
                     int64_t epochs, double lr, double weight_decay, uint64_t seed) {
    if (!means.defined() || means.dim() != 2 || means.size(0) == 0) {
        throw ArgumentError("need a nonempty (N, d) matrix of means");
    }
    if (labels.dim() != 1 || labels.size(0) != means.size(0)) {
        throw ArgumentError("labels must align with means");
    }
    if (epochs < 0) {
        throw ArgumentError("epochs must be non-negative");
    }
    check_labels(labels, classes);

    auto head = make_head(classes, means.size(1), derive_seed(seed, 17));
    if (epochs == 0) {
        return head;
    }

    head.weight.set_requires_grad(true);
    head.bias.set_requires_grad(true);
    torch::optim::Adam opt({head.weight, head.bias},
                           torch::optim::AdamOptions(lr).weight_decay(weight_decay));
    auto x = means.detach();
    auto y = labels.detach();
    for (int64_t e = 0; e < epochs; ++e) {
        opt.zero_grad();
        auto loss = torch::nn::functional::cross_entropy(torch::linear(x, head.weight, head.bias), y);
        loss.backward();
        opt.step();
    }
    head.weight.set_requires_grad(false);
    head.bias.set_requires_grad(false);
    return head;
}

SwapPools::SwapPools(const std::vector<std::string>& identity_of_frame,
                     const std::vector<int64_t>& label_of_frame) {
    if (identity_of_frame.size() != label_of_frame.size()) {
        throw ArgumentError("identity and label lists must align");
    }
    std::map<std::pair<std::string, int64_t>, int64_t> key_to_group;
    group_of_frame_.resize(identity_of_frame.size());
    for (size_t i = 0; i < identity_of_frame.size(); ++i) {
        const auto key = std::make_pair(identity_of_frame[i], label_of_frame[i]);
        auto [it, inserted] = key_to_group.try_emplace(key, static_cast<int64_t>(groups_.size()));
        if (inserted) {
            groups_.emplace_back();
        }
        group_of_frame_[i] = it->second;
        groups_[it->second].push_back(static_cast<int64_t>(i));
    }
}

const std::vector<int64_t>& SwapPools::group_of(int64_t frame) const {
    return groups_[group_of_frame_.at(frame)];
}

std::vector<int64_t> SwapPools::swap(const std::vector<int64_t>& batch, uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<int64_t> out(batch);
    for (auto& frame : out) {
        const auto& group = groups_[group_of_frame_.at(frame)];
        const double u = next_uniform(rng);
        if (group.size() < 2 || u >= 0.5) {
            continue;
        }
        const auto pick = static_cast<size_t>(rng() % (group.size() - 1));
        size_t at = 0;
        for (const auto candidate : group) {
            if (candidate == frame) continue;
            if (at == pick) {
                frame = candidate;
                break;
            }
            ++at;
        }
    }
    return out;
}

int64_t majority_vote(const std::vector<std::pair<int64_t, torch::Tensor>>& frames) {
    if (frames.empty()) {
        throw ArgumentError("cannot vote over an empty frame list");
    }
    std::map<int64_t, int64_t> counts;
    for (const auto& [cls, probs] : frames) {
        (void)probs;
        ++counts[cls];
    }
    int64_t top_count = 0;
    for (const auto& [cls, count] : counts) {
        top_count = std::max(top_count, count);
    }
    std::vector<int64_t> tied;
    for (const auto& [cls, count] : counts) {
        if (count == top_count) tied.push_back(cls);
    }
    if (tied.size() == 1) {
        return tied.front();
    }

    std::vector<torch::Tensor> probs;
    probs.reserve(frames.size());
    for (const auto& [cls, p] : frames) {
        (void)cls;
        probs.push_back(p);
    }
    auto mean_probs = torch::stack(probs).mean(0);
    auto acc = mean_probs.accessor<float, 1>();
    int64_t best = tied.front();
    double best_prob = acc[best];
    for (const auto cls : tied) {
        if (acc[cls] > best_prob) {
            best = cls;
            best_prob = acc[cls];
        }
    }
    return best;
}

GaussianLatent condition_latent(AblationMode mode, const ContextAttention& can,
                                const GaussianLatent& face, const GaussianLatent& context,
                                double gamma) {
    switch (mode) {
        case AblationMode::face_only:
            return face;
        case AblationMode::audio_only:
            return context;
        case AblationMode::face_face:
            return can->forward(face, face, gamma).shifted;
        case AblationMode::face_context:
        case AblationMode::strict_audio:
            return can->forward(face, context, gamma).shifted;
    }
    throw ArgumentError("unknown ablation mode");
}

CanData CanData::select(const std::vector<int64_t>& rows) const {
    auto idx = torch::tensor(rows, torch::kInt64);
    CanData out;
    out.face_mean = face_mean.index_select(0, idx);
    out.face_logvar = face_logvar.index_select(0, idx);
    if (context_feat.defined()) {
        out.context_feat = context_feat.index_select(0, idx);
    }
    out.labels = labels.index_select(0, idx);
    out.clip_of_frame.reserve(rows.size());
    out.identity_of_frame.reserve(rows.size());
    for (const auto r : rows) {
        out.clip_of_frame.push_back(clip_of_frame.at(r));
        out.identity_of_frame.push_back(identity_of_frame.at(r));
    }
    return out;
}

namespace {

GaussianLatent context_latent_for(AblationMode mode, const ReconstructionStream& context_stream,
                                  const CanData& data, const GaussianLatent& face) {
    if (mode == AblationMode::face_face || mode == AblationMode::face_only) {
        return face;
    }
    return context_stream.head_latent(data.context_feat);
}

}  // namespace

torch::Tensor condition_logits(AblationMode mode, const ContextAttention& can,
                               const ReconstructionStream& context_stream, const HeadParams& head,
                               const CanData& data, double gamma) {
    torch::NoGradGuard guard;
    GaussianLatent face(data.face_mean, data.face_logvar);
    auto context = context_latent_for(mode, context_stream, data, face);
    auto lat = condition_latent(mode, can, face, context, gamma);
    return classify(head, lat.mean());
}

VotedEval evaluate_clips(const torch::Tensor& logits, const torch::Tensor& labels,
                         const std::vector<int64_t>& clip_of_frame, int64_t num_classes) {
    if (logits.dim() != 2 || logits.size(0) != labels.size(0) ||
        static_cast<size_t>(labels.size(0)) != clip_of_frame.size()) {
        throw ArgumentError("logits, labels, and clip ids must align");
    }
    auto probs = torch::softmax(logits.detach().to(torch::kFloat32), 1);
    auto preds = logits.argmax(1);

    std::map<int64_t, std::vector<int64_t>> rows_of_clip;
    for (size_t i = 0; i < clip_of_frame.size(); ++i) {
        rows_of_clip[clip_of_frame[i]].push_back(static_cast<int64_t>(i));
    }

    VotedEval out;
    out.confusion_counts = torch::zeros({num_classes, num_classes}, torch::kInt64);
    auto counts = out.confusion_counts.accessor<int64_t, 2>();
    auto pred_acc = preds.accessor<int64_t, 1>();
    auto label_acc = labels.accessor<int64_t, 1>();

    int64_t correct = 0;
    for (const auto& [clip, rows] : rows_of_clip) {
        (void)clip;
        std::vector<std::pair<int64_t, torch::Tensor>> frames;
        frames.reserve(rows.size());
        for (const auto r : rows) {
            frames.emplace_back(pred_acc[r], probs[r]);
        }
        const int64_t voted = majority_vote(frames);
        const int64_t truth = label_acc[rows.front()];
        counts[truth][voted] += 1;
        if (voted == truth) ++correct;
    }
    out.accuracy_pct = 100.0 * static_cast<double>(correct) /
                       static_cast<double>(rows_of_clip.size());
    return out;
}

CanTrainResult train_can_and_head(const ReconstructionStream& face_stream,
                                  ReconstructionStream& context_stream, ContextAttention& can,
                                  HeadParams& head, const CanData& train_data,
                                  const CanData& val_data, const CanTrainOptions& opts) {
    if (!face_stream.frozen()) {
        throw ConfigError("face stream must be frozen for downstream training");
    }
    if (opts.mode == AblationMode::face_only || opts.mode == AblationMode::audio_only) {
        throw ArgumentError("single-layer modes train via init_head, not the CAN loop");
    }
    if (train_data.size() == 0) {
        throw ArgumentError("training data is empty");
    }
    if (opts.epochs < 1) {
        throw ArgumentError("need at least one epoch");
    }
    const bool uses_context = opts.mode != AblationMode::face_face;
    if (uses_context && !train_data.context_feat.defined()) {
        throw ArgumentError("context features are required for this mode");
    }

    context_stream.freeze();
    std::vector<torch::Tensor> params = can->parameters();
    head.weight.set_requires_grad(true);
    head.bias.set_requires_grad(true);
    params.push_back(head.weight);
    params.push_back(head.bias);
    if (uses_context) {
        context_stream.unfreeze_encoder_head();
        for (auto& p : context_stream.encoder_head_parameters()) {
            params.push_back(p);
        }
    }
    torch::optim::Adam opt(params,
                           torch::optim::AdamOptions(opts.lr).weight_decay(opts.weight_decay));

    const bool swap = opts.swap_augment && opts.mode == AblationMode::face_context;
    SwapPools pools(train_data.identity_of_frame,
                    std::vector<int64_t>(train_data.labels.data_ptr<int64_t>(),
                                         train_data.labels.data_ptr<int64_t>() +
                                             train_data.labels.numel()));

    const int64_t n = train_data.size();
    CanTrainResult result;
    std::vector<torch::Tensor> best_params;
    double best_acc = -1.0;

    for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
        auto order_gen = make_generator(derive_seed(opts.seed, (1ULL << 40) + epoch));
        auto perm = torch::randperm(n, order_gen, torch::kInt64);
        auto perm_acc = perm.accessor<int64_t, 1>();

        double loss_sum = 0.0;
        int64_t steps = 0;
        for (int64_t at = 0; at < n; at += opts.batch_size) {
            const int64_t take = std::min(opts.batch_size, n - at);
            std::vector<int64_t> rows(take);
            for (int64_t i = 0; i < take; ++i) {
                rows[i] = perm_acc[at + i];
            }
            auto ctx_rows = swap ? pools.swap(rows, derive_seed(opts.seed,
                                                                (static_cast<uint64_t>(epoch) << 20) +
                                                                    static_cast<uint64_t>(steps)))
                                 : rows;

            auto row_idx = torch::tensor(rows, torch::kInt64);
            GaussianLatent face(train_data.face_mean.index_select(0, row_idx),
                                train_data.face_logvar.index_select(0, row_idx));
            GaussianLatent context = face;
            if (uses_context) {
                auto ctx_idx = torch::tensor(ctx_rows, torch::kInt64);
                context = context_stream.head_latent(
                    train_data.context_feat.index_select(0, ctx_idx));
            }
            auto shift = can->forward(face, context, 1.0);
            auto logits = classify(head, shift.shifted.mean());
            auto labels = train_data.labels.index_select(0, row_idx);
            auto loss = joint_loss_batch(logits, labels, face, shift.shifted, opts.weights);

            opt.zero_grad();
            loss.backward();
            opt.step();
            loss_sum += loss.item<double>();
            ++steps;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(steps));

        const auto val_logits =
            condition_logits(opts.mode, can, context_stream, head, val_data, 1.0);
        const auto val = evaluate_clips(val_logits, val_data.labels, val_data.clip_of_frame,
                                        head.num_classes());
        result.val_accuracy.push_back(val.accuracy_pct);

        if (val.accuracy_pct > best_acc) {
            best_acc = val.accuracy_pct;
            result.best_epoch = epoch;
            best_params.clear();
            for (const auto& p : params) {
                best_params.push_back(p.detach().clone());
            }
        }
    }

    {
        torch::NoGradGuard guard;
        for (size_t i = 0; i < params.size(); ++i) {
            params[i].copy_(best_params[i]);
        }
    }
    head.weight.set_requires_grad(false);
    head.bias.set_requires_grad(false);
    context_stream.freeze();
    return result;
}

}  // namespace percept
