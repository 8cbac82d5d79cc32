#include "percept/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "percept/audio.hpp"
#include "percept/checkpoint.hpp"
#include "percept/dataset.hpp"
#include "percept/errors.hpp"
#include "percept/image.hpp"
#include "percept/metrics.hpp"
#include "percept/runtime.hpp"

namespace fs = std::filesystem;

namespace percept {

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw DataError("cannot create output directory " + dir + ": " + ec.message());
    }
}

void require_checkpoint(const std::string& path, const char* what) {
    if (path.empty() || !fs::exists(path)) {
        throw ConfigError(std::string(what) + " checkpoint not found: " + path);
    }
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

std::vector<std::string> resolve_classes(const RunConfig& cfg) {
    if (!cfg.classes.empty()) return cfg.classes;
    if (cfg.manifest.empty()) {
        throw ConfigError("data.manifest is required");
    }
    std::set<std::string> names;
    for (const auto& record : load_manifest(cfg.manifest)) {
        names.insert(record.expression_class);
    }
    return {names.begin(), names.end()};
}

LoadedDataset load_configured(const RunConfig& cfg, const std::vector<std::string>& classes) {
    if (cfg.manifest.empty()) {
        throw ConfigError("data.manifest is required");
    }
    return load_dataset(cfg.manifest, classes, static_cast<int>(cfg.frames_per_clip));
}

/// Per-frame latents and trunk features on frozen streams, in load order.
CanData make_can_data(const LoadedDataset& data, const ReconstructionStream& face,
                      const ReconstructionStream& context) {
    torch::NoGradGuard guard;
    constexpr int64_t kChunk = 64;
    std::vector<torch::Tensor> face_means, face_logvars, context_feats;
    for (int64_t i = 0; i < data.size(); i += kChunk) {
        const int64_t end = std::min(i + kChunk, data.size());
        auto latent = face.encode(data.faces.slice(0, i, end));
        face_means.push_back(latent.mean());
        face_logvars.push_back(latent.log_variance());
        context_feats.push_back(context.trunk_features(data.mels.slice(0, i, end)));
    }
    CanData out;
    out.face_mean = torch::cat(face_means).contiguous();
    out.face_logvar = torch::cat(face_logvars).contiguous();
    out.context_feat = torch::cat(context_feats).contiguous();
    out.labels = data.labels;
    out.clip_of_frame = data.clip_of_frame;
    out.identity_of_frame.reserve(data.clip_of_frame.size());
    for (const int64_t clip : data.clip_of_frame) {
        out.identity_of_frame.push_back(data.identity_of_clip[static_cast<size_t>(clip)]);
    }
    return out;
}

std::vector<torch::Tensor> snapshot_head(const ReconstructionStream& stream) {
    std::vector<torch::Tensor> out;
    for (const auto& p : stream.encoder_head_parameters()) {
        out.push_back(p.detach().clone());
    }
    return out;
}

void restore_head(ReconstructionStream& stream, const std::vector<torch::Tensor>& snapshot) {
    torch::NoGradGuard guard;
    auto params = stream.encoder_head_parameters();
    for (size_t i = 0; i < params.size(); ++i) {
        params[i].copy_(snapshot[i]);
    }
}

struct TrainSetup {
    const RunConfig& cfg;
    const LoadedDataset& data;
    const CanData& all;
    const ReconstructionStream& face;
    ReconstructionStream& context;
    const std::vector<torch::Tensor>& pristine_head;
};

struct FoldArtifacts {
    VotedEval eval;
    ContextAttention can{nullptr};
    HeadParams head;
};

FoldArtifacts run_fold(const TrainSetup& setup, AblationMode mode, const FoldSplit& split) {
    const auto num_classes = static_cast<int64_t>(setup.data.classes.size());
    const uint64_t fold_salt =
        static_cast<uint64_t>(split.fold_index) * 16 + static_cast<uint64_t>(mode);

    restore_head(setup.context, setup.pristine_head);

    const auto train_rows = setup.data.frames_of_identities(split.train_ids);
    const auto val_rows = setup.data.frames_of_identities(split.val_ids);
    const auto test_rows = setup.data.frames_of_identities(split.test_ids);
    if (train_rows.empty() || test_rows.empty()) {
        throw DataError("fold " + std::to_string(split.fold_index) +
                        " has an empty train or test split");
    }

    FoldArtifacts fold;
    torch::manual_seed(derive_seed(setup.cfg.seed, 5000 + fold_salt));
    fold.can = ContextAttention(setup.face.config().latent_dim);

    auto train_data = setup.all.select(train_rows);
    auto test_data = setup.all.select(test_rows);

    const bool single_layer =
        mode == AblationMode::face_only || mode == AblationMode::audio_only;
    torch::Tensor init_means = train_data.face_mean;
    if (mode == AblationMode::audio_only) {
        torch::NoGradGuard guard;
        init_means = setup.context.head_latent(train_data.context_feat).mean();
    }
    fold.head = init_head(init_means, train_data.labels, num_classes, setup.cfg.head_epochs,
                          setup.cfg.head_learning_rate, setup.cfg.head_weight_decay,
                          derive_seed(setup.cfg.seed, 6000 + fold_salt));

    if (!single_layer) {
        auto val_data = setup.all.select(val_rows);
        CanTrainOptions opts;
        opts.mode = mode;
        opts.epochs = setup.cfg.epochs;
        opts.batch_size = setup.cfg.batch_size;
        opts.lr = setup.cfg.learning_rate;
        opts.weight_decay = setup.cfg.weight_decay;
        opts.weights.alpha = setup.cfg.alpha;
        opts.swap_augment = setup.cfg.swap_augment;
        opts.seed = derive_seed(setup.cfg.seed, 7000 + fold_salt);
        train_can_and_head(setup.face, setup.context, fold.can, fold.head, train_data, val_data,
                           opts);
    }

    auto logits = condition_logits(mode, fold.can, setup.context, fold.head, test_data,
                                   setup.cfg.gamma);
    fold.eval = evaluate_clips(logits, test_data.labels, test_data.clip_of_frame, num_classes);
    return fold;
}

std::unique_ptr<ReconstructionStream> load_kind(const std::string& path, const char* want) {
    std::string kind;
    auto stream = load_stream_checkpoint(path, &kind);
    if (kind != want) {
        throw ConfigError("checkpoint " + path + " holds a '" + kind + "' stream, expected '" +
                          want + "'");
    }
    return stream;
}

std::string frame_sample_id(const LoadedDataset& data, std::vector<int64_t>& next_in_clip,
                            int64_t row) {
    const auto clip = data.clip_of_frame[static_cast<size_t>(row)];
    const auto pos = next_in_clip[static_cast<size_t>(clip)]++;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "_f%02lld", static_cast<long long>(pos));
    return data.records[static_cast<size_t>(clip)].clip_id + buf;
}

}  // namespace

void cmd_synth_data(const std::string& out_dir, const SynthOptions& opts) {
    ensure_dir(out_dir);
    const auto manifest = synth_dataset(out_dir, opts);
    std::cerr << "[synth-data] wrote " << manifest << "\n";
}

void cmd_pretrain(const RunConfig& cfg, const std::string& which, const std::string& out_dir) {
    if (which != "face" && which != "context") {
        throw ArgumentError("unknown stream '" + which + "', expected face or context");
    }
    const bool is_face = which == "face";
    const auto& stream_cfg = is_face ? cfg.face : cfg.context;
    if (stream_cfg.input_channels != (is_face ? 3 : 1)) {
        throw ConfigError("stream." + which + ".input_channels does not match the " + which +
                          " data");
    }
    ensure_dir(out_dir);

    const auto classes = resolve_classes(cfg);
    const auto data = load_configured(cfg, classes);
    const auto inputs = is_face ? data.faces : data.mels;

    ReconstructionStream stream(stream_cfg, derive_seed(cfg.seed, is_face ? 10 : 11));
    std::cerr << "[pretrain-" << which << "] " << data.size() << " frames, "
              << cfg.pretrain_epochs << " epochs\n";
    const auto losses =
        stream.pretrain(inputs, cfg.pretrain_epochs, cfg.schedule, cfg.batch_size,
                        derive_seed(cfg.seed, is_face ? 20 : 21), is_face && cfg.flip_augment);
    for (size_t e = 0; e < losses.size(); ++e) {
        std::cerr << "[pretrain-" << which << "] epoch " << e << " prior " << losses[e].prior
                  << " feature " << losses[e].feature << " gan " << losses[e].gan << "\n";
    }

    save_stream_checkpoint(join_path(out_dir, which + ".ckpt"), stream, which);
    write_epoch_csv(join_path(out_dir, "metrics.csv"), losses);
}

void cmd_init_head(const RunConfig& cfg, const std::string& face_ckpt,
                   const std::string& out_dir) {
    require_checkpoint(face_ckpt, "face stream");
    ensure_dir(out_dir);

    auto face = load_kind(face_ckpt, "face");
    face->freeze();
    const auto classes = resolve_classes(cfg);
    const auto data = load_configured(cfg, classes);

    torch::Tensor means;
    {
        torch::NoGradGuard guard;
        std::vector<torch::Tensor> chunks;
        constexpr int64_t kChunk = 64;
        for (int64_t i = 0; i < data.size(); i += kChunk) {
            chunks.push_back(face->encode(data.faces.slice(0, i, std::min(i + kChunk, data.size())))
                                 .mean());
        }
        means = torch::cat(chunks);
    }
    auto head = init_head(means, data.labels, static_cast<int64_t>(classes.size()),
                          cfg.head_epochs, cfg.head_learning_rate, cfg.head_weight_decay,
                          derive_seed(cfg.seed, 30));

    const auto eval = evaluate_clips(classify(head, means), data.labels, data.clip_of_frame,
                                     static_cast<int64_t>(classes.size()));
    std::cerr << "[init-head] voted train accuracy " << eval.accuracy_pct << "%\n";

    Checkpoint ckpt;
    ckpt.meta["format"] = "head";
    ckpt.meta["classes"] = classes;
    ckpt.tensors.emplace_back("head.weight", head.weight);
    ckpt.tensors.emplace_back("head.bias", head.bias);
    save_checkpoint(join_path(out_dir, "head.ckpt"), ckpt);

    std::ofstream out(join_path(out_dir, "metrics.csv"), std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + join_path(out_dir, "metrics.csv"));
    out << "split,accuracy\n";
    out << "train," << format_real(eval.accuracy_pct) << "\n";
}

void cmd_train(const RunConfig& cfg, const std::string& face_ckpt, const std::string& context_ckpt,
               const std::string& out_dir) {
    require_checkpoint(face_ckpt, "face stream");
    require_checkpoint(context_ckpt, "context stream");
    ensure_dir(out_dir);

    auto face = load_kind(face_ckpt, "face");
    auto context = load_kind(context_ckpt, "context");
    face->freeze();
    if (face->config().latent_dim != context->config().latent_dim) {
        throw ConfigError("face and context streams have different latent dimensions");
    }

    const auto classes = resolve_classes(cfg);
    const auto data = load_configured(cfg, classes);
    const auto all = make_can_data(data, *face, *context);
    const auto pristine = snapshot_head(*context);
    const auto splits = identity_kfold(data.identities(), static_cast<int>(cfg.folds),
                                       derive_seed(cfg.seed, 3001));

    TrainSetup setup{cfg, data, all, *face, *context, pristine};
    auto report = make_eval_report(classes);
    for (const auto& split : splits) {
        auto fold = run_fold(setup, cfg.mode, split);
        accumulate_fold(report, fold.eval);
        std::cerr << "[train] fold " << split.fold_index << " accuracy "
                  << format_real(fold.eval.accuracy_pct, 2) << "%\n";

        ModelBundleView view{*face,       *context,       fold.can,
                             fold.head,   classes,        split.test_ids,
                             to_string(cfg.mode), cfg.gamma};
        save_model_bundle(
            join_path(out_dir, "model_fold" + std::to_string(split.fold_index) + ".ckpt"), view);
    }
    std::cerr << "[train] mean accuracy " << format_real(report.mean_accuracy(), 2) << "%\n";

    write_metrics_csv(join_path(out_dir, "metrics.csv"), report);
    write_confusion_csv(join_path(out_dir, "confusion.csv"), report);
}

void cmd_ablate(const RunConfig& cfg, const std::string& face_ckpt,
                const std::string& context_ckpt, const std::vector<std::string>& modes,
                const std::string& out_dir) {
    require_checkpoint(face_ckpt, "face stream");
    require_checkpoint(context_ckpt, "context stream");
    ensure_dir(out_dir);

    std::vector<AblationMode> plan;
    if (modes.empty()) {
        plan = {AblationMode::face_only, AblationMode::face_face, AblationMode::audio_only,
                AblationMode::strict_audio, AblationMode::face_context};
    } else {
        for (const auto& name : modes) plan.push_back(ablation_mode_from_string(name));
    }

    auto face = load_kind(face_ckpt, "face");
    auto context = load_kind(context_ckpt, "context");
    face->freeze();
    if (face->config().latent_dim != context->config().latent_dim) {
        throw ConfigError("face and context streams have different latent dimensions");
    }

    const auto classes = resolve_classes(cfg);
    const auto data = load_configured(cfg, classes);
    const auto all = make_can_data(data, *face, *context);
    const auto pristine = snapshot_head(*context);
    const auto splits = identity_kfold(data.identities(), static_cast<int>(cfg.folds),
                                       derive_seed(cfg.seed, 3001));

    TrainSetup setup{cfg, data, all, *face, *context, pristine};
    std::vector<AblationRow> rows;
    for (const auto mode : plan) {
        RunConfig mode_cfg = cfg;
        mode_cfg.mode = mode;
        mode_cfg.swap_augment = cfg.swap_augment && mode == AblationMode::face_context;
        TrainSetup mode_setup{mode_cfg, data, all, *face, *context, pristine};
        auto report = make_eval_report(classes);
        for (const auto& split : splits) {
            auto fold = run_fold(mode_setup, mode, split);
            accumulate_fold(report, fold.eval);
        }
        std::cerr << "[ablate] " << to_string(mode) << " mean accuracy "
                  << format_real(report.mean_accuracy(), 2) << "%\n";
        rows.push_back({to_string(mode), report.mean_accuracy(), reference_accuracy(mode)});
    }

    write_ablation_csv(join_path(out_dir, "metrics.csv"), rows);
}

void cmd_confusion(const RunConfig& cfg, const std::string& model_ckpt,
                   const std::string& out_dir) {
    require_checkpoint(model_ckpt, "model");
    ensure_dir(out_dir);

    auto bundle = load_model_bundle(model_ckpt);
    RunConfig data_cfg = cfg;
    data_cfg.classes = bundle.classes;
    const auto data = load_configured(data_cfg, bundle.classes);
    const auto all = make_can_data(data, *bundle.face, *bundle.context);

    std::vector<int64_t> rows;
    if (bundle.test_identities.empty()) {
        rows.resize(static_cast<size_t>(data.size()));
        for (int64_t i = 0; i < data.size(); ++i) rows[static_cast<size_t>(i)] = i;
    } else {
        rows = data.frames_of_identities(bundle.test_identities);
    }
    if (rows.empty()) {
        throw DataError("no frames matched the checkpoint's test identities");
    }

    const auto mode = ablation_mode_from_string(bundle.mode);
    auto subset = all.select(rows);
    auto logits = condition_logits(mode, bundle.can, *bundle.context, bundle.head, subset,
                                   cfg.gamma);
    const auto eval = evaluate_clips(logits, subset.labels, subset.clip_of_frame,
                                     static_cast<int64_t>(bundle.classes.size()));

    auto report = make_eval_report(bundle.classes);
    accumulate_fold(report, eval);
    for (const auto& name : report.empty_classes()) {
        std::cerr << "[eval-confusion] class " << name << " has no test clips; row is zeros\n";
    }
    std::cerr << "[eval-confusion] voted accuracy " << format_real(eval.accuracy_pct, 2) << "%\n";
    write_confusion_csv(join_path(out_dir, "confusion.csv"), report);
}

void cmd_embed(const RunConfig& cfg, const std::string& model_ckpt,
               const std::vector<std::string>& identities, const std::string& out_dir) {
    if (identities.empty()) {
        throw ArgumentError("identity subset must not be empty");
    }
    require_checkpoint(model_ckpt, "model");
    ensure_dir(out_dir);

    auto bundle = load_model_bundle(model_ckpt);
    RunConfig data_cfg = cfg;
    data_cfg.classes = bundle.classes;
    const auto data = load_configured(data_cfg, bundle.classes);
    const auto rows = data.frames_of_identities(identities);
    if (rows.empty()) {
        throw ArgumentError("no frames matched the requested identities");
    }

    const auto all = make_can_data(data, *bundle.face, *bundle.context);
    auto subset = all.select(rows);

    torch::NoGradGuard guard;
    GaussianLatent face_latent(subset.face_mean, subset.face_logvar);
    auto context_latent = bundle.context->head_latent(subset.context_feat);
    auto face_face = bundle.can->forward(face_latent, face_latent, cfg.gamma).shifted;
    auto face_context = bundle.can->forward(face_latent, context_latent, cfg.gamma).shifted;

    std::vector<std::string> sample_ids, labels;
    std::vector<int64_t> next_in_clip(static_cast<size_t>(data.num_clips()), 0);
    for (size_t i = 0; i < rows.size(); ++i) {
        sample_ids.push_back(frame_sample_id(data, next_in_clip, rows[i]));
        const auto label = subset.labels[static_cast<int64_t>(i)].item<int64_t>();
        labels.push_back(bundle.classes[static_cast<size_t>(label)]);
    }

    write_embeddings_csv(join_path(out_dir, "embeddings_face_only.csv"), sample_ids, labels,
                         subset.face_mean);
    write_embeddings_csv(join_path(out_dir, "embeddings_face_face.csv"), sample_ids, labels,
                         face_face.mean());
    write_embeddings_csv(join_path(out_dir, "embeddings_face_context.csv"), sample_ids, labels,
                         face_context.mean());
}

void cmd_generate(const RunConfig& cfg, const std::string& model_ckpt,
                  const std::string& face_image, const std::string& context_audio,
                  double timestamp, int64_t gamma_steps, const std::string& out_dir) {
    if (gamma_steps < 1) {
        throw ArgumentError("gamma sweep needs at least one step");
    }
    require_checkpoint(model_ckpt, "model");
    if (!fs::exists(face_image)) {
        throw DataError("face image not found: " + face_image);
    }
    if (!fs::exists(context_audio)) {
        throw DataError("context audio not found: " + context_audio);
    }
    ensure_dir(out_dir);

    auto bundle = load_model_bundle(model_ckpt);
    auto frame = read_png(face_image);
    auto face_in = crop_resize(frame, CropBox{0, 0, frame.size(2), frame.size(1)});

    auto audio = read_wav(context_audio);
    const double duration = static_cast<double>(audio.size(0)) / kSampleRate;
    const double at = timestamp >= 0.0 ? timestamp : duration / 2.0;
    MelExtractor extractor;
    auto spectrogram = extractor.patch(audio, at);
    auto mel = normalize_mel(spectrogram.values).unsqueeze(0);

    torch::NoGradGuard guard;
    const auto face_latent = bundle.face->encode(face_in);
    const auto context_latent = bundle.context->encode(mel);

    auto reconstruction = bundle.face->decode(face_latent.mean());
    write_png(to_unit_range(reconstruction), join_path(out_dir, "reconstruction.png"));

    std::vector<torch::Tensor> columns;
    std::vector<double> gammas, distances;
    torch::Tensor base;
    for (int64_t i = 0; i <= gamma_steps; ++i) {
        const double gamma = static_cast<double>(i) / static_cast<double>(gamma_steps);
        const auto shifted = bundle.can->forward(face_latent, context_latent, gamma).shifted;
        auto image = bundle.face->decode(shifted.mean());
        if (i == 0) base = image;
        const double dist =
            torch::norm((image - base).to(torch::kFloat64)).item<double>();
        gammas.push_back(gamma);
        distances.push_back(dist);
        auto unit = to_unit_range(image);
        write_png(unit, join_path(out_dir, "grid_" + format_real(gamma, 2) + ".png"));
        columns.push_back(unit);
    }

    write_png(tile_grid(columns, static_cast<int64_t>(columns.size())),
              join_path(out_dir, "grid.png"));
    write_sweep_csv(join_path(out_dir, "sweep_distances.csv"), gammas, distances);

    for (size_t i = 1; i < distances.size(); ++i) {
        if (distances[i] + 1e-9 < distances[i - 1]) {
            std::cerr << "[generate] distance to the base column dips at gamma "
                      << format_real(gammas[i], 2) << "\n";
        }
    }
}

}  // namespace percept
