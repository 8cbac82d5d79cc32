#include "percept/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "percept/errors.hpp"

namespace percept {

torch::Tensor normalize_mel(const torch::Tensor& logmel) {
    auto scaled = (logmel - kMelNormLow) * (2.0 / (kMelNormHigh - kMelNormLow)) - 1.0;
    return torch::clamp(scaled, -1.0, 1.0).to(torch::kFloat32);
}

std::vector<std::string> LoadedDataset::identities() const {
    std::set<std::string> ids(identity_of_clip.begin(), identity_of_clip.end());
    return {ids.begin(), ids.end()};
}

std::vector<int64_t> LoadedDataset::frames_of_identities(
    const std::vector<std::string>& ids) const {
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<int64_t> out;
    for (int64_t i = 0; i < size(); ++i) {
        if (wanted.count(identity_of_clip[clip_of_frame[i]])) {
            out.push_back(i);
        }
    }
    return out;
}

LoadedDataset load_dataset(const std::string& manifest_path,
                           const std::vector<std::string>& classes, int frames_per_clip) {
    if (classes.size() < 2) {
        throw ArgumentError("need at least two classes");
    }
    if (frames_per_clip < 1) {
        throw ArgumentError("frames per clip must be positive");
    }

    LoadedDataset ds;
    ds.classes = classes;
    auto all_records = load_manifest(manifest_path);

    // media refs may be stored relative to the manifest
    const auto base = std::filesystem::path(manifest_path).parent_path();
    auto resolve = [&](std::string& ref) {
        if (std::filesystem::path(ref).is_relative() && !base.empty()) {
            ref = (base / ref).string();
        }
    };
    for (auto& rec : all_records) {
        resolve(rec.video_ref);
        resolve(rec.audio_ref);
    }

    auto class_index = [&](const std::string& name) -> int64_t {
        auto it = std::find(classes.begin(), classes.end(), name);
        return it == classes.end() ? -1 : it - classes.begin();
    };

    std::vector<torch::Tensor> faces;
    std::vector<torch::Tensor> mels;
    std::vector<int64_t> labels;
    MelExtractor extractor;

    for (auto& rec : all_records) {
        const int64_t label = class_index(rec.expression_class);
        if (label < 0) continue;

        const auto frame_files = list_frames(rec.video_ref);
        const auto total = static_cast<int64_t>(frame_files.size());
        const auto indices = frame_indices(total, frames_per_clip);
        const auto audio = read_wav(rec.audio_ref);
        const double duration = static_cast<double>(audio.numel()) / kSampleRate;

        const auto clip_idx = static_cast<int64_t>(ds.records.size());
        for (const int64_t idx : indices) {
            faces.push_back(load_clip_frame(rec, frame_files, idx));
            const double ts = frame_timestamp(idx, total, duration);
            mels.push_back(normalize_mel(extractor.patch(audio, ts).values).unsqueeze(0));
            labels.push_back(label);
            ds.clip_of_frame.push_back(clip_idx);
        }
        ds.label_of_clip.push_back(label);
        ds.identity_of_clip.push_back(rec.identity);
        ds.records.push_back(std::move(rec));
    }

    if (ds.records.empty()) {
        throw DataError("manifest holds no records in the configured class set");
    }

    ds.faces = torch::stack(faces);
    ds.mels = torch::stack(mels);
    ds.labels = torch::tensor(labels, torch::kInt64);
    return ds;
}

}  // namespace percept
