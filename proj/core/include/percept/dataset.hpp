#ifndef PERCEPT_DATASET_HPP
#define PERCEPT_DATASET_HPP

#include <string>
#include <vector>

#include <torch/torch.h>

#include "percept/audio.hpp"
#include "percept/data.hpp"

namespace percept {

/// Fixed affine mapping of natural-log Mel values into [-1, 1]; the low end
/// is the log power floor, the high end generously covers full-scale input.
inline constexpr double kMelNormLow = -23.025850929940457;
inline constexpr double kMelNormHigh = 13.0;

torch::Tensor normalize_mel(const torch::Tensor& logmel);

/// All sampled frames of a manifest held in memory: face crops, aligned
/// context spectrograms, and labels, with clip bookkeeping for voting,
/// augmentation grouping, and identity-disjoint splits.
struct LoadedDataset {
    std::vector<std::string> classes;
    std::vector<ClipRecord> records;             // one per kept clip
    std::vector<int64_t> label_of_clip;          // per clip
    std::vector<std::string> identity_of_clip;   // per clip

    torch::Tensor faces;   // N x 3 x 128 x 128 float32 in [-1, 1]
    torch::Tensor mels;    // N x 1 x 128 x 128 float32 in [-1, 1]
    torch::Tensor labels;  // N int64
    std::vector<int64_t> clip_of_frame;  // N

    int64_t size() const { return faces.defined() ? faces.size(0) : 0; }
    int64_t num_clips() const { return static_cast<int64_t>(records.size()); }

    /// All identities present, sorted and unique.
    std::vector<std::string> identities() const;

    /// Frame indices whose clip identity is in `ids`.
    std::vector<int64_t> frames_of_identities(const std::vector<std::string>& ids) const;
};

/// Loads every manifest record whose class is in `classes` (records outside
/// the configured class set are skipped), sampling `frames_per_clip` frames
/// per clip and extracting one spectrogram patch per sampled frame.
LoadedDataset load_dataset(const std::string& manifest_path,
                           const std::vector<std::string>& classes,
                           int frames_per_clip = kFramesPerClip);

}  // namespace percept

#endif
