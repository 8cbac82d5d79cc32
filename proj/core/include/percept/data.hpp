#ifndef PERCEPT_DATA_HPP
#define PERCEPT_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "percept/image.hpp"

namespace percept {

inline constexpr int kFramesPerClip = 16;
inline constexpr int kDefaultFolds = 10;

/// Crop box attached to one frame of a clip.
struct FrameBox {
    int64_t frame_index = 0;
    int64_t x = 0;
    int64_t y = 0;
    int64_t w = 0;
    int64_t h = 0;

    bool operator==(const FrameBox&) const = default;
};

/// One labeled clip: a directory of stored frame images plus its audio track.
struct ClipRecord {
    std::string clip_id;
    std::string identity;
    std::string expression_class;
    std::string intensity;  // "normal" or "strong"
    std::string video_ref;  // directory of frame images, or a single image file
    std::string audio_ref;  // 16-bit PCM mono WAV at 22050 Hz
    std::vector<FrameBox> frame_boxes;  // empty = full-frame crops

    bool operator==(const ClipRecord&) const = default;
};

/// Identity-disjoint fold assignment. Within one fold every identity plays
/// exactly one role; across folds every identity is in test exactly once.
struct FoldSplit {
    int fold_index = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
};

/// Evenly spaced frame indices over [0, T-1], endpoints included:
/// idx_i = round(i * (T-1) / (n-1)).
std::vector<int64_t> frame_indices(int64_t total_frames, int n = kFramesPerClip);

/// Midpoint timestamp of frame `index` when `total_frames` frames evenly
/// tile a clip of `duration` seconds.
double frame_timestamp(int64_t index, int64_t total_frames, double duration);

/// Partitions identities into k near-equal test groups (seeded shuffle);
/// fold i tests group i, validates group (i+1) mod k, trains on the rest.
std::vector<FoldSplit> identity_kfold(const std::vector<std::string>& identities,
                                      int k = kDefaultFolds, uint64_t seed = 0);

/// Line-delimited manifest I/O. Write-then-load round trips exactly;
/// malformed lines raise a parse error carrying the 1-based line number.
std::vector<ClipRecord> load_manifest(const std::string& path);
void write_manifest(const std::vector<ClipRecord>& records, const std::string& path);

/// Frame image files of a clip in frame order. A video_ref naming a single
/// image file yields a one-frame clip.
std::vector<std::string> list_frames(const std::string& video_ref);

/// Loads frame `frame_index` of a clip, applies its crop box (full frame
/// when no box is listed for that index), and returns a 3 x 128 x 128
/// tensor in [-1, 1].
torch::Tensor load_clip_frame(const ClipRecord& record,
                              const std::vector<std::string>& frame_files,
                              int64_t frame_index);

}  // namespace percept

#endif
