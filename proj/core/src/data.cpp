#include "percept/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "percept/errors.hpp"

namespace fs = std::filesystem;

namespace percept {

std::vector<int64_t> frame_indices(int64_t total_frames, int n) {
    if (total_frames < 1) {
        throw ArgumentError("clip must have at least one frame");
    }
    if (n < 1) {
        throw ArgumentError("frame count must be positive");
    }
    std::vector<int64_t> out(n);
    if (n == 1) {
        out[0] = 0;
        return out;
    }
    for (int i = 0; i < n; ++i) {
        out[i] = std::llround(static_cast<double>(i) * static_cast<double>(total_frames - 1) /
                              static_cast<double>(n - 1));
    }
    return out;
}

double frame_timestamp(int64_t index, int64_t total_frames, double duration) {
    if (total_frames < 1 || index < 0 || index >= total_frames) {
        throw ArgumentError("frame index out of range");
    }
    return (static_cast<double>(index) + 0.5) / static_cast<double>(total_frames) * duration;
}

std::vector<FoldSplit> identity_kfold(const std::vector<std::string>& identities, int k,
                                      uint64_t seed) {
    std::vector<std::string> ids(identities);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    if (k < 2) {
        throw ArgumentError("need at least two folds");
    }
    const auto n = static_cast<int64_t>(ids.size());
    if (n < k) {
        throw ArgumentError("need at least as many identities as folds");
    }

    std::mt19937_64 rng(seed);
    for (int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<int64_t>(rng() % static_cast<uint64_t>(i + 1));
        std::swap(ids[i], ids[j]);
    }

    const int64_t base = n / k;
    const int64_t rem = n % k;
    std::vector<std::vector<std::string>> groups(k);
    int64_t at = 0;
    for (int g = 0; g < k; ++g) {
        const int64_t size = base + (g < rem ? 1 : 0);
        groups[g].assign(ids.begin() + at, ids.begin() + at + size);
        std::sort(groups[g].begin(), groups[g].end());
        at += size;
    }

    std::vector<FoldSplit> folds(k);
    for (int i = 0; i < k; ++i) {
        auto& fold = folds[i];
        fold.fold_index = i;
        fold.test_ids = groups[i];
        fold.val_ids = groups[(i + 1) % k];
        for (int g = 0; g < k; ++g) {
            if (g == i || g == (i + 1) % k) continue;
            fold.train_ids.insert(fold.train_ids.end(), groups[g].begin(), groups[g].end());
        }
        std::sort(fold.train_ids.begin(), fold.train_ids.end());
    }
    return folds;
}

namespace {

std::string get_string_field(const nlohmann::json& obj, const char* name, size_t line) {
    if (!obj.contains(name)) {
        throw ParseError(std::string("missing required field '") + name + "'", line);
    }
    if (!obj[name].is_string() || obj[name].get<std::string>().empty()) {
        throw ParseError(std::string("field '") + name + "' must be a non-empty string", line);
    }
    return obj[name].get<std::string>();
}

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<ClipRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open manifest: " + path);
    }
    std::vector<ClipRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid record: ") + e.what(), lineno);
        }
        if (!obj.is_object()) {
            throw ParseError("record must be an object", lineno);
        }

        ClipRecord rec;
        rec.clip_id = get_string_field(obj, "clip_id", lineno);
        rec.identity = get_string_field(obj, "identity", lineno);
        rec.expression_class = get_string_field(obj, "expression_class", lineno);
        rec.intensity = get_string_field(obj, "intensity", lineno);
        rec.video_ref = get_string_field(obj, "video_ref", lineno);
        rec.audio_ref = get_string_field(obj, "audio_ref", lineno);
        if (rec.intensity != "normal" && rec.intensity != "strong") {
            throw ParseError("field 'intensity' must be 'normal' or 'strong'", lineno);
        }
        if (obj.contains("frame_boxes")) {
            const auto& boxes = obj["frame_boxes"];
            if (!boxes.is_array()) {
                throw ParseError("field 'frame_boxes' must be an array", lineno);
            }
            for (const auto& b : boxes) {
                if (!b.is_array() || b.size() != 5 ||
                    !std::all_of(b.begin(), b.end(),
                                 [](const nlohmann::json& v) { return v.is_number_integer(); })) {
                    throw ParseError("each frame box must be five integers", lineno);
                }
                rec.frame_boxes.push_back(FrameBox{b[0].get<int64_t>(), b[1].get<int64_t>(),
                                                   b[2].get<int64_t>(), b[3].get<int64_t>(),
                                                   b[4].get<int64_t>()});
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void write_manifest(const std::vector<ClipRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open manifest for writing: " + path);
    }
    for (const auto& rec : records) {
        nlohmann::ordered_json obj;
        obj["clip_id"] = rec.clip_id;
        obj["identity"] = rec.identity;
        obj["expression_class"] = rec.expression_class;
        obj["intensity"] = rec.intensity;
        obj["video_ref"] = rec.video_ref;
        obj["audio_ref"] = rec.audio_ref;
        if (!rec.frame_boxes.empty()) {
            auto boxes = nlohmann::ordered_json::array();
            for (const auto& b : rec.frame_boxes) {
                boxes.push_back({b.frame_index, b.x, b.y, b.w, b.h});
            }
            obj["frame_boxes"] = boxes;
        }
        out << obj.dump() << '\n';
    }
    if (!out) {
        throw DataError("failed to write manifest: " + path);
    }
}

std::vector<std::string> list_frames(const std::string& video_ref) {
    fs::path p(video_ref);
    std::error_code ec;
    if (fs::is_regular_file(p, ec)) {
        return {video_ref};
    }
    if (!fs::is_directory(p, ec)) {
        throw DataError("video reference does not exist: " + video_ref);
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(p)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") {
            files.push_back(entry.path().string());
        }
    }
    if (files.empty()) {
        throw DataError("no frame images in " + video_ref);
    }
    std::sort(files.begin(), files.end());
    return files;
}

torch::Tensor load_clip_frame(const ClipRecord& record,
                              const std::vector<std::string>& frame_files,
                              int64_t frame_index) {
    if (frame_index < 0 || frame_index >= static_cast<int64_t>(frame_files.size())) {
        throw ArgumentError("frame index out of range for clip " + record.clip_id);
    }
    auto frame = read_png(frame_files[frame_index]);
    CropBox box{0, 0, frame.size(2), frame.size(1)};
    for (const auto& fb : record.frame_boxes) {
        if (fb.frame_index == frame_index) {
            box = CropBox{fb.x, fb.y, fb.w, fb.h};
            break;
        }
    }
    return crop_resize(frame, box);
}

}  // namespace percept
