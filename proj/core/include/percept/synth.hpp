#ifndef PERCEPT_SYNTH_HPP
#define PERCEPT_SYNTH_HPP

#include <cstdint>
#include <string>

namespace percept {

/// Parameters of the synthetic audio-visual benchmark. Faces are parametric
/// drawings whose mouth curvature, mouth opening, eye openness, and brow
/// tilt encode the class (identity sets geometry and palette); audio holds
/// class-coded tones. signal_strength scales only the class information in
/// the audio: at 1 the class is recoverable from context alone, at 0 the
/// audio carries identity and noise but no class signal. Face cues do not
/// depend on signal_strength.
struct SynthOptions {
    int64_t n_identities = 24;
    int64_t clips_per_identity = 1;  // clips per (identity, class) pair
    int64_t n_classes = 7;
    int64_t frames_per_clip = 16;
    double signal_strength = 1.0;
    uint64_t seed = 0;
};

/// Writes media under out_dir/media/<clip_id>/ (frame PNGs plus audio.wav,
/// refs stored relative to the manifest) and returns the path of
/// out_dir/manifest.jsonl. Byte-identical output under a fixed seed.
std::string synth_dataset(const std::string& out_dir, const SynthOptions& opts);

/// Class name used by the generator for class index c ("expr_<c>").
std::string synth_class_name(int64_t c);

}  // namespace percept

#endif
