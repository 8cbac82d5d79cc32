#ifndef PERCEPT_AUDIO_HPP
#define PERCEPT_AUDIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace percept {

inline constexpr int kSampleRate = 22050;
inline constexpr int kMelBins = 128;
inline constexpr int kFftLength = 1310;
inline constexpr int kHopLength = 755;
inline constexpr int kMelFrames = 128;
/// One spectrogram patch spans kFftLength + (kMelFrames - 1) * kHopLength samples.
inline constexpr int kPatchSamples = kFftLength + (kMelFrames - 1) * kHopLength;
inline constexpr double kPowerFloor = 1e-10;

/// Log-Mel patch aligned to one video frame.
struct ContextSpectrogram {
    torch::Tensor values;  // float32, kMelBins x kMelFrames, natural log scale
    double frame_timestamp = 0.0;
};

/// Reads a 16-bit PCM mono WAV at 22050 Hz into float32 samples in [-1, 1].
torch::Tensor read_wav(const std::string& path);

/// Writes float32 samples in [-1, 1] as 16-bit PCM mono WAV at 22050 Hz.
void write_wav(const torch::Tensor& samples, const std::string& path);

/// HTK Mel scale conversions.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular Mel filterbank as a float64 tensor of shape
/// (n_mels, n_fft / 2 + 1), filters spanning [0, sample_rate / 2].
torch::Tensor mel_filterbank(int n_mels = kMelBins, int n_fft = kFftLength,
                             double sample_rate = kSampleRate);

/// Computes log-Mel patches with an FFT plan and buffers owned by the
/// instance. Not thread-safe; create one extractor per thread.
class MelExtractor {
public:
    MelExtractor();
    ~MelExtractor();
    MelExtractor(const MelExtractor&) = delete;
    MelExtractor& operator=(const MelExtractor&) = delete;

    /// Extracts the kPatchSamples-long window centered on `timestamp`
    /// (zero-padded past clip edges) and returns its log-Mel spectrogram,
    /// always exactly kMelBins x kMelFrames.
    ContextSpectrogram patch(const torch::Tensor& audio, double timestamp);

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace percept

#endif
