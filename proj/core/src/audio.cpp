#include "percept/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fftw3.h>

#include "percept/errors.hpp"

namespace percept {

namespace {

constexpr int kSpectrumBins = kFftLength / 2 + 1;

uint32_t read_u32(const uint8_t* p) {
    uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

uint16_t read_u16(const uint8_t* p) {
    uint16_t v;
    std::memcpy(&v, p, 2);
    return v;
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
    const size_t at = out.size();
    out.resize(at + 4);
    std::memcpy(out.data() + at, &v, 4);
}

void append_u16(std::vector<uint8_t>& out, uint16_t v) {
    const size_t at = out.size();
    out.resize(at + 2);
    std::memcpy(out.data() + at, &v, 2);
}

void append_tag(std::vector<uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

}  // namespace

torch::Tensor read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open audio file: " + path);
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw DataError("not a RIFF/WAVE file: " + path);
    }

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const uint8_t* data = nullptr;
    uint32_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const uint8_t* chunk = bytes.data() + pos;
        const uint32_t len = read_u32(chunk + 4);
        const uint8_t* body = chunk + 8;
        if (pos + 8 + len > bytes.size()) {
            throw DataError("truncated WAV chunk in " + path);
        }
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16) {
                throw DataError("malformed fmt chunk in " + path);
            }
            format = read_u16(body);
            channels = read_u16(body + 2);
            rate = read_u32(body + 4);
            bits = read_u16(body + 14);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = body;
            data_len = len;
        }
        pos += 8 + len + (len & 1);
    }

    if (!have_fmt || data == nullptr) {
        throw DataError("WAV file missing fmt or data chunk: " + path);
    }
    if (format != 1 || channels != 1 || bits != 16) {
        throw DataError("expected 16-bit PCM mono WAV: " + path);
    }
    if (rate != static_cast<uint32_t>(kSampleRate)) {
        throw DataError("expected " + std::to_string(kSampleRate) + " Hz audio: " + path);
    }

    const int64_t n = data_len / 2;
    auto samples = torch::empty({n}, torch::kFloat32);
    auto* out = samples.data_ptr<float>();
    for (int64_t i = 0; i < n; ++i) {
        int16_t s;
        std::memcpy(&s, data + 2 * i, 2);
        out[i] = static_cast<float>(s) / 32768.0f;
    }
    return samples;
}

void write_wav(const torch::Tensor& samples, const std::string& path) {
    if (samples.dim() != 1) {
        throw DimensionError("audio must be a 1-D sample vector");
    }
    auto f = samples.detach().to(torch::kFloat32).contiguous();
    const int64_t n = f.numel();
    const auto* src = f.data_ptr<float>();

    std::vector<uint8_t> bytes;
    bytes.reserve(44 + 2 * static_cast<size_t>(n));
    append_tag(bytes, "RIFF");
    append_u32(bytes, static_cast<uint32_t>(36 + 2 * n));
    append_tag(bytes, "WAVE");
    append_tag(bytes, "fmt ");
    append_u32(bytes, 16);
    append_u16(bytes, 1);
    append_u16(bytes, 1);
    append_u32(bytes, kSampleRate);
    append_u32(bytes, kSampleRate * 2);
    append_u16(bytes, 2);
    append_u16(bytes, 16);
    append_tag(bytes, "data");
    append_u32(bytes, static_cast<uint32_t>(2 * n));
    for (int64_t i = 0; i < n; ++i) {
        const double v = std::clamp(static_cast<double>(src[i]), -1.0, 1.0);
        const auto s = static_cast<int16_t>(std::lrint(v * 32767.0));
        append_u16(bytes, static_cast<uint16_t>(s));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open audio file for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("failed to write audio file: " + path);
    }
}

double hz_to_mel(double hz) {
    return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

torch::Tensor mel_filterbank(int n_mels, int n_fft, double sample_rate) {
    if (n_mels <= 0 || n_fft <= 0 || sample_rate <= 0) {
        throw ArgumentError("filterbank parameters must be positive");
    }
    const int bins = n_fft / 2 + 1;
    const double mel_hi = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(n_mels + 2);
    for (int i = 0; i < n_mels + 2; ++i) {
        edges[i] = mel_to_hz(mel_hi * i / (n_mels + 1));
    }

    auto fb = torch::zeros({n_mels, bins}, torch::kFloat64);
    auto acc = fb.accessor<double, 2>();
    for (int m = 0; m < n_mels; ++m) {
        const double left = edges[m];
        const double center = edges[m + 1];
        const double right = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double freq = k * sample_rate / n_fft;
            double w = 0.0;
            if (freq > left && freq < right) {
                w = freq <= center ? (freq - left) / (center - left)
                                   : (right - freq) / (right - center);
            }
            acc[m][k] = w;
        }
    }
    return fb;
}

struct MelExtractor::Impl {
    std::vector<double> window;
    torch::Tensor filterbank;
    double* in = nullptr;
    fftw_complex* out = nullptr;
    fftw_plan plan = nullptr;
};

MelExtractor::MelExtractor() : impl_(new Impl) {
    impl_->window.resize(kFftLength);
    for (int n = 0; n < kFftLength; ++n) {
        impl_->window[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / kFftLength);
    }
    impl_->filterbank = mel_filterbank();
    impl_->in = fftw_alloc_real(kFftLength);
    impl_->out = fftw_alloc_complex(kSpectrumBins);
    impl_->plan = fftw_plan_dft_r2c_1d(kFftLength, impl_->in, impl_->out, FFTW_ESTIMATE);
    if (!impl_->plan) {
        throw NumericError("cannot create FFT plan");
    }
}

MelExtractor::~MelExtractor() {
    fftw_destroy_plan(impl_->plan);
    fftw_free(impl_->in);
    fftw_free(impl_->out);
    delete impl_;
}

ContextSpectrogram MelExtractor::patch(const torch::Tensor& audio, double timestamp) {
    if (audio.dim() != 1 || audio.numel() == 0) {
        throw ArgumentError("audio must be a nonempty 1-D sample vector");
    }
    auto f = audio.detach().to(torch::kFloat32).contiguous();
    const auto* src = f.data_ptr<float>();
    const int64_t len = f.numel();

    const int64_t center = std::llround(timestamp * kSampleRate);
    const int64_t start = center - kPatchSamples / 2;

    auto power = torch::empty({kMelFrames, kSpectrumBins}, torch::kFloat64);
    auto pacc = power.accessor<double, 2>();
    for (int frame = 0; frame < kMelFrames; ++frame) {
        const int64_t base = start + static_cast<int64_t>(frame) * kHopLength;
        for (int n = 0; n < kFftLength; ++n) {
            const int64_t idx = base + n;
            const double s = (idx >= 0 && idx < len) ? src[idx] : 0.0;
            impl_->in[n] = s * impl_->window[n];
        }
        fftw_execute(impl_->plan);
        for (int k = 0; k < kSpectrumBins; ++k) {
            const double re = impl_->out[k][0];
            const double im = impl_->out[k][1];
            pacc[frame][k] = re * re + im * im;
        }
    }

    auto mel = torch::matmul(impl_->filterbank, power.transpose(0, 1));
    auto values = torch::log(torch::clamp_min(mel, kPowerFloor)).to(torch::kFloat32);

    ContextSpectrogram out;
    out.values = values.contiguous();
    out.frame_timestamp = timestamp;
    return out;
}

}  // namespace percept
