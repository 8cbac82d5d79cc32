#include "percept/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "percept/audio.hpp"
#include "percept/data.hpp"
#include "percept/errors.hpp"
#include "percept/image.hpp"
#include "percept/runtime.hpp"

namespace fs = std::filesystem;

namespace percept {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

double gaussian(std::mt19937_64& rng) {
    // Box-Muller; self-contained so media bytes do not depend on the
    // standard library's distribution internals.
    const double u1 = std::max(uniform01(rng), 1e-12);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct IdentityParams {
    double skin[3], bg[3], hair[3];
    double rx, ry;           // face ellipse radii
    double eye_dx, eye_h;    // eye offsets from center
    double eye_rx, eye_ry;   // eye radii
    double mouth_w, mouth_y; // mouth half-width and drop below center
    double mole_x, mole_y;   // identity mark
    double hum_hz;
};

IdentityParams make_identity(uint64_t seed, int64_t id) {
    std::mt19937_64 rng(derive_seed(seed, 1000 + static_cast<uint64_t>(id)));
    IdentityParams p;
    const double tone = uniform(rng, 0.55, 0.9);
    p.skin[0] = tone;
    p.skin[1] = tone * uniform(rng, 0.72, 0.88);
    p.skin[2] = tone * uniform(rng, 0.55, 0.75);
    for (double& v : p.bg) v = uniform(rng, 0.08, 0.35);
    for (double& v : p.hair) v = uniform(rng, 0.05, 0.4);
    p.rx = uniform(rng, 30, 42);
    p.ry = uniform(rng, 36, 48);
    p.eye_dx = uniform(rng, 12, 20);
    p.eye_h = uniform(rng, 12, 20);
    p.eye_rx = uniform(rng, 4.5, 7.0);
    p.eye_ry = uniform(rng, 3.0, 5.0);
    p.mouth_w = uniform(rng, 13, 21);
    p.mouth_y = uniform(rng, 16, 26);
    const double ang = uniform(rng, 0, 2 * M_PI);
    const double rad = uniform(rng, 0.35, 0.8);
    p.mole_x = 64 + std::cos(ang) * rad * p.rx;
    p.mole_y = 66 + std::sin(ang) * rad * p.ry;
    p.hum_hz = uniform(rng, 85, 210);
    return p;
}

/// Class-coded expression in normalized units, before noise.
struct Expression {
    double curve;      // mouth curvature, + is a smile
    double open;       // mouth opening
    double eye_open;   // eye openness factor
    double brow;       // brow tilt
};

Expression class_expression(int64_t c, int64_t n_classes) {
    const double th = 2.0 * M_PI * static_cast<double>(c) / static_cast<double>(n_classes);
    Expression e;
    e.curve = std::cos(th);
    e.open = 0.5 + 0.5 * std::sin(th);
    e.eye_open = 0.5 + 0.5 * std::sin(2.0 * th + 1.0);
    e.brow = std::sin(2.0 * th);
    return e;
}

torch::Tensor draw_face(const IdentityParams& id, const Expression& e, double jitter_x,
                        double jitter_y) {
    auto img = torch::empty({3, kImageSize, kImageSize}, torch::kFloat32);
    auto a = img.accessor<float, 3>();

    const double cx = 64 + jitter_x;
    const double cy = 66 + jitter_y;
    const double eye_ry = id.eye_ry * (0.35 + 0.85 * std::clamp(e.eye_open, -0.2, 1.6));
    const double mouth_line = cy + id.mouth_y;
    const double mouth_half = 1.6 + 5.0 * std::clamp(e.open, -0.2, 1.6);
    const double brow_tilt = 0.55 * e.brow;
    const double brow_y = cy - id.eye_h - 2.2 * id.eye_ry - 3.0;

    for (int64_t y = 0; y < kImageSize; ++y) {
        for (int64_t x = 0; x < kImageSize; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            double r = 0, g = 0, b = 0;

            const double face_d = (dx * dx) / (id.rx * id.rx) + (dy * dy) / (id.ry * id.ry);
            if (face_d <= 1.0) {
                r = id.skin[0];
                g = id.skin[1];
                b = id.skin[2];

                // mouth: parabola around mouth_line, curvature bends the ends
                const double mx = dx / id.mouth_w;
                if (std::abs(mx) <= 1.0) {
                    const double line = mouth_line - 7.0 * e.curve * (mx * mx - 0.5);
                    if (std::abs(y - line) <= mouth_half * (1.1 - 0.55 * mx * mx)) {
                        r = 0.55;
                        g = 0.12;
                        b = 0.16;
                    }
                }

                // eyes and pupils
                for (const double sx : {-1.0, 1.0}) {
                    const double ex = dx - sx * id.eye_dx;
                    const double ey = dy + id.eye_h;
                    const double eye_d = (ex * ex) / (id.eye_rx * id.eye_rx) +
                                         (ey * ey) / (eye_ry * eye_ry);
                    if (eye_d <= 1.0) {
                        r = 0.92;
                        g = 0.92;
                        b = 0.95;
                        if (eye_d <= 0.28) {
                            r = 0.08;
                            g = 0.08;
                            b = 0.12;
                        }
                    }
                    // brow: tilted bar above the eye
                    const double bx = dx - sx * id.eye_dx;
                    const double by = y - (brow_y + sx * brow_tilt * bx);
                    if (std::abs(bx) <= id.eye_rx * 1.5 && std::abs(by) <= 1.6) {
                        r = id.hair[0];
                        g = id.hair[1];
                        b = id.hair[2];
                    }
                }

                // identity mole
                const double mxd = x - id.mole_x;
                const double myd = y - id.mole_y;
                if (mxd * mxd + myd * myd <= 2.5) {
                    r = 0.25;
                    g = 0.12;
                    b = 0.08;
                }
            } else {
                r = id.bg[0];
                g = id.bg[1];
                b = id.bg[2];
            }

            a[0][y][x] = static_cast<float>(std::clamp(r, 0.0, 1.0));
            a[1][y][x] = static_cast<float>(std::clamp(g, 0.0, 1.0));
            a[2][y][x] = static_cast<float>(std::clamp(b, 0.0, 1.0));
        }
    }
    return img;
}

double class_tone_hz(int64_t c) {
    // adjacent classes pair up at close frequencies so the audio channel
    // stays informative but not perfectly separable
    const int64_t pair = c / 2;
    const double base = 480.0 * std::pow(2.15, static_cast<double>(pair));
    return (c % 2 == 0) ? base : base * 1.08;
}

torch::Tensor synth_audio(const IdentityParams& id, int64_t c, double strength, bool strong,
                          std::mt19937_64& rng, int64_t n_samples) {
    const double detune = 1.0 + 0.01 * (2.0 * uniform01(rng) - 1.0);
    const double tone_hz = class_tone_hz(c) * detune;
    const double am_rate = (c % 2 == 0) ? 1.5 : 4.5;
    const double amp = 0.5 * strength * (strong ? 1.3 : 1.0);
    const double phase_tone = uniform(rng, 0, 2 * M_PI);
    const double phase_hum = uniform(rng, 0, 2 * M_PI);
    const double phase_am = uniform(rng, 0, 2 * M_PI);

    auto audio = torch::empty({n_samples}, torch::kFloat32);
    auto a = audio.accessor<float, 1>();
    for (int64_t i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double am = 1.0 - 0.4 * strength * (0.5 + 0.5 * std::sin(2 * M_PI * am_rate * t + phase_am));
        double s = amp * am * std::sin(2 * M_PI * tone_hz * t + phase_tone);
        s += 0.25 * std::sin(2 * M_PI * id.hum_hz * t + phase_hum);
        s += 0.22 * gaussian(rng);
        a[i] = static_cast<float>(std::clamp(s, -1.0, 1.0));
    }
    return audio;
}

}  // namespace

std::string synth_class_name(int64_t c) {
    return "expr_" + std::to_string(c);
}

std::string synth_dataset(const std::string& out_dir, const SynthOptions& opts) {
    if (opts.n_identities < 1 || opts.clips_per_identity < 1 || opts.frames_per_clip < 1) {
        throw ArgumentError("identity, clip, and frame counts must be positive");
    }
    if (opts.n_classes < 2) {
        throw ArgumentError("need at least two classes");
    }
    if (!std::isfinite(opts.signal_strength) || opts.signal_strength < 0.0 ||
        opts.signal_strength > 1.0) {
        throw ArgumentError("signal_strength must lie in [0, 1]");
    }

    const fs::path root(out_dir);
    fs::create_directories(root / "media");

    const int64_t clip_samples = 4 * kSampleRate;
    std::vector<ClipRecord> records;
    int64_t clip_counter = 0;

    for (int64_t ident = 0; ident < opts.n_identities; ++ident) {
        const auto id_params = make_identity(opts.seed, ident);
        char id_name[32];
        std::snprintf(id_name, sizeof(id_name), "id%03d", static_cast<int>(ident));

        for (int64_t c = 0; c < opts.n_classes; ++c) {
            for (int64_t j = 0; j < opts.clips_per_identity; ++j) {
                const bool strong = (ident + c + j) % 2 == 1;
                const std::string clip_id =
                    std::string(id_name) + "_c" + std::to_string(c) + "_k" + std::to_string(j);
                const fs::path clip_dir = root / "media" / clip_id;
                fs::create_directories(clip_dir);

                std::mt19937_64 face_rng(
                    derive_seed(opts.seed, 2000000 + static_cast<uint64_t>(clip_counter)));
                std::mt19937_64 audio_rng(
                    derive_seed(opts.seed, 3000000 + static_cast<uint64_t>(clip_counter)));

                const double cue = strong ? 1.3 : 1.0;
                auto base = class_expression(c, opts.n_classes);
                Expression clip_expr;
                clip_expr.curve = cue * base.curve + 0.33 * gaussian(face_rng);
                clip_expr.open = cue * base.open + 0.33 * gaussian(face_rng);
                clip_expr.eye_open = cue * base.eye_open + 0.33 * gaussian(face_rng);
                clip_expr.brow = cue * base.brow + 0.33 * gaussian(face_rng);

                for (int64_t f = 0; f < opts.frames_per_clip; ++f) {
                    Expression fe = clip_expr;
                    fe.curve += 0.06 * gaussian(face_rng);
                    fe.open += 0.06 * gaussian(face_rng);
                    fe.eye_open += 0.06 * gaussian(face_rng);
                    fe.brow += 0.06 * gaussian(face_rng);
                    const double jx = 1.5 * (2.0 * uniform01(face_rng) - 1.0);
                    const double jy = 1.5 * (2.0 * uniform01(face_rng) - 1.0);
                    auto img = draw_face(id_params, fe, jx, jy);
                    char frame_name[32];
                    std::snprintf(frame_name, sizeof(frame_name), "frame_%02d.png",
                                  static_cast<int>(f));
                    write_png(img, (clip_dir / frame_name).string());
                }

                auto audio = synth_audio(id_params, c, opts.signal_strength, strong, audio_rng,
                                         clip_samples);
                write_wav(audio, (clip_dir / "audio.wav").string());

                ClipRecord rec;
                rec.clip_id = clip_id;
                rec.identity = id_name;
                rec.expression_class = synth_class_name(c);
                rec.intensity = strong ? "strong" : "normal";
                rec.video_ref = (fs::path("media") / clip_id).string();
                rec.audio_ref = (fs::path("media") / clip_id / "audio.wav").string();
                records.push_back(std::move(rec));
                ++clip_counter;
            }
        }
    }

    const auto manifest = (root / "manifest.jsonl").string();
    write_manifest(records, manifest);
    return manifest;
}

}  // namespace percept
