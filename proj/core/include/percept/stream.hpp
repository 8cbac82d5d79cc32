#ifndef PERCEPT_STREAM_HPP
#define PERCEPT_STREAM_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "percept/latent.hpp"

namespace percept {

/// Hyperparameters of one reconstruction stream. Defaults are the full-scale
/// values; desk-scale runs shrink latent_dim, base_channels, and depths
/// through the run configuration.
struct StreamConfig {
    int64_t input_channels = 3;   // 3 face, 1 context
    int64_t input_size = 128;
    int64_t latent_dim = 512;
    int64_t encoder_depth = 16;
    int64_t decoder_depth = 16;
    int64_t base_channels = 64;
    int64_t feature_layer_index = 4;  // penultimate discriminator feature map
    double beta = 1e-5;               // prior-loss weight
    double learning_rate = 3e-5;
    double weight_decay = 0.01;

    /// Resolutions halve from input_size down to 4.
    int64_t stages() const;
    /// Residual blocks per stage implied by a depth of
    /// 1 + stages * (1 + 2 * blocks) conv layers.
    int64_t blocks_for_depth(int64_t depth) const;
    /// Number of discriminator feature maps (stages + final logit map).
    int64_t discriminator_features() const;

    void validate() const;
};

/// Scalar losses of one training step.
struct StreamLosses {
    double prior = 0.0;
    double feature = 0.0;
    double gan = 0.0;
};

/// Diagnostic scales on the three loss terms, used by ablation tests to
/// zero out individual terms. All 1 in normal training.
struct LossScales {
    double prior = 1.0;
    double feature = 1.0;
    double gan = 1.0;
};

/// Stepwise learning-rate decay: multiply by `factor` when an epoch index
/// reaches each milestone.
struct LrSchedule {
    std::vector<int64_t> milestones{150, 300};
    double factor = 0.1;
};

/// Pre-activation residual block at constant width.
struct ResidualBlockImpl : torch::nn::Module {
    explicit ResidualBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::InstanceNorm2d norm1{nullptr}, norm2{nullptr};
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Convolutional encoder to a diagonal Gaussian. The trunk downsamples to
/// 4x4 and flattens; two linear heads emit mean and log-variance.
struct EncoderImpl : torch::nn::Module {
    explicit EncoderImpl(const StreamConfig& cfg);
    torch::Tensor trunk_features(const torch::Tensor& x);  // (B, feature_dim)
    GaussianLatent head(const torch::Tensor& features);
    GaussianLatent forward(const torch::Tensor& x);

    torch::nn::Sequential trunk{nullptr};
    torch::nn::Linear fc_mean{nullptr}, fc_logvar{nullptr};
    int64_t feature_dim = 0;
};
TORCH_MODULE(Encoder);

/// Decoder mirroring the encoder: linear from latent to 4x4 maps, then
/// nearest-neighbor upsampling stages to the input resolution, tanh output.
struct DecoderImpl : torch::nn::Module {
    explicit DecoderImpl(const StreamConfig& cfg);
    torch::Tensor forward(const torch::Tensor& z);

    torch::nn::Linear fc{nullptr};
    torch::nn::Sequential stages{nullptr};
    int64_t start_channels = 0;
};
TORCH_MODULE(Decoder);

/// Patch discriminator downsampling to 4x4 plus a scalar logit head.
/// `features` exposes every stage activation and the logit map for the
/// feature-matching loss.
struct DiscriminatorImpl : torch::nn::Module {
    explicit DiscriminatorImpl(const StreamConfig& cfg);
    std::vector<torch::Tensor> features(const torch::Tensor& x);
    /// D(x) in (0, 1), clamped away from the boundaries by kProbEps.
    torch::Tensor forward(const torch::Tensor& x);

    static constexpr double kProbEps = 1e-6;
    std::vector<torch::nn::Sequential> stage_mods;
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(Discriminator);

/// One VAE-GAN stream: encoder, decoder, and discriminator with the
/// three-way update split. Instantiated for faces (3-channel) and for
/// spectrogram contexts (1-channel).
class ReconstructionStream {
public:
    ReconstructionStream(StreamConfig cfg, uint64_t seed);

    const StreamConfig& config() const { return cfg_; }

    /// Encodes a (C,H,W) image or (B,C,H,W) batch; deterministic given
    /// parameters.
    GaussianLatent encode(const torch::Tensor& x) const;

    /// Decodes a latent vector (d) or batch (B,d) to images in [-1, 1].
    torch::Tensor decode(const torch::Tensor& z) const;

    /// Encoder trunk activations before the mean/log-variance heads, and
    /// the head projection alone; together they equal encode.
    torch::Tensor trunk_features(const torch::Tensor& x) const;
    GaussianLatent head_latent(const torch::Tensor& features) const;

    /// MSE between discriminator feature maps at the configured layer.
    torch::Tensor feature_loss(const torch::Tensor& x, const torch::Tensor& x_hat) const;
    double discriminator_feature_loss(const torch::Tensor& x, const torch::Tensor& x_hat) const;

    /// log D(x) + log(1 - D(x_recon)) + log(1 - D(x_noise)), averaged over
    /// the batch. D is clamped to (0, 1) before the logs.
    torch::Tensor gan_value(const torch::Tensor& x, const torch::Tensor& x_recon,
                            const torch::Tensor& x_noise) const;
    double gan_loss(const torch::Tensor& x, const torch::Tensor& x_recon,
                    const torch::Tensor& x_noise) const;

    /// One joint update from a single forward pass: the encoder descends
    /// beta * prior + feature, the decoder descends feature plus its
    /// adversarial terms, the discriminator ascends the GAN value. Noise is
    /// drawn from private generators derived from rng_seed.
    StreamLosses training_step(const torch::Tensor& batch, uint64_t rng_seed,
                               const LossScales& scales = {});

    /// Epoch loop over an in-memory (N,C,H,W) dataset with seeded shuffling,
    /// optional horizontal-flip augmentation, and the milestone lr schedule.
    /// Returns per-epoch mean losses.
    std::vector<StreamLosses> pretrain(const torch::Tensor& dataset, int64_t epochs,
                                       const LrSchedule& schedule, int64_t batch_size,
                                       uint64_t seed, bool flip_augment);

    void freeze();
    bool frozen() const;
    /// Re-enables gradients on the two encoder head layers only.
    void unfreeze_encoder_head();

    double current_lr() const;

    Encoder& encoder() { return encoder_; }
    Decoder& decoder() { return decoder_; }
    Discriminator& discriminator() { return discriminator_; }
    const Encoder& encoder() const { return encoder_; }
    const Decoder& decoder() const { return decoder_; }
    const Discriminator& discriminator() const { return discriminator_; }

    std::vector<torch::Tensor> encoder_head_parameters() const;

    /// All parameters as (name, tensor) pairs with encoder./decoder./
    /// discriminator. prefixes, in a stable order.
    std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;

private:
    torch::Tensor require_batch(const torch::Tensor& x, const char* what) const;

    // Module forwards are non-const in torch; these recover mutable access
    // for the logically pure passes (no running stats anywhere).
    EncoderImpl& enc() const;
    DecoderImpl& dec() const;
    DiscriminatorImpl& disc() const;

    StreamConfig cfg_;
    Encoder encoder_{nullptr};
    Decoder decoder_{nullptr};
    Discriminator discriminator_{nullptr};
    std::unique_ptr<torch::optim::Adam> enc_opt_, dec_opt_, disc_opt_;
};

}  // namespace percept

#endif
