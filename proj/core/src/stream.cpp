#include "percept/stream.hpp"

#include <cmath>

#include "percept/errors.hpp"
#include "percept/runtime.hpp"

namespace percept {

namespace {

torch::nn::InstanceNorm2d make_norm(int64_t channels) {
    return torch::nn::InstanceNorm2d(
        torch::nn::InstanceNorm2dOptions(channels).affine(true).track_running_stats(false));
}

torch::nn::Conv2d conv3(int64_t in, int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::nn::Conv2d down4(int64_t in, int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
}

int64_t enc_channels(int64_t base, int64_t stage) {
    // stem emits base; stage outputs double up to a cap of 8 * base
    const int64_t cap = 8 * base;
    int64_t ch = base;
    for (int64_t i = 0; i <= stage; ++i) {
        ch = std::min(2 * ch, cap);
    }
    return ch;
}

}  // namespace

int64_t StreamConfig::stages() const {
    int64_t size = input_size;
    int64_t n = 0;
    while (size > 4) {
        size /= 2;
        ++n;
    }
    return n;
}

int64_t StreamConfig::blocks_for_depth(int64_t depth) const {
    const int64_t s = stages();
    if (depth < 1 + s || (depth - 1) % s != 0 || ((depth - 1) / s - 1) % 2 != 0) {
        throw ConfigError("depth " + std::to_string(depth) + " does not fit " +
                          std::to_string(s) + " stages (need 1 + stages * (1 + 2k))");
    }
    return ((depth - 1) / s - 1) / 2;
}

int64_t StreamConfig::discriminator_features() const {
    return stages() + 1;
}

void StreamConfig::validate() const {
    if (input_channels != 1 && input_channels != 3) {
        throw ConfigError("input_channels must be 1 or 3");
    }
    int64_t size = input_size;
    while (size > 4 && size % 2 == 0) size /= 2;
    if (size != 4 || input_size < 8) {
        throw ConfigError("input_size must be 4 * 2^n with n >= 1");
    }
    if (latent_dim <= 0) {
        throw ConfigError("latent_dim must be positive");
    }
    if (base_channels <= 0) {
        throw ConfigError("base_channels must be positive");
    }
    blocks_for_depth(encoder_depth);
    blocks_for_depth(decoder_depth);
    if (feature_layer_index < 0 || feature_layer_index >= discriminator_features()) {
        throw ConfigError("feature_layer_index out of range");
    }
    if (!std::isfinite(beta) || beta < 0.0) {
        throw ConfigError("beta must be finite and non-negative");
    }
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
        throw ConfigError("learning_rate must be positive");
    }
    if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
        throw ConfigError("weight_decay must be finite and non-negative");
    }
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels) {
    norm1 = register_module("norm1", make_norm(channels));
    conv1 = register_module("conv1", conv3(channels, channels));
    norm2 = register_module("norm2", make_norm(channels));
    conv2 = register_module("conv2", conv3(channels, channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    auto h = conv1->forward(torch::relu(norm1->forward(x)));
    h = conv2->forward(torch::relu(norm2->forward(h)));
    return x + h;
}

EncoderImpl::EncoderImpl(const StreamConfig& cfg) {
    const int64_t s = cfg.stages();
    const int64_t blocks = cfg.blocks_for_depth(cfg.encoder_depth);

    trunk = torch::nn::Sequential();
    trunk->push_back(conv3(cfg.input_channels, cfg.base_channels));
    trunk->push_back(make_norm(cfg.base_channels));
    trunk->push_back(torch::nn::ReLU());

    int64_t ch = cfg.base_channels;
    for (int64_t i = 0; i < s; ++i) {
        const int64_t out = enc_channels(cfg.base_channels, i);
        trunk->push_back(down4(ch, out));
        trunk->push_back(make_norm(out));
        trunk->push_back(torch::nn::ReLU());
        for (int64_t b = 0; b < blocks; ++b) {
            trunk->push_back(ResidualBlock(out));
        }
        ch = out;
    }
    register_module("trunk", trunk);

    feature_dim = ch * 4 * 4;
    fc_mean = register_module("fc_mean", torch::nn::Linear(feature_dim, cfg.latent_dim));
    fc_logvar = register_module("fc_logvar", torch::nn::Linear(feature_dim, cfg.latent_dim));
}

torch::Tensor EncoderImpl::trunk_features(const torch::Tensor& x) {
    return trunk->forward(x).flatten(1);
}

GaussianLatent EncoderImpl::head(const torch::Tensor& features) {
    return GaussianLatent(fc_mean->forward(features), fc_logvar->forward(features));
}

GaussianLatent EncoderImpl::forward(const torch::Tensor& x) {
    return head(trunk_features(x));
}

DecoderImpl::DecoderImpl(const StreamConfig& cfg) {
    const int64_t s = cfg.stages();
    const int64_t blocks = cfg.blocks_for_depth(cfg.decoder_depth);

    start_channels = enc_channels(cfg.base_channels, s - 1);
    fc = register_module("fc", torch::nn::Linear(cfg.latent_dim, start_channels * 4 * 4));

    stages = torch::nn::Sequential();
    int64_t ch = start_channels;
    for (int64_t i = 0; i < s; ++i) {
        const bool last = i == s - 1;
        // mirror the encoder: the map at each resolution keeps its width
        const int64_t out = last ? cfg.input_channels : enc_channels(cfg.base_channels, s - 2 - i);
        for (int64_t b = 0; b < blocks; ++b) {
            stages->push_back(ResidualBlock(ch));
        }
        stages->push_back(torch::nn::Upsample(
            torch::nn::UpsampleOptions().scale_factor(std::vector<double>{2, 2}).mode(torch::kNearest)));
        stages->push_back(conv3(ch, out));
        if (last) {
            stages->push_back(torch::nn::Tanh());
        } else {
            stages->push_back(make_norm(out));
            stages->push_back(torch::nn::ReLU());
        }
        ch = out;
    }
    register_module("stages", stages);
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z) {
    auto maps = fc->forward(z).view({z.size(0), start_channels, 4, 4});
    return stages->forward(maps);
}

DiscriminatorImpl::DiscriminatorImpl(const StreamConfig& cfg) {
    const int64_t s = cfg.stages();
    int64_t ch = cfg.input_channels;
    for (int64_t i = 0; i < s; ++i) {
        const int64_t out = enc_channels(cfg.base_channels, i) / 2;
        auto stage = torch::nn::Sequential();
        stage->push_back(down4(ch, out));
        if (i > 0) {
            stage->push_back(make_norm(out));
        }
        stage->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
        stage_mods.push_back(register_module("stage" + std::to_string(i), stage));
        ch = out;
    }
    head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, 1, 4)));
}

std::vector<torch::Tensor> DiscriminatorImpl::features(const torch::Tensor& x) {
    std::vector<torch::Tensor> out;
    auto h = x;
    for (auto& stage : stage_mods) {
        h = stage->forward(h);
        out.push_back(h);
    }
    out.push_back(head->forward(h));
    return out;
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
    auto h = x;
    for (auto& stage : stage_mods) {
        h = stage->forward(h);
    }
    auto logits = head->forward(h).flatten(1).squeeze(-1);
    return torch::clamp(torch::sigmoid(logits), kProbEps, 1.0 - kProbEps);
}

ReconstructionStream::ReconstructionStream(StreamConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    torch::manual_seed(seed);
    encoder_ = Encoder(cfg_);
    decoder_ = Decoder(cfg_);
    discriminator_ = Discriminator(cfg_);

    auto opts = torch::optim::AdamOptions(cfg_.learning_rate).weight_decay(cfg_.weight_decay);
    enc_opt_ = std::make_unique<torch::optim::Adam>(encoder_->parameters(), opts);
    dec_opt_ = std::make_unique<torch::optim::Adam>(decoder_->parameters(), opts);
    disc_opt_ = std::make_unique<torch::optim::Adam>(discriminator_->parameters(), opts);
}

torch::Tensor ReconstructionStream::require_batch(const torch::Tensor& x, const char* what) const {
    torch::Tensor batch = x;
    if (batch.dim() == 3) {
        batch = batch.unsqueeze(0);
    }
    if (batch.dim() != 4 || batch.size(1) != cfg_.input_channels ||
        batch.size(2) != cfg_.input_size || batch.size(3) != cfg_.input_size) {
        throw DimensionError(std::string(what) + " shape does not match stream config");
    }
    return batch;
}


EncoderImpl& ReconstructionStream::enc() const {
    return *const_cast<ReconstructionStream*>(this)->encoder_;
}

DecoderImpl& ReconstructionStream::dec() const {
    return *const_cast<ReconstructionStream*>(this)->decoder_;
}

DiscriminatorImpl& ReconstructionStream::disc() const {
    return *const_cast<ReconstructionStream*>(this)->discriminator_;
}

GaussianLatent ReconstructionStream::encode(const torch::Tensor& x) const {
    const bool single = x.dim() == 3;
    auto lat = enc().forward(require_batch(x, "input"));
    if (single) {
        return GaussianLatent(lat.mean().squeeze(0), lat.log_variance().squeeze(0));
    }
    return lat;
}

torch::Tensor ReconstructionStream::decode(const torch::Tensor& z) const {
    const bool single = z.dim() == 1;
    auto zz = single ? z.unsqueeze(0) : z;
    if (zz.dim() != 2 || zz.size(1) != cfg_.latent_dim) {
        throw DimensionError("latent length does not match stream config");
    }
    auto img = dec().forward(zz);
    return single ? img.squeeze(0) : img;
}

torch::Tensor ReconstructionStream::trunk_features(const torch::Tensor& x) const {
    return enc().trunk_features(require_batch(x, "input"));
}

GaussianLatent ReconstructionStream::head_latent(const torch::Tensor& features) const {
    if (features.dim() != 2 || features.size(1) != encoder_->feature_dim) {
        throw DimensionError("trunk feature width does not match encoder head");
    }
    return enc().head(features);
}

torch::Tensor ReconstructionStream::feature_loss(const torch::Tensor& x,
                                                 const torch::Tensor& x_hat) const {
    auto a = require_batch(x, "input");
    auto b = require_batch(x_hat, "reconstruction");
    if (a.sizes() != b.sizes()) {
        throw DimensionError("feature loss inputs must share one shape");
    }
    const auto l = static_cast<size_t>(cfg_.feature_layer_index);
    auto fa = disc().features(a)[l];
    auto fb = disc().features(b)[l];
    return torch::mse_loss(fb, fa);
}

double ReconstructionStream::discriminator_feature_loss(const torch::Tensor& x,
                                                        const torch::Tensor& x_hat) const {
    torch::NoGradGuard guard;
    return feature_loss(x, x_hat).item<double>();
}

torch::Tensor ReconstructionStream::gan_value(const torch::Tensor& x,
                                              const torch::Tensor& x_recon,
                                              const torch::Tensor& x_noise) const {
    auto real = require_batch(x, "input");
    auto recon = require_batch(x_recon, "reconstruction");
    auto noise = require_batch(x_noise, "noise decode");
    auto p_real = disc().forward(real);
    auto p_recon = disc().forward(recon);
    auto p_noise = disc().forward(noise);
    auto value = torch::log(p_real).mean() + torch::log(1.0 - p_recon).mean() +
                 torch::log(1.0 - p_noise).mean();
    if (!torch::isfinite(value).item<bool>()) {
        throw NumericError("adversarial value is not finite");
    }
    return value;
}

double ReconstructionStream::gan_loss(const torch::Tensor& x, const torch::Tensor& x_recon,
                                      const torch::Tensor& x_noise) const {
    torch::NoGradGuard guard;
    return gan_value(x, x_recon, x_noise).item<double>();
}

StreamLosses ReconstructionStream::training_step(const torch::Tensor& batch, uint64_t rng_seed,
                                                 const LossScales& scales) {
    if (frozen()) {
        throw ConfigError("stream is frozen");
    }
    if (!batch.defined() || batch.numel() == 0) {
        throw ArgumentError("training batch is empty");
    }
    auto x = require_batch(batch, "batch");
    const int64_t n = x.size(0);

    auto eps_gen = make_generator(derive_seed(rng_seed, 0));
    auto prior_gen = make_generator(derive_seed(rng_seed, 1));
    auto eps = torch::randn({n, cfg_.latent_dim}, eps_gen, x.options());
    auto z_prior = torch::randn({n, cfg_.latent_dim}, prior_gen, x.options());

    auto lat = encoder_->forward(x);
    auto z = reparameterize(lat, eps);
    auto x_hat = decoder_->forward(z);
    auto x_noise = decoder_->forward(z_prior);

    auto prior = kl_to_standard_normal_batch(lat).mean();
    auto feature = feature_loss(x, x_hat);

    auto p_real = discriminator_->forward(x);
    auto p_recon = discriminator_->forward(x_hat);
    auto p_noise = discriminator_->forward(x_noise);
    auto log_fake = torch::log(1.0 - p_recon).mean() + torch::log(1.0 - p_noise).mean();
    auto gan = torch::log(p_real).mean() + log_fake;

    StreamLosses report{prior.item<double>(), feature.item<double>(), gan.item<double>()};
    if (!std::isfinite(report.prior) || !std::isfinite(report.feature) ||
        !std::isfinite(report.gan)) {
        throw NumericError("non-finite loss, step aborted");
    }

    auto enc_loss = cfg_.beta * scales.prior * prior + scales.feature * feature;
    auto dec_loss = scales.feature * feature + scales.gan * log_fake;
    auto disc_loss = -scales.gan * gan;

    auto enc_params = encoder_->parameters();
    auto dec_params = decoder_->parameters();
    auto disc_params = discriminator_->parameters();

    auto apply = [](torch::optim::Adam& opt, const std::vector<torch::Tensor>& params,
                    const std::vector<torch::Tensor>& grads) {
        for (size_t i = 0; i < params.size(); ++i) {
            if (grads[i].defined()) {
                params[i].mutable_grad() = grads[i];
            } else {
                params[i].mutable_grad() = torch::zeros_like(params[i]);
            }
        }
        opt.step();
        for (const auto& p : params) {
            p.mutable_grad().reset();
        }
    };

    auto enc_grads = torch::autograd::grad({enc_loss}, enc_params, {}, true, false, true);
    auto dec_grads = torch::autograd::grad({dec_loss}, dec_params, {}, true, false, true);
    auto disc_grads = torch::autograd::grad({disc_loss}, disc_params, {}, false, false, true);

    apply(*enc_opt_, enc_params, enc_grads);
    apply(*dec_opt_, dec_params, dec_grads);
    apply(*disc_opt_, disc_params, disc_grads);

    return report;
}

std::vector<StreamLosses> ReconstructionStream::pretrain(const torch::Tensor& dataset,
                                                         int64_t epochs,
                                                         const LrSchedule& schedule,
                                                         int64_t batch_size, uint64_t seed,
                                                         bool flip_augment) {
    if (epochs < 1) {
        throw ArgumentError("pretraining needs at least one epoch");
    }
    if (!dataset.defined() || dataset.numel() == 0) {
        throw ArgumentError("pretraining dataset is empty");
    }
    if (batch_size < 1) {
        throw ArgumentError("batch size must be positive");
    }
    auto data = require_batch(dataset, "dataset");
    const int64_t n = data.size(0);

    std::vector<StreamLosses> history;
    history.reserve(epochs);
    for (int64_t epoch = 0; epoch < epochs; ++epoch) {
        double lr = cfg_.learning_rate;
        for (const int64_t milestone : schedule.milestones) {
            if (epoch >= milestone) lr *= schedule.factor;
        }
        for (auto* opt : {enc_opt_.get(), dec_opt_.get(), disc_opt_.get()}) {
            for (auto& group : opt->param_groups()) {
                static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
            }
        }

        auto order_gen = make_generator(derive_seed(seed, (1ULL << 40) + epoch));
        auto perm = torch::randperm(n, order_gen, torch::kInt64);

        StreamLosses sum;
        int64_t steps = 0;
        for (int64_t at = 0; at < n; at += batch_size) {
            const int64_t take = std::min(batch_size, n - at);
            auto idx = perm.slice(0, at, at + take);
            auto batch = data.index_select(0, idx);
            if (flip_augment) {
                auto mask = torch::rand({take, 1, 1, 1}, order_gen, torch::kFloat32).lt(0.5);
                batch = torch::where(mask, batch.flip(-1), batch);
            }
            const auto losses = training_step(
                batch, derive_seed(seed, (static_cast<uint64_t>(epoch) << 20) + steps));
            sum.prior += losses.prior;
            sum.feature += losses.feature;
            sum.gan += losses.gan;
            ++steps;
        }
        history.push_back({sum.prior / steps, sum.feature / steps, sum.gan / steps});
    }
    return history;
}

void ReconstructionStream::freeze() {
    for (auto* mod :
         {static_cast<torch::nn::Module*>(encoder_.get()),
          static_cast<torch::nn::Module*>(decoder_.get()),
          static_cast<torch::nn::Module*>(discriminator_.get())}) {
        for (auto& p : mod->parameters()) {
            p.set_requires_grad(false);
        }
    }
}

bool ReconstructionStream::frozen() const {
    for (const auto* mod :
         {static_cast<const torch::nn::Module*>(encoder_.get()),
          static_cast<const torch::nn::Module*>(decoder_.get()),
          static_cast<const torch::nn::Module*>(discriminator_.get())}) {
        for (const auto& p : mod->parameters()) {
            if (p.requires_grad()) return false;
        }
    }
    return true;
}

void ReconstructionStream::unfreeze_encoder_head() {
    for (auto& p : encoder_head_parameters()) {
        p.set_requires_grad(true);
    }
}

double ReconstructionStream::current_lr() const {
    const auto& group = enc_opt_->param_groups().front();
    return static_cast<const torch::optim::AdamOptions&>(group.options()).lr();
}

std::vector<torch::Tensor> ReconstructionStream::encoder_head_parameters() const {
    return {encoder_->fc_mean->weight, encoder_->fc_mean->bias, encoder_->fc_logvar->weight,
            encoder_->fc_logvar->bias};
}

std::vector<std::pair<std::string, torch::Tensor>> ReconstructionStream::named_parameters()
    const {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    auto collect = [&](const char* prefix, const torch::nn::Module& mod) {
        for (const auto& item : mod.named_parameters()) {
            out.emplace_back(std::string(prefix) + item.key(), item.value());
        }
    };
    collect("encoder.", *encoder_);
    collect("decoder.", *decoder_);
    collect("discriminator.", *discriminator_);
    return out;
}

}  // namespace percept
