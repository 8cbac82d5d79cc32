#include "percept/attention.hpp"

#include <cmath>
#include <utility>

#include "percept/errors.hpp"

namespace percept {

ContextAttentionImpl::ContextAttentionImpl(int64_t latent_dim)
    : latent_dim_(latent_dim) {
    if (latent_dim <= 0) {
        throw ArgumentError("latent dimension must be positive");
    }
    auto make = [&](const char* name) {
        auto layer = register_module(
            name, torch::nn::Linear(torch::nn::LinearOptions(latent_dim, latent_dim)));
        torch::NoGradGuard guard;
        torch::nn::init::normal_(layer->weight, 0.0, 0.02);
        torch::nn::init::zeros_(layer->bias);
        return layer;
    };
    mean_query_ = make("mean_query");
    mean_key_ = make("mean_key");
    mean_value_ = make("mean_value");
    logvar_query_ = make("logvar_query");
    logvar_key_ = make("logvar_key");
    logvar_value_ = make("logvar_value");
}

namespace {

// offset[b] = softmax_rows(outer(q[b], k[b])) . v[b]
std::pair<torch::Tensor, torch::Tensor> attend(const torch::nn::Linear& query,
                                               const torch::nn::Linear& key,
                                               const torch::nn::Linear& value,
                                               const torch::Tensor& context,
                                               const torch::Tensor& face) {
    namespace F = torch::nn::functional;
    auto q = F::linear(context, query->weight, query->bias);
    auto k = F::linear(face, key->weight, key->bias);
    auto v = F::linear(face, value->weight, value->bias);
    auto scores = q.unsqueeze(2) * k.unsqueeze(1);
    auto attn = torch::softmax(scores, 2);
    auto offset = torch::bmm(attn, v.unsqueeze(2)).squeeze(2);
    return {offset, attn};
}

}  // namespace

ShiftResult ContextAttentionImpl::forward(const GaussianLatent& face,
                                          const GaussianLatent& context,
                                          double weight) const {
    if (!std::isfinite(weight) || weight < 0.0) {
        throw ArgumentError("context weight must be finite and non-negative");
    }
    if (!face.defined() || !context.defined()) {
        throw ArgumentError("face and context latents must be defined");
    }
    if (face.dim() != latent_dim_ || context.dim() != latent_dim_) {
        throw DimensionError("latent dimension does not match attention layer");
    }
    if (face.mean().sizes() != context.mean().sizes()) {
        throw DimensionError("face and context batch shapes do not match");
    }

    if (weight == 0.0) {
        ShiftResult out;
        out.shifted = GaussianLatent(face.mean(), face.log_variance());
        out.offset_mean = torch::zeros_like(face.mean());
        out.offset_logvar = torch::zeros_like(face.log_variance());
        return out;
    }

    const bool single = face.mean().dim() == 1;
    auto fm = single ? face.mean().unsqueeze(0) : face.mean();
    auto flv = single ? face.log_variance().unsqueeze(0) : face.log_variance();
    auto cm = single ? context.mean().unsqueeze(0) : context.mean();
    auto clv = single ? context.log_variance().unsqueeze(0) : context.log_variance();

    auto [offset_mean, attn_mean] = attend(mean_query_, mean_key_, mean_value_, cm, fm);
    auto [offset_logvar, attn_lv] = attend(logvar_query_, logvar_key_, logvar_value_, clv, flv);
    (void)attn_lv;

    auto shifted_mean = fm + weight * offset_mean;
    auto shifted_logvar = flv + weight * offset_logvar;

    ShiftResult out;
    if (single) {
        out.shifted = GaussianLatent(shifted_mean.squeeze(0), shifted_logvar.squeeze(0));
        out.offset_mean = offset_mean.squeeze(0);
        out.offset_logvar = offset_logvar.squeeze(0);
        out.attention_map_mean = attn_mean.squeeze(0);
    } else {
        out.shifted = GaussianLatent(shifted_mean, shifted_logvar);
        out.offset_mean = offset_mean;
        out.offset_logvar = offset_logvar;
        out.attention_map_mean = attn_mean;
    }
    return out;
}

}  // namespace percept
