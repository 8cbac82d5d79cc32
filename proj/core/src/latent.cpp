#include "percept/latent.hpp"

#include "percept/runtime.hpp"

namespace percept {

namespace {

void check_finite(const torch::Tensor& t, const char* what) {
    if (!torch::isfinite(t).all().item<bool>()) {
        throw NumericError(std::string(what) + " contains non-finite values");
    }
}

void check_same_shape(const GaussianLatent& p, const GaussianLatent& q) {
    if (p.mean().sizes() != q.mean().sizes()) {
        throw DimensionError("latent dimensions do not match");
    }
}

torch::Tensor require_vector(const torch::Tensor& t, const char* what) {
    if (t.dim() != 1) {
        throw DimensionError(std::string(what) + " must be a 1-D latent");
    }
    return t;
}

}  // namespace

GaussianLatent::GaussianLatent(torch::Tensor mean, torch::Tensor log_variance) {
    if (!mean.defined() || !log_variance.defined()) {
        throw ArgumentError("latent tensors must be defined");
    }
    if (mean.sizes() != log_variance.sizes()) {
        throw DimensionError("mean and log-variance shapes do not match");
    }
    if (mean.numel() == 0) {
        throw DimensionError("latent must have at least one component");
    }
    check_finite(mean, "latent mean");
    check_finite(log_variance, "latent log-variance");
    mean_ = std::move(mean);
    log_variance_ = torch::clamp(std::move(log_variance), kLogVarMin, kLogVarMax);
}

torch::Tensor reparameterize(const GaussianLatent& lat, const torch::Tensor& noise) {
    if (noise.sizes() != lat.mean().sizes()) {
        throw DimensionError("noise shape does not match latent shape");
    }
    return lat.mean() + lat.stddev() * noise;
}

torch::Tensor kl_to_standard_normal_batch(const GaussianLatent& lat) {
    auto mu2 = lat.mean() * lat.mean();
    auto kl = 0.5 * (mu2 + lat.variance() - lat.log_variance() - 1.0).sum(-1);
    return torch::clamp_min(kl, 0.0);
}

double kl_to_standard_normal(const GaussianLatent& lat) {
    require_vector(lat.mean(), "latent");
    return kl_to_standard_normal_batch(lat).item<double>();
}

torch::Tensor kl_between_batch(const GaussianLatent& p, const GaussianLatent& q) {
    check_same_shape(p, q);
    auto diff = p.mean() - q.mean();
    auto term = (p.variance() + diff * diff) / q.variance()
                + q.log_variance() - p.log_variance() - 1.0;
    return torch::clamp_min(0.5 * term.sum(-1), 0.0);
}

double kl_between(const GaussianLatent& p, const GaussianLatent& q) {
    require_vector(p.mean(), "latent");
    return kl_between_batch(p, q).item<double>();
}

torch::Tensor sample_prior(int64_t d, uint64_t seed, torch::Dtype dtype) {
    if (d <= 0) {
        throw ArgumentError("latent dimension must be positive");
    }
    auto gen = make_generator(seed);
    return torch::randn({d}, gen, torch::TensorOptions().dtype(dtype));
}

}  // namespace percept
