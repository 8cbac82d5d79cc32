#ifndef PERCEPT_LATENT_HPP
#define PERCEPT_LATENT_HPP

#include <cstdint>

#include <torch/torch.h>

#include "percept/errors.hpp"

namespace percept {

/// Log-variance is clamped to this range whenever a GaussianLatent is built,
/// so exp() can never overflow and downstream log-scale shifts stay additive.
inline constexpr double kLogVarMin = -30.0;
inline constexpr double kLogVarMax = 20.0;

/// Diagonal Gaussian over the latent space, parameterized by mean and
/// log-variance. The trailing tensor dimension is the latent dimension d;
/// leading dimensions (if any) are batch dimensions. Tensors may carry
/// autograd state, so a GaussianLatent built from network outputs stays
/// differentiable end to end.
class GaussianLatent {
public:
    GaussianLatent() = default;

    /// Validates matching shapes and finite entries, then clamps the
    /// log-variance into [kLogVarMin, kLogVarMax].
    GaussianLatent(torch::Tensor mean, torch::Tensor log_variance);

    const torch::Tensor& mean() const { return mean_; }
    const torch::Tensor& log_variance() const { return log_variance_; }

    bool defined() const { return mean_.defined(); }
    int64_t dim() const { return mean_.size(-1); }

    /// Standard deviation, exp(0.5 * log_variance).
    torch::Tensor stddev() const { return torch::exp(0.5 * log_variance_); }

    /// Elementwise variance, exp(log_variance).
    torch::Tensor variance() const { return torch::exp(log_variance_); }

private:
    torch::Tensor mean_;
    torch::Tensor log_variance_;
};

/// mean + exp(0.5 * log_variance) * noise. Noise must match the latent
/// shape. Differentiable in the latent parameters.
torch::Tensor reparameterize(const GaussianLatent& lat, const torch::Tensor& noise);

/// Per-sample KL(q || N(0, I)) = 1/2 * sum_i(mu_i^2 + var_i - logvar_i - 1),
/// summed over the latent dimension. Shape = batch shape (0-dim for a plain
/// vector latent). Differentiable.
torch::Tensor kl_to_standard_normal_batch(const GaussianLatent& lat);

/// Scalar convenience form of the above for a single (1-D) latent.
double kl_to_standard_normal(const GaussianLatent& lat);

/// Per-sample KL(p || q) between diagonal Gaussians of equal dimension.
/// Zero iff p and q coincide elementwise. Differentiable.
torch::Tensor kl_between_batch(const GaussianLatent& p, const GaussianLatent& q);

/// Scalar convenience form for single (1-D) latents.
double kl_between(const GaussianLatent& p, const GaussianLatent& q);

/// Draw z ~ N(0, I_d) from a private generator; deterministic per seed and
/// independent of the global RNG state.
torch::Tensor sample_prior(int64_t d, uint64_t seed,
                           torch::Dtype dtype = torch::kFloat32);

}  // namespace percept

#endif
