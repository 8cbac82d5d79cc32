#ifndef PERCEPT_ATTENTION_HPP
#define PERCEPT_ATTENTION_HPP

#include <torch/torch.h>

#include "percept/latent.hpp"

namespace percept {

/// Result of shifting a face latent toward its context.
///
/// `offset_mean` / `offset_logvar` are the raw attention offsets before the
/// context weight is applied, so `shifted.mean = face.mean + weight * offset_mean`
/// (and likewise on the log-variance path, up to the clamp).
/// `attention_map_mean` is the row-stochastic attention map of the mean path;
/// it is left undefined on the weight == 0 fast path, which returns the face
/// latent tensors verbatim.
struct ShiftResult {
    GaussianLatent shifted;
    torch::Tensor offset_mean;
    torch::Tensor offset_logvar;
    torch::Tensor attention_map_mean;
};

/// Context attention over latent means and log-variances.
///
/// Two independent paths, each with query/key/value projections (d x d linear
/// layers with bias): the query comes from the context latent, key and value
/// from the face latent. The outer product of query and key rows is
/// normalized row-wise with softmax, applied to the value, and added back to
/// the face latent scaled by the context weight.
class ContextAttentionImpl : public torch::nn::Module {
public:
    explicit ContextAttentionImpl(int64_t latent_dim);

    /// Accepts single latents of shape (d) or batches of shape (B, d).
    /// `weight` must be finite and non-negative; 0 bypasses the attention
    /// computation entirely.
    ShiftResult forward(const GaussianLatent& face, const GaussianLatent& context,
                        double weight) const;

    int64_t latent_dim() const { return latent_dim_; }

private:
    int64_t latent_dim_ = 0;
    torch::nn::Linear mean_query_{nullptr}, mean_key_{nullptr}, mean_value_{nullptr};
    torch::nn::Linear logvar_query_{nullptr}, logvar_key_{nullptr}, logvar_value_{nullptr};
};

TORCH_MODULE(ContextAttention);

}  // namespace percept

#endif
