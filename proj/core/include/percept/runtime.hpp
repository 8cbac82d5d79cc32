#ifndef PERCEPT_RUNTIME_HPP
#define PERCEPT_RUNTIME_HPP

#include <cstdint>

#include <torch/torch.h>

namespace percept {

// Reproducibility helpers. Every command seeds once through here; anything
// that needs an isolated stream (prior samples, swap augmentation, noise)
// derives its own generator so call order elsewhere cannot perturb it.

/// Seed the global torch RNG and pin the intra-op thread count.
/// thread count <= 0 keeps torch's current setting.
void configure_runtime(uint64_t seed, int threads = 1);

/// Fresh CPU generator with its own state, independent of the global RNG.
torch::Generator make_generator(uint64_t seed);

/// Stable 64-bit mix for deriving per-fold / per-epoch / per-item seeds
/// from a base seed (splitmix64 finalizer).
uint64_t derive_seed(uint64_t base, uint64_t salt);

}  // namespace percept

#endif
