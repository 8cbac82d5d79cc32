#include "percept/runtime.hpp"

#include <ATen/CPUGeneratorImpl.h>

namespace percept {

void configure_runtime(uint64_t seed, int threads) {
    if (threads > 0) {
        torch::set_num_threads(threads);
    }
    torch::manual_seed(seed);
}

torch::Generator make_generator(uint64_t seed) {
    return at::detail::createCPUGenerator(seed);
}

uint64_t derive_seed(uint64_t base, uint64_t salt) {
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace percept
