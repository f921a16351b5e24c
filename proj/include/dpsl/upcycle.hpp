#pragma once

#include <cstdint>
#include <string>

#include "dpsl/ffn.hpp"
#include "dpsl/moe.hpp"
#include "dpsl/rng.hpp"

namespace dpsl::upcycle {

struct UpcycleConfig {
    Eigen::Index n_experts = 4;       // total experts produced
    Eigen::Index granularity = 1;     // G = hidden_dim / expert hidden dim
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;
    bool strided_shards = false;      // contiguous slices by default
    double reinit_ratio = 0.0;        // Drop-Upcycling: fraction of entries re-sampled
};

/// N full-size replicas of the dense FFN, each perturbed entrywise by
/// independent N(0, sigma^2) noise. Requires granularity 1.
ExpertSet standard_upcycle(const GatedFFN& ffn, const UpcycleConfig& config);

/// N = base x G shard experts. Shard s takes hidden slice s of size h/G:
/// columns of W_up/W_gate and rows of W_down. Replicas of the shard set
/// are noise-perturbed as in standard_upcycle.
ExpertSet granular_upcycle(const GatedFFN& ffn, const UpcycleConfig& config);

/// Max absolute deviation between the dense FFN output and the upcycled
/// mixture on random inputs: standard upcycling with renormalized top-K
/// gates, or all G shards of one replica at unit gates.
double equivalence_check(const GatedFFN& dense, const ExpertSet& experts,
                         const UpcycleConfig& config, Eigen::Index n_inputs,
                         std::uint64_t input_seed);

/// Flat binary expert-set format: header (magic "DPEX", u32 version, u32 N,
/// u32 G, u32 d, u32 h, u32 nonlinearity) then per expert W_up, W_gate,
/// W_down as row-major little-endian float64 blocks.
void save_expert_set(const std::string& path, const ExpertSet& experts,
                     Eigen::Index granularity);
ExpertSet load_expert_set(const std::string& path, Eigen::Index* granularity = nullptr);

} // namespace dpsl::upcycle
