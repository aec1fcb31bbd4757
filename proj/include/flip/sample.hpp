#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flip/infer.hpp"
#include "flip/model.hpp"
#include "flip/rng.hpp"
#include "flip/types.hpp"

namespace flip {

struct GlauberConfig {
    Index sweeps_per_record = 1;
    Index attempts_per_sweep = 0;  // 0 resolves to 5N
    Index burn_in_records = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

// One flip attempt: an entity chosen uniformly, then its sign flipped iff the
// flip probability exceeds a fresh uniform draw. Exactly two RNG draws, in
// that order, so runs are bit-reproducible.
void glauber_step(Eigen::Ref<Eigen::VectorXi> state, const CouplingSet& params,
                  Rng& rng);

// Single-chain Glauber sampler for the memoryless model: a random +-1 start,
// burn_in_records discarded, then one configuration recorded per
// sweeps_per_record sweeps of attempts_per_sweep attempts. Emits a warning
// when the first- and second-half means of any entity differ by more than
// four standard errors.
SignPanel glauber_sample(const CouplingSet& params, Index t_records,
                         const GlauberConfig& config,
                         std::vector<std::string>* warnings = nullptr);

// I.i.d. draws from the exactly enumerated distribution (small N oracle).
SignPanel exact_sample(const CouplingSet& params, Index t_records,
                       std::uint64_t seed);

// Latent-Gaussian sampler: sign(g) with g ~ N(mu, sigma); zero maps to +1.
SignPanel sample_dg(const DgParams& params, Index t_records, std::uint64_t seed);

// Zero-padded synthetic labels, lexicographically increasing.
std::vector<std::string> synthetic_entities(Index n);
std::vector<std::string> synthetic_timestamps(Index t);

}  // namespace flip
