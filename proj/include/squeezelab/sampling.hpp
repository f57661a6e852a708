#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "squeezelab/distributions.hpp"

namespace squeezelab {

/// Generator for work unit `stream` of a run seeded with `seed`. Streams of
/// one seed are independent of each other and of the thread schedule.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream);

/// Multinomial sampler over the bins of a joint distribution plus one
/// overflow bin for its truncated mass, drawn as a cascade of conditional
/// binomials (one draw per bin).
class CountSampler {
 public:
  explicit CountSampler(const JointDist& j);

  /// Histogram of n_events draws. Events landing in the overflow bin are
  /// recorded as truncated mass.
  JointDist draw(std::uint64_t n_events, std::mt19937_64& rng) const;

 private:
  std::size_t dim_s_;
  std::size_t dim_i_;
  std::vector<double> probs_;
  // suffix_[b] = mass of bins b.. including overflow.
  std::vector<double> suffix_;
};

/// One histogram of n_events draws from j; deterministic in (j, n_events, seed).
JointDist sample_counts(const JointDist& j, std::uint64_t n_events, std::uint64_t seed);

}  // namespace squeezelab
