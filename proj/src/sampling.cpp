#include "squeezelab/sampling.hpp"

#include <algorithm>

#include "squeezelab/error.hpp"
#include "squeezelab/numerics.hpp"

namespace squeezelab {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

CountSampler::CountSampler(const JointDist& j)
    : dim_s_(j.dim_s()), dim_i_(j.dim_i()), probs_(j.probs().begin(), j.probs().end()) {
  for (double p : probs_) {
    require(std::isfinite(p) && p >= 0.0, ErrorKind::InvalidData, "cannot sample a negative probability");
  }
  probs_.push_back(std::max(0.0, j.truncated_mass()));
  suffix_.resize(probs_.size());
  CompensatedSum s;
  for (std::size_t b = probs_.size(); b-- > 0;) {
    s.add(probs_[b]);
    suffix_[b] = s.value();
  }
  require(suffix_[0] > 0.0, ErrorKind::InvalidData, "cannot sample an empty distribution");
}

JointDist CountSampler::draw(std::uint64_t n_events, std::mt19937_64& rng) const {
  require(n_events > 0, ErrorKind::InvalidParameter, "n_events must be positive");
  std::vector<std::uint64_t> counts(dim_s_ * dim_i_, 0);
  std::uint64_t remaining = n_events;
  const std::size_t bins = counts.size();
  for (std::size_t b = 0; b < bins && remaining > 0; ++b) {
    const double p = probs_[b];
    if (p == 0.0) continue;
    const double q = p / suffix_[b];
    std::uint64_t c;
    if (q >= 1.0) {
      c = remaining;
    } else {
      std::binomial_distribution<std::int64_t> binom(static_cast<std::int64_t>(remaining), q);
      c = static_cast<std::uint64_t>(binom(rng));
    }
    counts[b] = c;
    remaining -= c;
  }
  // Whatever is left falls into the overflow bin.
  return JointDist::from_counts(dim_s_, dim_i_, std::move(counts), n_events);
}

JointDist sample_counts(const JointDist& j, std::uint64_t n_events, std::uint64_t seed) {
  auto rng = stream_rng(seed, 0);
  return CountSampler(j).draw(n_events, rng);
}

}  // namespace squeezelab
