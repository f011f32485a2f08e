#pragma once

#include <cstdint>
#include <random>

namespace qntk {

/**
 * Seeded generator with a fully specified output sequence.
 *
 * The engine is std::mt19937_64, whose output is fixed by the standard. The
 * real-valued transforms are implemented here rather than taken from
 * <random> distributions (those are implementation-defined), so a given seed
 * yields the same stream with every conforming standard library:
 *
 *  - uniform():  top 53 bits of one engine draw, scaled by 2^-53, in [0, 1).
 *  - normal():   Box-Muller on two uniforms; both outputs are used, the
 *                cosine branch first.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Stream identifiers for substream derivation. Values are part of the
/// reproducibility contract; do not renumber.
enum class Stream : std::uint64_t {
    TrainSamples = 1,
    TestSamples = 2,
    ParamInit = 3,
    Experiment = 4,
};

/// Seed for item `index` of stream `stream` under master `seed`. Independent
/// of thread scheduling by construction.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index);

} // namespace qntk
