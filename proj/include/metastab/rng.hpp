#pragma once

#include <cmath>
#include <cstdint>

namespace metastab {

/// SplitMix64 step; also used as the stream-splitting mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ seeded through SplitMix64. Replica streams are derived
/// from (master_seed, stream_index) so that all streams are mutually
/// independent and the whole ensemble is reproducible from one seed.
///
/// Splitting rule: state = 4 SplitMix64 outputs starting from
/// master_seed XOR splitmix64(stream_index + 1).
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) { reseed(seed, 0); }
    Xoshiro256pp(std::uint64_t master_seed, std::uint64_t stream_index) {
        reseed(master_seed, stream_index);
    }

    void reseed(std::uint64_t master_seed, std::uint64_t stream_index) {
        std::uint64_t mix = stream_index + 1;
        std::uint64_t sm = master_seed ^ splitmix64(mix);
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in (0, 1]; never returns 0 so log() is safe.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    static constexpr const char* family() { return "xoshiro256++/splitmix64"; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

/// Standard Gaussians via Box-Muller on top of a Xoshiro256pp stream.
/// The pairing is fixed so that sequences are platform-independent.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}
    GaussianStream(std::uint64_t master_seed, std::uint64_t stream_index)
        : rng_(master_seed, stream_index) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = rng_.next_uniform();
        double u2 = rng_.next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692528676655900577 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double next_uniform() { return rng_.next_uniform(); }

private:
    Xoshiro256pp rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace metastab
