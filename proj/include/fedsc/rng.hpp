#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace fedsc {

// All randomness in the simulator flows through this stream so that a run is
// reproducible bit-for-bit from its seed. The generator (xoshiro256**) and the
// uniform/normal transforms are pinned here instead of relying on
// <random> distributions, whose output is implementation-defined.
//
// Substreams are derived from the *creation key*, not the consumed state, so
// forking is order-independent: fork(device).fork(round) names the same stream
// no matter how much the parent has been consumed.
class RngStream {
  public:
    explicit RngStream(std::uint64_t key) : key_(key) {
        std::uint64_t x = key;
        for (auto& word : state_) word = splitmix64(x);
    }

    RngStream fork(std::uint64_t tag) const {
        std::uint64_t x = key_ + 0x9E3779B97F4A7C15ULL * (tag + 1);
        return RngStream(splitmix64(x));
    }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53 significant bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; the spare is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

  private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t key_;
    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stream tags used to carve the master seed into independent substreams.
namespace streams {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kTestset = 2;
inline constexpr std::uint64_t kReserve = 3;
inline constexpr std::uint64_t kPartition = 4;
inline constexpr std::uint64_t kModelInit = 5;
inline constexpr std::uint64_t kAdversaries = 6;
inline constexpr std::uint64_t kDevice = 7;
inline constexpr std::uint64_t kDynamics = 8;
inline constexpr std::uint64_t kPretrain = 9;
inline constexpr std::uint64_t kTheory = 10;
}  // namespace streams

}  // namespace fedsc
