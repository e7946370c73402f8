#pragma once

// Counter-based random number generation.
//
// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// A generator is fully determined by a 64-bit key and a 128-bit counter, so an
// independent stream for any (seed, a, b) tuple is obtained without touching
// shared state. Replications draw from stream(seed, t_index, rep_index).

#include <array>
#include <cstdint>
#include <limits>

namespace randpoly {

class Philox
{
public:
    using result_type = std::uint32_t;

    Philox() : Philox(0) {}

    explicit Philox(std::uint64_t seed, std::uint64_t stream_hi = 0, std::uint64_t stream_lo = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}
        , counter_{0, 0, 0, 0}
    {
        // The upper 64 bits of the counter carry the stream id, the lower 64 bits
        // count blocks inside the stream.
        const std::uint64_t stream = mix(stream_hi) ^ (stream_lo * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
        counter_[2] = static_cast<std::uint32_t>(stream);
        counter_[3] = static_cast<std::uint32_t>(stream >> 32);
    }

    /// Independent stream keyed on (seed, a, b), e.g. (seed, t_index, rep_index).
    static Philox stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
    {
        return Philox(seed, a, b);
    }

    /// Child generator; the parent is not advanced.
    [[nodiscard]] Philox split(std::uint64_t child) const
    {
        const std::uint64_t key = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
        const std::uint64_t stream = (static_cast<std::uint64_t>(counter_[3]) << 32) | counter_[2];
        return Philox(mix(key ^ 0xA0761D6478BD642FULL) ^ stream, child, stream);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (index_ == 4) {
            block_ = generate(counter_, key_);
            increment();
            index_ = 0;
        }
        return block_[index_++];
    }

    void discard(unsigned long long n)
    {
        while (n--) {
            (*this)();
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform()
    {
        const std::uint64_t hi = (*this)() >> 5;
        const std::uint64_t lo = (*this)() >> 6;
        return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
    }

    friend bool operator==(const Philox& a, const Philox& b)
    {
        return a.key_ == b.key_ && a.counter_ == b.counter_ && a.index_ == b.index_;
    }

    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    /// Raw Philox4x32-10 bijection.
    static Block generate(Block ctr, Key key)
    {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

    static std::uint64_t mix(std::uint64_t z)
    {
        // splitmix64 finalizer
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    void increment()
    {
        if (++counter_[0] == 0) {
            ++counter_[1];
        }
    }

    Key key_;
    Block counter_;
    Block block_{};
    int index_ = 4;
};

} // namespace randpoly
