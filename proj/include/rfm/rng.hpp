#pragma once

#include <array>
#include <cstdint>

namespace rfm {

/* Philox4x64-10 counter-based generator (Salmon, Moraes, Dror, Shaw 2011).
 *
 * All state is (key, counter) integer arithmetic, so a given (seed, stream)
 * pair yields the same draws on every platform and the generator can be
 * split into as many independent streams as there are work items. Parallel
 * code assigns one stream per task; results then never depend on thread
 * scheduling. Matches numpy.random.Philox output modulo numpy's counter
 * pre-increment (numpy's first block is counter [1,0,0,0] here).
 *
 * Uniform doubles take the top 53 bits. Normals are Box-Muller pairs; the
 * uniform stream is bit-identical everywhere, the normal bits additionally
 * depend on libm's log/cos/sin rounding.
 */
class Philox {
public:
    explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
        : key_{seed, stream}, counter_{0, 0, 0, 0} {}

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            block_ = block(counter_, key_);
            bump_counter();
            pos_ = 0;
        }
        return block_[pos_++];
    }

    /// Uniform on [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second variate of each pair is
    /// cached so consecutive calls consume one uniform pair per two normals.
    double next_normal();

    /// Uniform integer on [0, n) by rejection (unbiased).
    std::uint64_t next_below(std::uint64_t n);

    /// One raw 4-word block for the given counter/key, no state involved.
    static std::array<std::uint64_t, 4> block(const std::array<std::uint64_t, 4>& counter,
                                              const std::array<std::uint64_t, 2>& key);

private:
    void bump_counter() {
        for (auto& c : counter_)
            if (++c != 0) break;
    }

    std::array<std::uint64_t, 2> key_;
    std::array<std::uint64_t, 4> counter_;
    std::array<std::uint64_t, 4> block_{};
    int pos_ = 4;
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

/// Deterministic sub-seed for a tagged purpose (per-replication data seeds,
/// per-trial start seeds, ...). Distinct tags give independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

} // namespace rfm
