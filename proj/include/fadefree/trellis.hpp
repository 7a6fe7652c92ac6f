#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fadefree/waveform.hpp"
#include "fadefree/whiten.hpp"

namespace fadefree {

/// Bit pattern of the last L PAM2 symbols. Bit j holds c_{k-1-j} (1 for +1),
/// so the newest symbol sits in the least significant bit. For L = 2 the
/// indices enumerate (c_{k-2}, c_{k-1}) = (-1,-1), (-1,+1), (+1,-1), (+1,+1).
using State = std::uint64_t;

inline constexpr int max_trellis_memory = 63;
inline constexpr int default_state_cap = 20;

/// ISI trellis of the whitened channel. Each state has two outgoing branches
/// (input -1 / +1) and two incoming ones; the noiseless branch output is
/// v' = h_0 c_k + sum_{i=1..L} h_i c_{k-i}.
class Trellis {
public:
    explicit Trellis(const WhitenedChannel& ch);

    int memory() const noexcept { return memory_; }
    /// 2^L; only meaningful for full-state use.
    std::uint64_t num_states() const noexcept { return std::uint64_t{1} << memory_; }
    State mask() const noexcept { return mask_; }

    State next_state(State s, Pam2 c) const noexcept {
        return ((s << 1) | (c > 0 ? 1u : 0u)) & mask_;
    }
    double output(State s, Pam2 c) const noexcept {
        double v = h0_ * c;
        for (std::size_t j = 0; j < chunks_.size(); ++j) v += chunks_[j][(s >> (8 * j)) & 0xFFu];
        return v;
    }

    /// Branch outputs for every (state, input) pair, indexed by (s << 1) | bit.
    /// Requires L <= cap.
    std::vector<double> output_table() const;

    /// Symbol c_{k-age} held by state s, age in [1, L].
    static Pam2 symbol_at(State s, int age) noexcept { return ((s >> (age - 1)) & 1u) ? Pam2{1} : Pam2{-1}; }

private:
    int memory_ = 0;
    State mask_ = 0;
    double h0_ = 1.0;
    std::vector<std::array<double, 256>> chunks_;  // ISI contribution per byte of state
};

/// Trellis for the full-state detectors; throws Error(Capacity,
/// "state space too large") when L exceeds the cap.
Trellis build_trellis(const WhitenedChannel& ch, int state_cap = default_state_cap);

/// State reached after the given symbols (time order, oldest first); only the
/// last `memory` of them matter. Shorter histories are padded with -1.
State state_from_history(std::span<const Pam2> recent, int memory);

} // namespace fadefree
