#include "fadefree/trellis.hpp"

#include <string>

namespace fadefree {

Trellis::Trellis(const WhitenedChannel& ch) {
    ch.validate();
    memory_ = ch.memory();
    if (memory_ > max_trellis_memory) {
        fail(ErrorKind::Capacity, "trellis memory " + std::to_string(memory_) + " exceeds " +
                                      std::to_string(max_trellis_memory));
    }
    mask_ = memory_ == 0 ? 0 : (memory_ == 64 ? ~State{0} : ((State{1} << memory_) - 1));
    h0_ = ch.h[0];
    const int n_chunks = (memory_ + 7) / 8;
    chunks_.resize(static_cast<std::size_t>(n_chunks));
    for (int c = 0; c < n_chunks; ++c) {
        for (unsigned byte = 0; byte < 256; ++byte) {
            double acc = 0.0;
            for (int t = 0; t < 8; ++t) {
                const int tap = 8 * c + t + 1;
                if (tap > memory_) break;
                acc += ch.h[static_cast<std::size_t>(tap)] * (((byte >> t) & 1u) ? 1.0 : -1.0);
            }
            chunks_[static_cast<std::size_t>(c)][byte] = acc;
        }
    }
}

std::vector<double> Trellis::output_table() const {
    const std::uint64_t states = num_states();
    std::vector<double> table(2 * states);
    for (State s = 0; s < states; ++s) {
        table[2 * s] = output(s, -1);
        table[2 * s + 1] = output(s, +1);
    }
    return table;
}

Trellis build_trellis(const WhitenedChannel& ch, int state_cap) {
    ch.validate();
    require(ch.memory() >= 0, "trellis: memory must be non-negative");
    if (ch.memory() > state_cap) {
        fail(ErrorKind::Capacity, "state space too large: L=" + std::to_string(ch.memory()) +
                                      " exceeds the full-state cap of " + std::to_string(state_cap));
    }
    return Trellis(ch);
}

State state_from_history(std::span<const Pam2> recent, int memory) {
    require(memory >= 0 && memory <= max_trellis_memory, "state_from_history: memory out of range");
    State s = 0;
    for (int age = 1; age <= memory; ++age) {
        const bool have = static_cast<std::size_t>(age) <= recent.size();
        const Pam2 c = have ? recent[recent.size() - static_cast<std::size_t>(age)] : Pam2{-1};
        if (c > 0) s |= State{1} << (age - 1);
    }
    return s;
}

} // namespace fadefree
