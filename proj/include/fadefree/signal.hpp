#pragma once

// Transmit chain and receiver front matter: PRBS, PAM2 mapping, root-raised
// cosine shaping, rational resampling, DAC quantization and timing sync.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fadefree/waveform.hpp"

namespace fadefree {

/// Training preamble followed by payload, PAM2 at one sample per symbol.
struct SymbolFrame {
    std::vector<Pam2> training;
    std::vector<Pam2> payload;
    double symbol_rate = 16e9;

    std::size_t size() const noexcept { return training.size() + payload.size(); }
    std::vector<Pam2> all() const;
    void validate() const;
};

inline constexpr std::size_t default_training_length = 5000;
inline constexpr std::size_t default_payload_length = 77240;

/// Fibonacci LFSR over the canonical polynomial of the given order
/// (7: x^7+x^6+1, 15: x^15+x^14+1, 23: x^23+x^18+1, 31: x^31+x^28+1).
/// The seed is the initial register contents; only the low `order` bits are used.
std::vector<Bit> prbs_generate(int order, std::uint32_t seed, std::size_t length);

std::vector<Pam2> pam2_map(std::span<const Bit> bits);
std::vector<Bit> pam2_demap(std::span<const Pam2> symbols);

struct RrcParams {
    double rolloff = 0.1;
    int span = 64;  // in symbols, even
    int sps = 2;

    std::size_t num_taps() const { return static_cast<std::size_t>(span) * sps + 1; }
    // Delay of the peak of a single filter, in samples.
    std::size_t group_delay() const { return num_taps() / 2; }
    void validate() const;
};

/// Unit-energy root-raised-cosine taps, exactly symmetric.
std::vector<double> rrc_taps(const RrcParams& p);

/// Upsample by sps and convolve with the RRC taps (full convolution).
/// Symbol k peaks at sample k*sps + group_delay().
RealWaveform rrc_shape(std::span<const Pam2> symbols, double symbol_rate, const RrcParams& p);
RealWaveform rrc_shape(const SymbolFrame& frame, const RrcParams& p);

/// Receive-side RRC filter (full convolution, adds another group_delay()).
RealWaveform matched_filter(const RealWaveform& w, const RrcParams& p);

/// Polyphase rational resampler by up/down with a Kaiser-windowed sinc
/// anti-imaging/anti-aliasing filter. Output sample n corresponds to input
/// time n*down/up (zero net delay).
RealWaveform resample(const RealWaveform& w, int up, int down, int half_length = 24);

/// Uniform mid-rise quantizer over [-full_scale, full_scale] (DAC model).
RealWaveform quantize_uniform(const RealWaveform& w, int bits, double full_scale);

struct SyncOptions {
    double floor = 0.25;  // minimum normalized correlation accepted as a lock
    // Largest lag searched. A frame longer than the PRBS period repeats the
    // training pattern, so the caller bounds the search to lags where the
    // whole frame still fits.
    std::optional<std::size_t> max_lag;
};

/// Lag maximizing the normalized cross-correlation between `received` and the
/// RRC-shaped training sequence. Ties resolve to the smallest lag. Throws
/// Error(NotFound, "sync not found") when the peak is below the floor.
std::size_t synchronize(const RealWaveform& received, std::span<const Pam2> training,
                        const RrcParams& shaping, const SyncOptions& opts = {});

/// Take every sps-th sample starting at `first`, `count` samples.
std::vector<double> downsample(const RealWaveform& w, std::size_t first, int sps, std::size_t count);

} // namespace fadefree
