#pragma once

// Dispersive IM/DD link: intensity modulator, chromatic dispersion on the
// optical field, square-law photodetection, band-limited receiver front end
// and additive noise. Also the small-signal fading response and its nulls.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fadefree/waveform.hpp"

namespace fadefree {

enum class ModulatorModel {
    Linear,      // optical power = 1 + m * drive
    Sinusoidal,  // quadrature-biased MZM: power = 1 + (2/pi) sin(pi/2 * m * drive)
};

/// Link parameters. Units are SI: beta2 in s^2/m, lengths in metres.
struct ChannelConfig {
    double beta2 = -21.7e-24 / 1e3;  // -21.7 ps^2/km
    double fiber_length = 100e3;
    double loss_db = 20.0;
    double front_end_bandwidth = 6e9;  // infinity bypasses the receiver filter
    int front_end_order = 4;
    double snr_db = 20.0;
    std::uint64_t seed = 1;
    double modulation_index = 0.5;
    ModulatorModel modulator = ModulatorModel::Linear;

    void validate() const;
};

inline constexpr double speed_of_light = 299792458.0;

/// beta2 (s^2/m) from a dispersion parameter D in ps/(nm km) at wavelength (m).
double beta2_from_dispersion(double d_ps_nm_km, double wavelength_m);

/// Peak-normalized averaged-periodogram estimate.
struct SpectrumEstimate {
    std::vector<double> frequencies;  // Hz, strictly increasing
    std::vector<double> power_db;     // max == 0
};

/// Field-domain CD (all-pass exp(-j 2 pi^2 beta2 L0 f^2)) followed by scalar loss.
ComplexWaveform apply_fiber_cd(const ComplexWaveform& field, const ChannelConfig& cfg);

/// cos(2 pi^2 beta2 L0 f^2).
double smallsignal_response(double f, const ChannelConfig& cfg);

/// Sorted fading nulls in (0, f_max]: f_n = sqrt((n + 1/2) / (2 pi |beta2| L0)).
std::vector<double> spectral_null_frequencies(const ChannelConfig& cfg, double f_max);

ComplexWaveform modulate_intensity(const RealWaveform& drive, const ChannelConfig& cfg);
RealWaveform square_law_detect(const ComplexWaveform& field);

/// Analog Butterworth low-pass of cfg.front_end_order with its 3 dB point at
/// cfg.front_end_bandwidth, applied in the frequency domain (magnitude and phase).
RealWaveform apply_front_end(const RealWaveform& signal, const ChannelConfig& cfg);

/// Sentinel for a noiseless channel.
inline constexpr double snr_infinite = std::numeric_limits<double>::infinity();

/// Adds N(0, P / 10^(snr/10)) to every sample, P the mean signal power.
RealWaveform add_awgn(const RealWaveform& signal, double snr_db, std::uint64_t seed);
ComplexWaveform add_awgn(const ComplexWaveform& signal, double snr_db, std::uint64_t seed);

/// Remove the mean (AC-coupled receiver).
RealWaveform remove_dc(const RealWaveform& signal);

/// Welch estimate (Hann window, 50% overlap), one-sided for real input.
SpectrumEstimate estimate_power_spectrum(const RealWaveform& signal, std::size_t segment_length);
SpectrumEstimate estimate_power_spectrum(std::span<const double> samples, double sample_rate,
                                         std::size_t segment_length);

/// Modulator, fiber, photodiode, AC coupling, front end, noise.
RealWaveform simulate_link(const RealWaveform& drive, const ChannelConfig& cfg);

void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& s);

} // namespace fadefree
