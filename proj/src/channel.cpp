#include "fadefree/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>

#include "fadefree/dsp.hpp"

namespace fadefree {

void ChannelConfig::validate() const {
    require(fiber_length >= 0.0, "channel: fiber length must be non-negative");
    require(front_end_bandwidth > 0.0, "channel: front-end bandwidth must be positive");
    require(std::isfinite(beta2 * fiber_length), "channel: beta2 * L0 must be finite");
    require(!std::isnan(snr_db), "channel: snr_db must be a number");
    require(std::isfinite(loss_db), "channel: loss must be finite");
    require(front_end_order >= 1 && front_end_order <= 12, "channel: front-end order must lie in [1, 12]");
    require(modulation_index > 0.0, "channel: modulation index must be positive");
}

double beta2_from_dispersion(double d_ps_nm_km, double wavelength_m) {
    const double d_si = d_ps_nm_km * 1e-12 / (1e-9 * 1e3);  // s/m^2
    return -d_si * wavelength_m * wavelength_m / (2.0 * std::numbers::pi * speed_of_light);
}

ComplexWaveform apply_fiber_cd(const ComplexWaveform& field, const ChannelConfig& cfg) {
    cfg.validate();
    const double gain = std::sqrt(std::pow(10.0, -cfg.loss_db / 10.0));
    std::vector<cplx> x = field.samples();
    if (cfg.fiber_length == 0.0 || cfg.beta2 == 0.0 || x.empty()) {
        if (gain != 1.0) {
            for (auto& v : x) v *= gain;
        }
        return ComplexWaveform(std::move(x), field.sample_rate());
    }
    const double k = 2.0 * std::numbers::pi * std::numbers::pi * cfg.beta2 * cfg.fiber_length;
    const std::size_t n = x.size();
    dsp::fft(x);
    const double scale = gain / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = dsp::bin_frequency(i, n, field.sample_rate());
        x[i] *= std::polar(scale, -k * f * f);
    }
    dsp::ifft(x);
    return ComplexWaveform(std::move(x), field.sample_rate());
}

double smallsignal_response(double f, const ChannelConfig& cfg) {
    return std::cos(2.0 * std::numbers::pi * std::numbers::pi * cfg.beta2 * cfg.fiber_length * f * f);
}

std::vector<double> spectral_null_frequencies(const ChannelConfig& cfg, double f_max) {
    require(f_max > 0.0, "spectral_null_frequencies: f_max must be positive");
    const double bl = std::abs(cfg.beta2 * cfg.fiber_length);
    std::vector<double> nulls;
    if (bl == 0.0) return nulls;
    for (int n = 0;; ++n) {
        const double f = std::sqrt((n + 0.5) / (2.0 * std::numbers::pi * bl));
        if (f > f_max) break;
        nulls.push_back(f);
    }
    return nulls;
}

ComplexWaveform modulate_intensity(const RealWaveform& drive, const ChannelConfig& cfg) {
    std::vector<cplx> field(drive.size());
    const double m = cfg.modulation_index;
    for (std::size_t i = 0; i < drive.size(); ++i) {
        double p = 0.0;
        if (cfg.modulator == ModulatorModel::Linear) {
            p = 1.0 + m * drive[i];
        } else {
            p = 1.0 + 2.0 / std::numbers::pi * std::sin(std::numbers::pi / 2.0 * m * drive[i]);
        }
        field[i] = std::sqrt(std::max(p, 0.0));
    }
    return ComplexWaveform(std::move(field), drive.sample_rate());
}

RealWaveform square_law_detect(const ComplexWaveform& field) {
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = std::norm(field[i]);
    return RealWaveform(std::move(out), field.sample_rate());
}

namespace {

// Normalized analog Butterworth response at s = j*(f/fc).
cplx butterworth(double f_over_fc, int order) {
    const cplx s(0.0, f_over_fc);
    cplx h(1.0, 0.0);
    for (int k = 0; k < order; ++k) {
        const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
        const cplx pole = std::polar(1.0, theta);
        h *= -pole / (s - pole);
    }
    return h;
}

} // namespace

RealWaveform apply_front_end(const RealWaveform& signal, const ChannelConfig& cfg) {
    cfg.validate();
    const double fs = signal.sample_rate();
    if (std::isinf(cfg.front_end_bandwidth)) return signal;
    if (cfg.front_end_bandwidth >= fs / 2.0) {
        fail(ErrorKind::InvalidArgument, "front-end bandwidth must be below Nyquist");
    }
    auto x = dsp::to_complex(signal.view());
    const std::size_t n = x.size();
    if (n == 0) return signal;
    dsp::fft(x);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = dsp::bin_frequency(i, n, fs);
        x[i] *= butterworth(f / cfg.front_end_bandwidth, cfg.front_end_order);
    }
    // Keep the Nyquist bin real so the output stays real.
    if (n % 2 == 0) x[n / 2] = std::abs(x[n / 2]) * (x[n / 2].real() < 0 ? -1.0 : 1.0);
    dsp::ifft(x);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i].real() / static_cast<double>(n);
    return RealWaveform(std::move(y), fs);
}

RealWaveform add_awgn(const RealWaveform& signal, double snr_db, std::uint64_t seed) {
    if (snr_db == snr_infinite) return signal;
    const double p = signal.mean_power();
    if (!(p > 0.0)) fail(ErrorKind::InvalidArgument, "add_awgn: signal has zero power");
    const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<double> y = signal.samples();
    for (auto& v : y) v += gauss(rng);
    return RealWaveform(std::move(y), signal.sample_rate());
}

ComplexWaveform add_awgn(const ComplexWaveform& signal, double snr_db, std::uint64_t seed) {
    if (snr_db == snr_infinite) return signal;
    const double p = signal.mean_power();
    if (!(p > 0.0)) fail(ErrorKind::InvalidArgument, "add_awgn: signal has zero power");
    const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0) / 2.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<cplx> y = signal.samples();
    for (auto& v : y) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        v += cplx(re, im);
    }
    return ComplexWaveform(std::move(y), signal.sample_rate());
}

RealWaveform remove_dc(const RealWaveform& signal) {
    if (signal.empty()) return signal;
    double mean = 0.0;
    for (double v : signal.samples()) mean += v;
    mean /= static_cast<double>(signal.size());
    std::vector<double> y = signal.samples();
    for (auto& v : y) v -= mean;
    return RealWaveform(std::move(y), signal.sample_rate());
}

SpectrumEstimate estimate_power_spectrum(std::span<const double> samples, double sample_rate,
                                         std::size_t segment_length) {
    require(segment_length >= 2, "spectrum: segment length must be at least 2");
    require(samples.size() >= 2 * segment_length, "spectrum: signal shorter than two segments");
    const auto window = dsp::hann_window(segment_length);
    const std::size_t hop = segment_length / 2;
    const std::size_t bins = segment_length / 2 + 1;
    std::vector<double> acc(bins, 0.0);
    std::vector<cplx> buf(segment_length);
    for (std::size_t start = 0; start + segment_length <= samples.size(); start += hop) {
        for (std::size_t i = 0; i < segment_length; ++i) buf[i] = samples[start + i] * window[i];
        dsp::fft(buf);
        for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(buf[k]);
    }
    const double peak = *std::max_element(acc.begin(), acc.end());
    SpectrumEstimate est;
    est.frequencies.resize(bins);
    est.power_db.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        est.frequencies[k] = static_cast<double>(k) * sample_rate / static_cast<double>(segment_length);
        est.power_db[k] = peak > 0.0 ? 10.0 * std::log10(std::max(acc[k] / peak, 1e-30)) : 0.0;
    }
    return est;
}

SpectrumEstimate estimate_power_spectrum(const RealWaveform& signal, std::size_t segment_length) {
    return estimate_power_spectrum(signal.view(), signal.sample_rate(), segment_length);
}

RealWaveform simulate_link(const RealWaveform& drive, const ChannelConfig& cfg) {
    cfg.validate();
    const auto field = apply_fiber_cd(modulate_intensity(drive, cfg), cfg);
    const auto detected = remove_dc(square_law_detect(field));
    const auto filtered = apply_front_end(detected, cfg);
    return add_awgn(filtered, cfg.snr_db, cfg.seed);
}

void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& s) {
    os << "freq_hz,power_db\n";
    char buf[80];
    for (std::size_t i = 0; i < s.frequencies.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g,%.6f\n", s.frequencies[i], s.power_db[i]);
        os << buf;
    }
}

} // namespace fadefree
