#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "fadefree/error.hpp"

namespace fadefree {

using Bit = std::uint8_t;
using Pam2 = std::int8_t;  // always -1 or +1
using cplx = std::complex<double>;

/// Uniformly sampled signal. Construction rejects a non-positive rate and
/// any non-finite sample, so every stage downstream may assume clean input.
template <class T>
class Waveform {
public:
    using value_type = T;

    Waveform() = default;
    Waveform(std::vector<T> samples, double sample_rate)
        : samples_(std::move(samples)), sample_rate_(sample_rate) {
        require(sample_rate_ > 0.0 && std::isfinite(sample_rate_), "sample_rate must be positive");
        for (const auto& s : samples_) {
            if (!is_finite(s)) fail(ErrorKind::InvalidArgument, "waveform contains a non-finite sample");
        }
    }

    const std::vector<T>& samples() const noexcept { return samples_; }
    std::span<const T> view() const noexcept { return samples_; }
    double sample_rate() const noexcept { return sample_rate_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const T& operator[](std::size_t i) const { return samples_[i]; }

    double energy() const {
        double e = 0.0;
        for (const auto& s : samples_) e += std::norm(s);
        return e;
    }
    double mean_power() const { return samples_.empty() ? 0.0 : energy() / static_cast<double>(samples_.size()); }

    std::vector<T> release() && { return std::move(samples_); }

private:
    static bool is_finite(const T& v) {
        if constexpr (std::is_floating_point_v<T>) {
            return std::isfinite(v);
        } else {
            return std::isfinite(v.real()) && std::isfinite(v.imag());
        }
    }

    std::vector<T> samples_;
    double sample_rate_ = 1.0;
};

using RealWaveform = Waveform<double>;
using ComplexWaveform = Waveform<cplx>;

// CSV column format: header row `sample_rate=<float>`, then one sample per
// line (`re,im` for complex samples).
void write_waveform_csv(std::ostream& os, const RealWaveform& w);
void write_waveform_csv(std::ostream& os, const ComplexWaveform& w);
RealWaveform read_real_waveform_csv(std::istream& is);
ComplexWaveform read_complex_waveform_csv(std::istream& is);

} // namespace fadefree
