#include "fadefree/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace fadefree::dsp {

namespace {

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

void transform(std::vector<cplx>& data, int sign) {
    if (data.empty()) return;
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(plan_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), buf, buf, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(plan);
}

} // namespace

void fft(std::vector<cplx>& data) { transform(data, FFTW_FORWARD); }
void ifft(std::vector<cplx>& data) { transform(data, FFTW_BACKWARD); }

std::vector<cplx> to_complex(std::span<const double> x) { return {x.begin(), x.end()}; }

std::vector<double> convolve(std::span<const double> x, std::span<const double> h) {
    if (x.empty() || h.empty()) return {};
    std::vector<double> y(x.size() + h.size() - 1, 0.0);
    if (x.size() * h.size() < (1u << 22)) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += xi * h[j];
        }
        return y;
    }
    std::size_t n = 1;
    while (n < y.size()) n <<= 1;
    std::vector<cplx> a(n), b(n);
    std::copy(x.begin(), x.end(), a.begin());
    std::copy(h.begin(), h.end(), b.begin());
    fft(a);
    fft(b);
    for (std::size_t k = 0; k < n; ++k) a[k] *= b[k];
    ifft(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i].real() / static_cast<double>(n);
    return y;
}

std::vector<double> cross_correlate(std::span<const double> x, std::span<const double> t) {
    require(!t.empty() && x.size() >= t.size(), "cross_correlate: template longer than signal");
    std::size_t n = 1;
    while (n < x.size() + t.size()) n <<= 1;
    std::vector<cplx> a(n), b(n);
    std::copy(x.begin(), x.end(), a.begin());
    std::copy(t.begin(), t.end(), b.begin());
    fft(a);
    fft(b);
    for (std::size_t k = 0; k < n; ++k) a[k] *= std::conj(b[k]);
    ifft(a);
    std::vector<double> c(x.size() - t.size() + 1);
    for (std::size_t d = 0; d < c.size(); ++d) c[d] = a[d].real() / static_cast<double>(n);
    return c;
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

double bin_frequency(std::size_t k, std::size_t n, double sample_rate) {
    const auto kk = static_cast<double>(k);
    const auto nn = static_cast<double>(n);
    return (k < (n + 1) / 2 ? kk : kk - nn) * sample_rate / nn;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

} // namespace fadefree::dsp
