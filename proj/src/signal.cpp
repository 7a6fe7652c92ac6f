#include "fadefree/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fadefree/dsp.hpp"

namespace fadefree {

std::vector<Pam2> SymbolFrame::all() const {
    std::vector<Pam2> out;
    out.reserve(size());
    out.insert(out.end(), training.begin(), training.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

void SymbolFrame::validate() const {
    require(symbol_rate > 0.0, "symbol_rate must be positive");
    auto ok = [](Pam2 s) { return s == 1 || s == -1; };
    require(std::all_of(training.begin(), training.end(), ok) && std::all_of(payload.begin(), payload.end(), ok),
            "frame symbols must be -1 or +1");
}

namespace {

int prbs_feedback_tap(int order) {
    switch (order) {
        case 7: return 6;
        case 15: return 14;
        case 23: return 18;
        case 31: return 28;
        default: fail(ErrorKind::InvalidArgument, "prbs order must be 7, 15, 23 or 31");
    }
}

} // namespace

std::vector<Bit> prbs_generate(int order, std::uint32_t seed, std::size_t length) {
    const int tap = prbs_feedback_tap(order);
    require(length >= 1, "prbs length must be at least 1");
    const std::uint32_t mask = order == 32 ? ~0u : ((1u << order) - 1u);
    std::uint32_t reg = seed & mask;
    if (reg == 0) fail(ErrorKind::InvalidArgument, "prbs seed must be nonzero (LFSR would be stuck)");

    std::vector<Bit> out(length);
    for (auto& b : out) {
        const std::uint32_t fb = ((reg >> (order - 1)) ^ (reg >> (tap - 1))) & 1u;
        reg = ((reg << 1) | fb) & mask;
        b = static_cast<Bit>(fb);
    }
    return out;
}

std::vector<Pam2> pam2_map(std::span<const Bit> bits) {
    std::vector<Pam2> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        require(bits[i] <= 1, "pam2_map: input must be 0/1 bits");
        out[i] = bits[i] ? Pam2{1} : Pam2{-1};
    }
    return out;
}

std::vector<Bit> pam2_demap(std::span<const Pam2> symbols) {
    std::vector<Bit> out(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) out[i] = symbols[i] > 0 ? 1 : 0;
    return out;
}

void RrcParams::validate() const {
    require(sps >= 2, "rrc: sps must be at least 2");
    require(span > 0 && span % 2 == 0, "rrc: span must be positive and even");
    require(rolloff >= 0.0 && rolloff <= 1.0, "rrc: rolloff must lie in [0, 1]");
}

namespace {

double rrc_value(double t, double beta) {
    constexpr double pi = std::numbers::pi;
    if (t == 0.0) return 1.0 - beta + 4.0 * beta / pi;
    if (beta > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-12) {
        const double a = pi / (4.0 * beta);
        return beta / std::numbers::sqrt2 * ((1.0 + 2.0 / pi) * std::sin(a) + (1.0 - 2.0 / pi) * std::cos(a));
    }
    const double num = std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
    const double den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    return num / den;
}

} // namespace

std::vector<double> rrc_taps(const RrcParams& p) {
    p.validate();
    const std::size_t n = p.num_taps();
    const std::size_t mid = n / 2;
    std::vector<double> taps(n);
    for (std::size_t i = 0; i <= mid; ++i) {
        const double t = (static_cast<double>(i) - static_cast<double>(mid)) / p.sps;
        taps[i] = rrc_value(t, p.rolloff);
        taps[n - 1 - i] = taps[i];
    }
    double energy = 0.0;
    for (double t : taps) energy += t * t;
    const double scale = 1.0 / std::sqrt(energy);
    for (double& t : taps) t *= scale;
    return taps;
}

RealWaveform rrc_shape(std::span<const Pam2> symbols, double symbol_rate, const RrcParams& p) {
    const auto taps = rrc_taps(p);
    const std::size_t sps = static_cast<std::size_t>(p.sps);
    if (symbols.empty()) return RealWaveform({}, symbol_rate * p.sps);
    std::vector<double> out(symbols.size() * sps + taps.size() - 1 - (sps - 1), 0.0);
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const double s = symbols[k];
        double* dst = out.data() + k * sps;
        for (std::size_t j = 0; j < taps.size(); ++j) dst[j] += s * taps[j];
    }
    return RealWaveform(std::move(out), symbol_rate * p.sps);
}

RealWaveform rrc_shape(const SymbolFrame& frame, const RrcParams& p) {
    frame.validate();
    const auto symbols = frame.all();
    return rrc_shape(symbols, frame.symbol_rate, p);
}

RealWaveform matched_filter(const RealWaveform& w, const RrcParams& p) {
    const auto taps = rrc_taps(p);
    return RealWaveform(dsp::convolve(w.view(), taps), w.sample_rate());
}

RealWaveform resample(const RealWaveform& w, int up, int down, int half_length) {
    require(up >= 1 && down >= 1, "resample: factors must be positive");
    require(half_length >= 1, "resample: half_length must be positive");
    const int g = std::gcd(up, down);
    up /= g;
    down /= g;
    const double rate = w.sample_rate() * up / down;
    if (up == 1 && down == 1) return RealWaveform(w.samples(), rate);
    if (w.empty()) return RealWaveform({}, rate);

    const int factor = std::max(up, down);
    const long support = static_cast<long>(half_length) * factor;
    constexpr double kaiser_beta = 8.0;
    constexpr double cutoff = 0.9;  // fraction of the lower Nyquist rate
    const double i0_beta = std::cyl_bessel_i(0.0, kaiser_beta);

    // Prototype filter at the upsampled rate, indexed by j in [-support, support].
    std::vector<double> proto(static_cast<std::size_t>(2 * support + 1));
    for (long j = -support; j <= support; ++j) {
        const double x = cutoff * static_cast<double>(j) / factor;
        const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        const double r = static_cast<double>(j) / static_cast<double>(support);
        const double win = std::cyl_bessel_i(0.0, kaiser_beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
        proto[static_cast<std::size_t>(j + support)] = cutoff * static_cast<double>(up) / factor * sinc * win;
    }

    const auto& x = w.samples();
    const long n_in = static_cast<long>(x.size());
    const long n_out = (n_in - 1) * up / down + 1;
    std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
    for (long m = 0; m < n_out; ++m) {
        const long t = m * down;  // output time on the upsampled grid
        const long k_lo = std::max<long>(0, (t - support + up - 1) / up);
        const long k_hi = std::min<long>(n_in - 1, (t + support) / up);
        double acc = 0.0;
        for (long k = k_lo; k <= k_hi; ++k) acc += x[static_cast<std::size_t>(k)] * proto[static_cast<std::size_t>(t - k * up + support)];
        y[static_cast<std::size_t>(m)] = acc;
    }
    return RealWaveform(std::move(y), rate);
}

RealWaveform quantize_uniform(const RealWaveform& w, int bits, double full_scale) {
    require(bits >= 1 && bits <= 24, "quantize: bits must lie in [1, 24]");
    require(full_scale > 0.0, "quantize: full scale must be positive");
    const double levels = std::ldexp(1.0, bits);
    const double step = 2.0 * full_scale / levels;
    std::vector<double> y(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double idx = std::floor((w[i] + full_scale) / step);
        idx = std::clamp(idx, 0.0, levels - 1.0);
        y[i] = -full_scale + (idx + 0.5) * step;
    }
    return RealWaveform(std::move(y), w.sample_rate());
}

std::size_t synchronize(const RealWaveform& received, std::span<const Pam2> training, const RrcParams& shaping,
                        const SyncOptions& opts) {
    require(!training.empty(), "synchronize: empty training sequence");
    const double symbol_rate = received.sample_rate() / shaping.sps;
    const auto tmpl = rrc_shape(training, symbol_rate, shaping);
    const auto& r = received.samples();
    require(r.size() >= tmpl.size(), "synchronize: received shorter than the shaped training sequence");

    const auto corr = dsp::cross_correlate(r, tmpl.view());
    const double t_norm = std::sqrt(tmpl.energy());
    std::vector<double> prefix(r.size() + 1, 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) prefix[i + 1] = prefix[i] + r[i] * r[i];

    const double total = prefix.back();
    double best = -2.0;
    std::size_t best_lag = 0;
    const std::size_t last = opts.max_lag ? std::min(*opts.max_lag + 1, corr.size()) : corr.size();
    for (std::size_t d = 0; d < last; ++d) {
        const double e = prefix[d + tmpl.size()] - prefix[d];
        if (e <= 1e-12 * total) continue;
        const double ncc = corr[d] / (t_norm * std::sqrt(e));
        if (ncc > best) {
            best = ncc;
            best_lag = d;
        }
    }
    if (best < opts.floor) fail(ErrorKind::NotFound, "sync not found");
    return best_lag;
}

std::vector<double> downsample(const RealWaveform& w, std::size_t first, int sps, std::size_t count) {
    require(sps >= 1, "downsample: sps must be positive");
    require(count == 0 || first + (count - 1) * static_cast<std::size_t>(sps) < w.size(),
            "downsample: range exceeds the waveform");
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = w[first + k * static_cast<std::size_t>(sps)];
    return out;
}

} // namespace fadefree
