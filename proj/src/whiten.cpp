#include "fadefree/whiten.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "fadefree/dsp.hpp"
#include "fadefree/error.hpp"

namespace fadefree {

void WhitenedChannel::validate() const {
    require(!h.empty(), "whitened channel: needs at least one tap");
    require(h[0] != 0.0, "whitened channel: h_0 must be nonzero");
    require(sigma2 > 0.0 && std::isfinite(sigma2), "whitened channel: sigma2 must be positive");
}

std::vector<double> autocorrelation(std::span<const double> noise, std::size_t max_lag) {
    require(noise.size() > max_lag, "autocorrelation: record must be longer than max_lag");
    const auto n = static_cast<double>(noise.size());
    std::vector<double> r(max_lag + 1, 0.0);
    for (std::size_t m = 0; m <= max_lag; ++m) {
        double acc = 0.0;
        for (std::size_t k = 0; k + m < noise.size(); ++k) acc += noise[k] * noise[k + m];
        r[m] = acc / n;
    }
    if (!(r[0] > 0.0)) fail(ErrorKind::InvalidArgument, "autocorrelation: all-zero input (degenerate AR fit)");
    return r;
}

namespace {

// Runs the recursion up to `order`; a holds a_1..a_order on return.
std::vector<double> levinson(std::span<const double> r, int order, std::vector<double>& a) {
    require(order >= 0, "yule_walker: order must be non-negative");
    require(r.size() > static_cast<std::size_t>(order), "yule_walker: need r_0..r_L");
    require(r[0] > 0.0, "yule_walker: r_0 must be positive");
    std::vector<double> err{r[0]};
    a.assign(static_cast<std::size_t>(order), 0.0);
    std::vector<double> prev;
    double e = r[0];
    for (int m = 1; m <= order; ++m) {
        double acc = r[static_cast<std::size_t>(m)];
        for (int i = 1; i < m; ++i) acc -= a[static_cast<std::size_t>(i - 1)] * r[static_cast<std::size_t>(m - i)];
        const double kappa = acc / e;
        if (!(std::abs(kappa) < 1.0)) fail(ErrorKind::NumericalFailure, "non-stationary fit");
        prev.assign(a.begin(), a.begin() + (m - 1));
        a[static_cast<std::size_t>(m - 1)] = kappa;
        for (int i = 1; i < m; ++i) {
            a[static_cast<std::size_t>(i - 1)] = prev[static_cast<std::size_t>(i - 1)] - kappa * prev[static_cast<std::size_t>(m - i - 1)];
        }
        e *= 1.0 - kappa * kappa;
        err.push_back(e);
    }
    return err;
}

} // namespace

WhitenedChannel yule_walker_fit(std::span<const double> r, int order) {
    std::vector<double> a;
    const auto err = levinson(r, order, a);
    WhitenedChannel ch;
    ch.h.assign(static_cast<std::size_t>(order) + 1, 1.0);
    for (int i = 1; i <= order; ++i) ch.h[static_cast<std::size_t>(i)] = -a[static_cast<std::size_t>(i - 1)];
    ch.sigma2 = err.back();
    if (!(ch.sigma2 > 0.0)) fail(ErrorKind::NumericalFailure, "non-stationary fit");
    return ch;
}

std::vector<double> prediction_error_profile(std::span<const double> r, int max_order) {
    std::vector<double> a;
    return levinson(r, max_order, a);
}

std::vector<double> postfilter_apply(std::span<const double> x, const WhitenedChannel& ch) {
    ch.validate();
    std::vector<double> v(x.size(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        double acc = 0.0;
        const std::size_t taps = std::min(ch.h.size(), k + 1);
        for (std::size_t i = 0; i < taps; ++i) acc += ch.h[i] * x[k - i];
        v[k] = acc;
    }
    return v;
}

double spectral_flatness(std::span<const double> noise, std::size_t segment_length) {
    require(noise.size() >= 16, "spectral_flatness: record too short");
    if (segment_length == 0) {
        segment_length = 16;
        while (segment_length * 2 <= std::min<std::size_t>(256, noise.size() / 8)) segment_length *= 2;
    }
    require(noise.size() >= 2 * segment_length, "spectral_flatness: record shorter than two segments");
    const auto window = dsp::hann_window(segment_length);
    const std::size_t hop = segment_length / 2;
    const std::size_t bins = segment_length / 2 + 1;
    std::vector<double> acc(bins, 0.0);
    std::vector<cplx> buf(segment_length);
    for (std::size_t start = 0; start + segment_length <= noise.size(); start += hop) {
        for (std::size_t i = 0; i < segment_length; ++i) buf[i] = noise[start + i] * window[i];
        dsp::fft(buf);
        for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(buf[k]);
    }
    double log_sum = 0.0;
    double sum = 0.0;
    for (double p : acc) {
        require(p > 0.0, "spectral_flatness: zero-power input");
        log_sum += std::log(p);
        sum += p;
    }
    const auto n = static_cast<double>(bins);
    return std::min(1.0, std::exp(log_sum / n) / (sum / n));
}

void write_channel_csv(std::ostream& os, const WhitenedChannel& ch) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "L=%d,sigma2=%.17g\n", ch.memory(), ch.sigma2);
    os << buf;
    for (double h : ch.h) {
        std::snprintf(buf, sizeof buf, "%.17g\n", h);
        os << buf;
    }
}

WhitenedChannel read_channel_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) fail(ErrorKind::InvalidArgument, "channel csv: empty input");
    int L = -1;
    double sigma2 = 0.0;
    if (std::sscanf(header.c_str(), "L=%d,sigma2=%lf", &L, &sigma2) != 2 || L < 0) {
        fail(ErrorKind::InvalidArgument, "channel csv: header must be `L=<int>,sigma2=<float>`");
    }
    WhitenedChannel ch;
    ch.sigma2 = sigma2;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ch.h.push_back(std::stod(line));
    }
    require(ch.h.size() == static_cast<std::size_t>(L) + 1, "channel csv: tap count does not match L");
    ch.validate();
    return ch;
}

} // namespace fadefree
