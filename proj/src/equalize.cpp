#include "fadefree/equalize.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

namespace fadefree {

void PnleConfig::validate() const {
    require(taps1 >= 1 && taps1 % 2 == 1, "pnle: linear tap count must be odd and >= 1");
    for (int n : {taps2, taps3}) require(n == 0 || n % 2 == 1, "pnle: nonlinear tap counts must be odd or 0");
    require(step_size > 0.0, "pnle: step size must be positive");
    require(epochs >= 1, "pnle: epochs must be at least 1");
}

void DfeConfig::validate() const {
    require(ff_taps >= 1 && ff_taps % 2 == 1, "dfe: feedforward taps must be odd and >= 1");
    require(fb_taps >= 0, "dfe: feedback taps must be non-negative");
    require(step_size > 0.0, "dfe: step size must be positive");
    require(epochs >= 1, "dfe: epochs must be at least 1");
}

namespace {

// Sample r_{k-i} for a centred kernel of length n, tap index j in [0, n):
// i = j - (n-1)/2, zero outside the record.
inline double tap_input(std::span<const double> r, std::size_t k, std::size_t j, std::size_t n) {
    const long idx = static_cast<long>(k) - (static_cast<long>(j) - static_cast<long>(n - 1) / 2);
    if (idx < 0 || idx >= static_cast<long>(r.size())) return 0.0;
    return r[static_cast<std::size_t>(idx)];
}

double mean_power(std::span<const double> r, std::size_t count, int order) {
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) acc += std::pow(r[k], 2 * order);
    return count ? acc / static_cast<double>(count) : 1.0;
}

void check_divergence(double mse, double initial) {
    if (!std::isfinite(mse) || mse > 10.0 * initial) fail(ErrorKind::NumericalFailure, "unstable step size");
}

} // namespace

PnleWeights PnleWeights::identity(const PnleConfig& cfg) {
    cfg.validate();
    PnleWeights w;
    w.w1.assign(static_cast<std::size_t>(cfg.taps1), 0.0);
    w.w2.assign(static_cast<std::size_t>(cfg.taps2), 0.0);
    w.w3.assign(static_cast<std::size_t>(cfg.taps3), 0.0);
    w.w1[w.w1.size() / 2] = 1.0;
    return w;
}

double PnleWeights::apply_at(std::span<const double> r, std::size_t k) const {
    double y = bias;
    for (std::size_t j = 0; j < w1.size(); ++j) y += w1[j] * tap_input(r, k, j, w1.size());
    for (std::size_t j = 0; j < w2.size(); ++j) {
        const double v = tap_input(r, k, j, w2.size());
        y += w2[j] * v * v;
    }
    for (std::size_t j = 0; j < w3.size(); ++j) {
        const double v = tap_input(r, k, j, w3.size());
        y += w3[j] * v * v * v;
    }
    return y;
}

std::vector<double> normalize_rms(std::span<const double> x) {
    double p = 0.0;
    for (double v : x) p += v * v;
    std::vector<double> y(x.begin(), x.end());
    if (p <= 0.0) return y;
    const double g = 1.0 / std::sqrt(p / static_cast<double>(x.size()));
    for (auto& v : y) v *= g;
    return y;
}

namespace {

double pnle_mse(std::span<const double> r, std::span<const Pam2> training, const PnleWeights& w) {
    double acc = 0.0;
    for (std::size_t k = 0; k < training.size(); ++k) {
        const double e = training[k] - w.apply_at(r, k);
        acc += e * e;
    }
    return acc / static_cast<double>(training.size());
}

} // namespace

PnleWeights pnle_train(std::span<const double> received, std::span<const Pam2> training, const PnleConfig& cfg,
                       std::vector<double>* mse_history) {
    cfg.validate();
    require(!training.empty() && received.size() >= training.size(), "pnle: received shorter than training");
    auto w = PnleWeights::identity(cfg);
    const std::size_t t = training.size();

    // Fixed per-kernel steps, scaled by the regressor power of each order.
    const double mu0 = cfg.step_size;
    const double mu1 = cfg.step_size / (cfg.taps1 * mean_power(received, t, 1));
    const double mu2 = cfg.taps2 ? cfg.step_size / (cfg.taps2 * mean_power(received, t, 2)) : 0.0;
    const double mu3 = cfg.taps3 ? cfg.step_size / (cfg.taps3 * mean_power(received, t, 3)) : 0.0;

    const double initial = pnle_mse(received, training, w);
    if (mse_history) mse_history->assign(1, initial);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t k = 0; k < t; ++k) {
            const double e = training[k] - w.apply_at(received, k);
            w.bias += mu0 * e;
            for (std::size_t j = 0; j < w.w1.size(); ++j) w.w1[j] += mu1 * e * tap_input(received, k, j, w.w1.size());
            for (std::size_t j = 0; j < w.w2.size(); ++j) {
                const double v = tap_input(received, k, j, w.w2.size());
                w.w2[j] += mu2 * e * v * v;
            }
            for (std::size_t j = 0; j < w.w3.size(); ++j) {
                const double v = tap_input(received, k, j, w.w3.size());
                w.w3[j] += mu3 * e * v * v * v;
            }
        }
        const double mse = pnle_mse(received, training, w);
        check_divergence(mse, initial);
        if (mse_history) mse_history->push_back(mse);
    }
    return w;
}

std::vector<double> pnle_apply(std::span<const double> received, const PnleWeights& w) {
    std::vector<double> y(received.size());
    for (std::size_t k = 0; k < received.size(); ++k) y[k] = w.apply_at(received, k);
    return y;
}

std::vector<double> training_residual(std::span<const double> x, std::span<const Pam2> training) {
    require(x.size() >= training.size(), "residual: equalized record shorter than training");
    std::vector<double> n(training.size());
    for (std::size_t k = 0; k < training.size(); ++k) n[k] = x[k] - training[k];
    return n;
}

EqualizedFrame pnle_train_apply(std::span<const double> received, const SymbolFrame& frame, const PnleConfig& cfg) {
    require(received.size() == frame.size(), "pnle: received length must match the frame");
    EqualizedFrame eq;
    const auto w = pnle_train(received, frame.training, cfg, &eq.training_mse);
    eq.x = pnle_apply(received, w);
    eq.training_length = frame.training.size();
    eq.residual_noise = training_residual(eq.x, frame.training);
    return eq;
}

DfeWeights DfeWeights::identity(const DfeConfig& cfg) {
    cfg.validate();
    DfeWeights w;
    w.ff.assign(static_cast<std::size_t>(cfg.ff_taps), 0.0);
    w.fb.assign(static_cast<std::size_t>(cfg.fb_taps), 0.0);
    w.ff[w.ff.size() / 2] = 1.0;
    return w;
}

namespace {

inline Pam2 slice(double y) { return y >= 0.0 ? Pam2{1} : Pam2{-1}; }

double dfe_output(std::span<const double> x, std::span<const Pam2> d, std::size_t k, const DfeWeights& w) {
    double y = 0.0;
    for (std::size_t j = 0; j < w.ff.size(); ++j) y += w.ff[j] * tap_input(x, k, j, w.ff.size());
    for (std::size_t j = 0; j < w.fb.size() && j < k; ++j) y -= w.fb[j] * d[k - 1 - j];
    return y;
}

double dfe_mse(std::span<const double> x, std::span<const Pam2> training, const DfeWeights& w) {
    double acc = 0.0;
    for (std::size_t k = 0; k < training.size(); ++k) {
        const double e = training[k] - dfe_output(x, training, k, w);
        acc += e * e;
    }
    return acc / static_cast<double>(training.size());
}

} // namespace

DfeWeights dfe_train(std::span<const double> x, std::span<const Pam2> training, const DfeConfig& cfg,
                     std::vector<double>* mse_history) {
    cfg.validate();
    require(!training.empty() && x.size() >= training.size(), "dfe: input shorter than training");
    auto w = DfeWeights::identity(cfg);
    const std::size_t t = training.size();
    const double mu_ff = cfg.step_size / (cfg.ff_taps * mean_power(x, t, 1));
    const double mu_fb = cfg.fb_taps > 0 ? cfg.step_size / cfg.fb_taps : 0.0;

    const double initial = dfe_mse(x, training, w);
    if (mse_history) mse_history->assign(1, initial);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t k = 0; k < t; ++k) {
            const double e = training[k] - dfe_output(x, training, k, w);
            for (std::size_t j = 0; j < w.ff.size(); ++j) w.ff[j] += mu_ff * e * tap_input(x, k, j, w.ff.size());
            for (std::size_t j = 0; j < w.fb.size() && j < k; ++j) w.fb[j] -= mu_fb * e * training[k - 1 - j];
        }
        const double mse = dfe_mse(x, training, w);
        check_divergence(mse, initial);
        if (mse_history) mse_history->push_back(mse);
    }
    return w;
}

std::vector<double> dfe_apply(std::span<const double> x, std::span<const Pam2> training, const DfeWeights& w,
                              const DfeApplyOptions& opts) {
    std::vector<double> y(x.size());
    std::vector<Pam2> d(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        y[k] = dfe_output(x, d, k, w);
        d[k] = k < training.size() ? training[k] : slice(y[k]);
        if (opts.flip_decision_at && *opts.flip_decision_at == k) d[k] = static_cast<Pam2>(-d[k]);
    }
    return y;
}

EqualizedFrame dfe_train_apply(std::span<const double> x, const SymbolFrame& frame, const DfeConfig& cfg) {
    require(x.size() == frame.size(), "dfe: input length must match the frame");
    EqualizedFrame eq;
    const auto w = dfe_train(x, frame.training, cfg, &eq.training_mse);
    eq.x = dfe_apply(x, frame.training, w);
    eq.training_length = frame.training.size();
    eq.residual_noise = training_residual(eq.x, frame.training);
    return eq;
}

std::vector<double> extract_noise(const EqualizedFrame& eq) {
    require(eq.residual_noise.size() == eq.training_length, "extract_noise: no training region available");
    return eq.residual_noise;
}

namespace {

void write_section(std::ostream& os, const char* name, std::span<const double> w) {
    os << '[' << name << "]\n";
    char buf[40];
    for (double v : w) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        os << buf;
    }
}

std::vector<std::pair<std::string, std::vector<double>>> read_sections(std::istream& is) {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos) fail(ErrorKind::InvalidArgument, "weights csv: bad section header");
            out.emplace_back(line.substr(1, close - 1), std::vector<double>{});
            continue;
        }
        if (out.empty()) fail(ErrorKind::InvalidArgument, "weights csv: value before first section");
        out.back().second.push_back(std::stod(line));
    }
    return out;
}

} // namespace

void write_weights_csv(std::ostream& os, const PnleWeights& w) {
    const double bias[] = {w.bias};
    write_section(os, "bias", bias);
    write_section(os, "w1", w.w1);
    write_section(os, "w2", w.w2);
    write_section(os, "w3", w.w3);
}

void write_weights_csv(std::ostream& os, const DfeWeights& w) {
    write_section(os, "ff", w.ff);
    write_section(os, "fb", w.fb);
}

PnleWeights read_pnle_weights_csv(std::istream& is) {
    PnleWeights w;
    for (auto& [name, v] : read_sections(is)) {
        if (name == "bias") {
            require(v.size() == 1, "weights csv: bias section holds one value");
            w.bias = v[0];
        } else if (name == "w1") {
            w.w1 = std::move(v);
        } else if (name == "w2") {
            w.w2 = std::move(v);
        } else if (name == "w3") {
            w.w3 = std::move(v);
        } else {
            fail(ErrorKind::InvalidArgument, "weights csv: unknown PNLE section " + name);
        }
    }
    require(w.w1.size() % 2 == 1, "weights csv: w1 must have odd length");
    return w;
}

DfeWeights read_dfe_weights_csv(std::istream& is) {
    DfeWeights w;
    for (auto& [name, v] : read_sections(is)) {
        if (name == "ff") {
            w.ff = std::move(v);
        } else if (name == "fb") {
            w.fb = std::move(v);
        } else {
            fail(ErrorKind::InvalidArgument, "weights csv: unknown DFE section " + name);
        }
    }
    require(w.ff.size() % 2 == 1, "weights csv: ff must have odd length");
    return w;
}

} // namespace fadefree
