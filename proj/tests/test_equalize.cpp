#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "fadefree/equalize.hpp"

using namespace fadefree;

namespace {

SymbolFrame random_frame(std::size_t training, std::size_t payload, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SymbolFrame f;
    f.training.resize(training);
    f.payload.resize(payload);
    for (auto& v : f.training) v = (rng() & 1u) ? 1 : -1;
    for (auto& v : f.payload) v = (rng() & 1u) ? 1 : -1;
    return f;
}

// r_k = sum_i h_i s_{k - i + delay} + noise, zero outside the frame.
std::vector<double> through_channel(const std::vector<Pam2>& s, const std::vector<double>& h, int delay,
                                    double noise_sd = 0.0, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, noise_sd > 0.0 ? noise_sd : 1.0);
    std::vector<double> r(s.size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) {
        for (std::size_t i = 0; i < h.size(); ++i) {
            const long idx = static_cast<long>(k) - static_cast<long>(i) + delay;
            if (idx >= 0 && idx < static_cast<long>(s.size())) r[k] += h[i] * s[static_cast<std::size_t>(idx)];
        }
        if (noise_sd > 0.0) r[k] += g(rng);
    }
    return r;
}

std::size_t payload_errors(const std::vector<double>& x, const SymbolFrame& f) {
    std::size_t e = 0;
    for (std::size_t k = 0; k < f.payload.size(); ++k) {
        e += (x[f.training.size() + k] >= 0.0 ? 1 : -1) != f.payload[k];
    }
    return e;
}

} // namespace

TEST_CASE("identity weights are the identity map") {
    const auto f = random_frame(200, 300, 1);
    auto s = f.all();
    std::vector<double> r(s.begin(), s.end());
    for (auto& v : r) v *= 0.8;

    PnleConfig pc;
    CHECK(pnle_apply(r, PnleWeights::identity(pc)) == r);

    DfeConfig dc;
    const auto w = DfeWeights::identity(dc);
    CHECK(dfe_apply(r, f.training, w) == r);
}

TEST_CASE("pnle on an identity channel keeps the identity") {
    const auto f = random_frame(2000, 1000, 2);
    const auto s = f.all();
    const std::vector<double> r(s.begin(), s.end());
    PnleConfig c{1, 1, 1, 0.02, 10};
    const auto w = pnle_train(r, f.training, c);
    CHECK(std::abs(w.w1[0] - 1.0) < 1e-3);
    CHECK(std::abs(w.w2[0]) < 1e-3);
    CHECK(std::abs(w.w3[0]) < 1e-3);
    const auto eq = pnle_train_apply(r, f, c);
    for (double n : extract_noise(eq)) CHECK(std::abs(n) < 1e-3);
}

TEST_CASE("pnle approaches the zero-forcing inverse of [0.2, 1, 0.2]") {
    const auto f = random_frame(5000, 5000, 3);
    const auto r = through_channel(f.all(), {0.2, 1.0, 0.2}, 1);
    PnleConfig c{21, 0, 0, 0.05, 30};
    const auto w = pnle_train(r, f.training, c);
    // Inverse of 1 + a(z + 1/z): g_n = rho^|n| / sqrt(1 - 4a^2), rho the root inside the unit circle.
    const double a = 0.2;
    const double rho = (-1.0 + std::sqrt(1.0 - 4.0 * a * a)) / (2.0 * a);
    const double gain = 1.0 / std::sqrt(1.0 - 4.0 * a * a);
    double err = 0.0;
    for (int n = -10; n <= 10; ++n) {
        err = std::max(err, std::abs(w.w1[static_cast<std::size_t>(n + 10)] - gain * std::pow(rho, std::abs(n))));
    }
    CHECK(err < 0.02);
    CHECK(payload_errors(pnle_apply(r, w), f) == 0);
}

TEST_CASE("cubic kernel removes a memoryless cubic distortion") {
    // Mild ISI first so the distorted samples are multi-level, then r = u + 0.1 u^3.
    const auto f = random_frame(5000, 1000, 4);
    auto r = through_channel(f.all(), {0.3, 1.0, 0.3}, 1);
    for (auto& v : r) v = v + 0.1 * v * v * v;
    std::vector<double> lin_mse, cub_mse;
    pnle_train(r, f.training, PnleConfig{15, 0, 0, 0.02, 40}, &lin_mse);
    pnle_train(r, f.training, PnleConfig{15, 0, 15, 0.02, 40}, &cub_mse);
    CHECK(10.0 * std::log10(lin_mse.back() / cub_mse.back()) >= 10.0);
}

TEST_CASE("trained linear pnle reaches the MMSE bound within 3 dB") {
    const std::vector<double> h{0.25, 1.0, 0.45, 0.1};
    const double snr_db = 15.0;
    double eh = 0.0;
    for (double v : h) eh += v * v;
    const double sigma2 = eh / std::pow(10.0, snr_db / 10.0);
    const auto f = random_frame(5000, 100, 5);
    const auto r = through_channel(f.all(), h, 1, std::sqrt(sigma2), 6);

    for (int taps : {7, 15, 31}) {
        const int p = taps / 2;
        // Regressor u_j = r_{k+p-j}: E[u_j u_l] is the channel autocorrelation at
        // lag j - l plus noise, E[s_k u_j] = h at index p - j + delay.
        auto acf = [&](int m) {
            m = std::abs(m);
            double v = m == 0 ? sigma2 : 0.0;
            for (std::size_t i = 0; i + static_cast<std::size_t>(m) < h.size(); ++i) v += h[i] * h[i + static_cast<std::size_t>(m)];
            return v;
        };
        Eigen::MatrixXd R(taps, taps);
        Eigen::VectorXd pv(taps);
        for (int j = 0; j < taps; ++j) {
            for (int l = 0; l < taps; ++l) R(j, l) = acf(j - l);
            const int idx = p - j + 1;
            pv(j) = idx >= 0 && idx < static_cast<int>(h.size()) ? h[static_cast<std::size_t>(idx)] : 0.0;
        }
        const double mmse = 1.0 - pv.dot(R.ldlt().solve(pv));
        std::vector<double> hist;
        pnle_train(r, f.training, PnleConfig{taps, 0, 0, 0.02, 30}, &hist);
        CAPTURE(taps);
        CHECK(std::abs(10.0 * std::log10(hist.back() / mmse)) < 3.0);
    }
}

TEST_CASE("pnle rejects a diverging step size") {
    const auto f = random_frame(2000, 10, 7);
    const auto r = through_channel(f.all(), {0.3, 1.0, 0.3}, 1, 0.1);
    try {
        pnle_train(r, f.training, PnleConfig{15, 3, 3, 50.0, 5});
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NumericalFailure);
        CHECK(std::string(e.what()) == "unstable step size");
    }
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(PnleConfig({4, 1, 1, 0.1, 1}).validate(), Error);
    CHECK_THROWS_AS(PnleConfig({3, 2, 1, 0.1, 1}).validate(), Error);
    CHECK_NOTHROW(PnleConfig({3, 0, 0, 0.1, 1}).validate());
    CHECK_THROWS_AS(DfeConfig({2, 1, 0.1, 1}).validate(), Error);
    CHECK_THROWS_AS(DfeConfig({3, -1, 0.1, 1}).validate(), Error);
}

TEST_CASE("dfe without feedback is a linear feedforward filter") {
    const auto f = random_frame(100, 100, 8);
    const auto r = through_channel(f.all(), {0.2, 1.0, 0.2}, 1, 0.05);
    DfeWeights w;
    w.ff = {0.1, -0.3, 1.2, -0.2, 0.05};
    const auto y = dfe_apply(r, f.training, w);
    for (std::size_t k = 0; k < r.size(); ++k) {
        double ref = 0.0;
        for (int j = 0; j < 5; ++j) {
            const long idx = static_cast<long>(k) - (j - 2);
            if (idx >= 0 && idx < static_cast<long>(r.size())) ref += w.ff[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(idx)];
        }
        CHECK(y[k] == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("dfe cancels a postcursor") {
    const auto f = random_frame(3000, 5000, 9);
    const auto r = through_channel(f.all(), {1.0, 0.5}, 0);
    const auto eq = dfe_train_apply(r, f, DfeConfig{1, 1, 0.05, 20});
    CHECK(payload_errors(eq.x, f) == 0);
}

TEST_CASE("a wrong feedback decision only disturbs the next fb outputs") {
    const auto f = random_frame(3000, 2000, 10);
    const auto r = through_channel(f.all(), {1.0, 0.3, 0.1}, 0);
    const int fb = 3;
    const auto w = dfe_train(r, f.training, DfeConfig{1, fb, 0.05, 20});
    const auto clean = dfe_apply(r, f.training, w);
    const std::size_t at = 4000;
    DfeApplyOptions o;
    o.flip_decision_at = at;
    const auto hit = dfe_apply(r, f.training, w, o);
    for (std::size_t k = 0; k < clean.size(); ++k) {
        if (k <= at || k > at + fb) CHECK(hit[k] == clean[k]);
        CHECK((hit[k] >= 0.0) == (clean[k] >= 0.0));
    }
}

TEST_CASE("noise extraction") {
    const auto f = random_frame(5000, 100, 11);
    const auto s = f.all();
    EqualizedFrame clean;
    clean.x.assign(s.begin(), s.end());
    clean.training_length = f.training.size();
    clean.residual_noise = training_residual(clean.x, f.training);
    for (double n : extract_noise(clean)) CHECK(std::abs(n) < 1e-6);

    const double sd = 0.3;
    EqualizedFrame noisy;
    noisy.x = through_channel(s, {1.0}, 0, sd, 12);
    noisy.training_length = f.training.size();
    noisy.residual_noise = training_residual(noisy.x, f.training);
    double var = 0.0;
    for (double n : extract_noise(noisy)) var += n * n;
    var /= static_cast<double>(f.training.size());
    CHECK(std::abs(var / (sd * sd) - 1.0) < 0.05);

    EqualizedFrame broken;
    broken.training_length = 10;
    CHECK_THROWS_AS(extract_noise(broken), Error);
}

TEST_CASE("weights csv round trip") {
    PnleWeights p;
    p.bias = -0.0125;
    p.w1 = {0.1, 1.0 / 3.0, -0.2};
    p.w2 = {1e-9};
    p.w3 = {};
    std::stringstream ps;
    write_weights_csv(ps, p);
    const auto pr = read_pnle_weights_csv(ps);
    CHECK(pr.bias == p.bias);
    CHECK(pr.w1 == p.w1);
    CHECK(pr.w2 == p.w2);
    CHECK(pr.w3.empty());

    DfeWeights d;
    d.ff = {0.5, 1.0, -0.25};
    d.fb = {0.125, 0.0625};
    std::stringstream ds;
    write_weights_csv(ds, d);
    const auto dr = read_dfe_weights_csv(ds);
    CHECK(dr.ff == d.ff);
    CHECK(dr.fb == d.fb);

    std::stringstream bad("[w1]\n1\n2\n");
    CHECK_THROWS_AS(read_pnle_weights_csv(bad), Error);
}
