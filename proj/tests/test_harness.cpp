#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fadefree/error.hpp"
#include "fadefree/harness.hpp"

using namespace fadefree;

namespace {

PipelineConfig small_config() {
    auto cfg = default_config();
    cfg.frame.training = 3000;
    cfg.frame.payload = 6000;
    cfg.min_bits = 6000;
    cfg.plots = false;
    return cfg;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FADEFREE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

// ----------------------------------------------------------------- config

TEST_CASE("config: written file loads back to the same settings") {
    auto cfg = default_config();
    apply_override(cfg, "channel.snr_db=7.25");
    apply_override(cfg, "sweep.states=1,3,64");
    apply_override(cfg, "sweep.detectors=mlse,fixed:8,threshold");
    apply_override(cfg, "equalizer.mode=pnle+dfe");
    apply_override(cfg, "detector.dead_end=terminal");
    std::stringstream a;
    write_config(a, cfg);
    auto back = default_config();
    load_config(back, a);
    std::stringstream b;
    write_config(b, back);
    CHECK(a.str() == b.str());
    CHECK(back.channel.snr_db == 7.25);
    CHECK(back.sweep.states == std::vector<std::uint64_t>{1, 3, 64});
    REQUIRE(back.sweep.detectors.size() == 3);
    CHECK(back.sweep.detectors[1].states == 8);
    CHECK(back.equalizer == EqualizerMode::PnleDfe);
    CHECK(back.detect.dead_end == DeadEndPolicy::Terminal);
}

TEST_CASE("config: file format and errors") {
    auto cfg = default_config();
    std::stringstream ini("# comment\n[channel]\nlength_km = 50\n; another\n[detector]\nkind = fixed:4\nmemory = 9\n");
    load_config(cfg, ini);
    CHECK(cfg.channel.fiber_length == 50e3);
    CHECK(cfg.detector.states == 4);
    CHECK(cfg.memory == 9);

    auto expect_config_error = [&](const std::string& assignment) {
        auto c = default_config();
        try {
            apply_override(c, assignment);
            c.validate();
            FAIL("accepted " << assignment);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Config);
        }
    };
    expect_config_error("channel.nope=1");
    expect_config_error("channel.snr_db=abc");
    expect_config_error("detector.kind=fixed:0");
    expect_config_error("detector.kind=map");
    expect_config_error("equalizer.mode=volterra");
    expect_config_error("no_equals_sign");
    expect_config_error("detector.memory=-1");
}

TEST_CASE("detector spec parsing") {
    CHECK(DetectorSpec::parse("mlse").kind == DetectorSpec::Kind::Mlse);
    CHECK(DetectorSpec::parse("logmap").kind == DetectorSpec::Kind::LogMap);
    CHECK(DetectorSpec::parse("threshold").uses_trellis() == false);
    const auto f = DetectorSpec::parse("fixed:32");
    CHECK(f.kind == DetectorSpec::Kind::Fixed);
    CHECK(f.states == 32);
    CHECK(f.name() == "fixed");
    CHECK(DetectorSpec::parse("fixed").states == 0);
    CHECK_THROWS_AS(DetectorSpec::parse("fixed:x"), Error);
    CHECK_THROWS_AS(DetectorSpec::parse("Viterbi"), Error);
}

// ------------------------------------------------------------- statistics

TEST_CASE("wilson interval") {
    // Zero errors: upper bound z^2 / (n + z^2).
    const auto z0 = wilson_interval(0, 100);
    CHECK(z0.lo == 0.0);
    CHECK(z0.hi == doctest::Approx(z_95 * z_95 / (100 + z_95 * z_95)).epsilon(1e-12));
    // Reference values from the score-interval quadratic solved directly.
    for (auto [e, n] : {std::pair<std::uint64_t, std::uint64_t>{7, 1000}, {500, 1000}, {3, 1000000}}) {
        const double p = static_cast<double>(e) / static_cast<double>(n);
        const double N = static_cast<double>(n);
        const double z2 = z_95 * z_95;
        // (p - x)^2 = z^2 x (1 - x) / n  =>  (1 + z2/N) x^2 - (2p + z2/N) x + p^2 = 0
        const double A = 1 + z2 / N, B = -(2 * p + z2 / N), C = p * p;
        const double disc = std::sqrt(B * B - 4 * A * C);
        const auto ci = wilson_interval(e, n);
        CHECK(ci.lo == doctest::Approx((-B - disc) / (2 * A)).epsilon(1e-9));
        CHECK(ci.hi == doctest::Approx((-B + disc) / (2 * A)).epsilon(1e-9));
        CHECK(ci.lo < p);
        CHECK(ci.hi > p);
    }
    CHECK(wilson_interval(5, 5).hi == 1.0);
    CHECK_THROWS_AS(wilson_interval(6, 5), Error);
}

TEST_CASE("net rate") {
    CHECK(net_rate(64e9, 77240, 5000, 0.07) / 1e9 == doctest::Approx(56.18).epsilon(1e-4));
    CHECK(net_rate(1.0, 1, 0, 0.0) == 1.0);
    CHECK(net_rate(2e9, 100, 100, 0.0) == 1e9);
    CHECK(net_rate(128e9, 77240, 5000, 0.07) == doctest::Approx(2 * net_rate(64e9, 77240, 5000, 0.07)));
    auto cfg = default_config();
    apply_full_scale(cfg);
    CHECK(net_rate(cfg) / 1e9 == doctest::Approx(56.18).epsilon(1e-4));
    CHECK_THROWS_AS(net_rate(64e9, 0, 0, 0.07), Error);
}

TEST_CASE("error counting matches an independent hamming count") {
    std::mt19937_64 rng(1);
    std::vector<Pam2> a(10000), b(10000);
    for (auto& v : a) v = (rng() & 1u) ? 1 : -1;
    b = a;
    std::uint64_t flipped = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (rng() % 7 == 0) {
            b[i] = static_cast<Pam2>(-b[i]);
            ++flipped;
        }
    }
    CHECK(count_errors(a, b) == flipped);
    const auto ba = pam2_demap(a), bb = pam2_demap(b);
    std::uint64_t ham = 0;
    for (std::size_t i = 0; i < ba.size(); ++i) ham += static_cast<std::uint64_t>(ba[i] ^ bb[i]);
    CHECK(count_errors(a, b) == ham);
    CHECK_THROWS_AS(count_errors(a, std::vector<Pam2>(3, 1)), Error);
}

TEST_CASE("sign test") {
    // Exact binomial tails for small n.
    auto exact = [](int b, int c) {
        const int n = b + c;
        double acc = 0.0;
        for (int k = b; k <= n; ++k) {
            double ch = 1.0;
            for (int i = 1; i <= k; ++i) ch = ch * (n - k + i) / i;
            acc += ch;
        }
        return acc / std::pow(2.0, n);
    };
    for (int b = 0; b <= 20; ++b) {
        for (int c = 0; c <= 20; ++c) {
            if (b + c == 0) continue;
            CHECK(sign_test_p_value(b, c) == doctest::Approx(exact(b, c)).epsilon(1e-10));
        }
    }
    CHECK(sign_test_p_value(0, 0) == 1.0);
    CHECK(sign_test_p_value(1000, 900) < 0.05);
    CHECK(sign_test_p_value(900, 1000) > 0.95);
}

TEST_CASE("crossing snr") {
    const std::vector<double> snr{4, 6, 8, 10};
    const std::vector<double> ber{1e-1, 1e-2, 1e-3, 1e-5};
    CHECK(*crossing_snr(snr, ber, 1e-2) == doctest::Approx(6.0));
    CHECK(*crossing_snr(snr, ber, std::pow(10.0, -2.5)) == doctest::Approx(7.0));
    CHECK(*crossing_snr(snr, ber, 1e-4) == doctest::Approx(9.0));
    CHECK(!crossing_snr(snr, ber, 1e-6));
    CHECK(!crossing_snr(snr, ber, 0.5));
    CHECK(*crossing_snr(snr, std::vector<double>{1e-1, 1e-2, 0.0, 0.0}, 1e-3) > 6.0);
}

// --------------------------------------------------------------- pipeline

TEST_CASE("noiseless ISI-free link decodes without errors") {
    auto cfg = small_config();
    cfg.channel.fiber_length = 0.0;
    cfg.channel.front_end_bandwidth = std::numeric_limits<double>::infinity();
    cfg.channel.snr_db = snr_infinite;
    cfg.equalizer = EqualizerMode::None;
    cfg.receiver.dac_bits = 0;
    for (const char* det : {"threshold", "fixed:4", "mlse", "logmap"}) {
        cfg.detector = DetectorSpec::parse(det);
        cfg.memory = 3;
        const auto rep = run_pipeline(cfg);
        CAPTURE(det);
        CHECK(rep.count.errors == 0);
        CHECK(rep.count.bits >= 6000);
    }
}

TEST_CASE("pipeline runs are deterministic and seeds matter") {
    auto cfg = small_config();
    cfg.channel.snr_db = 6.0;
    cfg.memory = 8;
    const auto a = run_pipeline(cfg), b = run_pipeline(cfg);
    CHECK(a.count.errors == b.count.errors);
    CHECK(a.count.errors > 0);
    const auto fa = simulate_frame(cfg, 11), fb = simulate_frame(cfg, 11), fc = simulate_frame(cfg, 12);
    CHECK(fa.eq.x == fb.eq.x);
    CHECK(fa.eq.x != fc.eq.x);
    CHECK(frame_seed(1, 0, 0) != frame_seed(1, 0, 1));
    CHECK(frame_seed(1, 0, 0) != frame_seed(1, 1, 0));
    CHECK(frame_seed(1, 2, 3) == frame_seed(1, 2, 3));
}

TEST_CASE("equalizer output on the training region tracks the known symbols") {
    // High-SNR check: near 6-8 dB the noise lifted at the fading nulls caps the
    // coefficient around 0.85 whatever the tap count.
    auto cfg = default_config();
    SUBCASE("desk link") {}
    SUBCASE("48 GBd link") {
        cfg.frame.symbol_rate = 48e9;
        cfg.channel.front_end_bandwidth = 18e9;
        cfg.pnle.taps1 = 121;
        cfg.receiver.sync_floor = 0.1;
    }
    cfg.channel.snr_db = 20.0;
    const auto d = simulate_frame(cfg, 3);
    const std::vector<double> x(d.eq.x.begin(), d.eq.x.begin() + static_cast<long>(d.frame.training.size()));
    const std::vector<double> t(d.frame.training.begin(), d.frame.training.end());
    CHECK(pearson(x, t) > 0.9);
}

TEST_CASE("residual noise is coloured around the first fading null") {
    // 100 km at 16 GBd: the first power-fading null sits at 6.06 GHz, inside
    // the 8 GHz symbol-rate band; the equalizer lifts noise there.
    auto cfg = default_config();
    cfg.channel.snr_db = 15.0;
    const auto d = simulate_frame(cfg, 5);
    const auto noise = extract_noise(d.eq);
    const auto spec = estimate_power_spectrum(noise, cfg.frame.symbol_rate, 256);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < spec.power_db.size(); ++i) {
        if (spec.power_db[i] > spec.power_db[peak]) peak = i;
    }
    const auto nulls = spectral_null_frequencies(cfg.channel, cfg.frame.symbol_rate / 2);
    REQUIRE(!nulls.empty());
    CHECK(nulls[0] == doctest::Approx(6.06e9).epsilon(2e-3));
    CHECK(std::abs(spec.frequencies[peak] - nulls[0]) < 0.5e9);
}

// ---------------------------------------------------------------- reports

TEST_CASE("sweep csv layout and paired cells") {
    auto cfg = small_config();
    cfg.channel.snr_db = 7.0;
    cfg.sweep.detectors = {DetectorSpec::parse("fixed"), DetectorSpec::parse("threshold")};
    cfg.sweep.memories = {4};
    cfg.sweep.states = {2, 8};
    cfg.sweep.snr_db = {6.0, 9.0};
    SweepOptions o;
    o.keep_error_patterns = true;
    const auto r = run_sweep(cfg, o);
    CHECK(r.failures.empty());
    // fixed x {2, 8} x 2 SNR + threshold x 2 SNR.
    REQUIRE(r.cells.size() == 6);
    std::stringstream ss;
    write_sweep_csv(ss, r);
    std::string line;
    std::getline(ss, line);
    CHECK(line == sweep_csv_header);
    int rows = 0;
    while (std::getline(ss, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 11);
    }
    CHECK(rows == 6);
    for (const auto& c : r.cells) {
        std::uint64_t sum = 0;
        for (auto e : c.frame_errors) sum += e;
        CHECK(sum == c.report.count.errors);
        std::uint64_t pat = 0;
        for (auto e : c.error_pattern) pat += e;
        CHECK(pat == c.report.count.errors);
        CHECK(c.error_pattern.size() == c.report.count.bits);
    }
}

TEST_CASE("complexity csv header") {
    std::stringstream ss;
    write_complexity_csv(ss, {full_state_complexity(DetectorKind::Mlse, 15)});
    CHECK(ss.str() == "detector,L,M,branch_evals_per_step,states_stored,selection_comparisons\nmlse,15,32768,65536,32768,0\n");
}

// -------------------------------------------------------------------- cli

TEST_CASE("cli exit codes") {
    const auto dir = std::filesystem::temp_directory_path() / "fadefree_cli_test";
    std::filesystem::create_directories(dir);
    const std::string out = " --out " + dir.string();
    CHECK(run_cli("nulls") == 0);
    CHECK(run_cli("run --min-bits 1 --set frame.payload=2000 --set frame.training=2000" + out) == 0);
    CHECK(std::filesystem::exists(dir / "run.csv"));
    CHECK(run_cli("run --set channel.bogus=1" + out) == 1);
    CHECK(run_cli("run --detector banana" + out) == 1);
    CHECK(run_cli("frobnicate") == 1);
    // A lock threshold no correlation can reach fails inside the sync stage.
    CHECK(run_cli("run --min-bits 1 --set receiver.sync_floor=0.9999 --set channel.snr_db=0" + out) == 2);
    std::filesystem::remove_all(dir);
}
