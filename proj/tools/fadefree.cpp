// Command-line front end: single runs, sweeps, complexity tables and the
// analytic spectral-null list.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "fadefree/error.hpp"
#include "fadefree/harness.hpp"

using namespace fadefree;

namespace {

struct Args {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string detector;
    std::optional<std::uint64_t> min_bits;
    bool full_scale = false;
    bool dump = false;
    unsigned threads = 0;
    std::vector<int> memories{5, 10, 15, 31, 47};
    std::vector<std::uint64_t> states{16};
    double fmax_ghz = 0.0;
};

PipelineConfig build_config(const Args& a) {
    PipelineConfig cfg = default_config();
    if (a.full_scale) apply_full_scale(cfg);
    if (!a.config.empty()) load_config_file(cfg, a.config);
    for (const auto& s : a.sets) apply_override(cfg, s);
    if (!a.out.empty()) cfg.out_dir = a.out;
    if (a.seed) cfg.seed = *a.seed;
    if (!a.detector.empty()) {
        cfg.detector = DetectorSpec::parse(a.detector);
        cfg.sweep.detectors = {cfg.detector};
    }
    if (a.min_bits) cfg.min_bits = *a.min_bits;
    if (a.dump) cfg.dump = true;
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + p.string());
    return out;
}

int cmd_run(const Args& a) {
    const auto cfg = build_config(a);
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.dump) dump_diagnostics(cfg, cfg.out_dir / "dump");
    const auto rep = run_pipeline(cfg);
    SweepResult one;
    one.cells.push_back({rep, {}, {}});
    auto out = open_out(cfg.out_dir / "run.csv");
    write_sweep_csv(out, one);
    auto cfg_out = open_out(cfg.out_dir / "config.ini");
    write_config(cfg_out, cfg);
    std::printf("%s L=%d M=%llu snr=%.3g dB: %llu errors / %llu bits, BER %.4g [%.4g, %.4g]\n", rep.detector.c_str(),
                rep.memory, static_cast<unsigned long long>(rep.states), rep.snr_db,
                static_cast<unsigned long long>(rep.count.errors), static_cast<unsigned long long>(rep.count.bits),
                rep.count.ber(), rep.ci.lo, rep.ci.hi);
    std::printf("net rate %.4g Gbit/s\n", net_rate(cfg) / 1e9);
    return 0;
}

int cmd_sweep(const Args& a) {
    const auto cfg = build_config(a);
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.dump) dump_diagnostics(cfg, cfg.out_dir / "dump");
    SweepOptions opts;
    opts.threads = a.threads;
    const auto result = run_sweep(cfg, opts);
    auto out = open_out(cfg.out_dir / "sweep.csv");
    write_sweep_csv(out, result);
    auto fout = open_out(cfg.out_dir / "failures.csv");
    write_failures_csv(fout, result);
    auto cfg_out = open_out(cfg.out_dir / "config.ini");
    write_config(cfg_out, cfg);
    if (cfg.plots) write_sweep_plots(cfg.out_dir, result);
    write_sweep_csv(std::cout, result);
    for (const auto& f : result.failures) {
        std::fprintf(stderr, "cell %s L=%d M=%llu snr=%.3g failed: %s\n", f.detector.c_str(), f.memory,
                     static_cast<unsigned long long>(f.states), f.snr_db, f.message.c_str());
    }
    return 0;
}

int cmd_complexity(const Args& a) {
    const auto cfg = build_config(a);
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<ComplexityRow> rows;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss;
    for (int L : a.memories) {
        WhitenedChannel ch;
        ch.h.assign(static_cast<std::size_t>(L) + 1, 0.0);
        ch.h[0] = 1.0;
        for (int i = 1; i <= L; ++i) ch.h[static_cast<std::size_t>(i)] = 0.3 * gauss(rng) / i;
        ch.sigma2 = 0.1;
        std::vector<double> z(64);
        for (auto& v : z) v = gauss(rng);
        if (L <= cfg.detect.state_cap) {
            rows.push_back(complexity_report(viterbi_mlse(z, ch, cfg.detect)));
        } else {
            rows.push_back(full_state_complexity(DetectorKind::Mlse, L));
        }
        for (auto M : a.states) rows.push_back(complexity_report(fixed_state_logmap(z, ch, M, cfg.detect)));
    }
    auto out = open_out(cfg.out_dir / "complexity.csv");
    write_complexity_csv(out, rows);
    write_complexity_csv(std::cout, rows);
    return 0;
}

int cmd_nulls(const Args& a) {
    const auto cfg = build_config(a);
    const double fmax = a.fmax_ghz > 0.0 ? a.fmax_ghz * 1e9 : cfg.frame.symbol_rate / 2.0;
    const auto nulls = spectral_null_frequencies(cfg.channel, fmax);
    std::printf("%zu nulls below %.4g GHz\n", nulls.size(), fmax / 1e9);
    std::printf("n,freq_hz\n");
    for (std::size_t i = 0; i < nulls.size(); ++i) std::printf("%zu,%.9g\n", i, nulls[i]);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed-state Log-MAP detection for simulated IM/DD links"};
    app.require_subcommand(1);
    app.fallthrough();
    Args a;
    app.add_option("--config", a.config, "INI config file");
    app.add_option("--set", a.sets, "override, section.key=value (repeatable)");
    app.add_option("--out", a.out, "output directory");
    app.add_option("--seed", a.seed, "base seed");
    app.add_option("--detector", a.detector, "mlse | logmap | threshold | fixed | fixed:<M>");
    app.add_option("--min-bits", a.min_bits, "payload bits per point");
    app.add_flag("--paper-scale", a.full_scale, "64 GBd preset with the long equalizers");
    app.add_flag("--dump", a.dump, "write spectra and eye matrix of the first frame");

    auto* run = app.add_subcommand("run", "one BER point");
    auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over detectors, L, M and SNR");
    sweep->add_option("--threads", a.threads, "worker threads (default: cores, capped by FADEFREE_THREADS)");
    auto* complexity = app.add_subcommand("complexity", "per-step branch and state counts");
    complexity->add_option("--memories", a.memories, "L values")->delimiter(',');
    complexity->add_option("--states", a.states, "M values")->delimiter(',');
    auto* nulls = app.add_subcommand("nulls", "analytic power-fading nulls of the configured fiber");
    nulls->add_option("--fmax-ghz", a.fmax_ghz, "upper frequency (default: half the symbol rate)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(a);
        if (*sweep) return cmd_sweep(a);
        if (*complexity) return cmd_complexity(a);
        if (*nulls) return cmd_nulls(a);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::Config ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
