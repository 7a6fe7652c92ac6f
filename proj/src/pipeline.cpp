#include <algorithm>
#include <cmath>
#include <fstream>

#include "fadefree/dsp.hpp"
#include "fadefree/error.hpp"
#include "fadefree/harness.hpp"

namespace fadefree {

namespace {

template <class F>
auto in_stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

struct Probe {
    RealWaveform drive;
    RealWaveform received;
    RealWaveform matched;
    std::size_t first_sample = 0;
};

FrameData simulate_frame_impl(const PipelineConfig& cfg, std::uint64_t frame_seed_value, Probe* probe) {
    FrameData data;
    const auto& rx = cfg.receiver;

    RealWaveform drive = in_stage("transmit", [&] {
        const int order = cfg.frame.prbs_order;
        const std::uint32_t mask = order >= 32 ? ~0u : ((1u << order) - 1u);
        std::uint32_t seed = static_cast<std::uint32_t>(dsp::mix_seed(frame_seed_value, 1)) & mask;
        if (seed == 0) seed = 1;
        const auto bits = prbs_generate(order, seed, cfg.frame.training + cfg.frame.payload);
        const auto symbols = pam2_map(bits);
        data.frame.training.assign(symbols.begin(), symbols.begin() + static_cast<long>(cfg.frame.training));
        data.frame.payload.assign(symbols.begin() + static_cast<long>(cfg.frame.training), symbols.end());
        data.frame.symbol_rate = cfg.frame.symbol_rate;
        auto shaped = resample(rrc_shape(data.frame, cfg.rrc), rx.link_up, rx.link_down);
        // Full DAC scale at the waveform peak.
        double peak = 0.0;
        for (double v : shaped.samples()) peak = std::max(peak, std::abs(v));
        require(peak > 0.0, "shaped waveform is all zeros");
        auto samples = std::move(shaped).release();
        for (auto& v : samples) v /= peak;
        RealWaveform scaled(std::move(samples), cfg.frame.symbol_rate * cfg.rrc.sps * rx.link_up / rx.link_down);
        return rx.dac_bits > 0 ? quantize_uniform(scaled, rx.dac_bits, 1.0) : scaled;
    });

    RealWaveform received = in_stage("link", [&] {
        ChannelConfig ch = cfg.channel;
        ch.seed = dsp::mix_seed(frame_seed_value, 2);
        return simulate_link(drive, ch);
    });

    received = in_stage("resample", [&] { return resample(received, rx.link_down, rx.link_up); });
    RealWaveform matched = in_stage("matched-filter", [&] { return matched_filter(received, cfg.rrc); });

    std::vector<double> r = in_stage("sync", [&] {
        SyncOptions so;
        so.floor = rx.sync_floor;
        const std::size_t span = cfg.rrc.group_delay() + (data.frame.size() - 1) * static_cast<std::size_t>(cfg.rrc.sps);
        require(matched.size() > span, "received waveform shorter than the frame");
        so.max_lag = matched.size() - 1 - span;
        data.sync_lag = synchronize(matched, data.frame.training, cfg.rrc, so);
        const std::size_t first = data.sync_lag + cfg.rrc.group_delay();
        if (probe) probe->first_sample = first;
        return normalize_rms(downsample(matched, first, cfg.rrc.sps, data.frame.size()));
    });

    data.eq = in_stage("equalize", [&] {
        switch (cfg.equalizer) {
            case EqualizerMode::None: {
                EqualizedFrame eq;
                eq.x = std::move(r);
                eq.training_length = data.frame.training.size();
                eq.residual_noise = training_residual(eq.x, data.frame.training);
                return eq;
            }
            case EqualizerMode::Pnle: return pnle_train_apply(r, data.frame, cfg.pnle);
            case EqualizerMode::PnleDfe: {
                const auto p = pnle_train_apply(r, data.frame, cfg.pnle);
                return dfe_train_apply(p.x, data.frame, cfg.dfe);
            }
        }
        fail(ErrorKind::InvalidArgument, "unknown equalizer mode");
    });

    if (probe) {
        probe->drive = std::move(drive);
        probe->received = std::move(received);
        probe->matched = std::move(matched);
    }
    return data;
}

void write_spectrum_file(const std::filesystem::path& path, std::span<const double> x, double rate,
                         std::size_t segment) {
    segment = std::min(segment, x.size() / 2);
    std::ofstream out(path);
    if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + path.string());
    write_spectrum_csv(out, estimate_power_spectrum(x, rate, segment));
}

} // namespace

FrameData simulate_frame(const PipelineConfig& cfg, std::uint64_t frame_seed_value) {
    return simulate_frame_impl(cfg, frame_seed_value, nullptr);
}

PayloadDetection detect_payload(const FrameData& data, const DetectorSpec& det, int memory, std::uint64_t states,
                                const DetectorOptions& opts) {
    const std::size_t n_train = data.frame.training.size();
    const auto& x = data.eq.x;
    PayloadDetection out;
    if (det.kind == DetectorSpec::Kind::Threshold) {
        out.decisions = hard_decide(std::span<const double>(x).subspan(n_train));
        return out;
    }

    const auto [ch, z] = in_stage("whiten", [&] {
        const auto noise = extract_noise(data.eq);
        const auto r = autocorrelation(noise, static_cast<std::size_t>(memory));
        WhitenedChannel fit = yule_walker_fit(r, memory);
        auto v = postfilter_apply(x, fit);
        return std::make_pair(std::move(fit), std::move(v));
    });

    out.run = in_stage("detect", [&] {
        const std::span<const double> payload = std::span<const double>(z).subspan(n_train);
        const InitialState init = state_from_history(data.frame.training, memory);
        switch (det.kind) {
            case DetectorSpec::Kind::Mlse: return viterbi_mlse(payload, ch, opts, init);
            case DetectorSpec::Kind::LogMap: return logmap_full(payload, ch, {}, opts, init);
            case DetectorSpec::Kind::Fixed:
                return fixed_state_logmap(payload, ch, states ? states : det.states, opts, init);
            case DetectorSpec::Kind::Threshold: break;
        }
        fail(ErrorKind::InvalidArgument, "unknown detector");
    });
    out.decisions = out.run->decisions;
    return out;
}

Interval wilson_interval(std::uint64_t errors, std::uint64_t bits, double z) {
    require(errors <= bits, "wilson_interval: more errors than bits");
    if (bits == 0) return {0.0, 1.0};
    const double n = static_cast<double>(bits);
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {errors == 0 ? 0.0 : std::max(0.0, centre - half), errors == bits ? 1.0 : std::min(1.0, centre + half)};
}

double net_rate(double line_rate, std::size_t payload, std::size_t training, double overhead) {
    require(line_rate > 0.0 && payload + training > 0 && overhead >= 0.0, "net_rate: invalid arguments");
    return line_rate * static_cast<double>(payload) / static_cast<double>(payload + training) / (1.0 + overhead);
}

double net_rate(const PipelineConfig& cfg) {
    return net_rate(cfg.frame.symbol_rate, cfg.frame.payload, cfg.frame.training, cfg.fec_overhead);
}

std::uint64_t frame_seed(std::uint64_t base, std::size_t snr_index, std::uint64_t rep) {
    return dsp::mix_seed(base, snr_index, rep);
}

std::uint64_t count_errors(std::span<const Pam2> sent, std::span<const Pam2> decided) {
    require(sent.size() == decided.size(), "count_errors: length mismatch");
    std::uint64_t e = 0;
    for (std::size_t k = 0; k < sent.size(); ++k) e += sent[k] != decided[k];
    return e;
}

BerReport run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    const DetectorSpec& det = cfg.detector;
    const std::uint64_t M = det.kind == DetectorSpec::Kind::Fixed ? (det.states ? det.states : 16) : 0;
    BerReport rep;
    rep.detector = det.name();
    rep.memory = det.uses_trellis() ? cfg.memory : 0;
    rep.states = det.kind == DetectorSpec::Kind::Fixed ? M
                 : det.uses_trellis()                  ? (std::uint64_t{1} << cfg.memory)
                                                       : 1;
    rep.snr_db = cfg.channel.snr_db;
    rep.seed = cfg.seed;
    while (rep.count.bits < cfg.min_bits) {
        const auto data = simulate_frame(cfg, frame_seed(cfg.seed, 0, rep.frames));
        const auto pd = detect_payload(data, det, cfg.memory, M, cfg.detect);
        rep.count.errors += count_errors(data.frame.payload, pd.decisions);
        rep.count.bits += data.frame.payload.size();
        if (pd.run) {
            const auto row = complexity_report(*pd.run);
            rep.complexity.kind = row.kind;
            rep.complexity.memory = row.memory;
            rep.complexity.surviving_states = row.surviving_states;
            rep.complexity.branch_evals_per_step =
                std::max(rep.complexity.branch_evals_per_step, row.branch_evals_per_step);
            rep.complexity.states_stored = std::max(rep.complexity.states_stored, row.states_stored);
            rep.complexity.selection_comparisons += row.selection_comparisons;
        }
        ++rep.frames;
    }
    rep.ci = wilson_interval(rep.count.errors, rep.count.bits);
    return rep;
}

void dump_diagnostics(const PipelineConfig& cfg, const std::filesystem::path& dir) {
    cfg.validate();
    std::filesystem::create_directories(dir);
    Probe probe;
    const auto data = simulate_frame_impl(cfg, frame_seed(cfg.seed, 0, 0), &probe);
    constexpr std::size_t segment = 1024;
    write_spectrum_file(dir / "tx_spectrum.csv", probe.drive.view(), probe.drive.sample_rate(), segment);
    write_spectrum_file(dir / "rx_spectrum.csv", probe.received.view(), probe.received.sample_rate(), segment);

    const double rs = cfg.frame.symbol_rate;
    const auto noise = extract_noise(data.eq);
    write_spectrum_file(dir / "residual_spectrum.csv", noise, rs, 256);
    const auto ch = yule_walker_fit(autocorrelation(noise, static_cast<std::size_t>(cfg.memory)), cfg.memory);
    const auto whitened = postfilter_apply(noise, ch);
    write_spectrum_file(dir / "whitened_spectrum.csv", whitened, rs, 256);
    {
        std::ofstream out(dir / "postfilter.csv");
        write_channel_csv(out, ch);
    }

    // Eye matrix: one row per payload symbol, 2*sps+1 samples centred on it.
    std::ofstream eye(dir / "eye.csv");
    const int sps = cfg.rrc.sps;
    const std::size_t rows = std::min<std::size_t>(2000, data.frame.payload.size() - 1);
    eye << "symbol";
    for (int j = -sps; j <= sps; ++j) eye << ",t" << j;
    eye << "\n";
    char buf[32];
    for (std::size_t k = 1; k <= rows; ++k) {
        const std::size_t centre = probe.first_sample + (data.frame.training.size() + k) * static_cast<std::size_t>(sps);
        if (centre + static_cast<std::size_t>(sps) >= probe.matched.size()) break;
        eye << k;
        for (int j = -sps; j <= sps; ++j) {
            const auto i = static_cast<std::size_t>(static_cast<long>(centre) + j);
            std::snprintf(buf, sizeof buf, ",%.6g", probe.matched[i]);
            eye << buf;
        }
        eye << "\n";
    }
}

} // namespace fadefree
