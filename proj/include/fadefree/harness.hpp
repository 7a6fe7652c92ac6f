#pragma once

// End-to-end simulation harness: configuration, the per-frame pipeline,
// Monte-Carlo BER counting, parameter sweeps and report files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fadefree/channel.hpp"
#include "fadefree/detect.hpp"
#include "fadefree/equalize.hpp"
#include "fadefree/signal.hpp"
#include "fadefree/whiten.hpp"

namespace fadefree {

// ---------------------------------------------------------------- config

/// Detector selection: a full-state or fixed-state trellis detector, or a
/// plain sign decision on the equalizer output (no post-filter).
struct DetectorSpec {
    enum class Kind { Mlse, LogMap, Fixed, Threshold };
    Kind kind = Kind::Fixed;
    std::uint64_t states = 16;  // M, fixed-state only; 0 = take it from the sweep axis

    /// "mlse", "logmap", "threshold", "fixed" or "fixed:<M>".
    static DetectorSpec parse(const std::string& text);
    std::string name() const;  // mlse | logmap | fixed | threshold
    bool uses_trellis() const { return kind != Kind::Threshold; }
};

enum class EqualizerMode { None, Pnle, PnleDfe };

struct FrameConfig {
    std::size_t training = default_training_length;
    std::size_t payload = default_payload_length;
    double symbol_rate = 16e9;
    int prbs_order = 15;
};

struct ReceiverConfig {
    int dac_bits = 0;  // 0 = unquantized drive
    // The link runs at sps * link_up / link_down samples per symbol (DAC and
    // scope rates); the receiver resamples back before the matched filter.
    int link_up = 1;
    int link_down = 1;
    double sync_floor = 0.25;
};

struct SweepAxes {
    std::vector<DetectorSpec> detectors;
    std::vector<int> memories;
    std::vector<std::uint64_t> states;
    std::vector<double> snr_db;
};

struct PipelineConfig {
    FrameConfig frame;
    RrcParams rrc;
    ReceiverConfig receiver;
    ChannelConfig channel;
    EqualizerMode equalizer = EqualizerMode::Pnle;
    PnleConfig pnle;
    DfeConfig dfe;
    DetectorSpec detector;
    int memory = 31;  // post-filter order L
    DetectorOptions detect;
    SweepAxes sweep;
    std::uint64_t seed = 1;
    std::uint64_t min_bits = 100000;
    double fec_overhead = 0.07;
    std::filesystem::path out_dir = "out";
    bool plots = true;
    bool dump = false;  // per-stage spectra and eye matrix for the first frame

    void validate() const;
};

/// Desk-scale defaults (16 GBd, 2 sps, 100 km, reduced tap counts).
PipelineConfig default_config();
/// 64 GBd with the long equalizers, applied on top of an existing config.
void apply_full_scale(PipelineConfig& cfg);

/// `section.key = value`; throws Error(Config) for unknown keys or bad values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);
/// "section.key=value" form used on the command line.
void apply_override(PipelineConfig& cfg, const std::string& assignment);
/// INI-style file: `[section]` headers, `key = value` lines, `#`/`;` comments.
void load_config(PipelineConfig& cfg, std::istream& is);
void load_config_file(PipelineConfig& cfg, const std::filesystem::path& path);
/// Every key with its current value, in the file format load_config reads.
void write_config(std::ostream& os, const PipelineConfig& cfg);

// -------------------------------------------------------------- pipeline

/// One simulated frame after equalization, before the post-filter.
struct FrameData {
    SymbolFrame frame;
    EqualizedFrame eq;
    std::size_t sync_lag = 0;
};

/// Transmitter, link and receiver DSP up to the equalizer output. Errors
/// carry the failing stage name (StageError).
FrameData simulate_frame(const PipelineConfig& cfg, std::uint64_t frame_seed);

struct PayloadDetection {
    std::vector<Pam2> decisions;
    std::optional<DetectorRun> run;  // absent for the threshold detector
};

/// Post-filter fit of order `memory` on the training residual, whitening of
/// the whole frame, detection over the payload with the start state taken
/// from the training tail.
PayloadDetection detect_payload(const FrameData& data, const DetectorSpec& det, int memory, std::uint64_t states,
                                const DetectorOptions& opts);

struct BerCount {
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    double ber() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

inline constexpr double z_95 = 1.959963984540054;

/// Wilson score interval for errors/bits.
Interval wilson_interval(std::uint64_t errors, std::uint64_t bits, double z = z_95);

/// line_rate * payload / (payload + training) / (1 + overhead).
double net_rate(double line_rate, std::size_t payload, std::size_t training, double overhead);
double net_rate(const PipelineConfig& cfg);

struct BerReport {
    std::string detector;
    int memory = 0;
    std::uint64_t states = 0;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    BerCount count;
    Interval ci;
    ComplexityRow complexity;
    std::uint64_t frames = 0;
};

/// Seed of Monte-Carlo frame `rep` at SNR index `snr_index`; shared by all
/// detectors, memories and state counts so their comparisons are paired.
std::uint64_t frame_seed(std::uint64_t base, std::size_t snr_index, std::uint64_t rep);

/// Spectra (transmit drive, received, equalizer residual before and after
/// the post-filter) and an eye-diagram sample matrix of the first frame,
/// written into `dir`.
void dump_diagnostics(const PipelineConfig& cfg, const std::filesystem::path& dir);

/// Frames of cfg.detector at cfg.channel.snr_db until cfg.min_bits payload bits.
BerReport run_pipeline(const PipelineConfig& cfg);

/// Payload symbol errors, counted independently of the detectors.
std::uint64_t count_errors(std::span<const Pam2> sent, std::span<const Pam2> decided);

// ----------------------------------------------------------------- sweep

struct SweepFailure {
    std::string detector;
    int memory = 0;
    std::uint64_t states = 0;
    double snr_db = 0.0;
    std::string message;
};

/// Per-frame error vectors are kept so paired tests can compare cells.
struct SweepCell {
    BerReport report;
    std::vector<std::uint64_t> frame_errors;
    std::vector<std::uint8_t> error_pattern;  // per payload bit, only when requested
};

struct SweepResult {
    std::vector<SweepCell> cells;  // sorted by (detector, L, M, snr)
    std::vector<SweepFailure> failures;
};

struct SweepOptions {
    bool keep_error_patterns = false;
    unsigned threads = 0;  // 0 = hardware concurrency capped by FADEFREE_THREADS
};

/// Cartesian product of the sweep axes. Each (snr, frame) job simulates the
/// link once and runs every (detector, L, M) cell on it.
SweepResult run_sweep(const PipelineConfig& cfg, const SweepOptions& opts = {});

unsigned worker_count();

// ---------------------------------------------------------------- report

inline constexpr const char* sweep_csv_header =
    "detector,L,M,snr_db,seed,bits,errors,ber,ci_lo,ci_hi,branch_evals_per_step,states_stored";

void write_sweep_csv(std::ostream& os, const SweepResult& result);
void write_failures_csv(std::ostream& os, const SweepResult& result);
void write_complexity_csv(std::ostream& os, const std::vector<ComplexityRow>& rows);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Line plot with a log10 y axis (non-positive values are skipped).
void write_svg_plot(std::ostream& os, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series);

/// BER-versus-axis plots for whichever axes the sweep varied.
void write_sweep_plots(const std::filesystem::path& dir, const SweepResult& result);

/// One-sided exact sign test on discordant pairs: P(X >= b) for
/// X ~ Binomial(b + c, 1/2), where b counts bits only the first detector got
/// wrong and c bits only the second got wrong.
double sign_test_p_value(std::uint64_t only_first_wrong, std::uint64_t only_second_wrong);

/// Log-linear interpolation of the SNR where BER crosses `target`, scanning
/// points in increasing SNR. Empty if the curve never crosses.
std::optional<double> crossing_snr(const std::vector<double>& snr_db, const std::vector<double>& ber, double target);

} // namespace fadefree
