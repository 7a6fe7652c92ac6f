#pragma once

// Sequence detectors over the whitened-channel trellis:
//   - Viterbi MLSE (hard decisions, full 2^L states)
//   - full Log-MAP / BCJR in the log domain (per-symbol LLRs, 2^L states)
//   - fixed-state Log-MAP: the forward pass keeps only the M most probable
//     states per step and the backward pass walks only the retained branches,
//     so the per-step work is at most 2M branch metrics whatever L is.
// Every run carries complexity counters for the state-storage / branch-count
// comparison between the two families.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fadefree/trellis.hpp"
#include "fadefree/whiten.hpp"

namespace fadefree {

enum class DetectorKind { Mlse, FullLogMap, FixedStateLogMap };

std::string to_string(DetectorKind kind);

/// What the backward pass assigns to a surviving state none of whose
/// successors survived the next forward selection.
enum class DeadEndPolicy {
    Terminal,  // ln beta = 0 after normalization, as if the block ended there
    Discard,   // ln beta at the metric floor, the state drops out of the LLR
};

struct DetectorOptions {
    int state_cap = default_state_cap;  // full-state detectors only
    double llr_max = 50.0;              // saturation for fully pruned hypotheses
    bool max_log = false;               // max(a, b) instead of the Jacobian logarithm
    DeadEndPolicy dead_end = DeadEndPolicy::Discard;
    bool record_metrics = false;        // keep per-step PathMetrics in the run
};

struct ComplexityCounters {
    std::uint64_t steps = 0;
    std::uint64_t branch_metric_evals = 0;
    std::uint64_t peak_branch_evals_per_step = 0;
    std::uint64_t peak_states_stored = 0;
    std::uint64_t selection_comparisons = 0;  // survivor selection, kept apart from branch metrics

    void record_step(std::uint64_t branch_evals, std::uint64_t states);
};

/// Per-step metrics of a detector run (recorded on request). Entry k
/// describes the states alive after k symbols.
struct PathMetrics {
    std::vector<State> survivors;
    std::vector<double> log_alpha;
    std::vector<double> log_beta;
};

struct DetectorRun {
    DetectorKind kind = DetectorKind::Mlse;
    int memory = 0;
    std::uint64_t surviving_states = 0;  // M; 2^L for the full-state detectors
    ComplexityCounters counters;
    std::vector<double> llr;  // empty for MLSE
    std::vector<Pam2> decisions;
    std::vector<PathMetrics> metrics;  // only with DetectorOptions::record_metrics
};

/// ln gamma = -|z - v'|^2 / (2 sigma^2).
inline double branch_metric(double z, double v, double sigma2) {
    const double d = z - v;
    return -(d * d) / (2.0 * sigma2);
}

/// Counting form of branch_metric used by the detectors.
class BranchMetric {
public:
    explicit BranchMetric(double sigma2);

    double operator()(double z, double v) noexcept {
        ++evaluations_;
        const double d = z - v;
        return -(d * d) * inv_two_sigma2_;
    }
    std::uint64_t evaluations() const noexcept { return evaluations_; }

private:
    double inv_two_sigma2_;
    std::uint64_t evaluations_ = 0;
};

/// ln(e^a + e^b) = max(a, b) + ln(1 + e^{-|a-b|}).
inline double max_star(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
}

inline double max_log(double a, double b) { return std::max(a, b); }

/// Known prehistory of the block as a trellis state, or none (uniform start).
using InitialState = std::optional<State>;

DetectorRun viterbi_mlse(std::span<const double> z, const WhitenedChannel& ch, const DetectorOptions& opts = {},
                         InitialState initial = std::nullopt);

/// `prior` holds optional a-priori LLRs (empty = none).
DetectorRun logmap_full(std::span<const double> z, const WhitenedChannel& ch, std::span<const double> prior = {},
                        const DetectorOptions& opts = {}, InitialState initial = std::nullopt);

DetectorRun fixed_state_logmap(std::span<const double> z, const WhitenedChannel& ch, std::uint64_t surviving_states,
                               const DetectorOptions& opts = {}, InitialState initial = std::nullopt);

/// +1 where LLR >= 0, -1 otherwise.
std::vector<Pam2> hard_decide(std::span<const double> llr);

/// Per-symbol `k,llr,decision` rows; the llr column is empty for MLSE.
void write_detector_csv(std::ostream& os, const DetectorRun& run);

struct ComplexityRow {
    DetectorKind kind = DetectorKind::Mlse;
    int memory = 0;
    std::uint64_t surviving_states = 0;
    std::uint64_t branch_evals_per_step = 0;
    std::uint64_t states_stored = 0;
    std::uint64_t selection_comparisons = 0;
};

ComplexityRow complexity_report(const DetectorRun& run);

/// Table entries the full-state detectors would report for memory L,
/// computed without running them: 2^{L+1} branches and 2^L states per step.
ComplexityRow full_state_complexity(DetectorKind kind, int memory);

// Exhaustive verification oracles.

enum class EnumerationOrder { Lexicographic, Gray };

struct OracleResult {
    std::vector<Pam2> ml_sequence;
    std::vector<double> posterior_plus;   // P(u_k = +1 | z)
    std::vector<double> posterior_minus;  // P(u_k = -1 | z)
    std::vector<double> log_ratio;        // ln P(+1|z) / P(-1|z), from log-domain sums
};

inline constexpr std::size_t brute_force_max_symbols = 16;

/// Enumerates every symbol sequence (and every prehistory when `initial` is
/// empty) under the Gaussian branch model. Throws Error(Capacity) for
/// |z| > 16 symbols.
OracleResult brute_force_oracles(std::span<const double> z, const WhitenedChannel& ch,
                                 InitialState initial = std::nullopt, std::span<const double> prior = {},
                                 EnumerationOrder order = EnumerationOrder::Lexicographic);

} // namespace fadefree
