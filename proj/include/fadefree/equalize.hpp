#pragma once

// Symbol-spaced adaptive equalization trained on the frame preamble:
// a third-order memory-polynomial equalizer (PNLE) followed by a decision
// feedback equalizer. Both adapt by LMS during training only; the trained
// weights are then frozen for the payload.

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fadefree/signal.hpp"

namespace fadefree {

struct PnleConfig {
    // Odd kernel lengths; 0 switches a nonlinear kernel off.
    int taps1 = 31;
    int taps2 = 11;
    int taps3 = 7;
    double step_size = 0.02;
    int epochs = 20;

    void validate() const;
};

struct DfeConfig {
    int ff_taps = 15;
    int fb_taps = 11;
    double step_size = 0.02;
    int epochs = 20;

    void validate() const;
};

/// Equalizer output over the whole frame plus the training-region residual.
struct EqualizedFrame {
    std::vector<double> x;               // one sample per symbol, training then payload
    std::vector<double> residual_noise;  // x - training symbols over the training region
    std::size_t training_length = 0;
    std::vector<double> training_mse;    // per epoch, entry 0 is before adaptation
};

/// Memory polynomial y_k = b + sum w1_i r_{k-i} + sum w2_i r_{k-i}^2 + sum w3_i r_{k-i}^3.
/// Each kernel is centred on k (odd length, i from -(n-1)/2 to (n-1)/2); an
/// empty kernel contributes nothing.
struct PnleWeights {
    double bias = 0.0;
    std::vector<double> w1, w2, w3;

    static PnleWeights identity(const PnleConfig& cfg);
    double apply_at(std::span<const double> r, std::size_t k) const;
};

/// Feedforward kernel centred on k, feedback over the previous fb decisions:
/// y_k = sum a_i x_{k-i} - sum_{j=1..fb} b_j d_{k-j}.
struct DfeWeights {
    std::vector<double> ff, fb;

    static DfeWeights identity(const DfeConfig& cfg);
};

PnleWeights pnle_train(std::span<const double> received, std::span<const Pam2> training, const PnleConfig& cfg,
                       std::vector<double>* mse_history = nullptr);
std::vector<double> pnle_apply(std::span<const double> received, const PnleWeights& w);

/// Scale the whole record to unit RMS.
std::vector<double> normalize_rms(std::span<const double> x);

EqualizedFrame pnle_train_apply(std::span<const double> received, const SymbolFrame& frame, const PnleConfig& cfg);

DfeWeights dfe_train(std::span<const double> x, std::span<const Pam2> training, const DfeConfig& cfg,
                     std::vector<double>* mse_history = nullptr);

struct DfeApplyOptions {
    // Test hook: invert the decision fed back at this index.
    std::optional<std::size_t> flip_decision_at;
};

/// Training symbols are fed back over the preamble, hard decisions afterwards.
std::vector<double> dfe_apply(std::span<const double> x, std::span<const Pam2> training, const DfeWeights& w,
                              const DfeApplyOptions& opts = {});

EqualizedFrame dfe_train_apply(std::span<const double> x, const SymbolFrame& frame, const DfeConfig& cfg);

/// x_k - u_k over the training region: the colored-noise record for whitening.
std::vector<double> extract_noise(const EqualizedFrame& eq);

/// x_k - u_k for k < |training|.
std::vector<double> training_residual(std::span<const double> x, std::span<const Pam2> training);

// Weight exchange: one `[name]` section per kernel, one weight per line.
void write_weights_csv(std::ostream& os, const PnleWeights& w);
void write_weights_csv(std::ostream& os, const DfeWeights& w);
PnleWeights read_pnle_weights_csv(std::istream& is);
DfeWeights read_dfe_weights_csv(std::istream& is);

} // namespace fadefree
