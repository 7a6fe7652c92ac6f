#pragma once

// Autoregressive fit of the equalizer's colored residual noise and the
// (L+1)-tap prediction-error post-filter that whitens it. The filter taps
// and the prediction-error variance form the channel model the sequence
// detectors are built from.

#include <iosfwd>
#include <span>
#include <vector>

namespace fadefree {

/// Post-filter taps h_0..h_L (monic, h_0 = 1) and the noise variance left after it.
struct WhitenedChannel {
    std::vector<double> h;
    double sigma2 = 1.0;

    int memory() const noexcept { return static_cast<int>(h.size()) - 1; }
    void validate() const;
};

/// Biased estimator r_m = (1/N) sum_k n_k n_{k+m}, m = 0..max_lag.
std::vector<double> autocorrelation(std::span<const double> noise, std::size_t max_lag);

/// Levinson-Durbin solution of the order-L Yule-Walker system:
/// h = [1, -a_1, ..., -a_L], sigma2 = final prediction-error variance.
/// Throws Error(NumericalFailure, "non-stationary fit") if any |kappa| >= 1.
WhitenedChannel yule_walker_fit(std::span<const double> r, int order);

/// Prediction-error variance for every order 0..max_order from one recursion.
std::vector<double> prediction_error_profile(std::span<const double> r, int max_order);

/// v_k = h_0 x_k + sum_{i=1..L} h_i x_{k-i}, zero prehistory, |v| = |x|.
std::vector<double> postfilter_apply(std::span<const double> x, const WhitenedChannel& ch);

/// Geometric over arithmetic mean of a Welch-averaged periodogram, in (0, 1].
/// segment_length == 0 picks min(256, |noise|/8) rounded down to a power of two.
double spectral_flatness(std::span<const double> noise, std::size_t segment_length = 0);

// CSV: header `L=<int>,sigma2=<float>`, then one tap per line.
void write_channel_csv(std::ostream& os, const WhitenedChannel& ch);
WhitenedChannel read_channel_csv(std::istream& is);

} // namespace fadefree
