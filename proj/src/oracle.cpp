#include <cmath>
#include <limits>

#include "fadefree/detect.hpp"
#include "fadefree/error.hpp"

namespace fadefree {

OracleResult brute_force_oracles(std::span<const double> z, const WhitenedChannel& ch, InitialState initial,
                                 std::span<const double> prior, EnumerationOrder order) {
    const std::size_t N = z.size();
    if (N > brute_force_max_symbols) fail(ErrorKind::Capacity, "brute force: block longer than 16 symbols");
    require(N > 0, "brute force: empty block");
    ch.validate();
    require(prior.empty() || prior.size() == N, "brute force: prior must be empty or one LLR per symbol");
    const int L = ch.memory();
    if (!initial && L > 8) fail(ErrorKind::Capacity, "brute force: prehistory enumeration needs L <= 8");
    const std::uint64_t n_hist = initial ? 1 : (std::uint64_t{1} << L);
    const std::uint64_t n_seq = std::uint64_t{1} << N;
    if (initial) require(L >= 63 || *initial < (std::uint64_t{1} << L), "brute force: initial state out of range");

    const long double inv2s2 = 1.0L / (2.0L * static_cast<long double>(ch.sigma2));
    std::vector<long double> logp(n_hist * n_seq);
    std::vector<int> c(static_cast<std::size_t>(L) + N);

    auto visit = [&](std::uint64_t idx) { return order == EnumerationOrder::Gray ? idx ^ (idx >> 1) : idx; };

    for (std::uint64_t hi = 0; hi < n_hist; ++hi) {
        const State hs = initial ? *initial : hi;
        // c[L - age] = c_{-age}; c[L + k] = c_k.
        for (int age = 1; age <= L; ++age) c[static_cast<std::size_t>(L - age)] = ((hs >> (age - 1)) & 1u) ? 1 : -1;
        for (std::uint64_t idx = 0; idx < n_seq; ++idx) {
            const std::uint64_t seq = visit(idx);
            long double m = 0.0L;
            for (std::size_t k = 0; k < N; ++k) {
                const int ck = ((seq >> k) & 1u) ? 1 : -1;
                c[static_cast<std::size_t>(L) + k] = ck;
                long double v = 0.0L;
                for (int i = 0; i <= L; ++i) {
                    v += static_cast<long double>(ch.h[static_cast<std::size_t>(i)]) * c[static_cast<std::size_t>(L) + k - static_cast<std::size_t>(i)];
                }
                const long double d = static_cast<long double>(z[k]) - v;
                m -= d * d * inv2s2;
                if (!prior.empty()) m += 0.5L * ck * static_cast<long double>(prior[k]);
            }
            logp[hi * n_seq + seq] = m;
        }
    }

    long double best = -std::numeric_limits<long double>::infinity();
    std::uint64_t best_seq = 0;
    for (std::uint64_t hi = 0; hi < n_hist; ++hi) {
        for (std::uint64_t idx = 0; idx < n_seq; ++idx) {
            const std::uint64_t seq = visit(idx);
            const long double m = logp[hi * n_seq + seq];
            if (m > best) {
                best = m;
                best_seq = seq;
            }
        }
    }

    std::vector<long double> sum_plus(N, 0.0L), sum_minus(N, 0.0L);
    for (std::uint64_t hi = 0; hi < n_hist; ++hi) {
        for (std::uint64_t idx = 0; idx < n_seq; ++idx) {
            const std::uint64_t seq = visit(idx);
            const long double w = std::exp(logp[hi * n_seq + seq] - best);
            for (std::size_t k = 0; k < N; ++k) {
                if ((seq >> k) & 1u) {
                    sum_plus[k] += w;
                } else {
                    sum_minus[k] += w;
                }
            }
        }
    }

    OracleResult out;
    out.ml_sequence.resize(N);
    out.posterior_plus.resize(N);
    out.posterior_minus.resize(N);
    out.log_ratio.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        out.ml_sequence[k] = ((best_seq >> k) & 1u) ? Pam2{1} : Pam2{-1};
        const long double total = sum_plus[k] + sum_minus[k];
        out.posterior_plus[k] = static_cast<double>(sum_plus[k] / total);
        out.posterior_minus[k] = static_cast<double>(sum_minus[k] / total);
        out.log_ratio[k] = static_cast<double>(std::log(sum_plus[k]) - std::log(sum_minus[k]));
    }
    return out;
}

} // namespace fadefree
