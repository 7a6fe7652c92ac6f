#include "fadefree/detect.hpp"

#include "fadefree/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace fadefree {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double metric_floor(const DetectorOptions& opts, int memory) { return -opts.llr_max * std::max(memory, 1); }

struct Combiner {
    bool max_log_mode;
    double operator()(double a, double b) const { return max_log_mode ? std::max(a, b) : max_star(a, b); }
};

void normalize_max(std::span<double> v) {
    double m = neg_inf;
    for (double x : v) m = std::max(m, x);
    if (m == neg_inf) return;
    for (double& x : v) x -= m;
}

void check_inputs(std::span<const double> z, double sigma2) {
    require(sigma2 > 0.0, "branch metric: sigma2 must be positive");
    for (double v : z) require(std::isfinite(v), "detector: received samples must be finite");
}

// Stores the branch-metric count and checks the complexity invariants of the run.
void finish(DetectorRun& run, const BranchMetric& bm) {
    auto& c = run.counters;
    c.branch_metric_evals = bm.evaluations();
    const std::uint64_t per_step = 2 * run.surviving_states;
    bool ok = c.branch_metric_evals <= per_step * c.steps;
    if (run.kind == DetectorKind::FixedStateLogMap) {
        ok = ok && c.peak_branch_evals_per_step <= per_step && c.peak_states_stored <= run.surviving_states;
    } else if (c.steps > 0) {
        ok = ok && c.peak_branch_evals_per_step == per_step && c.peak_states_stored == run.surviving_states &&
             c.branch_metric_evals == per_step * c.steps;
    }
    if (!ok) throw std::logic_error("detector complexity counters out of bounds");
}

} // namespace

std::string to_string(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::Mlse: return "mlse";
        case DetectorKind::FullLogMap: return "logmap";
        case DetectorKind::FixedStateLogMap: return "fixed";
    }
    return "?";
}

void ComplexityCounters::record_step(std::uint64_t branch_evals, std::uint64_t states) {
    ++steps;
    peak_branch_evals_per_step = std::max(peak_branch_evals_per_step, branch_evals);
    peak_states_stored = std::max(peak_states_stored, states);
}

BranchMetric::BranchMetric(double sigma2) : inv_two_sigma2_(0.0) {
    if (!(sigma2 > 0.0)) fail(ErrorKind::InvalidArgument, "branch metric: sigma2 must be positive");
    inv_two_sigma2_ = 1.0 / (2.0 * sigma2);
}

std::vector<Pam2> hard_decide(std::span<const double> llr) {
    std::vector<Pam2> out(llr.size());
    for (std::size_t k = 0; k < llr.size(); ++k) out[k] = llr[k] >= 0.0 ? Pam2{1} : Pam2{-1};
    return out;
}

DetectorRun viterbi_mlse(std::span<const double> z, const WhitenedChannel& ch, const DetectorOptions& opts,
                         InitialState initial) {
    check_inputs(z, ch.sigma2);
    const Trellis trellis = build_trellis(ch, opts.state_cap);
    const int L = trellis.memory();
    const std::uint64_t S = trellis.num_states();
    if (initial) require(*initial <= trellis.mask(), "viterbi: initial state out of range");

    DetectorRun run;
    run.kind = DetectorKind::Mlse;
    run.memory = L;
    run.surviving_states = S;
    const std::size_t N = z.size();
    run.decisions.resize(N);
    BranchMetric bm(ch.sigma2);
    const auto table = trellis.output_table();

    if (L == 0) {
        for (std::size_t k = 0; k < N; ++k) {
            const double g0 = bm(z[k], table[0]);
            const double g1 = bm(z[k], table[1]);
            run.decisions[k] = g1 >= g0 ? Pam2{1} : Pam2{-1};
            run.counters.record_step(2, 1);
        }
        finish(run, bm);
        return run;
    }

    const std::uint64_t half = S >> 1;
    const std::size_t words = static_cast<std::size_t>((S + 63) / 64);
    std::vector<std::uint64_t> decision_bits(N * words, 0);
    std::vector<double> metric(S, initial ? neg_inf : 0.0);
    if (initial) metric[*initial] = 0.0;
    std::vector<double> next(S), gamma(2 * S);
    std::vector<std::uint8_t> pick(S);

    for (std::size_t k = 0; k < N; ++k) {
        const double zk = z[k];
        for (std::uint64_t i = 0; i < 2 * S; ++i) gamma[i] = bm(zk, table[i]);
        double best = neg_inf;
        for (std::uint64_t s = 0; s < S; ++s) {
            const std::uint64_t p0 = s >> 1;
            const double m0 = metric[p0] + gamma[s];
            const double m1 = metric[p0 | half] + gamma[s | S];
            const bool take1 = m1 > m0;
            next[s] = take1 ? m1 : m0;
            pick[s] = take1;
            best = std::max(best, next[s]);
        }
        std::uint64_t* row = decision_bits.data() + k * words;
        for (std::uint64_t s = 0; s < S; ++s) {
            if (pick[s]) row[s >> 6] |= std::uint64_t{1} << (s & 63);
            next[s] -= best;
        }
        metric.swap(next);
        run.counters.record_step(2 * S, S);
    }

    std::uint64_t s = static_cast<std::uint64_t>(std::max_element(metric.begin(), metric.end()) - metric.begin());
    for (std::size_t k = N; k-- > 0;) {
        run.decisions[k] = (s & 1u) ? Pam2{1} : Pam2{-1};
        const bool from_p1 = (decision_bits[k * words + (s >> 6)] >> (s & 63)) & 1u;
        s = (s >> 1) | (from_p1 ? half : 0);
    }
    finish(run, bm);
    return run;
}

DetectorRun logmap_full(std::span<const double> z, const WhitenedChannel& ch, std::span<const double> prior,
                        const DetectorOptions& opts, InitialState initial) {
    check_inputs(z, ch.sigma2);
    const Trellis trellis = build_trellis(ch, opts.state_cap);
    const int L = trellis.memory();
    const std::uint64_t S = trellis.num_states();
    const State mask = trellis.mask();
    const std::size_t N = z.size();
    require(prior.empty() || prior.size() == N, "logmap: prior must be empty or one LLR per symbol");
    if (initial) require(*initial <= mask, "logmap: initial state out of range");

    DetectorRun run;
    run.kind = DetectorKind::FullLogMap;
    run.memory = L;
    run.surviving_states = S;
    const Combiner comb{opts.max_log};
    BranchMetric bm(ch.sigma2);
    const auto table = trellis.output_table();

    std::vector<double> alpha((N + 1) * S, initial ? neg_inf : 0.0);
    if (initial) alpha[*initial] = 0.0;
    std::vector<double> gamma(N * 2 * S);

    for (std::size_t k = 0; k < N; ++k) {
        double* g = gamma.data() + k * 2 * S;
        const double half_prior = prior.empty() ? 0.0 : 0.5 * prior[k];
        for (std::uint64_t i = 0; i < 2 * S; ++i) g[i] = bm(z[k], table[i]) + ((i & 1u) ? half_prior : -half_prior);
        const double* a = alpha.data() + k * S;
        double* an = alpha.data() + (k + 1) * S;
        std::fill(an, an + S, neg_inf);
        for (std::uint64_t p = 0; p < S; ++p) {
            for (std::uint64_t b = 0; b < 2; ++b) {
                const State child = ((p << 1) | b) & mask;
                an[child] = comb(an[child], a[p] + g[2 * p + b]);
            }
        }
        normalize_max({an, S});
        run.counters.record_step(2 * S, S);
    }

    if (opts.record_metrics) {
        run.metrics.resize(N + 1);
        for (std::size_t k = 0; k <= N; ++k) {
            auto& pm = run.metrics[k];
            pm.survivors.resize(S);
            for (std::uint64_t s = 0; s < S; ++s) pm.survivors[s] = s;
            pm.log_alpha.assign(alpha.begin() + static_cast<long>(k * S), alpha.begin() + static_cast<long>((k + 1) * S));
        }
        run.metrics[N].log_beta.assign(S, 0.0);
    }

    run.llr.resize(N);
    std::vector<double> beta(S, 0.0), beta_prev(S);
    for (std::size_t k = N; k-- > 0;) {
        const double* g = gamma.data() + k * 2 * S;
        const double* a = alpha.data() + k * S;
        double lp = neg_inf;
        double lm = neg_inf;
        for (std::uint64_t p = 0; p < S; ++p) {
            double bp = neg_inf;
            for (std::uint64_t b = 0; b < 2; ++b) {
                const State child = ((p << 1) | b) & mask;
                const double x = g[2 * p + b] + beta[child];
                bp = comb(bp, x);
                if (b) {
                    lp = comb(lp, a[p] + x);
                } else {
                    lm = comb(lm, a[p] + x);
                }
            }
            beta_prev[p] = bp;
        }
        normalize_max(beta_prev);
        run.llr[k] = lp - lm;
        beta.swap(beta_prev);
        if (opts.record_metrics) run.metrics[k].log_beta = beta;
    }
    run.decisions = hard_decide(run.llr);
    finish(run, bm);
    return run;
}

DetectorRun fixed_state_logmap(std::span<const double> z, const WhitenedChannel& ch, std::uint64_t surviving_states,
                               const DetectorOptions& opts, InitialState initial) {
    check_inputs(z, ch.sigma2);
    require(surviving_states >= 1, "fixed-state logmap: M must be at least 1");
    const Trellis trellis(ch);
    const int L = trellis.memory();
    const std::size_t N = z.size();
    const std::uint64_t M = surviving_states;
    if (initial) require(*initial <= trellis.mask(), "fixed-state logmap: initial state out of range");

    DetectorRun run;
    run.kind = DetectorKind::FixedStateLogMap;
    run.memory = L;
    run.surviving_states = M;
    const Combiner comb{opts.max_log};
    BranchMetric bm(ch.sigma2);

    // Survivor set k lives at [offset[k], offset[k+1]) in alpha_store; its
    // branches at twice those indices in gamma_store / child_store.
    std::vector<std::size_t> offset{0};
    std::vector<double> alpha_store;
    std::vector<double> gamma_store;
    std::vector<std::int32_t> child_store;
    std::vector<State> states_store;  // only with record_metrics

    std::vector<State> cur;
    if (initial) {
        cur.push_back(*initial);
    } else {
        const std::uint64_t n0 = L >= 63 ? M : std::min<std::uint64_t>(M, trellis.num_states());
        for (State s = 0; s < n0; ++s) cur.push_back(s);
    }
    alpha_store.assign(cur.size(), 0.0);
    offset.push_back(cur.size());
    if (opts.record_metrics) states_store = cur;

    struct Candidate {
        State child;
        double alpha;
        std::uint32_t branch;
    };
    std::vector<Candidate> cands;
    std::vector<State> kept_states;
    std::vector<double> kept_alpha;
    std::vector<std::size_t> order;

    for (std::size_t k = 0; k < N; ++k) {
        const std::size_t base = offset[k];
        const std::size_t n_parents = cur.size();
        cands.clear();
        for (std::size_t i = 0; i < n_parents; ++i) {
            const double a = alpha_store[base + i];
            for (Pam2 c : {Pam2{-1}, Pam2{1}}) {
                const double g = bm(z[k], trellis.output(cur[i], c));
                gamma_store.push_back(g);
                cands.push_back({trellis.next_state(cur[i], c), a + g, static_cast<std::uint32_t>(cands.size())});
            }
        }

        // Merge branches entering the same state (parents differing only in the oldest symbol).
        std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
            return x.child != y.child ? x.child < y.child : x.branch < y.branch;
        });
        kept_states.clear();
        kept_alpha.clear();
        for (const auto& cd : cands) {
            if (!kept_states.empty() && kept_states.back() == cd.child) {
                kept_alpha.back() = comb(kept_alpha.back(), cd.alpha);
            } else {
                kept_states.push_back(cd.child);
                kept_alpha.push_back(cd.alpha);
            }
        }

        // Keep the M best by metric, ties to the smaller state index.
        if (kept_states.size() > M) {
            order.resize(kept_states.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::uint64_t comparisons = 0;
            auto better = [&](std::size_t x, std::size_t y) {
                ++comparisons;
                if (kept_alpha[x] != kept_alpha[y]) return kept_alpha[x] > kept_alpha[y];
                return kept_states[x] < kept_states[y];
            };
            std::nth_element(order.begin(), order.begin() + static_cast<long>(M), order.end(), better);
            order.resize(M);
            std::sort(order.begin(), order.end());  // back to ascending state order
            std::vector<State> s2(M);
            std::vector<double> a2(M);
            for (std::size_t i = 0; i < M; ++i) {
                s2[i] = kept_states[order[i]];
                a2[i] = kept_alpha[order[i]];
            }
            kept_states.swap(s2);
            kept_alpha.swap(a2);
            run.counters.selection_comparisons += comparisons;
        }
        normalize_max(kept_alpha);

        // Branch -> index of its successor among the kept states, -1 if pruned.
        const std::size_t branch_base = child_store.size();
        child_store.resize(branch_base + 2 * n_parents, -1);
        for (const auto& cd : cands) {
            const auto it = std::lower_bound(kept_states.begin(), kept_states.end(), cd.child);
            if (it != kept_states.end() && *it == cd.child) {
                child_store[branch_base + cd.branch] = static_cast<std::int32_t>(it - kept_states.begin());
            }
        }

        run.counters.record_step(2 * n_parents, kept_states.size());
        alpha_store.insert(alpha_store.end(), kept_alpha.begin(), kept_alpha.end());
        offset.push_back(alpha_store.size());
        if (opts.record_metrics) states_store.insert(states_store.end(), kept_states.begin(), kept_states.end());
        cur = kept_states;
    }

    // Backward pass over the retained branches only.
    run.llr.assign(N, 0.0);
    const double floor = metric_floor(opts, L);
    std::vector<double> beta(offset[N + 1] - offset[N], 0.0);
    std::vector<double> beta_prev;
    std::vector<std::vector<double>> betas;
    if (opts.record_metrics) betas.resize(N + 1), betas[N] = beta;
    std::vector<bool> live;
    for (std::size_t k = N; k-- > 0;) {
        const std::size_t base = offset[k];
        const std::size_t n_parents = offset[k + 1] - base;
        beta_prev.assign(n_parents, neg_inf);
        live.assign(n_parents, false);
        double lp = neg_inf;
        double lm = neg_inf;
        bool any_plus = false;
        bool any_minus = false;
        for (std::size_t i = 0; i < n_parents; ++i) {
            for (std::size_t b = 0; b < 2; ++b) {
                const std::size_t br = 2 * base + 2 * i + b;
                const std::int32_t c = child_store[br];
                if (c < 0) continue;
                const double x = gamma_store[br] + beta[static_cast<std::size_t>(c)];
                beta_prev[i] = comb(beta_prev[i], x);
                live[i] = true;
                const double m = alpha_store[base + i] + x;
                if (b) {
                    lp = comb(lp, m);
                    any_plus = true;
                } else {
                    lm = comb(lm, m);
                    any_minus = true;
                }
            }
        }
        double mx = neg_inf;
        for (std::size_t i = 0; i < n_parents; ++i) {
            if (live[i]) mx = std::max(mx, beta_prev[i]);
        }
        for (std::size_t i = 0; i < n_parents; ++i) {
            if (live[i]) {
                beta_prev[i] -= mx;
            } else {
                beta_prev[i] = opts.dead_end == DeadEndPolicy::Terminal ? 0.0 : floor;
            }
        }
        if (any_plus && any_minus) {
            run.llr[k] = lp - lm;
        } else {
            run.llr[k] = any_plus ? opts.llr_max : -opts.llr_max;
        }
        beta.swap(beta_prev);
        if (opts.record_metrics) betas[k] = beta;
    }

    if (opts.record_metrics) {
        run.metrics.resize(N + 1);
        for (std::size_t k = 0; k <= N; ++k) {
            auto& pm = run.metrics[k];
            pm.survivors.assign(states_store.begin() + static_cast<long>(offset[k]),
                                states_store.begin() + static_cast<long>(offset[k + 1]));
            pm.log_alpha.assign(alpha_store.begin() + static_cast<long>(offset[k]),
                                alpha_store.begin() + static_cast<long>(offset[k + 1]));
            pm.log_beta = std::move(betas[k]);
        }
    }
    run.decisions = hard_decide(run.llr);
    finish(run, bm);
    return run;
}

void write_detector_csv(std::ostream& os, const DetectorRun& run) {
    os << "k,llr,decision\n";
    char buf[40];
    for (std::size_t k = 0; k < run.decisions.size(); ++k) {
        os << k << ',';
        if (k < run.llr.size()) {
            std::snprintf(buf, sizeof buf, "%.17g", run.llr[k]);
            os << buf;
        }
        os << ',' << static_cast<int>(run.decisions[k]) << '\n';
    }
}

ComplexityRow complexity_report(const DetectorRun& run) {
    ComplexityRow row;
    row.kind = run.kind;
    row.memory = run.memory;
    row.surviving_states = run.surviving_states;
    row.branch_evals_per_step = run.counters.peak_branch_evals_per_step;
    row.states_stored = run.counters.peak_states_stored;
    row.selection_comparisons = run.counters.selection_comparisons;
    return row;
}

ComplexityRow full_state_complexity(DetectorKind kind, int memory) {
    require(kind != DetectorKind::FixedStateLogMap, "full_state_complexity: not a full-state detector");
    require(memory >= 0 && memory <= max_trellis_memory - 1, "full_state_complexity: memory out of range");
    ComplexityRow row;
    row.kind = kind;
    row.memory = memory;
    row.surviving_states = std::uint64_t{1} << memory;
    row.branch_evals_per_step = std::uint64_t{2} << memory;
    row.states_stored = std::uint64_t{1} << memory;
    return row;
}

} // namespace fadefree
