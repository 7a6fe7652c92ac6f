#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "fadefree/error.hpp"
#include "fadefree/harness.hpp"

namespace fadefree {

namespace {

struct CellKey {
    DetectorSpec det;
    int memory = 0;
    std::uint64_t states = 0;
};

struct CellOutcome {
    bool ok = false;
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
    ComplexityRow complexity;
    std::vector<std::uint8_t> pattern;
    std::string message;
};

std::vector<CellKey> enumerate_cells(const PipelineConfig& cfg) {
    std::vector<CellKey> keys;
    auto add = [&](const CellKey& k) {
        for (const auto& e : keys) {
            if (e.det.kind == k.det.kind && e.memory == k.memory && e.states == k.states) return;
        }
        keys.push_back(k);
    };
    for (const auto& d : cfg.sweep.detectors) {
        if (d.kind == DetectorSpec::Kind::Threshold) {
            add({d, 0, 1});
            continue;
        }
        for (int L : cfg.sweep.memories) {
            if (d.kind == DetectorSpec::Kind::Fixed) {
                if (d.states) {
                    add({d, L, d.states});
                } else {
                    for (auto M : cfg.sweep.states) add({d, L, M});
                }
            } else {
                add({d, L, L >= 64 ? 0 : std::uint64_t{1} << L});
            }
        }
    }
    return keys;
}

} // namespace

unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FADEFREE_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

SweepResult run_sweep(const PipelineConfig& cfg, const SweepOptions& opts) {
    cfg.validate();
    const auto keys = enumerate_cells(cfg);
    const std::size_t n_snr = cfg.sweep.snr_db.size();
    const std::uint64_t frames = (cfg.min_bits + cfg.frame.payload - 1) / cfg.frame.payload;

    struct Job {
        std::size_t snr_index;
        std::uint64_t rep;
    };
    std::vector<Job> jobs;
    for (std::size_t si = 0; si < n_snr; ++si) {
        for (std::uint64_t r = 0; r < frames; ++r) jobs.push_back({si, r});
    }
    // outcomes[job][cell]
    std::vector<std::vector<CellOutcome>> outcomes(jobs.size(), std::vector<CellOutcome>(keys.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            PipelineConfig c = cfg;
            c.channel.snr_db = cfg.sweep.snr_db[jobs[j].snr_index];
            auto& out = outcomes[j];
            FrameData data;
            try {
                data = simulate_frame(c, frame_seed(cfg.seed, jobs[j].snr_index, jobs[j].rep));
            } catch (const std::exception& e) {
                for (auto& o : out) o.message = e.what();
                continue;
            }
            for (std::size_t ci = 0; ci < keys.size(); ++ci) {
                const auto& key = keys[ci];
                try {
                    const auto pd = detect_payload(data, key.det, key.memory, key.states, c.detect);
                    out[ci].errors = count_errors(data.frame.payload, pd.decisions);
                    out[ci].bits = data.frame.payload.size();
                    if (pd.run) out[ci].complexity = complexity_report(*pd.run);
                    if (opts.keep_error_patterns) {
                        out[ci].pattern.resize(pd.decisions.size());
                        for (std::size_t k = 0; k < pd.decisions.size(); ++k) {
                            out[ci].pattern[k] = pd.decisions[k] != data.frame.payload[k];
                        }
                    }
                    out[ci].ok = true;
                } catch (const std::exception& e) {
                    out[ci].message = e.what();
                }
            }
        }
    };
    const unsigned n_workers =
        std::max(1u, std::min<unsigned>(opts.threads ? opts.threads : worker_count(), static_cast<unsigned>(jobs.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    SweepResult result;
    for (std::size_t si = 0; si < n_snr; ++si) {
        for (std::size_t ci = 0; ci < keys.size(); ++ci) {
            SweepCell cell;
            auto& rep = cell.report;
            rep.detector = keys[ci].det.name();
            rep.memory = keys[ci].memory;
            rep.states = keys[ci].states;
            rep.snr_db = cfg.sweep.snr_db[si];
            rep.seed = cfg.seed;
            std::string failure;
            for (std::size_t j = 0; j < jobs.size(); ++j) {
                if (jobs[j].snr_index != si) continue;
                const auto& o = outcomes[j][ci];
                if (!o.ok) {
                    if (failure.empty()) failure = o.message;
                    continue;
                }
                rep.count.errors += o.errors;
                rep.count.bits += o.bits;
                ++rep.frames;
                cell.frame_errors.push_back(o.errors);
                cell.error_pattern.insert(cell.error_pattern.end(), o.pattern.begin(), o.pattern.end());
                rep.complexity.kind = o.complexity.kind;
                rep.complexity.memory = o.complexity.memory;
                rep.complexity.surviving_states = o.complexity.surviving_states;
                rep.complexity.branch_evals_per_step =
                    std::max(rep.complexity.branch_evals_per_step, o.complexity.branch_evals_per_step);
                rep.complexity.states_stored = std::max(rep.complexity.states_stored, o.complexity.states_stored);
                rep.complexity.selection_comparisons += o.complexity.selection_comparisons;
            }
            if (!failure.empty()) {
                result.failures.push_back({rep.detector, rep.memory, rep.states, rep.snr_db, failure});
                continue;
            }
            rep.ci = wilson_interval(rep.count.errors, rep.count.bits);
            result.cells.push_back(std::move(cell));
        }
    }
    auto coord = [](const BerReport& r) { return std::make_tuple(r.detector, r.memory, r.states, r.snr_db); };
    std::stable_sort(result.cells.begin(), result.cells.end(),
                     [&](const SweepCell& a, const SweepCell& b) { return coord(a.report) < coord(b.report); });
    std::stable_sort(result.failures.begin(), result.failures.end(), [](const SweepFailure& a, const SweepFailure& b) {
        return std::tie(a.detector, a.memory, a.states, a.snr_db) < std::tie(b.detector, b.memory, b.states, b.snr_db);
    });
    return result;
}

} // namespace fadefree
