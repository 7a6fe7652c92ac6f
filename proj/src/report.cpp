#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "fadefree/error.hpp"
#include "fadefree/harness.hpp"

namespace fadefree {

namespace {

std::string num(const char* spec, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

} // namespace

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
    os << sweep_csv_header << "\n";
    for (const auto& cell : result.cells) {
        const auto& r = cell.report;
        os << r.detector << ',' << r.memory << ',' << r.states << ',' << num("%.6g", r.snr_db) << ',' << r.seed << ','
           << r.count.bits << ',' << r.count.errors << ',' << num("%.9g", r.count.ber()) << ','
           << num("%.9g", r.ci.lo) << ',' << num("%.9g", r.ci.hi) << ',' << r.complexity.branch_evals_per_step << ','
           << r.complexity.states_stored << "\n";
    }
}

void write_failures_csv(std::ostream& os, const SweepResult& result) {
    os << "detector,L,M,snr_db,message\n";
    for (const auto& f : result.failures) {
        std::string msg = f.message;
        std::replace(msg.begin(), msg.end(), '"', '\'');
        os << f.detector << ',' << f.memory << ',' << f.states << ',' << num("%.6g", f.snr_db) << ",\"" << msg
           << "\"\n";
    }
}

void write_complexity_csv(std::ostream& os, const std::vector<ComplexityRow>& rows) {
    os << "detector,L,M,branch_evals_per_step,states_stored,selection_comparisons\n";
    for (const auto& r : rows) {
        os << to_string(r.kind) << ',' << r.memory << ',' << r.surviving_states << ',' << r.branch_evals_per_step
           << ',' << r.states_stored << ',' << r.selection_comparisons << "\n";
    }
}

void write_svg_plot(std::ostream& os, const std::string& title, const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series) {
    constexpr double W = 640, H = 440, left = 70, right = 160, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!(s.y[i] > 0.0)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, std::log10(s.y[i]));
            ymax = std::max(ymax, std::log10(s.y[i]));
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = -6;
        ymax = 0;
    }
    if (xmax == xmin) {
        xmin -= 1;
        xmax += 1;
    }
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
    if (ymax == ymin) ymax += 1;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double ly) { return top + (ymax - ly) / (ymax - ymin) * ph; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
        const double y = py(e);
        os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << y << "\" y2=\"" << y
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 5.0;
        const double x = px(xv);
        os << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << top << "\" y2=\"" << top + ph
           << "\" stroke=\"#eee\"/>\n";
        os << "<text x=\"" << x << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << num("%.4g", xv)
           << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
       << "</text>\n";
    os << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << xml_escape(y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* colour = palette[si % (sizeof palette / sizeof palette[0])];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (s.y[i] > 0.0) os << px(s.x[i]) << ',' << py(std::log10(s.y[i])) << ' ';
        }
        os << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (s.y[i] > 0.0) {
                os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(std::log10(s.y[i])) << "\" r=\"3\" fill=\""
                   << colour << "\"/>\n";
            }
        }
        const double ly = top + 14 + 18 * static_cast<double>(si);
        os << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly
           << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

void write_sweep_plots(const std::filesystem::path& dir, const SweepResult& result) {
    std::set<double> snrs;
    std::set<int> memories;
    std::set<std::uint64_t> states;
    for (const auto& c : result.cells) {
        snrs.insert(c.report.snr_db);
        memories.insert(c.report.memory);
        if (c.report.detector == "fixed") states.insert(c.report.states);
    }
    auto write = [&](const char* file, const std::string& title, const std::string& xl,
                     const std::map<std::string, PlotSeries>& m) {
        std::vector<PlotSeries> v;
        for (const auto& [k, s] : m) v.push_back(s);
        std::ofstream out(dir / file);
        if (!out) fail(ErrorKind::InvalidArgument, std::string("cannot write ") + (dir / file).string());
        write_svg_plot(out, title, xl, "BER", v);
    };

    if (snrs.size() > 1) {
        std::map<std::string, PlotSeries> m;
        for (const auto& c : result.cells) {
            const auto& r = c.report;
            std::string label = r.detector;
            if (r.detector != "threshold") label += " L=" + std::to_string(r.memory);
            if (r.detector == "fixed") label += " M=" + std::to_string(r.states);
            auto& s = m[label];
            s.label = label;
            s.x.push_back(r.snr_db);
            s.y.push_back(r.count.ber());
        }
        write("ber_vs_snr.svg", "BER versus SNR", "SNR (dB)", m);
    }
    if (states.size() > 1) {
        std::map<std::string, PlotSeries> m;
        for (const auto& c : result.cells) {
            const auto& r = c.report;
            if (r.detector != "fixed") continue;
            const std::string label = "L=" + std::to_string(r.memory) + " " + num("%.3g dB", r.snr_db);
            auto& s = m[label];
            s.label = label;
            s.x.push_back(static_cast<double>(r.states));
            s.y.push_back(r.count.ber());
        }
        write("ber_vs_states.svg", "BER versus surviving states", "M", m);
    }
    if (memories.size() > 1) {
        std::map<std::string, PlotSeries> m;
        for (const auto& c : result.cells) {
            const auto& r = c.report;
            if (r.detector == "threshold") continue;
            std::string label = r.detector;
            if (r.detector == "fixed") label += " M=" + std::to_string(r.states);
            label += num(" %.3g dB", r.snr_db);
            auto& s = m[label];
            s.label = label;
            s.x.push_back(r.memory);
            s.y.push_back(r.count.ber());
        }
        // Cells are sorted by detector, L, M, SNR, so x within a series rises
        // only when M and SNR are fixed; reorder by x to keep lines monotone.
        for (auto& [k, s] : m) {
            std::vector<std::size_t> idx(s.x.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
            PlotSeries t{s.label, {}, {}};
            for (auto i : idx) {
                t.x.push_back(s.x[i]);
                t.y.push_back(s.y[i]);
            }
            s = t;
        }
        write("ber_vs_memory.svg", "BER versus memory length", "L", m);
    }
}

double sign_test_p_value(std::uint64_t only_first_wrong, std::uint64_t only_second_wrong) {
    const std::uint64_t n = only_first_wrong + only_second_wrong;
    if (n == 0 || only_first_wrong == 0) return 1.0;
    // P(X >= b), summed in log space.
    const double ln_half_n = static_cast<double>(n) * std::log(0.5);
    const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
    double acc = -INFINITY;
    for (std::uint64_t k = only_first_wrong; k <= n; ++k) {
        const double lt = lg_n1 - std::lgamma(static_cast<double>(k) + 1.0) -
                          std::lgamma(static_cast<double>(n - k) + 1.0) + ln_half_n;
        acc = max_star(acc, lt);
    }
    return std::min(1.0, std::exp(acc));
}

std::optional<double> crossing_snr(const std::vector<double>& snr_db, const std::vector<double>& ber, double target) {
    require(snr_db.size() == ber.size(), "crossing_snr: length mismatch");
    require(target > 0.0, "crossing_snr: target must be positive");
    constexpr double ber_floor = 1e-12;
    for (std::size_t i = 0; i + 1 < snr_db.size(); ++i) {
        if (ber[i] >= target && ber[i + 1] < target) {
            const double a = std::log10(std::max(ber[i], ber_floor));
            const double b = std::log10(std::max(ber[i + 1], ber_floor));
            const double t = std::log10(target);
            const double frac = a == b ? 0.0 : (a - t) / (a - b);
            return snr_db[i] + frac * (snr_db[i + 1] - snr_db[i]);
        }
    }
    return std::nullopt;
}

} // namespace fadefree
