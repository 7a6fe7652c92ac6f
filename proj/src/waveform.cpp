#include "fadefree/waveform.hpp"

#include <cstdio>
#include <sstream>

namespace fadefree {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double read_rate_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("sample_rate=", 0) != 0) {
        fail(ErrorKind::InvalidArgument, "waveform csv: missing `sample_rate=` header");
    }
    try {
        return std::stod(line.substr(12));
    } catch (const std::exception&) {
        fail(ErrorKind::InvalidArgument, "waveform csv: bad sample_rate value");
    }
}

} // namespace

void write_waveform_csv(std::ostream& os, const RealWaveform& w) {
    os << "sample_rate=" << fmt_double(w.sample_rate()) << '\n';
    for (double s : w.samples()) os << fmt_double(s) << '\n';
}

void write_waveform_csv(std::ostream& os, const ComplexWaveform& w) {
    os << "sample_rate=" << fmt_double(w.sample_rate()) << '\n';
    for (const auto& s : w.samples()) os << fmt_double(s.real()) << ',' << fmt_double(s.imag()) << '\n';
}

RealWaveform read_real_waveform_csv(std::istream& is) {
    const double rate = read_rate_header(is);
    std::vector<double> samples;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        samples.push_back(std::stod(line));
    }
    return RealWaveform(std::move(samples), rate);
}

ComplexWaveform read_complex_waveform_csv(std::istream& is) {
    const double rate = read_rate_header(is);
    std::vector<cplx> samples;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) fail(ErrorKind::InvalidArgument, "waveform csv: expected `re,im`");
        samples.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    }
    return ComplexWaveform(std::move(samples), rate);
}

} // namespace fadefree
