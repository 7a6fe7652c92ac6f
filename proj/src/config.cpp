#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "fadefree/error.hpp"
#include "fadefree/harness.hpp"

namespace fadefree {

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::Config, what); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || std::isnan(x)) {
        config_error(key + ": expected a number, got '" + v + "'");
    }
    return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    char* end = nullptr;
    errno = 0;
    const unsigned long long x = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE) {
        config_error(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return x;
}

int parse_int(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    char* end = nullptr;
    errno = 0;
    const long x = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || x < -1000000000L || x > 1000000000L) {
        config_error(key + ": expected an integer, got '" + v + "'");
    }
    return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    config_error(key + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += f(v[i]);
    }
    return out;
}

struct Setting {
    const char* key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<Setting>& settings() {
    static const std::vector<Setting> table = {
        {"frame.training", [](auto& c, auto& v) { c.frame.training = parse_u64("frame.training", v); },
         [](auto& c) { return std::to_string(c.frame.training); }},
        {"frame.payload", [](auto& c, auto& v) { c.frame.payload = parse_u64("frame.payload", v); },
         [](auto& c) { return std::to_string(c.frame.payload); }},
        {"frame.symbol_rate_gbd",
         [](auto& c, auto& v) { c.frame.symbol_rate = parse_double("frame.symbol_rate_gbd", v) * 1e9; },
         [](auto& c) { return fmt(c.frame.symbol_rate / 1e9); }},
        {"frame.prbs_order", [](auto& c, auto& v) { c.frame.prbs_order = parse_int("frame.prbs_order", v); },
         [](auto& c) { return std::to_string(c.frame.prbs_order); }},

        {"shaping.rolloff", [](auto& c, auto& v) { c.rrc.rolloff = parse_double("shaping.rolloff", v); },
         [](auto& c) { return fmt(c.rrc.rolloff); }},
        {"shaping.span", [](auto& c, auto& v) { c.rrc.span = parse_int("shaping.span", v); },
         [](auto& c) { return std::to_string(c.rrc.span); }},
        {"shaping.sps", [](auto& c, auto& v) { c.rrc.sps = parse_int("shaping.sps", v); },
         [](auto& c) { return std::to_string(c.rrc.sps); }},

        {"receiver.dac_bits", [](auto& c, auto& v) { c.receiver.dac_bits = parse_int("receiver.dac_bits", v); },
         [](auto& c) { return std::to_string(c.receiver.dac_bits); }},
        {"receiver.link_up", [](auto& c, auto& v) { c.receiver.link_up = parse_int("receiver.link_up", v); },
         [](auto& c) { return std::to_string(c.receiver.link_up); }},
        {"receiver.link_down", [](auto& c, auto& v) { c.receiver.link_down = parse_int("receiver.link_down", v); },
         [](auto& c) { return std::to_string(c.receiver.link_down); }},
        {"receiver.sync_floor",
         [](auto& c, auto& v) { c.receiver.sync_floor = parse_double("receiver.sync_floor", v); },
         [](auto& c) { return fmt(c.receiver.sync_floor); }},

        {"channel.beta2_ps2_per_km",
         [](auto& c, auto& v) { c.channel.beta2 = parse_double("channel.beta2_ps2_per_km", v) * 1e-24 / 1e3; },
         [](auto& c) { return fmt(c.channel.beta2 * 1e3 / 1e-24); }},
        {"channel.length_km",
         [](auto& c, auto& v) { c.channel.fiber_length = parse_double("channel.length_km", v) * 1e3; },
         [](auto& c) { return fmt(c.channel.fiber_length / 1e3); }},
        {"channel.loss_db", [](auto& c, auto& v) { c.channel.loss_db = parse_double("channel.loss_db", v); },
         [](auto& c) { return fmt(c.channel.loss_db); }},
        {"channel.front_end_ghz",
         [](auto& c, auto& v) { c.channel.front_end_bandwidth = parse_double("channel.front_end_ghz", v) * 1e9; },
         [](auto& c) { return fmt(c.channel.front_end_bandwidth / 1e9); }},
        {"channel.front_end_order",
         [](auto& c, auto& v) { c.channel.front_end_order = parse_int("channel.front_end_order", v); },
         [](auto& c) { return std::to_string(c.channel.front_end_order); }},
        {"channel.snr_db", [](auto& c, auto& v) { c.channel.snr_db = parse_double("channel.snr_db", v); },
         [](auto& c) { return fmt(c.channel.snr_db); }},
        {"channel.modulation_index",
         [](auto& c, auto& v) { c.channel.modulation_index = parse_double("channel.modulation_index", v); },
         [](auto& c) { return fmt(c.channel.modulation_index); }},
        {"channel.modulator",
         [](auto& c, auto& v) {
             const auto t = trim(v);
             if (t == "linear") {
                 c.channel.modulator = ModulatorModel::Linear;
             } else if (t == "sinusoidal") {
                 c.channel.modulator = ModulatorModel::Sinusoidal;
             } else {
                 config_error("channel.modulator: expected linear or sinusoidal, got '" + v + "'");
             }
         },
         [](auto& c) { return std::string(c.channel.modulator == ModulatorModel::Linear ? "linear" : "sinusoidal"); }},

        {"equalizer.mode",
         [](auto& c, auto& v) {
             const auto t = trim(v);
             if (t == "none") {
                 c.equalizer = EqualizerMode::None;
             } else if (t == "pnle") {
                 c.equalizer = EqualizerMode::Pnle;
             } else if (t == "pnle+dfe") {
                 c.equalizer = EqualizerMode::PnleDfe;
             } else {
                 config_error("equalizer.mode: expected none, pnle or pnle+dfe, got '" + v + "'");
             }
         },
         [](auto& c) {
             return std::string(c.equalizer == EqualizerMode::None   ? "none"
                                : c.equalizer == EqualizerMode::Pnle ? "pnle"
                                                                     : "pnle+dfe");
         }},
        {"equalizer.pnle_taps1", [](auto& c, auto& v) { c.pnle.taps1 = parse_int("equalizer.pnle_taps1", v); },
         [](auto& c) { return std::to_string(c.pnle.taps1); }},
        {"equalizer.pnle_taps2", [](auto& c, auto& v) { c.pnle.taps2 = parse_int("equalizer.pnle_taps2", v); },
         [](auto& c) { return std::to_string(c.pnle.taps2); }},
        {"equalizer.pnle_taps3", [](auto& c, auto& v) { c.pnle.taps3 = parse_int("equalizer.pnle_taps3", v); },
         [](auto& c) { return std::to_string(c.pnle.taps3); }},
        {"equalizer.pnle_step", [](auto& c, auto& v) { c.pnle.step_size = parse_double("equalizer.pnle_step", v); },
         [](auto& c) { return fmt(c.pnle.step_size); }},
        {"equalizer.pnle_epochs", [](auto& c, auto& v) { c.pnle.epochs = parse_int("equalizer.pnle_epochs", v); },
         [](auto& c) { return std::to_string(c.pnle.epochs); }},
        {"equalizer.dfe_ff", [](auto& c, auto& v) { c.dfe.ff_taps = parse_int("equalizer.dfe_ff", v); },
         [](auto& c) { return std::to_string(c.dfe.ff_taps); }},
        {"equalizer.dfe_fb", [](auto& c, auto& v) { c.dfe.fb_taps = parse_int("equalizer.dfe_fb", v); },
         [](auto& c) { return std::to_string(c.dfe.fb_taps); }},
        {"equalizer.dfe_step", [](auto& c, auto& v) { c.dfe.step_size = parse_double("equalizer.dfe_step", v); },
         [](auto& c) { return fmt(c.dfe.step_size); }},
        {"equalizer.dfe_epochs", [](auto& c, auto& v) { c.dfe.epochs = parse_int("equalizer.dfe_epochs", v); },
         [](auto& c) { return std::to_string(c.dfe.epochs); }},

        {"detector.kind", [](auto& c, auto& v) { c.detector = DetectorSpec::parse(trim(v)); },
         [](auto& c) {
             return c.detector.kind == DetectorSpec::Kind::Fixed && c.detector.states
                        ? "fixed:" + std::to_string(c.detector.states)
                        : c.detector.name();
         }},
        {"detector.memory", [](auto& c, auto& v) { c.memory = parse_int("detector.memory", v); },
         [](auto& c) { return std::to_string(c.memory); }},
        {"detector.llr_max", [](auto& c, auto& v) { c.detect.llr_max = parse_double("detector.llr_max", v); },
         [](auto& c) { return fmt(c.detect.llr_max); }},
        {"detector.max_log", [](auto& c, auto& v) { c.detect.max_log = parse_bool("detector.max_log", v); },
         [](auto& c) { return std::string(c.detect.max_log ? "true" : "false"); }},
        {"detector.dead_end",
         [](auto& c, auto& v) {
             const auto t = trim(v);
             if (t == "terminal") {
                 c.detect.dead_end = DeadEndPolicy::Terminal;
             } else if (t == "discard") {
                 c.detect.dead_end = DeadEndPolicy::Discard;
             } else {
                 config_error("detector.dead_end: expected terminal or discard, got '" + v + "'");
             }
         },
         [](auto& c) { return std::string(c.detect.dead_end == DeadEndPolicy::Terminal ? "terminal" : "discard"); }},
        {"detector.state_cap", [](auto& c, auto& v) { c.detect.state_cap = parse_int("detector.state_cap", v); },
         [](auto& c) { return std::to_string(c.detect.state_cap); }},

        {"sweep.detectors",
         [](auto& c, auto& v) {
             c.sweep.detectors.clear();
             for (const auto& s : split_list(v)) c.sweep.detectors.push_back(DetectorSpec::parse(s));
         },
         [](auto& c) {
             return join<DetectorSpec>(c.sweep.detectors, [](const DetectorSpec& d) {
                 return d.kind == DetectorSpec::Kind::Fixed && d.states ? "fixed:" + std::to_string(d.states)
                                                                        : d.name();
             });
         }},
        {"sweep.memories",
         [](auto& c, auto& v) {
             c.sweep.memories.clear();
             for (const auto& s : split_list(v)) c.sweep.memories.push_back(parse_int("sweep.memories", s));
         },
         [](auto& c) { return join<int>(c.sweep.memories, [](const int& x) { return std::to_string(x); }); }},
        {"sweep.states",
         [](auto& c, auto& v) {
             c.sweep.states.clear();
             for (const auto& s : split_list(v)) c.sweep.states.push_back(parse_u64("sweep.states", s));
         },
         [](auto& c) {
             return join<std::uint64_t>(c.sweep.states, [](const std::uint64_t& x) { return std::to_string(x); });
         }},
        {"sweep.snr_db",
         [](auto& c, auto& v) {
             c.sweep.snr_db.clear();
             for (const auto& s : split_list(v)) c.sweep.snr_db.push_back(parse_double("sweep.snr_db", s));
         },
         [](auto& c) { return join<double>(c.sweep.snr_db, [](const double& x) { return fmt(x); }); }},

        {"run.seed", [](auto& c, auto& v) { c.seed = parse_u64("run.seed", v); },
         [](auto& c) { return std::to_string(c.seed); }},
        {"run.min_bits", [](auto& c, auto& v) { c.min_bits = parse_u64("run.min_bits", v); },
         [](auto& c) { return std::to_string(c.min_bits); }},
        {"run.fec_overhead", [](auto& c, auto& v) { c.fec_overhead = parse_double("run.fec_overhead", v); },
         [](auto& c) { return fmt(c.fec_overhead); }},
        {"run.out", [](auto& c, auto& v) { c.out_dir = trim(v); }, [](auto& c) { return c.out_dir.string(); }},
        {"run.plots", [](auto& c, auto& v) { c.plots = parse_bool("run.plots", v); },
         [](auto& c) { return std::string(c.plots ? "true" : "false"); }},
        {"run.dump", [](auto& c, auto& v) { c.dump = parse_bool("run.dump", v); },
         [](auto& c) { return std::string(c.dump ? "true" : "false"); }},
    };
    return table;
}

} // namespace

DetectorSpec DetectorSpec::parse(const std::string& text) {
    DetectorSpec d;
    if (text == "mlse") {
        d.kind = Kind::Mlse;
        d.states = 0;
    } else if (text == "logmap") {
        d.kind = Kind::LogMap;
        d.states = 0;
    } else if (text == "threshold") {
        d.kind = Kind::Threshold;
        d.states = 0;
    } else if (text == "fixed") {
        d.kind = Kind::Fixed;
        d.states = 0;
    } else if (text.rfind("fixed:", 0) == 0) {
        d.kind = Kind::Fixed;
        d.states = parse_u64("detector", text.substr(6));
        if (d.states == 0) config_error("detector: fixed:<M> needs M >= 1");
    } else {
        config_error("detector: expected mlse, logmap, threshold, fixed or fixed:<M>, got '" + text + "'");
    }
    return d;
}

std::string DetectorSpec::name() const {
    switch (kind) {
        case Kind::Mlse: return "mlse";
        case Kind::LogMap: return "logmap";
        case Kind::Fixed: return "fixed";
        case Kind::Threshold: return "threshold";
    }
    return "?";
}

void PipelineConfig::validate() const {
    auto check = [](bool ok, const std::string& what) {
        if (!ok) config_error(what);
    };
    check(frame.training > 0 && frame.payload > 0, "frame: training and payload lengths must be positive");
    check(frame.symbol_rate > 0.0, "frame: symbol rate must be positive");
    check(frame.prbs_order == 7 || frame.prbs_order == 15 || frame.prbs_order == 23 || frame.prbs_order == 31,
          "frame: prbs_order must be 7, 15, 23 or 31");
    check(rrc.rolloff > 0.0 && rrc.rolloff <= 1.0, "shaping: rolloff must lie in (0, 1]");
    check(rrc.span >= 2 && rrc.span % 2 == 0, "shaping: span must be even and at least 2");
    check(rrc.sps >= 1, "shaping: sps must be positive");
    check(receiver.dac_bits == 0 || (receiver.dac_bits >= 2 && receiver.dac_bits <= 24),
          "receiver: dac_bits must be 0 (off) or in [2, 24]");
    check(receiver.link_up >= 1 && receiver.link_down >= 1, "receiver: resampling factors must be positive");
    check(receiver.sync_floor > 0.0 && receiver.sync_floor < 1.0, "receiver: sync_floor must lie in (0, 1)");
    check(channel.fiber_length >= 0.0, "channel: length must be non-negative");
    check(channel.front_end_bandwidth > 0.0, "channel: front-end bandwidth must be positive");
    check(channel.front_end_order >= 1 && channel.front_end_order <= 12, "channel: front_end_order must lie in [1, 12]");
    check(channel.modulation_index > 0.0, "channel: modulation index must be positive");
    check(!std::isnan(channel.snr_db), "channel: snr_db must be a number");
    check(pnle.taps1 >= 1 && pnle.taps1 % 2 == 1 && pnle.taps2 >= 0 && pnle.taps3 >= 0,
          "equalizer: PNLE kernels must be odd (linear kernel at least 1 tap)");
    check((pnle.taps2 == 0 || pnle.taps2 % 2 == 1) && (pnle.taps3 == 0 || pnle.taps3 % 2 == 1),
          "equalizer: PNLE kernels must be odd");
    check(pnle.step_size > 0.0 && pnle.epochs >= 0, "equalizer: PNLE step must be positive");
    check(dfe.ff_taps >= 1 && dfe.ff_taps % 2 == 1 && dfe.fb_taps >= 0, "equalizer: DFE feed-forward taps must be odd");
    check(dfe.step_size > 0.0 && dfe.epochs >= 0, "equalizer: DFE step must be positive");
    check(memory >= 0 && memory <= max_trellis_memory, "detector: memory must lie in [0, 63]");
    check(detect.llr_max > 0.0, "detector: llr_max must be positive");
    check(detect.state_cap >= 0 && detect.state_cap <= 30, "detector: state_cap must lie in [0, 30]");
    check(!sweep.detectors.empty() && !sweep.memories.empty() && !sweep.states.empty() && !sweep.snr_db.empty(),
          "sweep: axis lists must be non-empty");
    for (int L : sweep.memories) check(L >= 0 && L <= max_trellis_memory, "sweep: memories must lie in [0, 63]");
    for (auto M : sweep.states) check(M >= 1, "sweep: state counts must be positive");
    for (double s : sweep.snr_db) check(!std::isnan(s), "sweep: snr_db must be numbers");
    check(min_bits >= 1, "run: min_bits must be positive");
    check(fec_overhead >= 0.0, "run: fec_overhead must be non-negative");
}

PipelineConfig default_config() {
    PipelineConfig cfg;
    cfg.receiver.dac_bits = 8;
    cfg.sweep.detectors = {DetectorSpec::parse("fixed")};
    cfg.sweep.memories = {cfg.memory};
    cfg.sweep.states = {2, 4, 8, 16, 32};
    cfg.sweep.snr_db = {cfg.channel.snr_db};
    return cfg;
}

void apply_full_scale(PipelineConfig& cfg) {
    cfg.frame.symbol_rate = 64e9;
    cfg.frame.training = default_training_length;
    cfg.frame.payload = default_payload_length;
    cfg.channel.front_end_bandwidth = 16e9;
    cfg.receiver.dac_bits = 8;
    cfg.pnle.taps1 = 291;
    cfg.pnle.taps2 = 81;
    cfg.pnle.taps3 = 41;
    cfg.dfe.ff_taps = 71;
    cfg.dfe.fb_taps = 61;
    cfg.receiver.sync_floor = 0.1;
    cfg.memory = 47;
    cfg.sweep.memories = {47};
}

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    const std::string k = trim(key);
    for (const auto& s : settings()) {
        if (k == s.key) {
            s.set(cfg, value);
            return;
        }
    }
    config_error("unknown setting '" + k + "'");
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) config_error("override '" + assignment + "' is not of the form section.key=value");
    apply_setting(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

void load_config(PipelineConfig& cfg, std::istream& is) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        config_error(std::string("config parse error: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) config_error("config: key '" + section + "' outside a [section]");
        for (const auto& [key, node] : body) apply_setting(cfg, section + "." + key, node.get_value<std::string>());
    }
}

void load_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open config file " + path.string());
    load_config(cfg, in);
}

void write_config(std::ostream& os, const PipelineConfig& cfg) {
    std::string section;
    for (const auto& s : settings()) {
        const std::string key = s.key;
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) os << "\n";
            os << "[" << sec << "]\n";
            section = sec;
        }
        os << key.substr(dot + 1) << " = " << s.get(cfg) << "\n";
    }
}

} // namespace fadefree
