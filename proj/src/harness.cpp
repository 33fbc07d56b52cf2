#include "hkdvb/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hkdvb/errors.hpp"
#include "hkdvb/estimates.hpp"
#include "hkdvb/integrator.hpp"
#include "hkdvb/oracles.hpp"

#ifndef HKDVB_BUILD_ID
#define HKDVB_BUILD_ID "unknown"
#endif

namespace hkdvb {

namespace {
constexpr std::int64_t kSchemaVersion = 1;
}

SimConfig default_config() {
    SimConfig cfg;
    return validate_config(cfg);
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const std::int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config: key '" + key + "' expects an unsigned integer, got '" + value +
                         "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw UsageError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

void set_init(SimConfig& cfg, const std::string& value) {
    if (value.rfind("file:", 0) == 0) {
        cfg.init.kind = InitKind::file;
        cfg.init.path = value.substr(5);
        return;
    }
    try {
        cfg.init.kind = init_kind_from_string(value);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
}

SimConfig parse_config_raw(const std::string& text, const std::string& source) {
    SimConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    std::string pending_preset;
    struct KV {
        std::string section, key, value;
        int line;
    };
    std::vector<KV> entries;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw UsageError(source + ":" + std::to_string(line_no) +
                                 ": malformed section header '" + line + "'");
            }
            section = line.substr(1, line.size() - 2);
            if (section != "coefficients" && section != "domain" && section != "discretization" &&
                section != "noise" && section != "run") {
                throw UsageError(source + ":" + std::to_string(line_no) + ": unknown section [" +
                                 section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(source + ":" + std::to_string(line_no) +
                             ": expected key = value, got '" + line + "'");
        }
        KV kv{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
        if (kv.value.size() >= 2 && kv.value.front() == '"' && kv.value.back() == '"') {
            kv.value = kv.value.substr(1, kv.value.size() - 2);
        }
        if (kv.section.empty()) {
            throw UsageError(source + ":" + std::to_string(line_no) + ": key '" + kv.key +
                             "' appears before any section header");
        }
        if (kv.section == "coefficients" && kv.key == "preset") {
            pending_preset = kv.value;
            continue;
        }
        entries.push_back(std::move(kv));
    }

    if (!pending_preset.empty()) {
        try {
            cfg.coeffs = preset(pending_preset);
        } catch (const std::invalid_argument& e) {
            throw UsageError(source + ": " + e.what());
        }
    }

    for (const KV& kv : entries) {
        const std::string where = source + ":" + std::to_string(kv.line);
        if (kv.section == "coefficients") {
            if (kv.key == "A") cfg.coeffs.A = parse_double(kv.key, kv.value);
            else if (kv.key == "B") cfg.coeffs.B = parse_double(kv.key, kv.value);
            else if (kv.key == "C") cfg.coeffs.C = parse_double(kv.key, kv.value);
            else if (kv.key == "D") cfg.coeffs.D = parse_double(kv.key, kv.value);
            else if (kv.key == "epsilon") cfg.coeffs.epsilon = parse_double(kv.key, kv.value);
            else throw UsageError(where + ": unknown key '" + kv.key + "' in [coefficients]");
        } else if (kv.section == "domain") {
            if (kv.key == "x1") cfg.domain.x1 = parse_double(kv.key, kv.value);
            else if (kv.key == "x2") cfg.domain.x2 = parse_double(kv.key, kv.value);
            else throw UsageError(where + ": unknown key '" + kv.key + "' in [domain]");
        } else if (kv.section == "discretization") {
            if (kv.key == "m") cfg.m = static_cast<int>(parse_int(kv.key, kv.value));
            else if (kv.key == "dt") cfg.dt = parse_double(kv.key, kv.value);
            else if (kv.key == "T") cfg.T = parse_double(kv.key, kv.value);
            else if (kv.key == "save_stride") cfg.save_stride = static_cast<int>(parse_int(kv.key, kv.value));
            else if (kv.key == "scheme") {
                try {
                    cfg.scheme = scheme_from_string(kv.value);
                } catch (const std::invalid_argument& e) {
                    throw UsageError(where + ": " + std::string(e.what()));
                }
            } else throw UsageError(where + ": unknown key '" + kv.key + "' in [discretization]");
        } else if (kv.section == "noise") {
            if (kv.key == "kind") {
                try {
                    cfg.noise.kind = noise_kind_from_string(kv.value);
                } catch (const std::invalid_argument& e) {
                    throw UsageError(where + ": " + std::string(e.what()));
                }
            } else if (kv.key == "kappa1") cfg.noise.kappa1 = parse_double(kv.key, kv.value);
            else if (kv.key == "kappa2") cfg.noise.kappa2 = parse_double(kv.key, kv.value);
            else if (kv.key == "decay_p") cfg.noise.decay_p = parse_double(kv.key, kv.value);
            else if (kv.key == "rank") cfg.noise.rank = static_cast<int>(parse_int(kv.key, kv.value));
            else throw UsageError(where + ": unknown key '" + kv.key + "' in [noise]");
        } else if (kv.section == "run") {
            if (kv.key == "seed") cfg.seed = parse_uint(kv.key, kv.value);
            else if (kv.key == "n_paths") cfg.n_paths = static_cast<int>(parse_int(kv.key, kv.value));
            else if (kv.key == "lambda_x") cfg.lambda_x = parse_double(kv.key, kv.value);
            else if (kv.key == "enforce_ccond") cfg.enforce_ccond = parse_bool(kv.key, kv.value);
            else if (kv.key == "k_interval") cfg.k_interval = parse_double(kv.key, kv.value);
            else if (kv.key == "threads") cfg.threads = static_cast<int>(parse_int(kv.key, kv.value));
            else if (kv.key == "init") set_init(cfg, kv.value);
            else if (kv.key == "init_amplitude") cfg.init.amplitude = parse_double(kv.key, kv.value);
            else if (kv.key == "init_width") cfg.init.width = parse_double(kv.key, kv.value);
            else if (kv.key == "init_center") cfg.init.center = parse_double(kv.key, kv.value);
            else if (kv.key == "init_mode") cfg.init.mode = static_cast<int>(parse_int(kv.key, kv.value));
            else if (kv.key == "init_speed") cfg.init.speed = parse_double(kv.key, kv.value);
            else if (kv.key == "init_phase") cfg.init.phase = parse_double(kv.key, kv.value);
            else throw UsageError(where + ": unknown key '" + kv.key + "' in [run]");
        }
    }
    return cfg;
}

}  // namespace

SimConfig parse_config_text(const std::string& text, const std::string& source_name) {
    return validate_config(parse_config_raw(text, source_name));
}

SimConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string dump_config(const SimConfig& cfg) {
    std::ostringstream os;
    const auto d = [](double v) { return format_double(v); };
    os << "[coefficients]\n";
    os << "A = " << d(cfg.coeffs.A) << "\n";
    os << "B = " << d(cfg.coeffs.B) << "\n";
    os << "C = " << d(cfg.coeffs.C) << "\n";
    os << "D = " << d(cfg.coeffs.D) << "\n";
    os << "epsilon = " << d(cfg.coeffs.epsilon) << "\n";
    os << "\n[domain]\n";
    os << "x1 = " << d(cfg.domain.x1) << "\n";
    os << "x2 = " << d(cfg.domain.x2) << "\n";
    os << "\n[discretization]\n";
    os << "m = " << cfg.m << "\n";
    os << "dt = " << d(cfg.dt) << "\n";
    os << "T = " << d(cfg.T) << "\n";
    os << "save_stride = " << cfg.save_stride << "\n";
    os << "scheme = " << to_string(cfg.scheme) << "\n";
    os << "\n[noise]\n";
    os << "kind = " << to_string(cfg.noise.kind) << "\n";
    os << "kappa1 = " << d(cfg.noise.kappa1) << "\n";
    os << "kappa2 = " << d(cfg.noise.kappa2) << "\n";
    os << "decay_p = " << d(cfg.noise.decay_p) << "\n";
    os << "rank = " << cfg.noise.rank << "\n";
    os << "\n[run]\n";
    os << "seed = " << cfg.seed << "\n";
    os << "n_paths = " << cfg.n_paths << "\n";
    os << "lambda_x = " << d(cfg.lambda_x) << "\n";
    os << "enforce_ccond = " << (cfg.enforce_ccond ? "true" : "false") << "\n";
    os << "k_interval = " << d(cfg.k_interval) << "\n";
    os << "threads = " << cfg.threads << "\n";
    if (cfg.init.kind == InitKind::file) {
        os << "init = file:" << cfg.init.path << "\n";
    } else {
        os << "init = " << to_string(cfg.init.kind) << "\n";
    }
    os << "init_amplitude = " << d(cfg.init.amplitude) << "\n";
    os << "init_width = " << d(cfg.init.width) << "\n";
    os << "init_center = " << d(cfg.init.center) << "\n";
    os << "init_mode = " << cfg.init.mode << "\n";
    os << "init_speed = " << d(cfg.init.speed) << "\n";
    os << "init_phase = " << d(cfg.init.phase) << "\n";
    return os.str();
}

void attach_config(Record& r, const SimConfig& cfg) {
    r.integer("schema_version", kSchemaVersion);
    r.num("config.A", cfg.coeffs.A);
    r.num("config.B", cfg.coeffs.B);
    r.num("config.C", cfg.coeffs.C);
    r.num("config.D", cfg.coeffs.D);
    r.num("config.epsilon", cfg.coeffs.epsilon);
    r.num("config.x1", cfg.domain.x1);
    r.num("config.x2", cfg.domain.x2);
    r.integer("config.m", cfg.m);
    r.num("config.dt", cfg.dt);
    r.num("config.T", cfg.T);
    r.integer("config.save_stride", cfg.save_stride);
    r.text("config.scheme", to_string(cfg.scheme));
    r.text("config.noise.kind", to_string(cfg.noise.kind));
    r.num("config.noise.kappa1", cfg.noise.kappa1);
    r.num("config.noise.kappa2", cfg.noise.kappa2);
    r.num("config.noise.decay_p", cfg.noise.decay_p);
    r.integer("config.noise.rank", cfg.noise.rank);
    r.integer("config.seed", static_cast<std::int64_t>(cfg.seed));
    r.integer("config.n_paths", cfg.n_paths);
    r.num("config.lambda_x", cfg.lambda_x);
    r.boolean("config.enforce_ccond", cfg.enforce_ccond);
    r.num("config.k_interval", cfg.k_interval);
    r.integer("config.threads", cfg.threads);
    r.text("config.init", to_string(cfg.init.kind));
    r.num("config.init_amplitude", cfg.init.amplitude);
    r.num("config.init_width", cfg.init.width);
    r.num("config.init_center", cfg.init.center);
    r.integer("config.init_mode", cfg.init.mode);
    r.num("config.init_speed", cfg.init.speed);
    r.num("config.init_phase", cfg.init.phase);
}

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::string format = "jsonl";
    std::string stamp;
    bool timing = false;

    std::string preset_name, noise_kind, init_kind, scheme;
    double A = 0, B = 0, C = 0, D = 0, epsilon = 0;
    double x1 = 0, x2 = 0, dt = 0, T = 0;
    double kappa1 = 0, kappa2 = 0, decay_p = 0, lambda_x = 0, k_interval = 0;
    double init_amplitude = 0, init_width = 0, init_center = 0, init_speed = 0, init_phase = 0;
    int m = 0, save_stride = 0, rank = 0, n_paths = 0, threads = 0, init_mode = 0;
    std::uint64_t seed = 0;
    bool no_enforce = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config_path, "config file (key = value sections)");
    sub->add_option("--out-dir", f.out_dir, "output directory");
    sub->add_option("--format", f.format, "jsonl | csv | both");
    sub->add_option("--stamp", f.stamp, "override the timestamp in output filenames");
    sub->add_flag("--timing", f.timing, "include wall time in the run record");
    sub->add_option("--preset", f.preset_name,
                    "kdv | damped_kdv | burgers | kdv_burgers | damped_burgers | full");
    sub->add_option("--A", f.A, "nonlinearity coefficient");
    sub->add_option("--B", f.B, "dispersion coefficient");
    sub->add_option("--C", f.C, "diffusion coefficient");
    sub->add_option("--D", f.D, "damping coefficient");
    sub->add_option("--epsilon", f.epsilon, "fourth-order regularization strength");
    sub->add_option("--x1", f.x1, "left endpoint");
    sub->add_option("--x2", f.x2, "right endpoint");
    sub->add_option("--m", f.m, "spectral truncation");
    sub->add_option("--dt", f.dt, "time step");
    sub->add_option("--T", f.T, "horizon");
    sub->add_option("--save-stride", f.save_stride, "record every n-th step");
    sub->add_option("--scheme", f.scheme, "auto | em | etdrk4");
    sub->add_option("--noise", f.noise_kind, "off | diagonal_gain | pointwise_multiplicative");
    sub->add_option("--kappa1", f.kappa1, "noise growth constant kappa1");
    sub->add_option("--kappa2", f.kappa2, "noise offset constant kappa2");
    sub->add_option("--decay-p", f.decay_p, "noise mode decay exponent");
    sub->add_option("--rank", f.rank, "retained Wiener modes (0 = basis dimension)");
    sub->add_option("--seed", f.seed, "seed");
    sub->add_option("--paths", f.n_paths, "number of Monte Carlo paths");
    sub->add_option("--lambda-x", f.lambda_x, "solution bound lambda_X (monitored)");
    sub->add_option("--threads", f.threads, "worker threads (0 = HKDVB_THREADS or cores)");
    sub->add_option("--k", f.k_interval, "half width of the local interval (-k, k)");
    sub->add_option("--init", f.init_kind, "soliton | gaussian | mode | colored | file:<path>");
    sub->add_option("--init-amplitude", f.init_amplitude, "initial amplitude");
    sub->add_option("--init-width", f.init_width, "initial width / colored decay exponent");
    sub->add_option("--init-center", f.init_center, "initial center");
    sub->add_option("--init-mode", f.init_mode, "initial mode index");
    sub->add_option("--init-speed", f.init_speed, "initial soliton speed");
    sub->add_option("--init-phase", f.init_phase, "initial mode phase");
    sub->add_flag("--no-enforce-ccond", f.no_enforce, "warn instead of rejecting on 3B >= A+1");
}

// Precedence: command defaults (base) < config file < CLI flags.
SimConfig build_config(const CLI::App* sub, const CommonFlags& f, SimConfig base = SimConfig{}) {
    SimConfig cfg = std::move(base);
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw UsageError("config: cannot open file " + f.config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        cfg = parse_config_raw(buf.str(), f.config_path);
    }
    const auto given = [&](const std::string& name) { return sub->count(name) > 0; };
    if (given("--preset")) {
        try {
            cfg.coeffs = preset(f.preset_name);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (given("--A")) cfg.coeffs.A = f.A;
    if (given("--B")) cfg.coeffs.B = f.B;
    if (given("--C")) cfg.coeffs.C = f.C;
    if (given("--D")) cfg.coeffs.D = f.D;
    if (given("--epsilon")) cfg.coeffs.epsilon = f.epsilon;
    if (given("--x1")) cfg.domain.x1 = f.x1;
    if (given("--x2")) cfg.domain.x2 = f.x2;
    if (given("--m")) cfg.m = f.m;
    if (given("--dt")) cfg.dt = f.dt;
    if (given("--T")) cfg.T = f.T;
    if (given("--save-stride")) cfg.save_stride = f.save_stride;
    if (given("--scheme")) {
        try {
            cfg.scheme = scheme_from_string(f.scheme);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (given("--noise")) {
        try {
            cfg.noise.kind = noise_kind_from_string(f.noise_kind);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (given("--kappa1")) cfg.noise.kappa1 = f.kappa1;
    if (given("--kappa2")) cfg.noise.kappa2 = f.kappa2;
    if (given("--decay-p")) cfg.noise.decay_p = f.decay_p;
    if (given("--rank")) cfg.noise.rank = f.rank;
    if (given("--seed")) cfg.seed = f.seed;
    if (given("--paths")) cfg.n_paths = f.n_paths;
    if (given("--lambda-x")) cfg.lambda_x = f.lambda_x;
    if (given("--threads")) cfg.threads = f.threads;
    if (given("--k")) cfg.k_interval = f.k_interval;
    if (given("--init")) set_init(cfg, f.init_kind);
    if (given("--init-amplitude")) cfg.init.amplitude = f.init_amplitude;
    if (given("--init-width")) cfg.init.width = f.init_width;
    if (given("--init-center")) cfg.init.center = f.init_center;
    if (given("--init-mode")) cfg.init.mode = f.init_mode;
    if (given("--init-speed")) cfg.init.speed = f.init_speed;
    if (given("--init-phase")) cfg.init.phase = f.init_phase;
    if (f.no_enforce) cfg.enforce_ccond = false;
    return validate_config(cfg);
}

Record run_header(const std::string& command, const SimConfig& cfg, bool timing,
                  double wall_seconds) {
    Record r;
    r.text("record", "run");
    r.text("command", command);
    r.text("build_id", HKDVB_BUILD_ID);
    attach_config(r, cfg);
    if (timing) r.num("wall_time_s", wall_seconds);
    for (size_t i = 0; i < cfg.warnings.size(); ++i) {
        r.text("warning." + std::to_string(i), cfg.warnings[i]);
    }
    return r;
}

void write_output(std::vector<Record>& records, std::vector<Record>* series,
                  const CommonFlags& f, const std::string& command, const SimConfig& cfg) {
    const RecordFormat fmt = record_format_from_string(f.format);
    if (fmt == RecordFormat::jsonl || fmt == RecordFormat::both) {
        const auto paths =
            write_records(records, RecordFormat::jsonl, f.out_dir, command, cfg.seed, f.stamp);
        for (const auto& p : paths) std::cout << "wrote " << p << "\n";
    }
    if (fmt == RecordFormat::csv || fmt == RecordFormat::both) {
        const std::vector<Record>& rows = (series && !series->empty()) ? *series : records;
        const auto paths =
            write_records(rows, RecordFormat::csv, f.out_dir, command, cfg.seed, f.stamp);
        for (const auto& p : paths) std::cout << "wrote " << p << "\n";
    }
}

int cmd_simulate(const CLI::App* sub, const CommonFlags& f) {
    const SimConfig cfg = build_config(sub, f);
    const auto t0 = std::chrono::steady_clock::now();
    const Basis basis(cfg.m, cfg.domain);
    PathOptions opt;
    opt.save_stride = cfg.save_stride;
    const Trajectory traj = simulate_path(cfg, basis, 0, opt);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<Record> records;
    std::vector<Record> series;
    records.push_back(run_header("simulate", cfg, f.timing, wall));
    records.back().text("scheme_used", traj.scheme);
    records.back().integer("cutoff_activations", traj.cutoff_activations);
    for (size_t i = 0; i < traj.times.size(); ++i) {
        const double l2 = l2_norm(traj.states[i]);
        Record r;
        r.text("record", "trajectory_point");
        r.integer("schema_version", kSchemaVersion);
        r.num("time", traj.times[i]);
        r.series("coeffs", traj.states[i].coeffs);
        r.num("l2_norm", l2);
        r.num("max_abs", traj.max_abs_values[i]);
        r.boolean("lambda_flag", traj.lambda_flags[i] != 0);
        records.push_back(std::move(r));
        for (const char* name : {"l2_norm", "max_abs"}) {
            Record s;
            s.text("record", "series");
            s.integer("schema_version", kSchemaVersion);
            s.num("time", traj.times[i]);
            s.text("series_name", name);
            s.num("value", std::string(name) == "l2_norm" ? l2 : traj.max_abs_values[i]);
            series.push_back(std::move(s));
        }
    }
    if (traj.blew_up) {
        Record r;
        r.text("record", "error");
        r.text("message", "blow-up at t = " + format_double(traj.blowup_time));
        r.num("blowup_time", traj.blowup_time);
        r.num("blowup_norm", traj.blowup_norm);
        records.push_back(std::move(r));
    }
    write_output(records, &series, f, "simulate", cfg);
    if (traj.blew_up) {
        std::cerr << "blow-up at t = " << traj.blowup_time << "\n";
        return 3;
    }
    return 0;
}

int cmd_ensemble(const CLI::App* sub, const CommonFlags& f) {
    const SimConfig cfg = build_config(sub, f);
    const auto t0 = std::chrono::steady_clock::now();
    const Basis basis(cfg.m, cfg.domain);
    EnsembleOptions opt;
    if (cfg.coeffs.B + cfg.coeffs.C > 0.0) {
        const WeightFunction w =
            construct_weight(cfg.domain, cfg.coeffs.B, cfg.coeffs.C, 1.0, -2.0);
        auto ev = std::make_shared<EnergyEvaluator>(w, basis);
        opt.terminal_functional = [ev](const SpectralState& s) { return ev->value(s); };
        opt.terminal_name = "weighted_energy_T";
    }
    const EnsembleStats stats = run_ensemble(cfg, basis, opt);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<Record> records;
    records.push_back(run_header("ensemble", cfg, f.timing, wall));
    records.back().integer("n_blowups", stats.n_blowups);
    records.back().integer("lambda_violations", stats.lambda_violations);
    records.back().integer("cutoff_activations", stats.cutoff_activations);
    for (const auto& fn : stats.functionals) {
        Record r;
        r.text("record", "ensemble_stat");
        r.integer("schema_version", kSchemaVersion);
        r.text("functional", fn.name);
        r.num("mean", fn.mean);
        r.num("variance", fn.variance);
        r.num("ci95_half", fn.ci_half);
        r.integer("n", static_cast<std::int64_t>(fn.samples.size()));
        records.push_back(std::move(r));
    }
    write_output(records, nullptr, f, "ensemble", cfg);
    return 0;
}

int cmd_validate(const CLI::App* sub, const CommonFlags& f, const std::string& kind_name,
                 double c, double x0, double tol, int mode_index, double amplitude) {
    SolutionKind kind = SolutionKind::kdv_soliton;
    if (!kind_name.empty()) {
        kind = solution_kind_from_string(kind_name);
    } else if (sub->count("--preset")) {
        const std::string p = f.preset_name;
        if (p == "kdv") kind = SolutionKind::kdv_soliton;
        else if (p == "burgers") kind = SolutionKind::burgers_front;
        else if (p == "kdv_burgers") kind = SolutionKind::kdvb_tanh;
        else kind = SolutionKind::linear_mode;
    }

    SimConfig base;
    base.scheme = Scheme::auto_select;
    switch (kind) {
        case SolutionKind::kdv_soliton:
            base.coeffs = preset(PresetName::kdv);
            base.domain = Domain{-16.0, 16.0};
            base.m = 128;
            base.dt = 1e-4;
            base.lambda_x = 3.0 * 4.0 / base.coeffs.A + 1.0;
            break;
        case SolutionKind::burgers_front:
            base.coeffs = preset(PresetName::burgers);
            base.domain = Domain{-20.0, 20.0};
            base.m = 128;
            base.dt = 1e-3;
            base.T = 2.0;
            base.enforce_ccond = false;  // B = 0 violates 3B >= A+1; warn only
            break;
        case SolutionKind::kdvb_tanh:
            base.coeffs = preset(PresetName::kdv_burgers);
            base.domain = Domain{-60.0, 60.0};
            base.m = 128;
            base.dt = 1e-3;
            base.T = 2.0;
            break;
        case SolutionKind::linear_mode:
            base.coeffs.A = 0.0;
            base.enforce_ccond = false;  // A = 0 passes anyway with B = 1
            base.T = 1.0;
            break;
    }
    SimConfig cfg = build_config(sub, f, base);

    SolutionParams params;
    params.c = sub->count("--c") ? c : (kind == SolutionKind::burgers_front ? 1.0 : 4.0);
    params.x0 = x0;
    params.amplitude = amplitude;
    double tolerance = tol;
    switch (kind) {
        case SolutionKind::kdv_soliton:
            if (!sub->count("--T") && f.config_path.empty()) {
                cfg.T = cfg.domain.length() / params.c;  // one traversal
            }
            if (!sub->count("--x0")) params.x0 = cfg.domain.x1 + 0.25 * cfg.domain.length();
            if (tolerance <= 0.0) tolerance = 1e-4;
            if (!sub->count("--lambda-x") && f.config_path.empty()) {
                cfg.lambda_x = 3.0 * params.c / cfg.coeffs.A + 1.0;
            }
            break;
        case SolutionKind::burgers_front:
            if (tolerance <= 0.0) tolerance = 1e-2;
            break;
        case SolutionKind::kdvb_tanh:
            if (tolerance <= 0.0) tolerance = 1e-2;
            break;
        case SolutionKind::linear_mode: {
            cfg.coeffs.A = 0.0;
            const Basis tmp(cfg.m, cfg.domain);
            const int j = std::max(1, mode_index);
            params.wavenumber = tmp.wavenumber(j);
            if (tolerance <= 0.0) tolerance = 1e-10;
            break;
        }
    }
    cfg = validate_config(cfg);

    const auto t0 = std::chrono::steady_clock::now();
    const ValidateReport rep = validate_against_oracle(cfg, kind, params, tolerance);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<Record> records;
    records.push_back(run_header("validate", cfg, f.timing, wall));
    records.back().text("kind", rep.kind);
    records.back().num("oracle_residual", rep.oracle_residual);
    records.back().num("max_rel_error", rep.max_rel_error);
    records.back().num("tolerance", rep.tolerance);
    records.back().num("energy_drift_rel_per_time", rep.energy_drift_rel_per_time);
    records.back().boolean("passed", rep.passed);
    for (size_t i = 0; i < rep.times.size(); ++i) {
        Record r;
        r.text("record", "validate_point");
        r.integer("schema_version", kSchemaVersion);
        r.num("time", rep.times[i]);
        r.text("series_name", "rel_l2_error");
        r.num("value", rep.rel_l2_errors[i]);
        records.push_back(std::move(r));
    }
    write_output(records, nullptr, f, "validate", cfg);
    std::cout << "validate " << rep.kind << ": max rel L2 error " << rep.max_rel_error
              << " (tolerance " << tolerance << ")\n";
    return rep.passed ? 0 : 1;
}

int cmd_identities(const CLI::App* sub, const CommonFlags& f, int n_samples, int n_weights) {
    SimConfig base;
    base.m = 96;
    SimConfig cfg = build_config(sub, f, base);
    const Basis basis(cfg.m, cfg.domain);
    const auto t0 = std::chrono::steady_clock::now();

    GaussianStream rng(cfg.seed, 7001);
    const double L = cfg.domain.length();
    double max_rel = 0.0;
    std::vector<Record> records;

    const int per_weight = std::max(1, n_samples / std::max(1, n_weights));
    for (int wi = 0; wi < n_weights; ++wi) {
        const bool cubic = wi % 2 == 0;
        const double B = cubic ? 0.5 + std::abs(rng.next()) : 0.0;
        const double C = cubic ? std::abs(rng.next()) : 0.5 + std::abs(rng.next());
        const double delta = 0.2 + std::abs(rng.next());
        const double gamma = -1.5 - std::abs(rng.next());
        const WeightFunction w = construct_weight(cfg.domain, B, C, delta, gamma);
        const WeightReport wrep = verify_weight(w, cfg.domain, B, C);
        double wmax3 = 0.0, wmax2 = 0.0;
        for (int s = 0; s < per_weight; ++s) {
            SpectralState t;
            t.coeffs.assign(static_cast<size_t>(basis.dim()), 0.0);
            const int deg = std::max(2, basis.truncation() / 3);
            for (int j = 0; j < 2 * deg + 1; ++j) {
                t.coeffs[static_cast<size_t>(j)] = rng.next();
            }
            Field tf = to_physical(t, basis);
            for (int i = 0; i < basis.grid_size(); ++i) {
                const double x = basis.grid()[static_cast<size_t>(i)];
                const double y = (x - 0.5 * (cfg.domain.x1 + cfg.domain.x2)) / (0.35 * L);
                tf.values[static_cast<size_t>(i)] *=
                    std::abs(y) < 1.0 ? std::exp(-1.0 / (1.0 - y * y)) : 0.0;
            }
            const SpectralState su = to_spectral(tf, basis);
            const Field u = to_physical(su, basis);
            const IbpReport rep = check_ibp_identities(u, w, basis);
            wmax3 = std::max(wmax3, rep.third_order.residual / rep.third_order.scale);
            wmax2 = std::max(wmax2, rep.second_order.residual / rep.second_order.scale);
        }
        max_rel = std::max({max_rel, wmax3, wmax2});
        Record r;
        r.text("record", "identity_check");
        r.integer("schema_version", kSchemaVersion);
        r.integer("weight_index", wi);
        r.num("B", B);
        r.num("C", C);
        r.num("delta", delta);
        r.num("gamma", gamma);
        r.boolean("weight_certified", wrep.passed());
        r.num("max_rel_residual_third_order", wmax3);
        r.num("max_rel_residual_second_order", wmax2);
        records.push_back(std::move(r));
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.insert(records.begin(), run_header("identities", cfg, f.timing, wall));
    records.front().num("max_rel_residual", max_rel);
    records.front().boolean("passed", max_rel < 1e-8);
    write_output(records, nullptr, f, "identities", cfg);
    std::cout << "identities: max relative residual " << max_rel << "\n";
    return max_rel < 1e-8 ? 0 : 1;
}

int cmd_weight(const CLI::App* sub, const CommonFlags& f, double delta, double gamma) {
    SimConfig base;
    base.enforce_ccond = false;  // standalone weight exploration
    SimConfig cfg = build_config(sub, f, base);
    const WeightFunction w =
        construct_weight(cfg.domain, cfg.coeffs.B, cfg.coeffs.C, delta, gamma);
    const WeightReport rep = verify_weight(w, cfg.domain, cfg.coeffs.B, cfg.coeffs.C);

    std::vector<Record> records;
    records.push_back(run_header("weight", cfg, f.timing, 0.0));
    Record r;
    r.text("record", "weight");
    r.integer("schema_version", kSchemaVersion);
    r.series("poly_coeffs", w.p.c);
    r.num("poly_origin", w.p.x0);
    r.num("delta", w.delta);
    r.num("alpha_x", w.alpha_x);
    r.num("gamma", w.gamma);
    r.num("min_slope", rep.min_slope);
    r.num("max_curvature_combo", rep.max_curvature_combo);
    r.num("p_at_x1", rep.p_at_x1);
    r.boolean("passed", rep.passed());
    records.push_back(std::move(r));
    write_output(records, nullptr, f, "weight", cfg);
    std::cout << "weight: " << (rep.passed() ? "certified" : "FAILED")
              << ", min p' = " << rep.min_slope
              << ", max Bp'''+Cp'' = " << rep.max_curvature_combo << "\n";
    return rep.passed() ? 0 : 1;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double("list", item));
    }
    return out;
}

SimConfig stochastic_benchmark_base() {
    SimConfig base;
    base.coeffs = preset(PresetName::full);
    base.domain = Domain{-1.5707963267948966, 1.5707963267948966};
    base.m = 64;
    base.dt = 1e-3;
    base.T = 0.5;
    base.noise.kind = NoiseKind::diagonal_gain;
    base.noise.kappa1 = 0.1;
    base.noise.decay_p = 0.6;
    base.n_paths = 32;
    base.init.kind = InitKind::colored;
    base.init.amplitude = 1.0;
    base.init.width = 0.51;
    return base;
}

int cmd_moments(const CLI::App* sub, const CommonFlags& f, const std::string& eps_text) {
    SimConfig cfg = build_config(sub, f, stochastic_benchmark_base());
    const std::vector<double> eps_list =
        eps_text.empty() ? std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4} : parse_list(eps_text);

    const auto t0 = std::chrono::steady_clock::now();
    const MomentScan scan = moment_bound_scan(cfg, eps_list, cfg.k_effective);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<Record> records;
    records.push_back(run_header("moments", cfg, f.timing, wall));
    records.back().num("h2_column_ratio", scan.h2_ratio);
    records.back().num("h1_column_ratio", scan.h1_ratio);
    records.back().boolean("bounded", scan.bounded);
    for (const auto& row : scan.rows) {
        Record r;
        r.text("record", "moment_row");
        r.integer("schema_version", kSchemaVersion);
        r.num("eps", row.eps);
        r.num("eps_h2_mean", row.eps_h2_mean);
        r.num("eps_h2_ci95_half", row.eps_h2_ci);
        r.num("h1_local_mean", row.h1_local_mean);
        r.num("h1_local_ci95_half", row.h1_local_ci);
        r.integer("blowups", row.blowups);
        records.push_back(std::move(r));
    }
    write_output(records, nullptr, f, "moments", cfg);
    std::cout << "moments: eps*H2 column ratio " << scan.h2_ratio << ", H1(-k,k) column ratio "
              << scan.h1_ratio << " (bound < 10)\n";
    return scan.bounded ? 0 : 1;
}

int cmd_martingale(const CLI::App* sub, const CommonFlags& f, double s_time, double t_time) {
    SimConfig base = stochastic_benchmark_base();
    base.m = 32;
    base.n_paths = 256;
    base.init.kind = InitKind::gaussian;
    base.init.amplitude = 1.0;
    base.init.width = 0.3;
    SimConfig cfg = build_config(sub, f, base);

    const double s = s_time > 0.0 ? s_time : 0.25 * cfg.T;
    const double t = t_time > 0.0 ? t_time : 0.5 * cfg.T;
    const std::vector<MartingaleProbe> probes = {
        {s, t, PhiKind::one},
        {0.5 * cfg.T, cfg.T, PhiKind::tanh_l2},
        {0.25 * cfg.T, 0.75 * cfg.T, PhiKind::tanh_avg},
    };
    const Basis basis(cfg.m, cfg.domain);
    const auto t0 = std::chrono::steady_clock::now();
    const MartingaleReport rep = martingale_diagnostics(cfg, basis, probes);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<Record> records;
    records.push_back(run_header("martingale", cfg, f.timing, wall));
    records.back().num("doob_ratio", rep.doob_ratio);
    records.back().boolean("doob_pass", rep.doob_pass);
    records.back().num("doob_sup_mean", rep.doob_sup_mean);
    records.back().num("doob_final_mean", rep.doob_final_mean);
    records.back().num("doob_final_abs_mean", rep.doob_final_abs_mean);
    records.back().boolean("power_warning", rep.power_warning);
    bool all_pass = rep.doob_pass;
    for (const auto& p : rep.probes) {
        Record r;
        r.text("record", "martingale_probe");
        r.integer("schema_version", kSchemaVersion);
        r.num("s", p.s);
        r.num("t", p.t);
        r.text("phi", p.phi);
        r.num("increment_mean", p.increment_mean);
        r.num("increment_ci95_half", p.increment_ci);
        r.num("qv_mean", p.qv_mean);
        r.num("qv_ci95_half", p.qv_ci);
        r.boolean("increment_pass", p.increment_pass);
        r.boolean("qv_pass", p.qv_pass);
        all_pass = all_pass && p.increment_pass && p.qv_pass;
        records.push_back(std::move(r));
    }
    write_output(records, nullptr, f, "martingale", cfg);
    std::cout << "martingale: " << (all_pass ? "all checks passed" : "CHECKS FAILED")
              << ", Doob ratio " << rep.doob_ratio << "\n";
    return all_pass ? 0 : 1;
}

int cmd_converge(const CLI::App* sub, const CommonFlags& f, const std::string& mode_name,
                 const std::string& levels_text) {
    const StudyMode mode = study_mode_from_string(mode_name.empty() ? "eps" : mode_name);
    SimConfig base;
    if (mode == StudyMode::eps) {
        base = stochastic_benchmark_base();
        base.init.kind = InitKind::gaussian;
        base.init.width = 0.3;
    } else if (mode == StudyMode::modes) {
        base.coeffs = preset(PresetName::kdv_burgers);
        base.T = 0.5;
        base.init.kind = InitKind::gaussian;
        base.n_paths = 1;
    } else {
        base.coeffs = preset(PresetName::kdv);
        base.T = 0.5;
        base.init.kind = InitKind::gaussian;
        base.n_paths = 1;
    }
    SimConfig cfg = build_config(sub, f, base);

    std::vector<double> levels;
    if (!levels_text.empty()) {
        levels = parse_list(levels_text);
    } else {
        switch (mode) {
            case StudyMode::eps: levels = {1e-1, 1e-2, 1e-3}; break;
            case StudyMode::modes: levels = {16, 32, 64}; break;
            case StudyMode::dt: levels = {1e-3, 5e-4, 2.5e-4}; break;
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const ConvergenceStudy study = convergence_study(cfg, mode, levels);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    bool pass = true;
    switch (mode) {
        case StudyMode::eps:
            pass = study.fraction_decreasing >= 0.9 && study.checksums_equal;
            break;
        case StudyMode::modes: {
            for (size_t j = 0; j + 1 < study.mean_diffs.size(); ++j) {
                if (!(study.mean_diffs[j] > study.mean_diffs[j + 1])) pass = false;
            }
            break;
        }
        case StudyMode::dt: {
            for (double o : study.orders) {
                if (!(o >= 0.9)) pass = false;
            }
            break;
        }
    }
    if (study.blowups > 0) pass = false;

    std::vector<Record> records;
    records.push_back(run_header("converge", cfg, f.timing, wall));
    records.back().text("mode", to_string(mode));
    records.back().num("fraction_decreasing", study.fraction_decreasing);
    records.back().boolean("checksums_equal", study.checksums_equal);
    records.back().integer("blowups", study.blowups);
    records.back().boolean("passed", pass);
    for (size_t j = 0; j < study.mean_diffs.size(); ++j) {
        Record r;
        r.text("record", "convergence_pair");
        r.integer("schema_version", kSchemaVersion);
        r.num("level_hi", study.levels[j]);
        r.num("level_lo", study.levels[j + 1]);
        r.num("mean_diff", study.mean_diffs[j]);
        if (j < study.orders.size()) r.num("order", study.orders[j]);
        records.push_back(std::move(r));
    }
    write_output(records, nullptr, f, "converge", cfg);
    std::cout << "converge(" << to_string(mode) << "): " << (pass ? "passed" : "FAILED") << "\n";
    return pass ? 0 : 1;
}

void write_error_record(const CommonFlags& f, const std::string& command,
                        const std::string& message, int code) {
    std::cerr << command << ": " << message << "\n";
    try {
        Record r;
        r.text("record", "error");
        r.integer("schema_version", kSchemaVersion);
        r.text("command", command);
        r.text("message", message);
        r.integer("exit_code", code);
        const std::vector<Record> recs{r};
        write_records(recs, RecordFormat::jsonl, f.out_dir, command + "-error", 0, f.stamp);
    } catch (...) {
        // stderr already carries the message
    }
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"stochastic hybrid KdV-Burgers laboratory"};
    app.require_subcommand(0, 1);
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "print the canonical config file and exit");

    struct SubSpec {
        CLI::App* app = nullptr;
        CommonFlags flags;
    };
    SubSpec simulate, ensemble, validate, identities, weight, moments, martingale, converge;

    simulate.app = app.add_subcommand("simulate", "integrate one trajectory");
    add_common(simulate.app, simulate.flags);

    ensemble.app = app.add_subcommand("ensemble", "Monte Carlo ensemble statistics");
    add_common(ensemble.app, ensemble.flags);

    validate.app = app.add_subcommand("validate", "deterministic solver vs exact solution");
    add_common(validate.app, validate.flags);
    std::string v_kind;
    double v_c = 4.0, v_x0 = 0.0, v_tol = 0.0, v_amp = 1.0;
    int v_mode_index = 1;
    validate.app->add_option("--kind", v_kind,
                             "linear_mode | kdv_soliton | burgers_front | kdvb_tanh");
    validate.app->add_option("--c", v_c, "soliton/front speed");
    validate.app->add_option("--x0", v_x0, "initial structure position");
    validate.app->add_option("--tol", v_tol, "acceptance tolerance (0 = kind default)");
    validate.app->add_option("--mode-index", v_mode_index, "mode index for linear_mode");
    validate.app->add_option("--amplitude", v_amp, "amplitude for linear_mode");

    identities.app = app.add_subcommand("identities", "integration-by-parts identity checks");
    add_common(identities.app, identities.flags);
    int i_samples = 100, i_weights = 5;
    identities.app->add_option("--samples", i_samples, "number of random compactly supported samples");
    identities.app->add_option("--weights", i_weights, "number of random certified weights");

    weight.app = app.add_subcommand("weight", "construct and certify a weight function");
    add_common(weight.app, weight.flags);
    double w_delta = 1.0, w_gamma = -2.0;
    weight.app->add_option("--delta", w_delta, "boundary value p(x1)");
    weight.app->add_option("--gamma", w_gamma, "curvature bound (< -1)");

    moments.app = app.add_subcommand("moments", "moment-bound scan over epsilon");
    add_common(moments.app, moments.flags);
    std::string m_eps;
    moments.app->add_option("--eps", m_eps, "comma list of descending epsilon values");

    martingale.app = app.add_subcommand("martingale", "martingale diagnostics");
    add_common(martingale.app, martingale.flags);
    double g_s = 0.0, g_t = 0.0;
    martingale.app->add_option("--s", g_s, "probe start time");
    martingale.app->add_option("--t", g_t, "probe end time");

    converge.app = app.add_subcommand("converge", "convergence studies (eps | modes | dt)");
    add_common(converge.app, converge.flags);
    std::string c_mode, c_levels;
    converge.app->add_option("--mode", c_mode, "eps | modes | dt");
    converge.app->add_option("--levels", c_levels, "comma list of levels");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (print_defaults) {
        std::cout << dump_config(default_config());
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return 2;
    }

    CLI::App* active = app.get_subcommands().front();
    const std::string name = active->get_name();
    const CommonFlags* flags = nullptr;
    for (const SubSpec* s :
         {&simulate, &ensemble, &validate, &identities, &weight, &moments, &martingale,
          &converge}) {
        if (s->app == active) flags = &s->flags;
    }

    try {
        if (name == "simulate") return cmd_simulate(active, *flags);
        if (name == "ensemble") return cmd_ensemble(active, *flags);
        if (name == "validate")
            return cmd_validate(active, *flags, v_kind, v_c, v_x0, v_tol, v_mode_index, v_amp);
        if (name == "identities") return cmd_identities(active, *flags, i_samples, i_weights);
        if (name == "weight") return cmd_weight(active, *flags, w_delta, w_gamma);
        if (name == "moments") return cmd_moments(active, *flags, m_eps);
        if (name == "martingale") return cmd_martingale(active, *flags, g_s, g_t);
        if (name == "converge") return cmd_converge(active, *flags, c_mode, c_levels);
        std::cerr << "unknown subcommand " << name << "\n";
        return 2;
    } catch (const UsageError& e) {
        write_error_record(*flags, name, e.what(), 2);
        return 2;
    } catch (const BlowupError& e) {
        write_error_record(*flags, name, e.what(), 3);
        return 3;
    } catch (const ValidationError& e) {
        write_error_record(*flags, name, e.what(), 1);
        return 1;
    } catch (const std::invalid_argument& e) {
        write_error_record(*flags, name, e.what(), 2);
        return 2;
    } catch (const std::exception& e) {
        write_error_record(*flags, name, e.what(), 1);
        return 1;
    }
}

}  // namespace hkdvb
