#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rarecell/campaign.hpp"
#include "rarecell/errors.hpp"
#include "rarecell/format.hpp"
#include "rarecell/ldp.hpp"
#include "rarecell/manifest.hpp"
#include "rarecell/pathloss.hpp"
#include "rarecell/sampler.hpp"
#include "rarecell/scenario.hpp"
#include "rarecell/sir.hpp"
#include "rarecell/version.hpp"

namespace rc = rarecell;

namespace {

std::string g_command_line;

std::string hex_u64(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out = "0x";
    for (int shift = 60; shift >= 0; shift -= 4)
        out += digits[(v >> shift) & 0xf];
    return out;
}

// Densities accept plain decimals and power expressions such as 2^-12.
double parse_density(const std::string& text) {
    const auto caret = text.find('^');
    double value = 0.0;
    if (caret == std::string::npos) {
        if (!rc::parse_double(text, value))
            throw std::invalid_argument("invalid density '" + text + "'");
    } else {
        double base = 0.0, exponent = 0.0;
        if (!rc::parse_double(text.substr(0, caret), base) ||
            !rc::parse_double(text.substr(caret + 1), exponent))
            throw std::invalid_argument("invalid density '" + text + "'");
        value = std::pow(base, exponent);
    }
    if (!std::isfinite(value))
        throw std::invalid_argument("density '" + text + "' is not finite");
    return value;
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::string::size_type start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        if (comma == std::string::npos) {
            parts.push_back(text.substr(start));
            break;
        }
        parts.push_back(text.substr(start, comma - start));
        start = comma + 1;
    }
    return parts;
}

std::vector<double> parse_density_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& part : split_commas(text)) out.push_back(parse_density(part));
    if (out.empty())
        throw std::invalid_argument("empty density list");
    return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> out;
    for (const auto& part : split_commas(text)) {
        std::int64_t v = 0;
        if (!rc::parse_int(part, v))
            throw std::invalid_argument("invalid integer '" + part + "' in list");
        out.push_back(v);
    }
    if (out.empty())
        throw std::invalid_argument("empty integer list");
    return out;
}

rc::obstacle_rect parse_obstacle(const std::string& text) {
    const auto parts = split_commas(text);
    if (parts.size() != 4)
        throw std::invalid_argument("obstacle '" + text + "' must be x0,y0,x1,y1");
    double v[4];
    for (int i = 0; i < 4; ++i) {
        if (!rc::parse_double(parts[i], v[i]))
            throw std::invalid_argument("obstacle '" + text + "' has a bad coordinate");
    }
    return rc::obstacle_rect{v[0], v[1], v[2], v[3]};
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw rc::data_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out)
        throw rc::data_error("write failed for '" + path + "'");
}

std::string quote_arg(const std::string& arg) {
    if (arg.find_first_of(" \t\"'") == std::string::npos)
        return arg;
    std::string out = "\"";
    for (char c : arg) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Flat key=value config support: entries become --key=value tokens appended
// after the command line, skipping keys already given there, so explicit
// flags always win.
std::vector<std::string> merge_config_args(std::vector<std::string> args) {
    std::string config_path;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config") {
            if (i + 1 >= args.size())
                throw std::invalid_argument("--config requires a file path");
            config_path = args[++i];
        } else if (a.rfind("--config=", 0) == 0) {
            config_path = a.substr(9);
        } else {
            out.push_back(a);
        }
    }
    if (config_path.empty())
        return out;

    std::set<std::string> given;
    for (const auto& a : out) {
        if (a.rfind("--", 0) == 0)
            given.insert(a.substr(0, a.find('=')));
    }

    std::ifstream in(config_path);
    if (!in)
        throw rc::data_error("cannot open config '" + config_path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';')
            continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw rc::parse_error("config " + config_path + " line " +
                                  std::to_string(line_no) + ": expected key=value");
        std::string key = trim(text.substr(0, eq));
        while (!key.empty() && key.front() == '-') key.erase(key.begin());
        if (key.empty())
            throw rc::parse_error("config " + config_path + " line " +
                                  std::to_string(line_no) + ": empty key");
        std::string value = trim(text.substr(eq + 1));
        if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                                  (value.front() == '\'' && value.back() == '\'')))
            value = value.substr(1, value.size() - 2);
        const std::string flag = "--" + key;
        if (given.count(flag))
            continue;
        out.push_back(flag + "=" + value);
    }
    return out;
}

void add_config_option(CLI::App* sub) {
    static std::string sink;
    sub->add_option("--config", sink,
                    "flat key=value config file; command-line flags win");
}

// ---------------------------------------------------------------------------
// scenario loading shared by every simulation command

struct scenario_inputs {
    std::string pathloss_path;
    std::string mask_path; // optional
};

struct loaded_scenario {
    rc::scenario scn;
    rc::load_warnings warnings;
    std::uint64_t pathloss_digest = 0;
    std::uint64_t mask_digest = 0;
};

loaded_scenario load_inputs(const scenario_inputs& in) {
    loaded_scenario out;
    const rc::pathloss_grid grid = rc::load_pathloss_grid_file(in.pathloss_path);
    out.pathloss_digest = rc::fnv1a64_file(in.pathloss_path);
    std::optional<rc::building_mask> mask;
    if (!in.mask_path.empty()) {
        mask = rc::load_building_mask_file(in.mask_path);
        out.mask_digest = rc::fnv1a64_file(in.mask_path);
    }
    const std::string name = std::filesystem::path(in.pathloss_path).stem().string();
    out.scn = rc::make_scenario(name, grid, mask, &out.warnings);
    if (out.warnings.positive_db_tiles > 0) {
        std::cerr << "warning: " << out.warnings.positive_db_tiles
                  << " tiles have positive dB loss (gain); treated as given\n";
    }
    return out;
}

void add_scenario_flags(CLI::App* sub, scenario_inputs& in) {
    sub->add_option("--scenario", in.pathloss_path, "path-loss grid (.asc)")->required();
    sub->add_option("--mask", in.mask_path, "building mask grid (.asc), 1 = blocked");
}

void stamp_common(rc::run_manifest& man, std::uint64_t seed, int threads) {
    man.set("command", g_command_line);
    man.set("version", rc::version_string);
    man.set_uint("seed", seed);
    man.set_int("threads", threads);
}

void stamp_inputs(rc::run_manifest& man, const scenario_inputs& in,
                  const loaded_scenario& loaded) {
    man.set("input.pathloss", in.pathloss_path);
    man.set("input.pathloss.digest", hex_u64(loaded.pathloss_digest));
    if (!in.mask_path.empty()) {
        man.set("input.mask", in.mask_path);
        man.set("input.mask.digest", hex_u64(loaded.mask_digest));
    }
}

void finish_manifest(rc::run_manifest& man, const std::string& started,
                     const std::string& path) {
    man.set("started_utc", started);
    man.set("finished_utc", rc::utc_timestamp());
    man.write_file(path);
    std::cout << "wrote " << path << "\n";
}

void print_scenario_summary(const rc::scenario& scn) {
    const auto& g = scn.geom;
    const std::int64_t free = scn.free_tiles();
    std::cout << "scenario: " << scn.name << "\n"
              << "window: " << g.n_cols << " x " << g.n_rows << " tiles, "
              << rc::format_double(g.width()) << " x " << rc::format_double(g.height())
              << " m\n"
              << "tile: " << rc::format_double(g.dx) << " x " << rc::format_double(g.dy)
              << " m\n"
              << "free tiles: " << free << " of " << g.tiles() << " (blocked "
              << (g.tiles() - free) << ")\n"
              << "total mass: " << rc::format_double(scn.intensity.total_mass) << " m^2\n";
    const double tau = rc::calibrated_tau(scn.intensity);
    std::cout << "calibrated tau: " << rc::format_double(tau) << " linear ("
              << rc::format_double(rc::linear_to_db(tau)) << " dB)\n";
}

// ---------------------------------------------------------------------------
// scenario gen / info

struct gen_opts {
    int cols = 64;
    int rows = 64;
    double cell = 1.0;
    double alpha = 2.0;
    std::vector<std::string> obstacles;
    std::string name = "synthetic";
    std::string out;
};

void cmd_scenario_gen(const gen_opts& o) {
    const std::string started = rc::utc_timestamp();
    std::vector<rc::obstacle_rect> rects;
    for (const auto& text : o.obstacles) rects.push_back(parse_obstacle(text));

    const rc::scenario scn =
        rc::generate_synthetic(o.cols, o.rows, o.cell, o.cell, o.alpha, rects, o.name);

    const std::string pathloss_path = o.out + "_pathloss.asc";
    const std::string mask_path = o.out + "_mask.asc";
    rc::write_ascii_grid_file(pathloss_path, rc::pathloss_as_grid(scn));
    rc::write_ascii_grid_file(mask_path, rc::mask_as_grid(scn));
    std::cout << "wrote " << pathloss_path << "\n";
    std::cout << "wrote " << mask_path << "\n";
    print_scenario_summary(scn);

    rc::run_manifest man;
    stamp_common(man, 0, 0);
    man.set_int("cols", o.cols);
    man.set_int("rows", o.rows);
    man.set("cell", o.cell);
    man.set("alpha", o.alpha);
    std::string obstacles_text;
    for (std::size_t i = 0; i < o.obstacles.size(); ++i) {
        if (i) obstacles_text += ';';
        obstacles_text += o.obstacles[i];
    }
    man.set("obstacles", obstacles_text);
    man.set("output.pathloss", pathloss_path);
    man.set("output.pathloss.digest", hex_u64(rc::fnv1a64_file(pathloss_path)));
    man.set("output.mask", mask_path);
    man.set("output.mask.digest", hex_u64(rc::fnv1a64_file(mask_path)));
    man.set("derived.total_mass", scn.intensity.total_mass);
    man.set("derived.tau_linear", rc::calibrated_tau(scn.intensity));
    finish_manifest(man, started, o.out + ".manifest");
}

void cmd_scenario_info(const scenario_inputs& in) {
    const loaded_scenario loaded = load_inputs(in);
    print_scenario_summary(loaded.scn);
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (double v : loaded.scn.loss_db) {
        if (std::isnan(v)) continue;
        if (!any) {
            lo = hi = v;
            any = true;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (any)
        std::cout << "loss range: [" << rc::format_double(lo) << ", "
                  << rc::format_double(hi) << "] dB\n";
    std::cout << "pathloss digest: " << hex_u64(loaded.pathloss_digest) << "\n";
    if (!in.mask_path.empty())
        std::cout << "mask digest: " << hex_u64(loaded.mask_digest) << "\n";
}

// ---------------------------------------------------------------------------
// simulate

struct simulate_opts {
    scenario_inputs in;
    std::string lambda_text;
    double tau_db = 0.0;
    double eps = 0.0;
    std::int64_t n_mean = 10000;
    std::int64_t n_tail = 0;
    bool auto_n = false;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;
};

std::int64_t resolve_n_tail(bool auto_n, std::int64_t n_tail, double lambda,
                            const char* cmd) {
    if (auto_n)
        return rc::run_count_heuristic(lambda);
    if (n_tail < 1)
        throw std::invalid_argument(std::string(cmd) + ": provide --n-tail or --auto-n");
    return n_tail;
}

void append_csv_row(const std::string& path, const std::string& header,
                    const std::string& row) {
    namespace fs = std::filesystem;
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        throw rc::data_error("cannot open '" + path + "' for writing");
    if (fresh)
        out << header << "\n";
    out << row << "\n";
    if (!out)
        throw rc::data_error("write failed for '" + path + "'");
}

void print_tail(const rc::tail_estimate& tail) {
    std::cout << "tail phase: n = " << tail.n << ", hits = " << tail.hits
              << ", p_hat = " << rc::format_double(tail.p_hat) << " (se "
              << rc::format_double(tail.std_err) << ")\n";
    if (!tail.observed)
        std::cout << "tail not observed at this replicate count\n";
    if (tail.hits < 30)
        std::cout << "95% wilson interval: [" << rc::format_double(tail.wilson_low)
                  << ", " << rc::format_double(tail.wilson_high) << "]\n";
}

void cmd_simulate(const simulate_opts& o) {
    const std::string started = rc::utc_timestamp();
    const double lambda = parse_density(o.lambda_text);
    const loaded_scenario loaded = load_inputs(o.in);

    rc::campaign_config cfg;
    cfg.lambda = lambda;
    cfg.tau_db = o.tau_db;
    cfg.eps = o.eps;
    cfg.n_mean = o.n_mean;
    cfg.n_tail = resolve_n_tail(o.auto_n, o.n_tail, lambda, "simulate");
    cfg.master_seed = o.seed;
    cfg.threads = o.threads;

    const rc::threshold_spec thr = rc::threshold_lambda(o.tau_db, lambda);
    std::cout << "scenario: " << loaded.scn.name << " (" << loaded.scn.geom.n_cols << " x "
              << loaded.scn.geom.n_rows << " tiles, free " << loaded.scn.free_tiles()
              << ")\n"
              << "lambda = " << rc::format_double(lambda) << ", tau = "
              << rc::format_double(o.tau_db) << " dB, tau_lambda = "
              << rc::format_double(thr.tau_lambda_db) << " dB\n";

    const rc::campaign_result res = rc::run_campaign(loaded.scn, cfg);
    std::cout << "mean phase: n = " << res.mean.n << ", mean L = "
              << rc::format_double(res.mean.mean) << " (se "
              << rc::format_double(res.mean.std_err) << ")\n"
              << "threshold b = " << rc::format_double(res.b) << " (eps = "
              << rc::format_double(o.eps) << ")\n";
    print_tail(res.tail);

    const std::string header = "lambda,tau_db,eps,b,n,hits,p_hat,std_err";
    const std::string row = rc::format_double(lambda) + "," + rc::format_double(o.tau_db) +
                            "," + rc::format_double(o.eps) + "," + rc::format_double(res.b) +
                            "," + rc::format_int(res.tail.n) + "," +
                            rc::format_int(res.tail.hits) + "," +
                            rc::format_double(res.tail.p_hat) + "," +
                            rc::format_double(res.tail.std_err);
    append_csv_row(o.out, header, row);
    std::cout << "appended " << o.out << "\n";

    rc::run_manifest man;
    stamp_common(man, o.seed, o.threads);
    stamp_inputs(man, o.in, loaded);
    man.set("lambda", lambda);
    man.set("tau_db", o.tau_db);
    man.set("tau_lambda_db", thr.tau_lambda_db);
    man.set("eps", o.eps);
    man.set_int("n_mean", cfg.n_mean);
    man.set_int("n_tail", cfg.n_tail);
    man.set("derived.mean", res.mean.mean);
    man.set("derived.mean_std_err", res.mean.std_err);
    man.set("derived.b", res.b);
    man.set_int("derived.hits", res.tail.hits);
    man.set("derived.p_hat", res.tail.p_hat);
    man.set("derived.std_err", res.tail.std_err);
    man.set("derived.wilson_low", res.tail.wilson_low);
    man.set("derived.wilson_high", res.tail.wilson_high);
    man.set("output.csv", o.out);
    man.set("output.csv.digest", hex_u64(rc::fnv1a64_file(o.out)));
    finish_manifest(man, started, o.out + ".manifest");
}

// ---------------------------------------------------------------------------
// sweep

struct sweep_opts {
    scenario_inputs in;
    std::string lambdas_text;
    double tau_db = 0.0;
    double eps = 0.0;
    std::int64_t n_mean = 10000;
    std::int64_t n_tail = 0;
    bool auto_n = false;
    bool weighted = false;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;
};

void cmd_sweep(const sweep_opts& o) {
    const std::string started = rc::utc_timestamp();
    const std::vector<double> lambdas = parse_density_list(o.lambdas_text);
    const loaded_scenario loaded = load_inputs(o.in);

    std::vector<rc::sweep_point> points;
    points.reserve(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        rc::campaign_config cfg;
        cfg.lambda = lambdas[i];
        cfg.tau_db = o.tau_db;
        cfg.eps = o.eps;
        cfg.n_mean = o.n_mean;
        cfg.n_tail = resolve_n_tail(o.auto_n, o.n_tail, lambdas[i], "sweep");
        cfg.master_seed = o.seed + i; // one independent campaign per density
        cfg.threads = o.threads;
        const rc::campaign_result res = rc::run_campaign(loaded.scn, cfg);
        points.push_back(
            rc::sweep_point{lambdas[i], res.tail.p_hat, res.tail.std_err, res.tail.n});
        std::cout << "lambda = " << rc::format_double(lambdas[i]) << ": n = " << res.tail.n
                  << ", hits = " << res.tail.hits << ", p_hat = "
                  << rc::format_double(res.tail.p_hat) << " (se "
                  << rc::format_double(res.tail.std_err) << ")\n";
    }

    rc::rate_fit fit;
    int excluded = 0;
    bool fitted_ok = true;
    std::string fit_failure;
    try {
        fit = rc::fit_rate_linear(points, o.weighted, &excluded);
    } catch (const rc::numerical_error& e) {
        fitted_ok = false;
        fit_failure = e.what();
    }

    const auto fitted_log = [&](double x) { return fit.p1 * x + fit.p2; };
    const double nan = std::nan("");

    std::string points_csv = "lambda,p_hat,std_err,log_p,fitted\n";
    for (const auto& pt : points) {
        const double log_p = pt.p_hat > 0.0 ? std::log(pt.p_hat) : nan;
        const double fitted = fitted_ok ? fitted_log(pt.x) : nan;
        points_csv += rc::format_double(pt.x) + "," + rc::format_double(pt.p_hat) + "," +
                      rc::format_double(pt.std_err) + "," + rc::format_double(log_p) + "," +
                      rc::format_double(fitted) + "\n";
    }
    const std::string points_path = o.out + "_points.csv";
    write_text_file(points_path, points_csv);
    std::cout << "wrote " << points_path << "\n";

    std::string fit_path;
    if (fitted_ok) {
        std::string fit_csv = "lambda,log_p,fitted,residual\n";
        for (const auto& pt : points) {
            if (!(pt.p_hat > 0.0)) continue;
            const double log_p = std::log(pt.p_hat);
            const double fv = fitted_log(pt.x);
            fit_csv += rc::format_double(pt.x) + "," + rc::format_double(log_p) + "," +
                       rc::format_double(fv) + "," + rc::format_double(log_p - fv) + "\n";
        }
        fit_path = o.out + "_fit.csv";
        write_text_file(fit_path, fit_csv);
        std::cout << "wrote " << fit_path << "\n";
        std::cout << "fit: log p = p1 * lambda + p2, p1 = " << rc::format_double(fit.p1)
                  << ", p2 = " << rc::format_double(fit.p2) << "\n"
                  << "rate estimate: " << rc::format_double(fit.rate_estimate)
                  << " (residual norm " << rc::format_double(fit.residual_norm)
                  << ", points used " << fit.points_used << ", excluded " << excluded
                  << ")\n";
    }

    rc::run_manifest man;
    stamp_common(man, o.seed, o.threads);
    stamp_inputs(man, o.in, loaded);
    man.set("lambdas", o.lambdas_text);
    man.set("point_seed_rule", "seed + point_index");
    man.set("tau_db", o.tau_db);
    man.set("eps", o.eps);
    man.set_int("n_mean", o.n_mean);
    man.set("n_tail", o.auto_n ? std::string("auto") : rc::format_int(o.n_tail));
    man.set("weighted_fit", o.weighted ? "true" : "false");
    man.set("output.points", points_path);
    man.set("output.points.digest", hex_u64(rc::fnv1a64_file(points_path)));
    if (fitted_ok) {
        man.set("output.fit", fit_path);
        man.set("output.fit.digest", hex_u64(rc::fnv1a64_file(fit_path)));
        man.set("fit.p1", fit.p1);
        man.set("fit.p2", fit.p2);
        man.set("fit.rate_estimate", fit.rate_estimate);
        man.set("fit.residual_norm", fit.residual_norm);
        man.set_int("fit.points_used", fit.points_used);
        man.set_int("fit.excluded", excluded);
    } else {
        man.set("fit.status", "skipped");
        man.set("fit.reason", fit_failure);
    }
    finish_manifest(man, started, o.out + ".manifest");

    if (!fitted_ok)
        throw rc::numerical_error("sweep: fit skipped: " + fit_failure);
}

// ---------------------------------------------------------------------------
// heatmap

struct heatmap_opts {
    scenario_inputs in;
    std::string lambda_text;
    double tau_db = 0.0;
    double eps = 0.0;
    std::int64_t n_mean = 10000;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;
};

void cmd_heatmap(const heatmap_opts& o) {
    const std::string started = rc::utc_timestamp();
    const double lambda = parse_density(o.lambda_text);
    const loaded_scenario loaded = load_inputs(o.in);

    rc::campaign_config cfg;
    cfg.lambda = lambda;
    cfg.tau_db = o.tau_db;
    cfg.eps = o.eps;
    cfg.n_mean = o.n_mean;
    cfg.n_tail = o.n;
    cfg.master_seed = o.seed;
    cfg.threads = o.threads;

    rc::campaign_request req;
    req.want_heatmap = true;
    const rc::campaign_result res = rc::run_campaign(loaded.scn, cfg, req);
    const rc::heatmap_accumulator& heat = *res.heatmap;

    std::cout << "mean phase: n = " << res.mean.n << ", mean L = "
              << rc::format_double(res.mean.mean) << "\n"
              << "threshold b = " << rc::format_double(res.b) << "\n"
              << "atypical replicates: " << heat.n_atypical << " of " << o.n << "\n";

    rc::run_manifest man;
    stamp_common(man, o.seed, o.threads);
    stamp_inputs(man, o.in, loaded);
    man.set("lambda", lambda);
    man.set("tau_db", o.tau_db);
    man.set("eps", o.eps);
    man.set_int("n_mean", o.n_mean);
    man.set_int("n", o.n);
    man.set("derived.mean", res.mean.mean);
    man.set("derived.b", res.b);
    man.set_int("derived.n_atypical", heat.n_atypical);

    if (heat.empty()) {
        man.set("output.status", "no grids: zero atypical replicates");
        finish_manifest(man, started, o.out + ".manifest");
        throw rc::numerical_error(
            "heatmap: no atypical replicates observed; increase --n or decrease --eps");
    }

    const double unconditional = lambda * loaded.scn.intensity.total_mass;
    const double conditional =
        static_cast<double>(heat.sum_users_atypical) / static_cast<double>(heat.n_atypical);
    std::cout << "mean users | atypical: " << rc::format_double(conditional)
              << " (unconditional " << rc::format_double(unconditional) << ")\n";

    const std::vector<double> mean = heat.mean_counts();
    const std::vector<double> ratio = heat.ratio(loaded.scn, lambda);
    rc::ascii_grid mean_grid{loaded.scn.geom, mean, loaded.scn.nodata};
    rc::ascii_grid ratio_grid{loaded.scn.geom, ratio, loaded.scn.nodata};
    for (std::int64_t t = 0; t < loaded.scn.geom.tiles(); ++t) {
        if (loaded.scn.mask.blocked[t])
            mean_grid.values[t] = std::nan("");
    }
    const std::string mean_path = o.out + "_mean.asc";
    const std::string ratio_path = o.out + "_ratio.asc";
    rc::write_ascii_grid_file(mean_path, mean_grid);
    rc::write_ascii_grid_file(ratio_path, ratio_grid);
    std::cout << "wrote " << mean_path << "\n";
    std::cout << "wrote " << ratio_path << "\n";

    man.set("derived.mean_users_atypical", conditional);
    man.set("derived.mean_users_unconditional", unconditional);
    man.set("output.mean", mean_path);
    man.set("output.mean.digest", hex_u64(rc::fnv1a64_file(mean_path)));
    man.set("output.ratio", ratio_path);
    man.set("output.ratio.digest", hex_u64(rc::fnv1a64_file(ratio_path)));
    finish_manifest(man, started, o.out + ".manifest");
}

// ---------------------------------------------------------------------------
// extremes

struct extremes_opts {
    scenario_inputs in;
    std::string lambda_text;
    double tau_db = 0.0;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;
};

std::string points_csv_for(const rc::scenario& scn, double lambda, std::uint64_t seed,
                           const rc::extreme_sample& ex) {
    const rc::user_sample sample =
        rc::sample_counts(scn, lambda, rc::seed_spec{seed, ex.replicate_index});
    const auto pts = rc::jitter_points(scn, sample, rc::seed_spec{seed, ex.replicate_index});
    std::string csv = "x,y\n";
    for (const auto& p : pts)
        csv += rc::format_double(p.x) + "," + rc::format_double(p.y) + "\n";
    return csv;
}

void print_extreme(const char* label, const rc::extreme_sample& ex) {
    std::cout << label << ": fraction = " << rc::format_double(ex.connected_fraction)
              << ", replicate = " << ex.replicate_index << ", users = " << ex.total_users
              << ", disconnected = " << ex.disconnected_users
              << ", digest = " << hex_u64(ex.digest) << "\n";
}

void stamp_extreme(rc::run_manifest& man, const std::string& prefix,
                   const rc::extreme_sample& ex) {
    man.set(prefix + ".fraction", ex.connected_fraction);
    man.set_uint(prefix + ".replicate", ex.replicate_index);
    man.set_int(prefix + ".users", ex.total_users);
    man.set_int(prefix + ".disconnected", ex.disconnected_users);
    man.set(prefix + ".digest", hex_u64(ex.digest));
}

void cmd_extremes(const extremes_opts& o) {
    const std::string started = rc::utc_timestamp();
    const double lambda = parse_density(o.lambda_text);
    const loaded_scenario loaded = load_inputs(o.in);

    rc::campaign_config cfg;
    cfg.lambda = lambda;
    cfg.tau_db = o.tau_db;
    cfg.eps = 1.0; // unused by the extremes scan
    cfg.n_mean = 0;
    cfg.n_tail = o.n;
    cfg.master_seed = o.seed;
    cfg.threads = o.threads;

    const rc::extreme_record rec = rc::track_extremes(loaded.scn, cfg);
    print_extreme("least connected", rec.least);
    print_extreme("most connected", rec.most);
    const double spread = rec.most.connected_fraction - rec.least.connected_fraction;
    std::cout << "spread: " << rc::format_double(spread) << "\n";

    const std::string least_path = o.out + "_least.csv";
    const std::string most_path = o.out + "_most.csv";
    write_text_file(least_path, points_csv_for(loaded.scn, lambda, o.seed, rec.least));
    write_text_file(most_path, points_csv_for(loaded.scn, lambda, o.seed, rec.most));
    std::cout << "wrote " << least_path << "\n";
    std::cout << "wrote " << most_path << "\n";

    rc::run_manifest man;
    stamp_common(man, o.seed, o.threads);
    stamp_inputs(man, o.in, loaded);
    man.set("lambda", lambda);
    man.set("tau_db", o.tau_db);
    man.set_int("n", o.n);
    stamp_extreme(man, "least", rec.least);
    stamp_extreme(man, "most", rec.most);
    man.set("derived.spread", spread);
    man.set("output.least", least_path);
    man.set("output.least.digest", hex_u64(rc::fnv1a64_file(least_path)));
    man.set("output.most", most_path);
    man.set("output.most.digest", hex_u64(rc::fnv1a64_file(most_path)));
    finish_manifest(man, started, o.out + ".manifest");
}

// ---------------------------------------------------------------------------
// oracle

struct oracle_opts {
    std::string dist = "exp";
    double m = 1.0;
    double sigma = 1.0;
    double s = 0.0;
    std::string n_list_text;
    std::string reps_text;
    std::uint64_t seed = 0;
    int threads = 0;
    bool weighted = false;
    std::string out;
};

void cmd_oracle(const oracle_opts& o) {
    const std::string started = rc::utc_timestamp();
    const std::vector<std::int64_t> n_list = parse_int_list(o.n_list_text);
    std::vector<std::int64_t> reps = parse_int_list(o.reps_text);
    if (reps.size() == 1)
        reps.assign(n_list.size(), reps[0]);
    if (reps.size() != n_list.size())
        throw std::invalid_argument("oracle: --reps must be one value or match --n-list");

    rc::dist_spec dist;
    dist.kind = o.dist == "gauss" ? rc::dist_spec::family::gaussian
                                  : rc::dist_spec::family::exponential;
    dist.m = o.m;
    dist.sigma = o.sigma;

    const double analytic = dist.kind == rc::dist_spec::family::gaussian
                                ? rc::gaussian_rate(o.s, o.m, o.sigma)
                                : rc::exponential_rate(o.s, o.m);

    std::vector<rc::sweep_point> points;
    std::vector<std::int64_t> hit_list;
    points.reserve(n_list.size());
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const rc::iid_tail_estimate est =
            rc::iid_mean_tail(dist, n_list[i], o.s, reps[i], o.seed + i, o.threads);
        points.push_back(rc::sweep_point{static_cast<double>(n_list[i]), est.p_hat,
                                         est.std_err, est.reps});
        hit_list.push_back(est.hits);
        std::cout << "n = " << n_list[i] << ": reps = " << est.reps << ", hits = "
                  << est.hits << ", p_hat = " << rc::format_double(est.p_hat) << " (se "
                  << rc::format_double(est.std_err) << ")\n";
    }

    rc::rate_fit fit;
    int excluded = 0;
    bool fitted_ok = true;
    std::string fit_failure;
    try {
        fit = rc::fit_rate_linear(points, o.weighted, &excluded);
    } catch (const rc::numerical_error& e) {
        fitted_ok = false;
        fit_failure = e.what();
    }
    const double nan = std::nan("");

    if (!o.out.empty()) {
        std::string csv = "n,reps,hits,p_hat,std_err,log_p,fitted\n";
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& pt = points[i];
            const double log_p = pt.p_hat > 0.0 ? std::log(pt.p_hat) : nan;
            const double fitted = fitted_ok ? fit.p1 * pt.x + fit.p2 : nan;
            csv += rc::format_int(n_list[i]) + "," + rc::format_int(pt.n) + "," +
                   rc::format_int(hit_list[i]) + "," + rc::format_double(pt.p_hat) + "," +
                   rc::format_double(pt.std_err) + "," + rc::format_double(log_p) + "," +
                   rc::format_double(fitted) + "\n";
        }
        write_text_file(o.out, csv);
        std::cout << "wrote " << o.out << "\n";
    }

    std::cout << "analytic rate: " << rc::format_double(analytic) << "\n";
    if (fitted_ok) {
        std::cout << "estimated rate: " << rc::format_double(fit.rate_estimate)
                  << " (points used " << fit.points_used << ", excluded " << excluded
                  << ")\n";
        const double abs_err = std::abs(fit.rate_estimate - analytic);
        std::cout << "absolute error: " << rc::format_double(abs_err) << "\n";
        if (analytic > 0.0)
            std::cout << "relative error: " << rc::format_double(abs_err / analytic * 100.0)
                      << "%\n";
    }

    if (!o.out.empty()) {
        rc::run_manifest man;
        stamp_common(man, o.seed, o.threads);
        man.set("dist", o.dist);
        man.set("m", o.m);
        man.set("sigma", o.sigma);
        man.set("s", o.s);
        man.set("n_list", o.n_list_text);
        man.set("reps", o.reps_text);
        man.set("point_seed_rule", "seed + point_index");
        man.set("analytic_rate", analytic);
        if (fitted_ok) {
            man.set("fit.rate_estimate", fit.rate_estimate);
            man.set("fit.p1", fit.p1);
            man.set("fit.p2", fit.p2);
            man.set("fit.residual_norm", fit.residual_norm);
            man.set_int("fit.points_used", fit.points_used);
            man.set_int("fit.excluded", excluded);
        } else {
            man.set("fit.status", "skipped");
            man.set("fit.reason", fit_failure);
        }
        man.set("output.csv", o.out);
        man.set("output.csv.digest", hex_u64(rc::fnv1a64_file(o.out)));
        finish_manifest(man, started, o.out + ".manifest");
    }

    if (!fitted_ok)
        throw rc::numerical_error("oracle: fit skipped: " + fit_failure);
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 0; i < argc; ++i) {
        if (i) g_command_line += ' ';
        g_command_line += quote_arg(argv[i]);
    }

    CLI::App app{"rare-event Monte Carlo for uplink SIR connectivity on tiled maps"};
    app.set_version_flag("--version", rc::version_string);
    app.require_subcommand(1);

    // scenario gen / info
    auto* scenario_cmd = app.add_subcommand("scenario", "generate or inspect scenarios");
    scenario_cmd->require_subcommand(1);

    gen_opts gen;
    auto* gen_cmd = scenario_cmd->add_subcommand("gen", "write a synthetic scenario");
    add_config_option(gen_cmd);
    gen_cmd->add_option("--cols", gen.cols, "tile columns")->required();
    gen_cmd->add_option("--rows", gen.rows, "tile rows")->required();
    gen_cmd->add_option("--cell", gen.cell, "tile edge length in m")->capture_default_str();
    gen_cmd->add_option("--alpha", gen.alpha, "path-loss exponent")->required();
    gen_cmd->add_option("--obstacle", gen.obstacles,
                        "blocked rectangle x0,y0,x1,y1 (repeatable)");
    gen_cmd->add_option("--name", gen.name, "scenario name")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "output prefix")->required();
    gen_cmd->callback([&] { cmd_scenario_gen(gen); });

    scenario_inputs info_in;
    auto* info_cmd = scenario_cmd->add_subcommand("info", "summarize a scenario");
    add_config_option(info_cmd);
    add_scenario_flags(info_cmd, info_in);
    info_cmd->callback([&] { cmd_scenario_info(info_in); });

    // simulate
    simulate_opts sim;
    auto* sim_cmd = app.add_subcommand("simulate", "estimate one rare-event probability");
    add_config_option(sim_cmd);
    add_scenario_flags(sim_cmd, sim.in);
    sim_cmd->add_option("--lambda", sim.lambda_text, "user density (accepts 2^-12)")
        ->required();
    sim_cmd->add_option("--tau-db", sim.tau_db, "density-free threshold in dB")->required();
    sim_cmd->add_option("--eps", sim.eps, "relative deviation defining b")->required();
    sim_cmd->add_option("--n-mean", sim.n_mean, "mean-phase replicates")
        ->capture_default_str();
    auto* sim_ntail = sim_cmd->add_option("--n-tail", sim.n_tail, "tail-phase replicates");
    auto* sim_auto = sim_cmd->add_flag("--auto-n", sim.auto_n,
                                       "choose tail replicates from the density");
    sim_ntail->excludes(sim_auto);
    sim_auto->excludes(sim_ntail);
    sim_cmd->add_option("--seed", sim.seed, "master seed")->capture_default_str();
    sim_cmd->add_option("--threads", sim.threads, "worker threads (0 = all)")
        ->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "results CSV, row appended")->required();
    sim_cmd->callback([&] { cmd_simulate(sim); });

    // sweep
    sweep_opts sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "density sweep with a rate fit");
    add_config_option(sweep_cmd);
    add_scenario_flags(sweep_cmd, sweep.in);
    sweep_cmd->add_option("--lambdas", sweep.lambdas_text, "comma list of densities")
        ->required();
    sweep_cmd->add_option("--tau-db", sweep.tau_db, "density-free threshold in dB")
        ->required();
    sweep_cmd->add_option("--eps", sweep.eps, "relative deviation defining b")->required();
    sweep_cmd->add_option("--n-mean", sweep.n_mean, "mean-phase replicates")
        ->capture_default_str();
    auto* sweep_ntail =
        sweep_cmd->add_option("--n-tail", sweep.n_tail, "tail-phase replicates per density");
    auto* sweep_auto = sweep_cmd->add_flag("--auto-n", sweep.auto_n,
                                           "choose tail replicates from each density");
    sweep_ntail->excludes(sweep_auto);
    sweep_auto->excludes(sweep_ntail);
    sweep_cmd->add_flag("--weighted-fit", sweep.weighted, "variance-weighted least squares");
    sweep_cmd->add_option("--seed", sweep.seed, "master seed")->capture_default_str();
    sweep_cmd->add_option("--threads", sweep.threads, "worker threads (0 = all)")
        ->capture_default_str();
    sweep_cmd->add_option("--out", sweep.out, "output prefix")->required();
    sweep_cmd->callback([&] { cmd_sweep(sweep); });

    // heatmap
    heatmap_opts heat;
    auto* heat_cmd =
        app.add_subcommand("heatmap", "conditional user heat map over atypical replicates");
    add_config_option(heat_cmd);
    add_scenario_flags(heat_cmd, heat.in);
    heat_cmd->add_option("--lambda", heat.lambda_text, "user density (accepts 2^-12)")
        ->required();
    heat_cmd->add_option("--tau-db", heat.tau_db, "density-free threshold in dB")
        ->required();
    heat_cmd->add_option("--eps", heat.eps, "relative deviation defining b")->required();
    heat_cmd->add_option("--n-mean", heat.n_mean, "mean-phase replicates")
        ->capture_default_str();
    heat_cmd->add_option("--n", heat.n, "tail-phase replicates")->required();
    heat_cmd->add_option("--seed", heat.seed, "master seed")->capture_default_str();
    heat_cmd->add_option("--threads", heat.threads, "worker threads (0 = all)")
        ->capture_default_str();
    heat_cmd->add_option("--out", heat.out, "output prefix")->required();
    heat_cmd->callback([&] { cmd_heatmap(heat); });

    // extremes
    extremes_opts ext;
    auto* ext_cmd =
        app.add_subcommand("extremes", "least and most connected replicates of a batch");
    add_config_option(ext_cmd);
    add_scenario_flags(ext_cmd, ext.in);
    ext_cmd->add_option("--lambda", ext.lambda_text, "user density (accepts 2^-12)")
        ->required();
    ext_cmd->add_option("--tau-db", ext.tau_db, "density-free threshold in dB")->required();
    ext_cmd->add_option("--n", ext.n, "replicates to scan")->required();
    ext_cmd->add_option("--seed", ext.seed, "master seed")->capture_default_str();
    ext_cmd->add_option("--threads", ext.threads, "worker threads (0 = all)")
        ->capture_default_str();
    ext_cmd->add_option("--out", ext.out, "output prefix")->required();
    ext_cmd->callback([&] { cmd_extremes(ext); });

    // oracle
    oracle_opts oracle;
    auto* oracle_cmd =
        app.add_subcommand("oracle", "iid mean tail estimates against closed-form rates");
    add_config_option(oracle_cmd);
    oracle_cmd->add_option("--dist", oracle.dist, "exp or gauss")
        ->required()
        ->check(CLI::IsMember({"exp", "gauss"}));
    oracle_cmd->add_option("--m", oracle.m, "mean of one draw")->capture_default_str();
    oracle_cmd->add_option("--sigma", oracle.sigma, "gaussian standard deviation")
        ->capture_default_str();
    oracle_cmd->add_option("--s", oracle.s, "tail level for the sample mean")->required();
    oracle_cmd->add_option("--n-list", oracle.n_list_text, "comma list of sample sizes")
        ->required();
    oracle_cmd->add_option("--reps", oracle.reps_text,
                           "replicates per point: one value or a matching comma list")
        ->required();
    oracle_cmd->add_option("--seed", oracle.seed, "master seed")->capture_default_str();
    oracle_cmd->add_option("--threads", oracle.threads, "worker threads (0 = all)")
        ->capture_default_str();
    oracle_cmd->add_flag("--weighted-fit", oracle.weighted,
                         "variance-weighted least squares");
    oracle_cmd->add_option("--out", oracle.out, "points CSV (optional)");
    oracle_cmd->callback([&] { cmd_oracle(oracle); });

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config_args(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const rc::data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const rc::numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
