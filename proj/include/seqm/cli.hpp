#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seqm/io.hpp"
#include "seqm/sampler.hpp"
#include "seqm/simulator.hpp"
#include "seqm/summary.hpp"

namespace seqm::cli {

namespace fs = std::filesystem;
using io::InputError;

enum ExitCode : int
{
    kOk = 0,
    kInputError = 2,
    kRuntimeFailure = 3,
};

// Simulated events are written relative to this instant.
inline const io::UtcTime kSimulationEpoch = *io::parse_utc("2020-01-01T00:00:00Z");

// ---------------------------------------------------------------------------
// Run configuration: a flat key = value file, overridden by command-line flags

struct RunConfig
{
    sampler::SamplerConfig sampler;
    model::WaveConstants constants;
    double epicentre_sd_deg{1.0};
    double depth_lower_km{5.0};
    double depth_upper_km{100.0};
    double origin_rate{1.0 / 20.0};
    double level{0.95};
    std::optional<io::UtcTime> epoch;
    fs::path out{"."};

    // simulate / study
    std::size_t n{100};
    double sigma2_ns{1.0};
    double sigma2_ew{1.0};
    std::size_t runs{1};
    bool grid{false};
    std::vector<std::size_t> n_values{25, 50, 100};
    std::vector<double> sigma2_values{1.0, 0.25, 0.05};
    std::size_t threads{0};

    [[nodiscard]] model::PriorConfig prior(const geo::GeoPoint &centre) const
    {
        auto p = model::PriorConfig::centred_on(centre);
        p.epicentre_sd_deg = epicentre_sd_deg;
        p.depth_lower_km = depth_lower_km;
        p.depth_upper_km = depth_upper_km;
        p.origin_rate = origin_rate;
        return p;
    }

    [[nodiscard]] std::vector<simulator::ScenarioConfig> scenarios() const
    {
        std::vector<simulator::ScenarioConfig> out;
        if (grid)
        {
            for (auto n_phones : n_values)
            {
                for (double s2 : sigma2_values) { out.push_back({n_phones, s2, s2, runs, 0}); }
            }
        }
        else
        {
            out.push_back({n, sigma2_ns, sigma2_ew, runs, 0});
        }
        for (std::size_t i = 0; i < out.size(); ++i) { out[i].seed = sampler.seed + i; }
        return out;
    }

    /// Throws InputError on any inconsistent setting.
    void validate() const
    {
        try
        {
            sampler.validate();
            constants.validate();
            prior(geo::GeoPoint{}).validate();
            if (!(level > 0.0 && level < 1.0)) { throw std::invalid_argument("gamma must be in (0, 1)"); }
            if (runs < 1) { throw std::invalid_argument("runs must be >= 1"); }
            for (const auto &sc : scenarios()) { sc.validate(); }
        }
        catch (const std::invalid_argument &e)
        {
            throw InputError(std::string("invalid configuration: ") + e.what());
        }
    }
};

inline const std::set<std::string> kConfigKeys{
    "iterations", "burn_in", "temperatures", "seed", "adapt_exponent", "target_swap", "target_acceptance",
    "initial_rho", "initial_log_scale", "v_p", "v_s", "window_s", "epicentre_sd_deg", "depth_lower_km",
    "depth_upper_km", "origin_rate", "gamma", "epoch_utc", "out", "n", "sigma2", "sigma2_ns", "sigma2_ew",
    "runs", "grid", "n_values", "sigma2_values", "threads",
};

namespace detail {

template <typename T>
T parse_value(const io::KeyValues &kv, const std::string &key, const fs::path &file)
{
    const auto &raw = kv.at(key);
    std::optional<T> v;
    if constexpr (std::is_floating_point_v<T>)
    {
        v = io::parse_double(raw);
        if (v && !std::isfinite(*v)) { v.reset(); }
    }
    else
    {
        v = io::parse_int<T>(raw);
    }
    if (!v) { throw InputError(file.string() + ": invalid value for '" + key + "': '" + raw + "'"); }
    return *v;
}

template <typename T>
std::vector<T> parse_list(const io::KeyValues &kv, const std::string &key, const fs::path &file)
{
    std::vector<T> out;
    for (const auto &item : io::split(kv.at(key), ','))
    {
        io::KeyValues single{{key, item}};
        out.push_back(parse_value<T>(single, key, file));
    }
    return out;
}

} // namespace detail

[[nodiscard]] inline RunConfig load_config(const fs::path &file)
{
    if (!fs::exists(file)) { throw InputError(file.string() + ": file not found"); }
    const auto kv = io::read_key_values(file, kConfigKeys);
    RunConfig cfg;
    const auto has = [&](const char *k) { return kv.contains(k); };
    using detail::parse_value;

    if (has("iterations")) { cfg.sampler.iterations = parse_value<std::size_t>(kv, "iterations", file); }
    if (has("burn_in")) { cfg.sampler.burn_in = parse_value<std::size_t>(kv, "burn_in", file); }
    if (has("temperatures")) { cfg.sampler.temperatures = parse_value<std::size_t>(kv, "temperatures", file); }
    if (has("seed")) { cfg.sampler.seed = parse_value<std::uint64_t>(kv, "seed", file); }
    if (has("adapt_exponent")) { cfg.sampler.adapt_exponent = parse_value<double>(kv, "adapt_exponent", file); }
    if (has("target_swap")) { cfg.sampler.target_swap = parse_value<double>(kv, "target_swap", file); }
    if (has("target_acceptance"))
    {
        cfg.sampler.target_acceptance = detail::parse_list<double>(kv, "target_acceptance", file);
    }
    if (has("initial_rho")) { cfg.sampler.initial_rho = parse_value<double>(kv, "initial_rho", file); }
    if (has("initial_log_scale"))
    {
        cfg.sampler.initial_log_scale = parse_value<double>(kv, "initial_log_scale", file);
    }

    if (has("v_p") || has("v_s") || has("window_s"))
    {
        const double v_p = has("v_p") ? parse_value<double>(kv, "v_p", file) : cfg.constants.v_p;
        const double v_s = has("v_s") ? parse_value<double>(kv, "v_s", file) : cfg.constants.v_s;
        const double w = has("window_s") ? parse_value<double>(kv, "window_s", file) : cfg.constants.window_s;
        try
        {
            cfg.constants = model::WaveConstants::calibrated(v_p, v_s, w);
        }
        catch (const std::invalid_argument &e)
        {
            throw InputError(file.string() + ": " + e.what());
        }
    }
    if (has("epicentre_sd_deg")) { cfg.epicentre_sd_deg = parse_value<double>(kv, "epicentre_sd_deg", file); }
    if (has("depth_lower_km")) { cfg.depth_lower_km = parse_value<double>(kv, "depth_lower_km", file); }
    if (has("depth_upper_km")) { cfg.depth_upper_km = parse_value<double>(kv, "depth_upper_km", file); }
    if (has("origin_rate")) { cfg.origin_rate = parse_value<double>(kv, "origin_rate", file); }
    if (has("gamma")) { cfg.level = parse_value<double>(kv, "gamma", file); }
    if (has("epoch_utc"))
    {
        cfg.epoch = io::parse_utc(kv.at("epoch_utc"));
        if (!cfg.epoch) { throw InputError(file.string() + ": epoch_utc is not an ISO-8601 UTC time"); }
    }
    if (has("out")) { cfg.out = kv.at("out"); }

    if (has("n")) { cfg.n = parse_value<std::size_t>(kv, "n", file); }
    if (has("sigma2")) { cfg.sigma2_ns = cfg.sigma2_ew = parse_value<double>(kv, "sigma2", file); }
    if (has("sigma2_ns")) { cfg.sigma2_ns = parse_value<double>(kv, "sigma2_ns", file); }
    if (has("sigma2_ew")) { cfg.sigma2_ew = parse_value<double>(kv, "sigma2_ew", file); }
    if (has("runs")) { cfg.runs = parse_value<std::size_t>(kv, "runs", file); }
    if (has("grid"))
    {
        const auto &g = kv.at("grid");
        if (g != "true" && g != "false") { throw InputError(file.string() + ": grid must be true or false"); }
        cfg.grid = g == "true";
    }
    if (has("n_values")) { cfg.n_values = detail::parse_list<std::size_t>(kv, "n_values", file); }
    if (has("sigma2_values")) { cfg.sigma2_values = detail::parse_list<double>(kv, "sigma2_values", file); }
    if (has("threads")) { cfg.threads = parse_value<std::size_t>(kv, "threads", file); }
    return cfg;
}

/// Flags shared by every command; unset flags leave the config untouched.
struct CommonFlags
{
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> out;
    std::optional<std::size_t> iters;
    std::optional<std::size_t> burnin;
    std::optional<std::size_t> temps;
    std::optional<double> gamma;
};

[[nodiscard]] inline RunConfig resolve_config(const CommonFlags &flags)
{
    RunConfig cfg = flags.config ? load_config(*flags.config) : RunConfig{};
    if (flags.seed) { cfg.sampler.seed = *flags.seed; }
    if (flags.out) { cfg.out = *flags.out; }
    if (flags.iters)
    {
        cfg.sampler.iterations = *flags.iters;
        // Keep the default half-and-half split unless a burn-in was given.
        if (!flags.burnin) { cfg.sampler.burn_in = *flags.iters / 2; }
    }
    if (flags.burnin) { cfg.sampler.burn_in = *flags.burnin; }
    if (flags.temps) { cfg.sampler.temperatures = *flags.temps; }
    if (flags.gamma) { cfg.level = *flags.gamma; }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Output tables

struct SummaryRow
{
    std::string parameter;
    double mode{0.0};
    double level{0.95};
    summary::Interval mode_interval{0.0, 0.0};
    std::vector<summary::Interval> hpdr;
    std::optional<double> ess;
    std::optional<double> act;

    friend bool operator==(const SummaryRow &a, const SummaryRow &b)
    {
        const auto same = [](const std::vector<summary::Interval> &x, const std::vector<summary::Interval> &y) {
            if (x.size() != y.size()) { return false; }
            for (std::size_t i = 0; i < x.size(); ++i)
            {
                if (x[i].lower != y[i].lower || x[i].upper != y[i].upper) { return false; }
            }
            return true;
        };
        return a.parameter == b.parameter && a.mode == b.mode && a.level == b.level &&
               a.mode_interval.lower == b.mode_interval.lower && a.mode_interval.upper == b.mode_interval.upper &&
               same(a.hpdr, b.hpdr) && a.ess == b.ess && a.act == b.act;
    }
};

inline const std::vector<std::string> kSummaryHeader{"parameter", "mode", "level", "hpdr_lower", "hpdr_upper",
                                                     "hpdr_intervals", "ess", "act"};

[[nodiscard]] inline std::vector<SummaryRow> summarize_columns(const io::SampleColumns &cols, double level)
{
    std::vector<SummaryRow> rows;
    for (std::size_t j = 0; j < cols.size(); ++j)
    {
        const auto s = summary::summarize_marginal(io::kParameterNames[j], cols[j], level);
        rows.push_back({s.name, s.mode, s.level, s.mode_interval, s.hpdr, s.ess, s.act});
    }
    return rows;
}

inline void write_summary(const fs::path &file, const std::vector<SummaryRow> &rows)
{
    std::ofstream out(file);
    if (!out) { throw std::runtime_error(file.string() + ": cannot write"); }
    io::write_csv_row(out, kSummaryHeader);
    const auto opt = [](const std::optional<double> &v) { return v ? io::format_double(*v) : "degenerate"; };
    for (const auto &r : rows)
    {
        std::string intervals;
        for (const auto &iv : r.hpdr)
        {
            if (!intervals.empty()) { intervals += ';'; }
            intervals += io::format_double(iv.lower) + ":" + io::format_double(iv.upper);
        }
        io::write_csv_row(out, {r.parameter, io::format_double(r.mode), io::format_double(r.level),
                                io::format_double(r.mode_interval.lower), io::format_double(r.mode_interval.upper),
                                intervals, opt(r.ess), opt(r.act)});
    }
}

[[nodiscard]] inline std::vector<SummaryRow> read_summary(const fs::path &file)
{
    const auto t = io::read_csv(file, kSummaryHeader);
    std::vector<SummaryRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        const auto &f = t.rows[i];
        const auto line = t.line_numbers[i];
        const auto num = [&](const std::string &s) {
            const auto v = io::parse_double(s);
            if (!v) { throw io::input_error(file, line, "'" + s + "' is not a number"); }
            return *v;
        };
        const auto opt = [&](const std::string &s) -> std::optional<double> {
            if (s == "degenerate") { return std::nullopt; }
            return num(s);
        };
        SummaryRow r;
        r.parameter = f[0];
        r.mode = num(f[1]);
        r.level = num(f[2]);
        r.mode_interval = {num(f[3]), num(f[4])};
        for (const auto &piece : io::split(f[5], ';'))
        {
            const auto ends = io::split(piece, ':');
            if (ends.size() != 2) { throw io::input_error(file, line, "malformed interval '" + piece + "'"); }
            r.hpdr.push_back({num(ends[0]), num(ends[1])});
        }
        r.ess = opt(f[6]);
        r.act = opt(f[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_epicentre_grid(const fs::path &file, const summary::EpicentreSummary &s)
{
    std::ofstream out(file);
    if (!out) { throw std::runtime_error(file.string() + ": cannot write"); }
    io::write_csv_row(out, {"lat", "lon", "mass", "in_hpdr"});
    for (std::size_t i = 0; i < s.lat_grid.size(); ++i)
    {
        for (std::size_t j = 0; j < s.lon_grid.size(); ++j)
        {
            const std::size_t c = i * s.lon_grid.size() + j;
            io::write_csv_row(out, {io::format_double(s.lat_grid[i]), io::format_double(s.lon_grid[j]),
                                    io::format_double(s.mass[c]), s.in_hpdr[c] ? "1" : "0"});
        }
    }
}

/// Coldest-chain adaptation and swap telemetry, one row per iteration.
inline void write_telemetry(const fs::path &file, const sampler::Telemetry &tel)
{
    std::ofstream out(file);
    if (!out) { throw std::runtime_error(file.string() + ": cannot write"); }
    std::vector<std::string> header{"iteration"};
    for (std::size_t b = 0; b < tel.blocks; ++b) { header.push_back("xi_" + std::to_string(b + 1)); }
    for (std::size_t b = 0; b < tel.blocks; ++b) { header.push_back("accepted_" + std::to_string(b + 1)); }
    header.insert(header.end(), {"swap_level", "omega", "swapped"});
    for (std::size_t l = 0; l < tel.levels; ++l) { header.push_back("beta_" + std::to_string(l)); }
    io::write_csv_row(out, header);

    std::vector<std::string> row;
    for (std::size_t g = 0; g < tel.iterations(); ++g)
    {
        row.clear();
        row.push_back(std::to_string(g + 1));
        for (std::size_t b = 0; b < tel.blocks; ++b) { row.push_back(io::format_double(tel.xi_at(g, 0, b))); }
        for (std::size_t b = 0; b < tel.blocks; ++b) { row.push_back(tel.accepted_at(g, 0, b) ? "1" : "0"); }
        row.push_back(std::to_string(tel.swap_level[g]));
        row.push_back(io::format_double(tel.omega[g]));
        row.push_back(tel.swapped[g] ? "1" : "0");
        for (std::size_t l = 0; l < tel.levels; ++l) { row.push_back(io::format_double(tel.betas[g * tel.levels + l])); }
        io::write_csv_row(out, row);
    }
}

// ---------------------------------------------------------------------------
// Truth files written next to simulated datasets

struct TruthRecord
{
    std::string scenario_id;
    std::size_t run{0};
    std::size_t n{0};
    double sigma2_ns{0.0};
    double sigma2_ew{0.0};
    std::uint64_t seed{0};
    io::UtcTime epoch;
    model::ModelParams params;
    double censoring_time_s{0.0};
    std::size_t n_cured{0};

    friend bool operator==(const TruthRecord &a, const TruthRecord &b)
    {
        return a.scenario_id == b.scenario_id && a.run == b.run && a.n == b.n && a.sigma2_ns == b.sigma2_ns &&
               a.sigma2_ew == b.sigma2_ew && a.seed == b.seed && a.epoch == b.epoch &&
               a.params.theta.epicentre == b.params.theta.epicentre &&
               a.params.theta.depth_km == b.params.theta.depth_km &&
               a.params.theta.origin_time_s == b.params.theta.origin_time_s && a.params.alpha == b.params.alpha &&
               a.params.pi == b.params.pi && a.censoring_time_s == b.censoring_time_s && a.n_cured == b.n_cured;
    }
};

inline const std::set<std::string> kTruthKeys{"scenario", "run", "n", "sigma2_ns", "sigma2_ew", "seed",
                                              "epoch_utc", "lat_0", "lon_0", "d_0", "t_0", "origin_time_utc",
                                              "alpha", "pi", "censoring_time_s", "n_cured"};

inline void write_truth(const fs::path &file, const TruthRecord &t)
{
    const auto f = io::format_double;
    const auto &p = t.params;
    io::write_key_values(file, {
                                   {"scenario", t.scenario_id},
                                   {"run", std::to_string(t.run)},
                                   {"n", std::to_string(t.n)},
                                   {"sigma2_ns", f(t.sigma2_ns)},
                                   {"sigma2_ew", f(t.sigma2_ew)},
                                   {"seed", std::to_string(t.seed)},
                                   {"epoch_utc", io::format_utc(t.epoch)},
                                   {"lat_0", f(p.theta.epicentre.lat())},
                                   {"lon_0", f(p.theta.epicentre.lon())},
                                   {"d_0", f(p.theta.depth_km)},
                                   {"t_0", f(p.theta.origin_time_s)},
                                   {"origin_time_utc", io::format_utc(t.epoch.plus_seconds(p.theta.origin_time_s))},
                                   {"alpha", f(p.alpha)},
                                   {"pi", f(p.pi)},
                                   {"censoring_time_s", f(t.censoring_time_s)},
                                   {"n_cured", std::to_string(t.n_cured)},
                               });
}

[[nodiscard]] inline TruthRecord read_truth(const fs::path &file)
{
    if (!fs::exists(file)) { throw InputError(file.string() + ": file not found"); }
    const auto kv = io::read_key_values(file, kTruthKeys);
    for (const auto &k : kTruthKeys)
    {
        if (!kv.contains(k)) { throw InputError(file.string() + ": missing key '" + k + "'"); }
    }
    using detail::parse_value;
    TruthRecord t;
    t.scenario_id = kv.at("scenario");
    t.run = parse_value<std::size_t>(kv, "run", file);
    t.n = parse_value<std::size_t>(kv, "n", file);
    t.sigma2_ns = parse_value<double>(kv, "sigma2_ns", file);
    t.sigma2_ew = parse_value<double>(kv, "sigma2_ew", file);
    t.seed = parse_value<std::uint64_t>(kv, "seed", file);
    t.epoch = io::require_utc(kv, "epoch_utc", file);
    try
    {
        t.params.theta.epicentre =
            geo::GeoPoint(parse_value<double>(kv, "lat_0", file), parse_value<double>(kv, "lon_0", file));
    }
    catch (const std::invalid_argument &e)
    {
        throw InputError(file.string() + ": " + e.what());
    }
    t.params.theta.depth_km = parse_value<double>(kv, "d_0", file);
    t.params.theta.origin_time_s = parse_value<double>(kv, "t_0", file);
    t.params.alpha = parse_value<double>(kv, "alpha", file);
    t.params.pi = parse_value<double>(kv, "pi", file);
    t.censoring_time_s = parse_value<double>(kv, "censoring_time_s", file);
    t.n_cured = parse_value<std::size_t>(kv, "n_cured", file);
    return t;
}

// ---------------------------------------------------------------------------
// Study records

inline const std::vector<std::string> kStudyHeader{
    "scenario_id", "run", "n", "sigma2_ns", "sigma2_ew", "n_triggers", "censoring_time_s",
    "true_lat_0", "true_lon_0", "true_d_0", "true_t_0", "true_alpha", "true_pi",
    "est_lat_0", "est_lon_0", "est_d_0", "est_t_0", "est_alpha", "est_pi",
    "epicentre_error_km", "log10_epicentre_error_km", "origin_time_error_s", "t0_in_hpdr", "status"};

[[nodiscard]] inline std::vector<std::string> study_row(const simulator::StudyRecord &r)
{
    const auto f = io::format_double;
    const auto &t = r.truth;
    std::vector<std::string> row{r.scenario_id,
                                 std::to_string(r.run),
                                 std::to_string(r.scenario.n),
                                 f(r.scenario.sigma2_ns),
                                 f(r.scenario.sigma2_ew),
                                 std::to_string(r.n_triggers),
                                 f(r.censoring_time_s),
                                 f(t.theta.epicentre.lat()),
                                 f(t.theta.epicentre.lon()),
                                 f(t.theta.depth_km),
                                 f(t.theta.origin_time_s),
                                 f(t.alpha),
                                 f(t.pi)};
    if (r.ok())
    {
        const auto &e = *r.estimate;
        row.insert(row.end(), {f(e.theta.epicentre.lat()), f(e.theta.epicentre.lon()), f(e.theta.depth_km),
                               f(e.theta.origin_time_s), f(e.alpha), f(e.pi), f(r.epicentre_error_km),
                               f(std::log10(r.epicentre_error_km)), f(r.origin_time_error_s),
                               r.origin_time_in_hpdr ? "1" : "0", "ok"});
    }
    else
    {
        std::string msg = r.error;
        for (auto &c : msg)
        {
            if (c == ',' || c == '\n') { c = ';'; }
        }
        row.insert(row.end(), 10, "nan");
        row.push_back("error: " + msg);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Commands

[[nodiscard]] inline std::string describe_warnings(const std::vector<std::string> &w)
{
    std::string out;
    for (const auto &s : w) { out += "warning: " + s + "\n"; }
    return out;
}

/// Fits a dataset directory and writes samples, summaries, telemetry and run info to cfg.out.
inline void cmd_fit(const io::DatasetPaths &paths, const RunConfig &cfg, std::ostream &log)
{
    auto files = io::read_dataset_files(paths);
    if (cfg.epoch) { files.metadata.epoch = cfg.epoch; }
    const auto loaded = io::to_dataset(files);
    log << describe_warnings(loaded.warnings);
    try
    {
        model::validate(loaded.data);
    }
    catch (const std::invalid_argument &e)
    {
        throw InputError(std::string("invalid dataset: ") + e.what());
    }

    const auto prior = cfg.prior(loaded.data.detection_location);
    const auto fit = sampler::run(loaded.data, prior, cfg.sampler, cfg.constants);
    const auto cols = io::to_columns(fit.draws);

    fs::create_directories(cfg.out);
    io::write_samples(cfg.out / "samples.csv", cols);
    write_summary(cfg.out / "summary.csv", summarize_columns(cols, cfg.level));
    write_epicentre_grid(cfg.out / "epicentre_density.csv", summary::epicentre_summary(cols[0], cols[1], cfg.level));
    write_telemetry(cfg.out / "telemetry.csv", fit.telemetry);

    std::vector<std::pair<std::string, std::string>> info{
        {"epoch_utc", io::format_utc(loaded.epoch)},
        {"seed", std::to_string(cfg.sampler.seed)},
        {"iterations", std::to_string(cfg.sampler.iterations)},
        {"burn_in", std::to_string(cfg.sampler.burn_in)},
        {"temperatures", std::to_string(cfg.sampler.temperatures)},
        {"gamma", io::format_double(cfg.level)},
        {"n_triggers", std::to_string(files.triggers.size())},
        {"n_active", std::to_string(files.active.size())},
        {"ladder_monotone", fit.ladder_always_monotone ? "true" : "false"},
    };
    std::string betas;
    for (double b : fit.ladder.betas) { betas += (betas.empty() ? "" : ",") + io::format_double(b); }
    info.emplace_back("final_betas", betas);
    io::write_key_values(cfg.out / "fit_info.txt", info);
    log << "fit: " << fit.draws.size() << " draws written to " << cfg.out.string() << "\n";
}

[[nodiscard]] inline fs::path simulation_dir(const fs::path &out, const simulator::ScenarioConfig &sc, std::size_t run)
{
    std::ostringstream name;
    name << "run_" << std::setw(3) << std::setfill('0') << run;
    return out / sc.id() / name.str();
}

/// Writes one dataset directory (plus truth.txt) per scenario and run.
inline std::vector<fs::path> cmd_simulate(const RunConfig &cfg, std::ostream &log)
{
    std::vector<fs::path> dirs;
    const auto scenarios = cfg.scenarios();
    for (const auto &sc : scenarios)
    {
        for (std::size_t r = 0; r < sc.runs; ++r)
        {
            sampler::RandomStream rng(sc.seed, sampler::StreamPurpose::Simulation, r);
            const auto ev = simulator::simulate_event(sc, rng, cfg.constants);

            io::DatasetFiles files;
            std::size_t cured = 0;
            for (std::size_t i = 0; i < ev.data.records.size(); ++i)
            {
                const auto &rec = ev.data.records[i];
                std::ostringstream id;
                id << "p" << std::setw(4) << std::setfill('0') << i + 1;
                if (rec.triggered)
                {
                    files.triggers.push_back({id.str(), rec.location, kSimulationEpoch.plus_seconds(rec.observed_time_s)});
                }
                else
                {
                    files.active.push_back({id.str(), rec.location});
                }
            }
            for (bool c : ev.truth.cured) { cured += c ? 1 : 0; }
            files.metadata.detection_location = ev.data.detection_location;
            files.metadata.detection_time = kSimulationEpoch.plus_seconds(ev.data.detection_time_s);
            files.metadata.epoch = kSimulationEpoch;
            files.metadata.origin_reference = kSimulationEpoch.plus_seconds(ev.data.origin_reference_s);

            const auto dir = simulation_dir(cfg.out, sc, r);
            fs::create_directories(dir);
            io::write_dataset_files(io::DatasetPaths::in(dir), files);
            write_truth(dir / "truth.txt", {sc.id(), r, sc.n, sc.sigma2_ns, sc.sigma2_ew, sc.seed, kSimulationEpoch,
                                            ev.truth.params, ev.truth.censoring_time_s, cured});
            dirs.push_back(dir);
        }
    }
    log << "simulate: wrote " << dirs.size() << " dataset(s) under " << cfg.out.string() << "\n";
    return dirs;
}

inline void cmd_summarize(const fs::path &samples, const RunConfig &cfg, std::ostream &log)
{
    const auto cols = io::read_samples(samples);
    std::vector<SummaryRow> rows;
    summary::EpicentreSummary epi;
    try
    {
        rows = summarize_columns(cols, cfg.level);
        epi = summary::epicentre_summary(cols[0], cols[1], cfg.level);
    }
    catch (const std::invalid_argument &e)
    {
        throw InputError(samples.string() + ": " + e.what());
    }
    fs::create_directories(cfg.out);
    write_summary(cfg.out / "summary.csv", rows);
    write_epicentre_grid(cfg.out / "epicentre_density.csv", epi);
    log << "summarize: " << cols[0].size() << " draws summarized at level " << cfg.level << "\n";
}

/// Runs the simulation study; study.csv is flushed after every record.
inline std::vector<simulator::StudyRecord> cmd_study(const RunConfig &cfg, std::ostream &log)
{
    simulator::StudyConfig study;
    study.scenarios = cfg.scenarios();
    study.sampler = cfg.sampler;
    study.level = cfg.level;
    study.threads = cfg.threads;
    study.constants = cfg.constants;

    fs::create_directories(cfg.out);
    std::ofstream out(cfg.out / "study.csv");
    if (!out) { throw std::runtime_error((cfg.out / "study.csv").string() + ": cannot write"); }
    io::write_csv_row(out, kStudyHeader);
    out.flush();
    std::size_t failures = 0;
    auto records = simulator::run_study(study, [&](const simulator::StudyRecord &r) {
        io::write_csv_row(out, study_row(r));
        out.flush();
        if (!r.ok()) { ++failures; }
        log << "study: " << r.scenario_id << " run " << r.run << (r.ok() ? " ok" : " failed: " + r.error) << "\n";
    });
    log << "study: " << records.size() << " record(s), " << failures << " failure(s)\n";
    return records;
}

/// Trace, kernel density, autocorrelation and ESS tables for a samples file.
inline void cmd_diagnose(const fs::path &samples, const RunConfig &cfg, std::ostream &log)
{
    const auto cols = io::read_samples(samples);
    try
    {
        summary::detail::require_samples(cols[0].size());
    }
    catch (const std::invalid_argument &e)
    {
        throw InputError(samples.string() + ": " + e.what());
    }
    fs::create_directories(cfg.out);
    const auto f = io::format_double;

    {
        std::ofstream out(cfg.out / "trace.csv");
        auto header = io::kParameterNames;
        header.insert(header.begin(), "iteration");
        io::write_csv_row(out, header);
        for (std::size_t i = 0; i < cols[0].size(); ++i)
        {
            std::vector<std::string> row{std::to_string(i + 1)};
            for (const auto &c : cols) { row.push_back(f(c[i])); }
            io::write_csv_row(out, row);
        }
    }
    {
        std::ofstream out(cfg.out / "density.csv");
        io::write_csv_row(out, {"parameter", "x", "density"});
        for (std::size_t j = 0; j < cols.size(); ++j)
        {
            const auto grid = summary::kde(cols[j]);
            for (std::size_t i = 0; i < grid.x.size(); ++i)
            {
                io::write_csv_row(out, {io::kParameterNames[j], f(grid.x[i]), f(grid.density[i])});
            }
        }
    }
    std::vector<summary::Diagnostics> diags;
    for (const auto &c : cols) { diags.push_back(summary::diagnostics(c)); }
    {
        std::ofstream out(cfg.out / "acf.csv");
        auto header = io::kParameterNames;
        header.insert(header.begin(), "lag");
        io::write_csv_row(out, header);
        std::size_t lags = 0;
        for (const auto &d : diags) { lags = std::max(lags, d.acf.size()); }
        for (std::size_t k = 0; k < lags; ++k)
        {
            std::vector<std::string> row{std::to_string(k)};
            for (const auto &d : diags) { row.push_back(k < d.acf.size() ? f(d.acf[k]) : "degenerate"); }
            io::write_csv_row(out, row);
        }
    }
    {
        std::ofstream out(cfg.out / "ess.csv");
        io::write_csv_row(out, {"parameter", "ess", "act"});
        for (std::size_t j = 0; j < cols.size(); ++j)
        {
            const auto &d = diags[j];
            io::write_csv_row(out, {io::kParameterNames[j], d.ess ? f(*d.ess) : "degenerate",
                                    d.act ? f(*d.act) : "degenerate"});
        }
    }
    log << "diagnose: wrote trace, density, acf and ess tables to " << cfg.out.string() << "\n";
}

} // namespace seqm::cli
