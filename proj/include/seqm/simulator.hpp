#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "seqm/geo.hpp"
#include "seqm/model.hpp"
#include "seqm/sampler.hpp"
#include "seqm/summary.hpp"

namespace seqm::simulator {

using geo::GeoPoint;
using model::Dataset;
using model::ModelParams;
using model::WaveConstants;
using sampler::RandomStream;
using sampler::StreamPurpose;

struct ScenarioConfig
{
    std::size_t n{100};
    /// Network variances in deg^2, north-south then east-west.
    double sigma2_ns{1.0};
    double sigma2_ew{1.0};
    std::size_t runs{100};
    std::uint64_t seed{1};

    void validate() const
    {
        if (n < 2) { throw std::invalid_argument("scenario: need at least 2 phones"); }
        if (!(sigma2_ns > 0.0 && sigma2_ew > 0.0)) { throw std::invalid_argument("scenario: variances must be > 0"); }
    }

    [[nodiscard]] std::string id() const
    {
        const auto fmt = [](double v) {
            std::string s = std::to_string(v);
            s.erase(s.find_last_not_of('0') + 1);
            if (!s.empty() && s.back() == '.') { s.pop_back(); }
            return s;
        };
        return "n" + std::to_string(n) + "_ns" + fmt(sigma2_ns) + "_ew" + fmt(sigma2_ew);
    }
};

/// The 3 x 3 grid n in {25, 50, 100}, equal variances in {1, 0.25, 0.05}.
[[nodiscard]] inline std::vector<ScenarioConfig> grid_scenarios(std::size_t runs, std::uint64_t seed)
{
    std::vector<ScenarioConfig> out;
    for (std::size_t n : {25u, 50u, 100u})
    {
        for (double s2 : {1.0, 0.25, 0.05})
        {
            out.push_back({n, s2, s2, runs, seed + out.size()});
        }
    }
    return out;
}

struct SimTruth
{
    ModelParams params;
    double censoring_time_s{0.0};
    std::vector<bool> cured;
    /// Latent trigger times before censoring.
    std::vector<double> trigger_times_s;
};

[[nodiscard]] inline std::vector<GeoPoint> gen_network(const ScenarioConfig &cfg, RandomStream &rng)
{
    cfg.validate();
    std::vector<GeoPoint> pts;
    pts.reserve(cfg.n);
    const double sd_ns = std::sqrt(cfg.sigma2_ns);
    const double sd_ew = std::sqrt(cfg.sigma2_ew);
    for (std::size_t i = 0; i < cfg.n; ++i)
    {
        const double lat = std::clamp(sd_ns * rng.normal(), -90.0, 90.0);
        pts.emplace_back(lat, sd_ew * rng.normal());
    }
    return pts;
}

/// Earthquake parameters and censoring time from the simulation-study ranges.
[[nodiscard]] inline SimTruth gen_truth(RandomStream &rng)
{
    SimTruth t;
    const double lat = rng.uniform(-3.0, 3.0);
    const double lon = rng.uniform(-3.0, 3.0);
    t.params.theta.epicentre = GeoPoint(lat, lon);
    t.params.theta.depth_km = rng.uniform(0.0, 100.0);
    t.params.theta.origin_time_s = rng.uniform(5.0, 30.0);
    t.params.alpha = rng.uniform(0.0, 1.0);
    t.params.pi = rng.uniform(0.5, 0.95);
    t.censoring_time_s = t.params.theta.origin_time_s + rng.uniform(60.0, 120.0);
    return t;
}

/// Survival of an uncured phone: S0(t) {alpha S_P(t) + (1 - alpha) S_S(t)}.
[[nodiscard]] inline double uncured_survival(double t, const model::WaveMeans &means, double alpha,
                                             const WaveConstants &c) noexcept
{
    const double sp = model::wave_density_and_survival(t, means.p, c).survival;
    const double ss = model::wave_density_and_survival(t, means.s, c).survival;
    return std::exp(-c.background_rate * t) * (alpha * sp + (1.0 - alpha) * ss);
}

/// Solves uncured_survival(t) = u by bisection on a geometrically grown bracket.
[[nodiscard]] inline double invert_uncured_survival(double u, const model::WaveMeans &means, double alpha,
                                                    double start_hi, const WaveConstants &c)
{
    constexpr double kTolerance = 1e-6;
    if (!(u > 0.0 && u < 1.0)) { throw std::invalid_argument("inverse survival: u must be in (0, 1)"); }
    if (uncured_survival(0.0, means, alpha, c) <= u) { return 0.0; }
    double lo = 0.0;
    double hi = start_hi;
    for (int grow = 0; uncured_survival(hi, means, alpha, c) > u; ++grow)
    {
        if (grow > 200) { throw std::runtime_error("inverse survival: bracket did not close"); }
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > kTolerance)
    {
        const double mid = 0.5 * (lo + hi);
        (uncured_survival(mid, means, alpha, c) > u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Centroid of the given points in degrees (plane average).
[[nodiscard]] inline GeoPoint centroid(const std::vector<GeoPoint> &pts)
{
    double lat = 0.0, lon = 0.0;
    for (const auto &p : pts) { lat += p.lat(); lon += p.lon(); }
    const auto n = static_cast<double>(pts.size());
    return {lat / n, lon / n};
}

/// Labels round(100 pi)% of phones as cured, draws latent trigger times and censors
/// at the truth's censoring time. The detection location is the centroid of the
/// triggering phones and the origin reference is the earliest trigger.
[[nodiscard]] inline Dataset gen_triggers(SimTruth &truth, const std::vector<GeoPoint> &network,
                                          const WaveConstants &c, RandomStream &rng)
{
    const std::size_t n = network.size();
    if (n == 0) { throw std::invalid_argument("empty network"); }
    const double cut = truth.censoring_time_s;
    const auto &phi = truth.params;

    const auto n_cured = static_cast<std::size_t>(std::lround(phi.pi * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < n_cured; ++i)
    {
        std::swap(order[i], order[i + rng.index_below(n - i)]);
    }
    truth.cured.assign(n, false);
    for (std::size_t i = 0; i < n_cured; ++i) { truth.cured[order[i]] = true; }

    truth.trigger_times_s.assign(n, 0.0);
    Dataset data;
    data.records.reserve(n);
    data.detection_time_s = cut;
    std::vector<GeoPoint> triggered;
    double earliest = cut;
    for (std::size_t i = 0; i < n; ++i)
    {
        double u = 0.0;
        do { u = rng.uniform(); } while (u == 0.0);
        double t = 0.0;
        if (truth.cured[i])
        {
            t = -std::log(u) / c.background_rate;
        }
        else
        {
            const auto means = model::wave_means(phi.theta, network[i], c);
            t = invert_uncured_survival(u, means, phi.alpha, cut + 1000.0, c);
        }
        truth.trigger_times_s[i] = t;
        const bool fired = t < cut;
        data.records.push_back({network[i], fired ? t : cut, fired});
        if (fired)
        {
            triggered.push_back(network[i]);
            earliest = std::min(earliest, t);
        }
    }
    data.detection_location = triggered.empty() ? centroid(network) : centroid(triggered);
    data.origin_reference_s = earliest;
    return data;
}

struct SimulatedEvent
{
    std::vector<GeoPoint> network;
    SimTruth truth;
    Dataset data;
};

[[nodiscard]] inline SimulatedEvent simulate_event(const ScenarioConfig &cfg, RandomStream &rng,
                                                   const WaveConstants &c = {})
{
    SimulatedEvent ev;
    ev.network = gen_network(cfg, rng);
    ev.truth = gen_truth(rng);
    ev.data = gen_triggers(ev.truth, ev.network, c, rng);
    return ev;
}

// ---------------------------------------------------------------------------
// Study

struct StudyConfig
{
    std::vector<ScenarioConfig> scenarios;
    sampler::SamplerConfig sampler;
    double level{0.95};
    /// 0 selects the hardware concurrency.
    std::size_t threads{0};
    WaveConstants constants{};
};

struct StudyRecord
{
    std::string scenario_id;
    std::size_t scenario_index{0};
    std::size_t run{0};
    ScenarioConfig scenario;
    ModelParams truth;
    double censoring_time_s{0.0};
    std::size_t n_triggers{0};
    std::optional<ModelParams> estimate;
    double epicentre_error_km{0.0};
    double origin_time_error_s{0.0};
    bool origin_time_in_hpdr{false};
    std::string error;

    [[nodiscard]] bool ok() const noexcept { return estimate.has_value(); }
};

/// Simulates, fits and summarizes one run. Failures are captured in the record.
[[nodiscard]] inline StudyRecord run_one(const StudyConfig &cfg, std::size_t scenario_index, std::size_t run)
{
    const auto &sc = cfg.scenarios[scenario_index];
    StudyRecord rec;
    rec.scenario_id = sc.id();
    rec.scenario_index = scenario_index;
    rec.run = run;
    rec.scenario = sc;
    try
    {
        RandomStream rng(sc.seed, StreamPurpose::Simulation, run);
        auto ev = simulate_event(sc, rng, cfg.constants);
        rec.truth = ev.truth.params;
        rec.censoring_time_s = ev.truth.censoring_time_s;
        rec.n_triggers = static_cast<std::size_t>(std::count_if(
            ev.data.records.begin(), ev.data.records.end(), [](const auto &r) { return r.triggered; }));

        auto scfg = cfg.sampler;
        scfg.seed = rng.engine()();
        const auto prior = model::PriorConfig::centred_on(ev.data.detection_location);
        const auto fit = sampler::run(ev.data, prior, scfg, cfg.constants);

        std::vector<double> lat, lon, depth, t0, alpha, pi;
        for (const auto &d : fit.draws)
        {
            lat.push_back(d.theta.epicentre.lat());
            lon.push_back(d.theta.epicentre.lon());
            depth.push_back(d.theta.depth_km);
            t0.push_back(d.theta.origin_time_s);
            alpha.push_back(d.alpha);
            pi.push_back(d.pi);
        }
        ModelParams est;
        est.theta.epicentre = GeoPoint(summary::marginal_mode(lat), summary::marginal_mode(lon));
        est.theta.depth_km = summary::marginal_mode(depth);
        const auto t0_grid = summary::kde(t0);
        est.theta.origin_time_s = summary::mode_of(t0_grid);
        est.alpha = summary::marginal_mode(alpha);
        est.pi = summary::marginal_mode(pi);
        rec.estimate = est;
        rec.epicentre_error_km = geo::epicentral_distance(est.theta.epicentre, rec.truth.theta.epicentre);
        rec.origin_time_error_s = est.theta.origin_time_s - rec.truth.theta.origin_time_s;
        for (const auto &iv : summary::hpdr_of(t0_grid, cfg.level))
        {
            rec.origin_time_in_hpdr = rec.origin_time_in_hpdr || iv.contains(rec.truth.theta.origin_time_s);
        }
    }
    catch (const std::exception &e)
    {
        rec.error = e.what();
    }
    return rec;
}

/// Runs every (scenario, run) pair on a worker pool. `on_record` is called in
/// (scenario, run) order as soon as each prefix of results is complete.
inline std::vector<StudyRecord> run_study(const StudyConfig &cfg,
                                          const std::function<void(const StudyRecord &)> &on_record = {})
{
    for (const auto &sc : cfg.scenarios) { sc.validate(); }
    cfg.sampler.validate();

    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t s = 0; s < cfg.scenarios.size(); ++s)
    {
        for (std::size_t r = 0; r < cfg.scenarios[s].runs; ++r) { jobs.emplace_back(s, r); }
    }
    std::vector<std::optional<StudyRecord>> results(jobs.size());
    std::size_t next_emit = 0;
    std::mutex mtx;
    std::atomic<std::size_t> next_job{0};

    const auto worker = [&] {
        for (std::size_t j = next_job++; j < jobs.size(); j = next_job++)
        {
            auto rec = run_one(cfg, jobs[j].first, jobs[j].second);
            const std::lock_guard lock(mtx);
            results[j] = std::move(rec);
            while (next_emit < results.size() && results[next_emit])
            {
                if (on_record) { on_record(*results[next_emit]); }
                ++next_emit;
            }
        }
    };

    std::size_t threads = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) { pool.emplace_back(worker); }
    worker();
    for (auto &th : pool) { th.join(); }

    std::vector<StudyRecord> out;
    out.reserve(results.size());
    for (auto &r : results) { out.push_back(std::move(*r)); }
    return out;
}

} // namespace seqm::simulator
