#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqm/model.hpp"
#include "seqm/reparam.hpp"
#include "seqm/tempering.hpp"

namespace seqm::sampler {

using model::Dataset;
using model::ModelParams;
using model::PriorConfig;
using model::WaveConstants;

class InitializationError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Tempered SEQM posterior in unconstrained coordinates: log p(m(x) | data) + log|J(x)|.
class SeqmTarget
{
public:
    SeqmTarget(const Dataset &data, PriorConfig prior, WaveConstants constants)
        : data_(&data), prepared_(data), prior_(std::move(prior)), constants_(constants)
    {
    }

    [[nodiscard]] double log_density(std::span<const double> x) const
    {
        if (x.size() != reparam::kNumCoords) { throw std::invalid_argument("SEQM state must have 6 coordinates"); }
        if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
        {
            return model::kNegInf;
        }
        const std::span<const double, reparam::kNumCoords> fixed(x.data(), reparam::kNumCoords);
        const double lp = model::log_posterior(reparam::to_natural(fixed), prepared_, prior_, constants_);
        if (lp == model::kNegInf) { return lp; }
        const double total = lp + reparam::log_abs_jacobian(fixed);
        return std::isfinite(total) ? total : model::kNegInf;
    }

    [[nodiscard]] const Dataset &data() const noexcept { return *data_; }
    [[nodiscard]] const PriorConfig &prior() const noexcept { return prior_; }
    [[nodiscard]] const WaveConstants &constants() const noexcept { return constants_; }

private:
    const Dataset *data_;
    model::PreparedDataset prepared_;
    PriorConfig prior_;
    WaveConstants constants_;
};

/// Three blocks: (lat, lon, depth, t0), alpha, pi.
[[nodiscard]] inline std::vector<BlockLayout> default_blocks()
{
    return {
        {{reparam::kLat, reparam::kLon, reparam::kDepth, reparam::kOrigin}, {0.1, 0.1, 10.0, 1.0}},
        {{reparam::kAlpha}, {0.1}},
        {{reparam::kPi}, {0.1}},
    };
}

/// Random starting points in natural space, one per temperature level, mapped to
/// unconstrained coordinates. The epicentre starts in a 2-degree box around the
/// prior centre and the origin time in a 20 s window around the dataset's origin
/// reference.
[[nodiscard]] inline std::vector<std::vector<double>> init_chains(const Dataset &data, const PriorConfig &prior,
                                                                  const SamplerConfig &cfg,
                                                                  const WaveConstants &constants = {})
{
    const SeqmTarget target(data, prior, constants);
    const auto centre = prior.epicentre_center;
    const double t_lo = std::max(0.0, data.origin_reference_s - 10.0);
    const double t_hi = std::max(data.origin_reference_s + 10.0, t_lo + 20.0);
    constexpr int kMaxAttempts = 1000;

    std::vector<std::vector<double>> states;
    states.reserve(cfg.temperatures);
    for (std::size_t l = 0; l < cfg.temperatures; ++l)
    {
        RandomStream rng(cfg.seed, StreamPurpose::Init, l);
        bool ok = false;
        for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt)
        {
            std::array<double, reparam::kNumCoords> v{};
            v[reparam::kLat] = rng.uniform_open(std::max(-89.999, centre.lat() - 1.0),
                                                std::min(89.999, centre.lat() + 1.0));
            v[reparam::kLon] = rng.uniform_open(centre.lon() - 1.0, centre.lon() + 1.0);
            v[reparam::kDepth] = rng.uniform_open(reparam::kSupports[reparam::kDepth].lower,
                                                  reparam::kSupports[reparam::kDepth].upper);
            v[reparam::kOrigin] = rng.uniform_open(t_lo, t_hi);
            v[reparam::kAlpha] = rng.uniform_open(0.0, 1.0);
            v[reparam::kPi] = rng.uniform_open(0.0, 1.0);
            try
            {
                const auto x = reparam::to_unconstrained(reparam::from_natural_values(v));
                if (std::isfinite(target.log_density(x.values)))
                {
                    states.emplace_back(x.values.begin(), x.values.end());
                    ok = true;
                }
            }
            catch (const std::domain_error &)
            {
                // longitude box crossing the antimeridian boundary; redraw
            }
        }
        if (!ok)
        {
            throw InitializationError("could not find a starting point with finite posterior density at level " +
                                      std::to_string(l));
        }
    }
    return states;
}

struct SamplerOutput
{
    std::vector<ModelParams> draws;
    Telemetry telemetry;
    TemperLadder ladder;
    std::uint64_t seed{0};
    bool ladder_always_monotone{true};
};

[[nodiscard]] inline std::vector<ModelParams> to_natural_draws(const std::vector<std::vector<double>> &draws)
{
    std::vector<ModelParams> out;
    out.reserve(draws.size());
    for (const auto &x : draws)
    {
        out.push_back(reparam::to_natural(std::span<const double, reparam::kNumCoords>(x.data(), reparam::kNumCoords)));
    }
    return out;
}

[[nodiscard]] inline SamplerOutput run(const Dataset &data, const PriorConfig &prior, const SamplerConfig &cfg,
                                       const WaveConstants &constants = {})
{
    model::validate(data);
    prior.validate();
    constants.validate();
    cfg.validate();
    const SeqmTarget target(data, prior, constants);
    auto tempered = run_tempered(target, default_blocks(), cfg, init_chains(data, prior, cfg, constants));

    SamplerOutput out;
    out.draws = to_natural_draws(tempered.draws);
    out.telemetry = std::move(tempered.telemetry);
    out.ladder = std::move(tempered.ladder);
    out.seed = cfg.seed;
    out.ladder_always_monotone = tempered.ladder_always_monotone;
    return out;
}

} // namespace seqm::sampler
