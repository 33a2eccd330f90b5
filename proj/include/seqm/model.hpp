#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "seqm/geo.hpp"

namespace seqm::model {

using geo::GeoPoint;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct EarthquakeParams
{
    GeoPoint epicentre;
    double depth_km{0.0};
    double origin_time_s{0.0};
};

/// Earthquake parameters plus P-wave weight `alpha` and cure fraction `pi`.
struct ModelParams
{
    EarthquakeParams theta;
    double alpha{0.5};
    double pi{0.5};
};

struct SmartphoneRecord
{
    GeoPoint location;
    double observed_time_s{0.0};
    bool triggered{false};
};

/// Smartphone observations for one event. Times are seconds relative to the epoch.
struct Dataset
{
    std::vector<SmartphoneRecord> records;
    GeoPoint detection_location;
    double detection_time_s{0.0};
    /// Centre of the origin-time initialization window.
    double origin_reference_s{0.0};
};

/// Throws std::invalid_argument describing the first violated invariant.
inline void validate(const Dataset &data)
{
    if (data.records.empty())
    {
        throw std::invalid_argument("dataset has no records");
    }
    if (!std::isfinite(data.detection_time_s))
    {
        throw std::invalid_argument("detection time is not finite");
    }
    for (std::size_t i = 0; i < data.records.size(); ++i)
    {
        const auto &r = data.records[i];
        if (!std::isfinite(r.observed_time_s) || r.observed_time_s < 0.0)
        {
            throw std::invalid_argument("record " + std::to_string(i) +
                                        ": observed time must be finite and >= 0");
        }
        if (r.triggered && r.observed_time_s > data.detection_time_s)
        {
            throw std::invalid_argument("record " + std::to_string(i) +
                                        ": trigger after the censoring time");
        }
        if (!r.triggered && r.observed_time_s != data.detection_time_s)
        {
            throw std::invalid_argument("record " + std::to_string(i) +
                                        ": censored record must carry the censoring time");
        }
    }
}

/// Standard-normal quantile used to calibrate the wave-arrival spread.
[[nodiscard]] inline double normal_quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct WaveConstants
{
    double v_p{7.8};
    double v_s{4.5};
    double window_s{3.5};
    /// Offset of the arrival mean within the trigger window.
    double mu_offset_s{1.75};
    /// Spread placing 99% of the arrival mass inside the window.
    double tau_s{1.75 / normal_quantile(0.995)};
    double background_rate{1.0 / 86400.0};

    /// Centred calibration: mean at half the window, central `coverage` mass inside it.
    [[nodiscard]] static WaveConstants calibrated(double v_p, double v_s, double window_s,
                                                  double coverage = 0.99)
    {
        WaveConstants c;
        c.v_p = v_p;
        c.v_s = v_s;
        c.window_s = window_s;
        c.mu_offset_s = 0.5 * window_s;
        c.tau_s = c.mu_offset_s / normal_quantile(0.5 + 0.5 * coverage);
        c.validate();
        return c;
    }

    void validate() const
    {
        if (!(v_p > v_s && v_s > 0.0))
        {
            throw std::invalid_argument("wave constants: need v_p > v_s > 0");
        }
        if (!(window_s > 0.0 && tau_s > 0.0 && background_rate > 0.0))
        {
            throw std::invalid_argument("wave constants: window, tau and background rate must be > 0");
        }
    }
};

struct PriorConfig
{
    GeoPoint epicentre_center;
    double epicentre_sd_deg{1.0};
    double depth_lower_km{5.0};
    double depth_upper_km{100.0};
    double origin_rate{1.0 / 20.0};
    double alpha_a{0.5};
    double alpha_b{0.5};
    double pi_lower{0.0};
    double pi_upper{1.0};

    [[nodiscard]] static PriorConfig centred_on(const GeoPoint &z)
    {
        PriorConfig p;
        p.epicentre_center = z;
        return p;
    }

    void validate() const
    {
        if (!(epicentre_sd_deg > 0.0 && origin_rate > 0.0 && alpha_a > 0.0 && alpha_b > 0.0))
        {
            throw std::invalid_argument("prior: scale parameters must be > 0");
        }
        if (!(depth_lower_km < depth_upper_km && pi_lower < pi_upper))
        {
            throw std::invalid_argument("prior: bounds must be ordered");
        }
    }
};

// ---------------------------------------------------------------------------
// Log-space helpers

[[nodiscard]] inline double log_sum_exp(double a, double b) noexcept
{
    if (a == kNegInf) { return b; }
    if (b == kNegInf) { return a; }
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

[[nodiscard]] inline double log_normal_pdf(double z) noexcept
{
    constexpr double kLogSqrt2Pi = 0.91893853320467274178;
    return -0.5 * z * z - kLogSqrt2Pi;
}

/// log P(Z > z) for a standard normal, accurate far into the upper tail.
[[nodiscard]] inline double log_normal_sf(double z) noexcept
{
    if (z < 35.0)
    {
        return std::log(0.5 * std::erfc(z * std::numbers::sqrt2 / 2.0));
    }
    // Mills-ratio asymptotic series.
    const double z2 = z * z;
    const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    return log_normal_pdf(z) - std::log(z) + std::log(series);
}

// ---------------------------------------------------------------------------
// Wave arrivals

struct WaveMeans
{
    double p;
    double s;
};

[[nodiscard]] inline WaveMeans wave_means_from_distance(double dist_km, double origin_time_s,
                                                        const WaveConstants &c) noexcept
{
    const double base = origin_time_s + c.mu_offset_s;
    return {dist_km / c.v_p + base, dist_km / c.v_s + base};
}

[[nodiscard]] inline WaveMeans wave_means(const EarthquakeParams &theta, const GeoPoint &z,
                                          const WaveConstants &c) noexcept
{
    const double dist = geo::hypocentral_distance(z, {theta.epicentre, theta.depth_km});
    return wave_means_from_distance(dist, theta.origin_time_s, c);
}

struct DensitySurvival
{
    double density;
    double survival;
};

/// Normal(mean, tau^2) density and upper-tail probability at t.
[[nodiscard]] inline DensitySurvival wave_density_and_survival(double t, double mean,
                                                               const WaveConstants &c) noexcept
{
    const double z = (t - mean) / c.tau_s;
    return {std::exp(log_normal_pdf(z)) / c.tau_s, 0.5 * std::erfc(z * std::numbers::sqrt2 / 2.0)};
}

// ---------------------------------------------------------------------------
// Survival and hazard

struct LogSurvivalHazard
{
    double log_survival;
    double log_hazard;
    /// Log of the earthquake-attributable part of the hazard.
    double log_excess;
};

/// Parameter-only logarithms shared by every phone.
struct MixtureLogWeights
{
    double log_alpha;
    double log_1m_alpha;
    double log_pi;
    double log_1m_pi;
    double log_tau;
    double log_background;

    MixtureLogWeights(double alpha, double pi, const WaveConstants &c) noexcept
        : log_alpha(std::log(alpha)), log_1m_alpha(std::log1p(-alpha)), log_pi(std::log(pi)),
          log_1m_pi(std::log1p(-pi)), log_tau(std::log(c.tau_s)), log_background(std::log(c.background_rate))
    {
    }
};

/// Log overall survival and hazard at `t` given the two wave-arrival means.
/// S(t) = S0(t) {pi + (1 - pi)(alpha S_P + (1 - alpha) S_S)} and
/// h(t) = h0 + (1 - pi) f_Q / {pi + (1 - pi) S_Q}.
[[nodiscard]] inline LogSurvivalHazard log_survival_hazard(double t, const WaveMeans &means,
                                                           const MixtureLogWeights &w,
                                                           const WaveConstants &c) noexcept
{
    const double zp = (t - means.p) / c.tau_s;
    const double zs = (t - means.s) / c.tau_s;

    const double log_sq = log_sum_exp(w.log_alpha + log_normal_sf(zp), w.log_1m_alpha + log_normal_sf(zs));
    const double log_relative = log_sum_exp(w.log_pi, w.log_1m_pi + log_sq);

    const double log_fq = log_sum_exp(w.log_alpha + log_normal_pdf(zp), w.log_1m_alpha + log_normal_pdf(zs)) - w.log_tau;
    const double log_excess = w.log_1m_pi + log_fq - log_relative;

    return {-c.background_rate * t + log_relative, log_sum_exp(w.log_background, log_excess), log_excess};
}

/// Survival-only path of log_survival_hazard.
[[nodiscard]] inline double log_survival(double t, const WaveMeans &means, const MixtureLogWeights &w,
                                         const WaveConstants &c) noexcept
{
    const double log_sq = log_sum_exp(w.log_alpha + log_normal_sf((t - means.p) / c.tau_s),
                                      w.log_1m_alpha + log_normal_sf((t - means.s) / c.tau_s));
    return -c.background_rate * t + log_sum_exp(w.log_pi, w.log_1m_pi + log_sq);
}

[[nodiscard]] inline LogSurvivalHazard log_survival_hazard(double t, const WaveMeans &means, double alpha,
                                                           double pi, const WaveConstants &c) noexcept
{
    return log_survival_hazard(t, means, MixtureLogWeights(alpha, pi, c), c);
}

[[nodiscard]] inline double survival(double t, const ModelParams &phi, const GeoPoint &z,
                                     const WaveConstants &c) noexcept
{
    return std::exp(log_survival_hazard(t, wave_means(phi.theta, z, c), phi.alpha, phi.pi, c).log_survival);
}

[[nodiscard]] inline double hazard(double t, const ModelParams &phi, const GeoPoint &z,
                                   const WaveConstants &c) noexcept
{
    const auto lsh = log_survival_hazard(t, wave_means(phi.theta, z, c), phi.alpha, phi.pi, c);
    return c.background_rate + std::exp(lsh.log_excess);
}

// ---------------------------------------------------------------------------
// Likelihood, prior, posterior

/// Sum over phones of delta_i log h(y_i) + log S(y_i). Returns -inf when any
/// survival term underflows.
[[nodiscard]] inline double log_likelihood(const ModelParams &phi, const Dataset &data,
                                           const WaveConstants &c) noexcept
{
    const geo::Hypocentre hypo{phi.theta.epicentre, phi.theta.depth_km};
    const MixtureLogWeights weights(phi.alpha, phi.pi, c);
    double total = 0.0;
    for (const auto &r : data.records)
    {
        const double dist = geo::hypocentral_distance(r.location, hypo);
        const auto means = wave_means_from_distance(dist, phi.theta.origin_time_s, c);
        if (r.triggered)
        {
            const auto lsh = log_survival_hazard(r.observed_time_s, means, weights, c);
            if (lsh.log_survival == kNegInf) { return kNegInf; }
            total += lsh.log_survival + lsh.log_hazard;
        }
        else
        {
            const double ls = log_survival(r.observed_time_s, means, weights, c);
            if (ls == kNegInf) { return kNegInf; }
            total += ls;
        }
    }
    return std::isnan(total) ? kNegInf : total;
}

/// Dataset with per-phone trigonometry precomputed. Holds a copy of the records.
class PreparedDataset
{
public:
    struct Record
    {
        geo::PreparedPoint location;
        double observed_time_s;
        bool triggered;
    };

    explicit PreparedDataset(const Dataset &data)
    {
        records_.reserve(data.records.size());
        for (const auto &r : data.records)
        {
            records_.push_back({geo::PreparedPoint(r.location), r.observed_time_s, r.triggered});
        }
    }

    [[nodiscard]] const std::vector<Record> &records() const noexcept { return records_; }

private:
    std::vector<Record> records_;
};

/// log_likelihood over a prepared dataset.
[[nodiscard]] inline double log_likelihood(const ModelParams &phi, const PreparedDataset &data,
                                           const WaveConstants &c) noexcept
{
    const geo::PreparedPoint epicentre(phi.theta.epicentre);
    const double depth2 = phi.theta.depth_km * phi.theta.depth_km;
    const MixtureLogWeights weights(phi.alpha, phi.pi, c);
    double total = 0.0;
    for (const auto &r : data.records())
    {
        const double surface = geo::epicentral_distance(r.location, epicentre);
        const auto means = wave_means_from_distance(std::sqrt(surface * surface + depth2), phi.theta.origin_time_s, c);
        if (r.triggered)
        {
            const auto lsh = log_survival_hazard(r.observed_time_s, means, weights, c);
            if (lsh.log_survival == kNegInf) { return kNegInf; }
            total += lsh.log_survival + lsh.log_hazard;
        }
        else
        {
            const double ls = log_survival(r.observed_time_s, means, weights, c);
            if (ls == kNegInf) { return kNegInf; }
            total += ls;
        }
    }
    return std::isnan(total) ? kNegInf : total;
}

struct LogPriorTerms
{
    double epicentre;
    double depth;
    double origin_time;
    double alpha;
    double pi;

    [[nodiscard]] double total() const noexcept
    {
        return epicentre + depth + origin_time + alpha + pi;
    }
};

[[nodiscard]] inline LogPriorTerms log_prior_terms(const ModelParams &phi, const PriorConfig &prior) noexcept
{
    LogPriorTerms terms{};
    const double sd = prior.epicentre_sd_deg;
    const double dlat = (phi.theta.epicentre.lat() - prior.epicentre_center.lat()) / sd;
    const double dlon = (phi.theta.epicentre.lon() - prior.epicentre_center.lon()) / sd;
    terms.epicentre = -std::log(2.0 * std::numbers::pi * sd * sd) - 0.5 * (dlat * dlat + dlon * dlon);

    const double d = phi.theta.depth_km;
    terms.depth = (d >= prior.depth_lower_km && d <= prior.depth_upper_km)
                      ? -std::log(prior.depth_upper_km - prior.depth_lower_km)
                      : kNegInf;

    const double t0 = phi.theta.origin_time_s;
    terms.origin_time = (t0 >= 0.0) ? std::log(prior.origin_rate) - prior.origin_rate * t0 : kNegInf;

    const double a = phi.alpha;
    if (a > 0.0 && a < 1.0)
    {
        const double log_beta_fn = std::lgamma(prior.alpha_a) + std::lgamma(prior.alpha_b) -
                                   std::lgamma(prior.alpha_a + prior.alpha_b);
        terms.alpha = (prior.alpha_a - 1.0) * std::log(a) + (prior.alpha_b - 1.0) * std::log1p(-a) - log_beta_fn;
    }
    else
    {
        terms.alpha = kNegInf;
    }

    terms.pi = (phi.pi >= prior.pi_lower && phi.pi <= prior.pi_upper)
                   ? -std::log(prior.pi_upper - prior.pi_lower)
                   : kNegInf;
    return terms;
}

[[nodiscard]] inline double log_prior(const ModelParams &phi, const PriorConfig &prior) noexcept
{
    return log_prior_terms(phi, prior).total();
}

/// Unnormalized log posterior. The prior is evaluated first so that
/// out-of-support parameters skip the likelihood.
template <typename Data>
    requires std::same_as<Data, Dataset> || std::same_as<Data, PreparedDataset>
[[nodiscard]] double log_posterior(const ModelParams &phi, const Data &data, const PriorConfig &prior,
                                   const WaveConstants &c) noexcept
{
    const double lp = log_prior(phi, prior);
    if (lp == kNegInf || std::isnan(lp)) { return kNegInf; }
    const double ll = log_likelihood(phi, data, c);
    if (ll == kNegInf) { return kNegInf; }
    return lp + ll;
}

} // namespace seqm::model
