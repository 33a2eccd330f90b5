#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqm/geo.hpp"

namespace seqm::summary {

inline constexpr std::size_t kMinSamples = 100;
inline constexpr std::size_t kGridPoints = 512;
inline constexpr std::size_t kEpicentreGrid = 256;

struct Interval
{
    double lower;
    double upper;

    [[nodiscard]] bool contains(double v) const noexcept { return v >= lower && v <= upper; }
    friend bool operator==(const Interval &, const Interval &) = default;
};

struct KdeGrid
{
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth{0.0};
    double spacing{0.0};
    /// Set when every sample is identical; the grid then has one point.
    bool degenerate{false};
};

namespace detail {

inline void require_samples(std::size_t n)
{
    if (n < kMinSamples)
    {
        throw std::invalid_argument("need at least " + std::to_string(kMinSamples) + " samples, got " +
                                    std::to_string(n));
    }
}

inline double mean(std::span<const double> v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stddev(std::span<const double> v)
{
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) { ss += (x - m) * (x - m); }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Linear-interpolated quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p)
{
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// min(sd, IQR / 1.349), falling back to sd when the IQR collapses.
inline double robust_spread(std::span<const double> sorted)
{
    const double sd = stddev(sorted);
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double spread = std::min(sd, iqr / 1.349);
    return spread > 0.0 ? spread : sd;
}

inline double gaussian_kernel(double u) noexcept
{
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

inline std::vector<double> sorted_copy(std::span<const double> v)
{
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

/// Indices of `density` in the smallest set (by threshold) holding mass >= level.
/// Returns the density threshold.
inline double mass_threshold(const std::vector<double> &density, double level)
{
    const double total = std::accumulate(density.begin(), density.end(), 0.0);
    std::vector<double> sorted(density);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double acc = 0.0;
    for (double d : sorted)
    {
        acc += d / total;
        if (acc >= level) { return d; }
    }
    return sorted.back();
}

} // namespace detail

/// Gaussian KDE with the normal-reference (Silverman) bandwidth on a 512-point
/// grid padded by three bandwidths past the sample extremes.
[[nodiscard]] inline KdeGrid kde(std::span<const double> samples)
{
    detail::require_samples(samples.size());
    const auto sorted = detail::sorted_copy(samples);
    const double lo = sorted.front();
    const double hi = sorted.back();

    KdeGrid grid;
    if (lo == hi)
    {
        grid.x = {lo};
        grid.density = {1.0};
        grid.degenerate = true;
        return grid;
    }

    const auto n = static_cast<double>(sorted.size());
    grid.bandwidth = 0.9 * detail::robust_spread(sorted) * std::pow(n, -0.2);
    const double a = lo - 3.0 * grid.bandwidth;
    const double b = hi + 3.0 * grid.bandwidth;
    grid.spacing = (b - a) / static_cast<double>(kGridPoints - 1);
    grid.x.resize(kGridPoints);
    for (std::size_t i = 0; i < kGridPoints; ++i) { grid.x[i] = a + grid.spacing * static_cast<double>(i); }
    grid.density.assign(kGridPoints, 0.0);

    constexpr double kCutoff = 8.0; // kernel negligible beyond 8 bandwidths
    const double h = grid.bandwidth;
    for (double s : sorted)
    {
        const auto first = static_cast<std::ptrdiff_t>(std::ceil((s - kCutoff * h - a) / grid.spacing));
        const auto last = static_cast<std::ptrdiff_t>(std::floor((s + kCutoff * h - a) / grid.spacing));
        for (auto i = std::max<std::ptrdiff_t>(first, 0);
             i <= std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(kGridPoints) - 1); ++i)
        {
            grid.density[static_cast<std::size_t>(i)] += detail::gaussian_kernel((grid.x[static_cast<std::size_t>(i)] - s) / h);
        }
    }
    for (auto &d : grid.density) { d /= n * h; }
    return grid;
}

[[nodiscard]] inline double mode_of(const KdeGrid &grid)
{
    const auto it = std::max_element(grid.density.begin(), grid.density.end());
    return grid.x[static_cast<std::size_t>(it - grid.density.begin())];
}

/// Highest peak of the KDE (the predominant mode).
[[nodiscard]] inline double marginal_mode(std::span<const double> samples)
{
    return mode_of(kde(samples));
}

/// Density-threshold HPD region of the KDE as maximal disjoint intervals.
[[nodiscard]] inline std::vector<Interval> hpdr_of(const KdeGrid &grid, double level)
{
    if (!(level > 0.0 && level < 1.0)) { throw std::invalid_argument("HPDR level must be in (0, 1)"); }
    if (grid.degenerate) { return {{grid.x.front(), grid.x.front()}}; }

    const double threshold = detail::mass_threshold(grid.density, level);
    const double half = 0.5 * grid.spacing;
    std::vector<Interval> out;
    bool open = false;
    for (std::size_t i = 0; i < grid.x.size(); ++i)
    {
        const bool inside = grid.density[i] >= threshold;
        if (inside && !open)
        {
            out.push_back({grid.x[i] - half, grid.x[i] + half});
            open = true;
        }
        else if (inside)
        {
            out.back().upper = grid.x[i] + half;
        }
        else
        {
            open = false;
        }
    }
    return out;
}

[[nodiscard]] inline std::vector<Interval> hpdr(std::span<const double> samples, double level)
{
    return hpdr_of(kde(samples), level);
}

// ---------------------------------------------------------------------------
// Autocorrelation and effective sample size

struct Diagnostics
{
    /// Lag-0..max_lag autocorrelations; empty when degenerate.
    std::vector<double> acf;
    std::optional<double> ess;
    std::optional<double> act;
    bool degenerate{false};
};

/// Autocorrelation at one lag, normalized by the lag-0 autocovariance.
[[nodiscard]] inline double autocorrelation(std::span<const double> x, double mean, double var0, std::size_t lag)
{
    const std::size_t n = x.size();
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) { acc += (x[t] - mean) * (x[t + lag] - mean); }
    return acc / static_cast<double>(n) / var0;
}

/// ESS = N / (1 + 2 sum rho_k), truncated by Geyer's initial positive sequence.
[[nodiscard]] inline Diagnostics diagnostics(std::span<const double> samples, std::size_t max_lag = 100)
{
    Diagnostics d;
    const std::size_t n = samples.size();
    if (n < 2) { d.degenerate = true; return d; }
    const double m = detail::mean(samples);
    double var0 = 0.0;
    for (double v : samples) { var0 += (v - m) * (v - m); }
    var0 /= static_cast<double>(n);
    if (!(var0 > 0.0)) { d.degenerate = true; return d; }

    const std::size_t lags = std::min(max_lag, n - 1);
    d.acf.resize(lags + 1);
    for (std::size_t k = 0; k <= lags; ++k) { d.acf[k] = autocorrelation(samples, m, var0, k); }

    double sum_pairs = 0.0; // sum over m of (rho_{2m} + rho_{2m+1}), m >= 0
    for (std::size_t k = 0; k + 1 < n; k += 2)
    {
        const double r0 = k < d.acf.size() ? d.acf[k] : autocorrelation(samples, m, var0, k);
        const double r1 = k + 1 < d.acf.size() ? d.acf[k + 1] : autocorrelation(samples, m, var0, k + 1);
        const double pair = r0 + r1;
        if (pair <= 0.0) { break; }
        sum_pairs += pair;
    }
    const double act = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / static_cast<double>(n));
    d.act = act;
    d.ess = static_cast<double>(n) / act;
    return d;
}

// ---------------------------------------------------------------------------
// Per-parameter and epicentre summaries

struct MarginalSummary
{
    std::string name;
    double mode{0.0};
    double level{0.95};
    std::vector<Interval> hpdr;
    /// The HPDR interval containing the mode.
    Interval mode_interval{0.0, 0.0};
    std::optional<double> ess;
    std::optional<double> act;
};

[[nodiscard]] inline MarginalSummary summarize_marginal(std::string name, std::span<const double> samples,
                                                        double level)
{
    const auto grid = kde(samples);
    MarginalSummary s;
    s.name = std::move(name);
    s.level = level;
    s.mode = mode_of(grid);
    s.hpdr = hpdr_of(grid, level);
    s.mode_interval = s.hpdr.front();
    for (const auto &iv : s.hpdr)
    {
        if (iv.contains(s.mode)) { s.mode_interval = iv; }
    }
    const auto diag = diagnostics(samples);
    s.ess = diag.ess;
    s.act = diag.act;
    return s;
}

struct EpicentreSummary
{
    geo::GeoPoint mode;
    std::vector<double> lat_grid;
    std::vector<double> lon_grid;
    /// Cell masses, row-major [lat][lon], summing to 1.
    std::vector<double> mass;
    std::vector<bool> in_hpdr;
    double level{0.95};
    double hpdr_mass{0.0};

    [[nodiscard]] double mass_at(std::size_t i_lat, std::size_t j_lon) const
    {
        return mass[i_lat * lon_grid.size() + j_lon];
    }
};

namespace detail {

struct AxisGrid
{
    std::vector<double> centres;
    double bandwidth;
    double start;
    double spacing;
};

inline AxisGrid axis_grid(std::span<const double> samples, std::size_t cells)
{
    const auto sorted = sorted_copy(samples);
    const double n = static_cast<double>(sorted.size());
    AxisGrid g{};
    g.bandwidth = robust_spread(sorted) * std::pow(n, -1.0 / 6.0);
    if (!(g.bandwidth > 0.0)) { g.bandwidth = 1e-6; }
    g.start = sorted.front() - 3.0 * g.bandwidth;
    const double stop = sorted.back() + 3.0 * g.bandwidth;
    g.spacing = (stop - g.start) / static_cast<double>(cells);
    g.centres.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) { g.centres[i] = g.start + (static_cast<double>(i) + 0.5) * g.spacing; }
    return g;
}

} // namespace detail

/// Product-Gaussian 2D KDE on a 256 x 256 grid, with its mode and HPD cells.
[[nodiscard]] inline EpicentreSummary epicentre_summary(std::span<const double> lat, std::span<const double> lon,
                                                        double level)
{
    if (lat.size() != lon.size()) { throw std::invalid_argument("latitude and longitude sample counts differ"); }
    detail::require_samples(lat.size());
    if (!(level > 0.0 && level < 1.0)) { throw std::invalid_argument("HPDR level must be in (0, 1)"); }

    constexpr std::size_t m = kEpicentreGrid;
    const auto gy = detail::axis_grid(lat, m);
    const auto gx = detail::axis_grid(lon, m);
    std::vector<double> density(m * m, 0.0);

    constexpr double kCutoff = 6.0;
    std::vector<double> kx(m), ky(m);
    for (std::size_t s = 0; s < lat.size(); ++s)
    {
        const auto span_of = [&](const detail::AxisGrid &g, double v, std::vector<double> &k) {
            const auto first = std::max<std::ptrdiff_t>(
                0, static_cast<std::ptrdiff_t>(std::floor((v - kCutoff * g.bandwidth - g.start) / g.spacing)));
            const auto last = std::min<std::ptrdiff_t>(
                static_cast<std::ptrdiff_t>(m) - 1,
                static_cast<std::ptrdiff_t>(std::floor((v + kCutoff * g.bandwidth - g.start) / g.spacing)));
            for (auto i = first; i <= last; ++i)
            {
                k[static_cast<std::size_t>(i)] = detail::gaussian_kernel((g.centres[static_cast<std::size_t>(i)] - v) / g.bandwidth);
            }
            return std::pair{static_cast<std::size_t>(first), static_cast<std::size_t>(std::max<std::ptrdiff_t>(last, first - 1) + 1)};
        };
        const auto [y0, y1] = span_of(gy, lat[s], ky);
        const auto [x0, x1] = span_of(gx, lon[s], kx);
        for (std::size_t i = y0; i < y1; ++i)
        {
            for (std::size_t j = x0; j < x1; ++j) { density[i * m + j] += ky[i] * kx[j]; }
        }
    }

    EpicentreSummary out;
    out.level = level;
    out.lat_grid = gy.centres;
    out.lon_grid = gx.centres;
    const double total = std::accumulate(density.begin(), density.end(), 0.0);
    out.mass.resize(density.size());
    std::transform(density.begin(), density.end(), out.mass.begin(), [total](double d) { return d / total; });

    const auto best = static_cast<std::size_t>(std::max_element(out.mass.begin(), out.mass.end()) - out.mass.begin());
    out.mode = geo::GeoPoint(std::clamp(gy.centres[best / m], -90.0, 90.0), gx.centres[best % m]);

    const double threshold = detail::mass_threshold(out.mass, level);
    out.in_hpdr.resize(out.mass.size());
    for (std::size_t c = 0; c < out.mass.size(); ++c)
    {
        out.in_hpdr[c] = out.mass[c] >= threshold;
        if (out.in_hpdr[c]) { out.hpdr_mass += out.mass[c]; }
    }
    return out;
}

} // namespace seqm::summary
