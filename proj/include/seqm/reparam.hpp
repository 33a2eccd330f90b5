#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "seqm/model.hpp"

namespace seqm::reparam {

using model::ModelParams;

/// Coordinate order of the unconstrained vector.
enum Coord : std::size_t { kLat = 0, kLon = 1, kDepth = 2, kOrigin = 3, kAlpha = 4, kPi = 5 };
inline constexpr std::size_t kNumCoords = 6;

enum class MapKind { Logistic, Exp };

struct CoordinateSupport
{
    MapKind kind;
    double lower;
    double upper; // unused for Exp (half-line [lower, inf) with lower = 0)
};

/// Parameter supports: lat, lon, depth, origin time, alpha, pi.
inline constexpr std::array<CoordinateSupport, kNumCoords> kSupports{{
    {MapKind::Logistic, -90.0, 90.0},
    {MapKind::Logistic, -180.0, 180.0},
    {MapKind::Logistic, 5.0, 100.0},
    {MapKind::Exp, 0.0, 0.0},
    {MapKind::Logistic, 0.0, 1.0},
    {MapKind::Logistic, 0.0, 1.0},
}};

/// Block k (1-based) covers coordinates [first, first + dim).
struct BlockSpec
{
    int index;
    std::size_t first;
    std::size_t dim;
};

inline constexpr std::array<BlockSpec, 3> kBlocks{{{1, 0, 4}, {2, 4, 1}, {3, 5, 1}}};

[[nodiscard]] inline const BlockSpec &block_spec(int k)
{
    if (k < 1 || k > 3) { throw std::out_of_range("block index must be 1, 2 or 3"); }
    return kBlocks[static_cast<std::size_t>(k - 1)];
}

struct TransformedParams
{
    std::array<double, kNumCoords> values{};

    [[nodiscard]] std::span<const double> block(int k) const
    {
        const auto &b = block_spec(k);
        return std::span<const double>(values).subspan(b.first, b.dim);
    }
};

// ---------------------------------------------------------------------------
// Scalar maps

/// g(x; lb, ub) = (lb + ub e^x) / (1 + e^x).
[[nodiscard]] inline double logistic(double x, double lb, double ub) noexcept
{
    if (x > 35.0)
    {
        const double e = std::exp(-x);
        return (lb * e + ub) / (e + 1.0);
    }
    const double e = std::exp(x);
    return (lb + ub * e) / (1.0 + e);
}

[[nodiscard]] inline double logistic_inverse(double y, double lb, double ub)
{
    if (!(y > lb && y < ub))
    {
        throw std::domain_error("value " + std::to_string(y) + " is not strictly inside (" +
                                std::to_string(lb) + ", " + std::to_string(ub) + ")");
    }
    return std::log((y - lb) / (ub - y));
}

[[nodiscard]] inline double softplus(double x) noexcept
{
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// log g'(x) = log(ub - lb) + x - 2 log(1 + e^x).
[[nodiscard]] inline double logistic_log_derivative(double x, double lb, double ub) noexcept
{
    return std::log(ub - lb) - softplus(x) - softplus(-x);
}

[[nodiscard]] inline double to_natural_coord(double x, const CoordinateSupport &s) noexcept
{
    return s.kind == MapKind::Exp ? std::exp(x) : logistic(x, s.lower, s.upper);
}

[[nodiscard]] inline double to_unconstrained_coord(double y, const CoordinateSupport &s)
{
    if (s.kind == MapKind::Exp)
    {
        if (!(y > 0.0 && std::isfinite(y)))
        {
            throw std::domain_error("value " + std::to_string(y) + " is not strictly positive");
        }
        return std::log(y);
    }
    return logistic_inverse(y, s.lower, s.upper);
}

[[nodiscard]] inline double log_abs_derivative(double x, const CoordinateSupport &s) noexcept
{
    return s.kind == MapKind::Exp ? x : logistic_log_derivative(x, s.lower, s.upper);
}

// ---------------------------------------------------------------------------
// Vector maps

[[nodiscard]] inline std::array<double, kNumCoords> natural_values(const ModelParams &phi) noexcept
{
    return {phi.theta.epicentre.lat(), phi.theta.epicentre.lon(), phi.theta.depth_km,
            phi.theta.origin_time_s, phi.alpha, phi.pi};
}

[[nodiscard]] inline ModelParams from_natural_values(const std::array<double, kNumCoords> &v)
{
    ModelParams phi;
    phi.theta.epicentre = geo::GeoPoint(v[kLat], v[kLon]);
    phi.theta.depth_km = v[kDepth];
    phi.theta.origin_time_s = v[kOrigin];
    phi.alpha = v[kAlpha];
    phi.pi = v[kPi];
    return phi;
}

[[nodiscard]] inline ModelParams to_natural(std::span<const double, kNumCoords> x)
{
    std::array<double, kNumCoords> v{};
    for (std::size_t i = 0; i < kNumCoords; ++i)
    {
        v[i] = to_natural_coord(x[i], kSupports[i]);
    }
    return from_natural_values(v);
}

[[nodiscard]] inline ModelParams to_natural(const TransformedParams &x)
{
    return to_natural(std::span<const double, kNumCoords>(x.values));
}

/// Inverse of to_natural. Throws std::domain_error on boundary or out-of-support values.
[[nodiscard]] inline TransformedParams to_unconstrained(const ModelParams &phi)
{
    const auto v = natural_values(phi);
    TransformedParams x;
    for (std::size_t i = 0; i < kNumCoords; ++i)
    {
        x.values[i] = to_unconstrained_coord(v[i], kSupports[i]);
    }
    return x;
}

[[nodiscard]] inline double log_abs_jacobian(std::span<const double, kNumCoords> x, int k)
{
    const auto &b = block_spec(k);
    double total = 0.0;
    for (std::size_t i = b.first; i < b.first + b.dim; ++i)
    {
        total += log_abs_derivative(x[i], kSupports[i]);
    }
    return total;
}

[[nodiscard]] inline double log_abs_jacobian(const TransformedParams &x, int k)
{
    return log_abs_jacobian(std::span<const double, kNumCoords>(x.values), k);
}

/// Sum over all three blocks.
[[nodiscard]] inline double log_abs_jacobian(std::span<const double, kNumCoords> x) noexcept
{
    double total = 0.0;
    for (std::size_t i = 0; i < kNumCoords; ++i)
    {
        total += log_abs_derivative(x[i], kSupports[i]);
    }
    return total;
}

} // namespace seqm::reparam
