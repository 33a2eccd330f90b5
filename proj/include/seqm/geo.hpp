#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace seqm::geo {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Geographic position in degrees. Longitude is normalized to (-180, 180].
class GeoPoint
{
public:
    GeoPoint() = default;

    GeoPoint(double lat, double lon) : lat_(lat), lon_(lon)
    {
        if (!std::isfinite(lat) || !std::isfinite(lon))
        {
            throw std::invalid_argument("GeoPoint: non-finite coordinate");
        }
        if (lat < -90.0 || lat > 90.0)
        {
            throw std::invalid_argument("GeoPoint: latitude outside [-90, 90]");
        }
        lon_ = std::remainder(lon, 360.0);
        if (lon_ <= -180.0) { lon_ += 360.0; }
    }

    [[nodiscard]] double lat() const noexcept { return lat_; }
    [[nodiscard]] double lon() const noexcept { return lon_; }

    friend bool operator==(const GeoPoint &, const GeoPoint &) = default;

private:
    double lat_{0.0};
    double lon_{0.0};
};

struct Hypocentre
{
    GeoPoint epicentre;
    double depth_km{0.0};
};

[[nodiscard]] inline double deg2rad(double deg) noexcept
{
    return deg * std::numbers::pi / 180.0;
}

/// Great-circle (haversine) distance in km.
[[nodiscard]] inline double epicentral_distance(const GeoPoint &a, const GeoPoint &b) noexcept
{
    const double phi1 = deg2rad(a.lat());
    const double phi2 = deg2rad(b.lat());
    const double sdphi = std::sin(0.5 * (phi2 - phi1));
    const double sdlam = std::sin(0.5 * deg2rad(b.lon() - a.lon()));
    double h = sdphi * sdphi + std::cos(phi1) * std::cos(phi2) * sdlam * sdlam;
    h = std::min(1.0, std::max(0.0, h));
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

/// Straight-line distance to the hypocentre: surface arc and depth combined by Pythagoras.
[[nodiscard]] inline double hypocentral_distance(const GeoPoint &p, const Hypocentre &h) noexcept
{
    const double surface = epicentral_distance(p, h.epicentre);
    return std::sqrt(surface * surface + h.depth_km * h.depth_km);
}

/// Position with its trigonometry precomputed for repeated distance queries.
struct PreparedPoint
{
    double lat_rad{0.0};
    double lon_rad{0.0};
    double cos_lat{1.0};

    PreparedPoint() = default;
    explicit PreparedPoint(const GeoPoint &p) noexcept
        : lat_rad(deg2rad(p.lat())), lon_rad(deg2rad(p.lon())), cos_lat(std::cos(lat_rad))
    {
    }
};

/// Same haversine formula as epicentral_distance.
[[nodiscard]] inline double epicentral_distance(const PreparedPoint &a, const PreparedPoint &b) noexcept
{
    const double sdphi = std::sin(0.5 * (b.lat_rad - a.lat_rad));
    const double sdlam = std::sin(0.5 * (b.lon_rad - a.lon_rad));
    double h = sdphi * sdphi + a.cos_lat * b.cos_lat * sdlam * sdlam;
    h = std::min(1.0, std::max(0.0, h));
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

} // namespace seqm::geo
