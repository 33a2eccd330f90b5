#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "seqm/model.hpp"

namespace seqm::io {

namespace fs = std::filesystem;

/// Malformed or missing input. Messages carry "file:line:" when a line is known.
class InputError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

[[nodiscard]] inline InputError input_error(const fs::path &file, std::size_t line, const std::string &what)
{
    return InputError(file.string() + ":" + std::to_string(line) + ": " + what);
}

// ---------------------------------------------------------------------------
// Numbers

/// Shortest representation that parses back to the same double.
[[nodiscard]] inline std::string format_double(double v)
{
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

[[nodiscard]] inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) { return {}; }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

[[nodiscard]] inline std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) { return std::nullopt; }
    return v;
}

template <typename Int>
[[nodiscard]] std::optional<Int> parse_int(std::string_view s)
{
    s = trim(s);
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) { return std::nullopt; }
    return v;
}

// ---------------------------------------------------------------------------
// UTC timestamps, held as integer microseconds since 1970-01-01T00:00:00Z

struct UtcTime
{
    std::int64_t micros{0};

    [[nodiscard]] double seconds_since(const UtcTime &epoch) const noexcept
    {
        return static_cast<double>(micros - epoch.micros) * 1e-6;
    }
    [[nodiscard]] UtcTime plus_seconds(double s) const noexcept
    {
        return {micros + static_cast<std::int64_t>(std::llround(s * 1e6))};
    }
    friend auto operator<=>(const UtcTime &, const UtcTime &) = default;
};

namespace detail {

// Howard Hinnant's days_from_civil / civil_from_days.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept
{
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, std::int64_t &y, unsigned &m, unsigned &d) noexcept
{
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

constexpr unsigned days_in_month(std::int64_t y, unsigned m) noexcept
{
    constexpr std::array<unsigned, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return m == 2 && leap ? 29 : kDays[m - 1];
}

} // namespace detail

/// Parses YYYY-MM-DDTHH:MM:SS[.ffffff][Z|+00:00]. A space may replace the 'T'.
[[nodiscard]] inline std::optional<UtcTime> parse_utc(std::string_view s)
{
    s = trim(s);
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
    {
        return std::nullopt;
    }
    const auto y = parse_int<std::int64_t>(s.substr(0, 4));
    const auto mo = parse_int<unsigned>(s.substr(5, 2));
    const auto d = parse_int<unsigned>(s.substr(8, 2));
    const auto h = parse_int<unsigned>(s.substr(11, 2));
    const auto mi = parse_int<unsigned>(s.substr(14, 2));
    const auto se = parse_int<unsigned>(s.substr(17, 2));
    if (!y || !mo || !d || !h || !mi || !se) { return std::nullopt; }
    if (*mo < 1 || *mo > 12 || *d < 1 || *d > detail::days_in_month(*y, *mo) || *h > 23 || *mi > 59 || *se > 60)
    {
        return std::nullopt;
    }
    std::string_view rest = s.substr(19);
    std::int64_t frac = 0;
    if (!rest.empty() && rest.front() == '.')
    {
        rest.remove_prefix(1);
        std::size_t digits = 0;
        std::int64_t scale = 100000;
        while (digits < rest.size() && rest[digits] >= '0' && rest[digits] <= '9')
        {
            if (digits < 6) { frac += (rest[digits] - '0') * scale; scale /= 10; }
            ++digits;
        }
        if (digits == 0) { return std::nullopt; }
        rest.remove_prefix(digits);
    }
    if (!(rest.empty() || rest == "Z" || rest == "+00:00")) { return std::nullopt; }
    const std::int64_t days = detail::days_from_civil(*y, *mo, *d);
    const std::int64_t secs = days * 86400 + static_cast<std::int64_t>(*h) * 3600 + *mi * 60 + *se;
    return UtcTime{secs * 1000000 + frac};
}

/// Formats as YYYY-MM-DDTHH:MM:SS.ffffffZ.
[[nodiscard]] inline std::string format_utc(const UtcTime &t)
{
    std::int64_t secs = t.micros / 1000000;
    std::int64_t frac = t.micros % 1000000;
    if (frac < 0) { frac += 1000000; --secs; }
    std::int64_t days = secs / 86400;
    std::int64_t sod = secs % 86400;
    if (sod < 0) { sod += 86400; --days; }
    std::int64_t y = 0;
    unsigned m = 0, d = 0;
    detail::civil_from_days(days, y, m, d);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%06lldZ", static_cast<long long>(y), m, d,
                  static_cast<long long>(sod / 3600), static_cast<long long>(sod % 3600 / 60),
                  static_cast<long long>(sod % 60), static_cast<long long>(frac));
    return buf;
}

// ---------------------------------------------------------------------------
// CSV with a mandatory header row

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

[[nodiscard]] inline std::vector<std::string> split(std::string_view line, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true)
    {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) { break; }
        start = pos + 1;
    }
    return out;
}

[[nodiscard]] inline std::ifstream open_input(const fs::path &file)
{
    std::ifstream in(file);
    if (!in) { throw InputError(file.string() + ": cannot open file"); }
    return in;
}

/// Reads a CSV whose header must equal `expected` (when non-empty).
[[nodiscard]] inline CsvTable read_csv(const fs::path &file, const std::vector<std::string> &expected = {})
{
    auto in = open_input(file);
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (trim(line).empty()) { continue; }
        auto fields = split(line, ',');
        if (t.header.empty())
        {
            t.header = std::move(fields);
            if (!expected.empty() && t.header != expected)
            {
                std::string want;
                for (const auto &h : expected) { want += (want.empty() ? "" : ",") + h; }
                throw input_error(file, lineno, "expected header '" + want + "'");
            }
            continue;
        }
        if (fields.size() != t.header.size())
        {
            throw input_error(file, lineno,
                              "expected " + std::to_string(t.header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(lineno);
    }
    if (t.header.empty()) { throw input_error(file, lineno, "missing header row"); }
    return t;
}

inline void write_csv_row(std::ostream &out, const std::vector<std::string> &fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i)
    {
        if (i) { out << ','; }
        out << fields[i];
    }
    out << '\n';
}

// ---------------------------------------------------------------------------
// Flat key = value files; '#' starts a comment

using KeyValues = std::map<std::string, std::string>;

[[nodiscard]] inline KeyValues read_key_values(const fs::path &file, const std::set<std::string> &allowed = {})
{
    auto in = open_input(file);
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) { view = view.substr(0, hash); }
        view = trim(view);
        if (view.empty()) { continue; }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) { throw input_error(file, lineno, "expected 'key = value'"); }
        std::string key(trim(view.substr(0, eq)));
        std::string value(trim(view.substr(eq + 1)));
        if (key.empty()) { throw input_error(file, lineno, "empty key"); }
        if (!allowed.empty() && !allowed.contains(key)) { throw input_error(file, lineno, "unknown key '" + key + "'"); }
        if (!kv.emplace(key, value).second) { throw input_error(file, lineno, "duplicate key '" + key + "'"); }
    }
    return kv;
}

inline void write_key_values(const fs::path &file, const std::vector<std::pair<std::string, std::string>> &kv)
{
    std::ofstream out(file);
    if (!out) { throw std::runtime_error(file.string() + ": cannot write"); }
    for (const auto &[k, v] : kv) { out << k << " = " << v << '\n'; }
}

[[nodiscard]] inline double require_double(const KeyValues &kv, const std::string &key, const fs::path &file)
{
    const auto it = kv.find(key);
    if (it == kv.end()) { throw InputError(file.string() + ": missing key '" + key + "'"); }
    const auto v = parse_double(it->second);
    if (!v || !std::isfinite(*v)) { throw InputError(file.string() + ": key '" + key + "' is not a number"); }
    return *v;
}

[[nodiscard]] inline UtcTime require_utc(const KeyValues &kv, const std::string &key, const fs::path &file)
{
    const auto it = kv.find(key);
    if (it == kv.end()) { throw InputError(file.string() + ": missing key '" + key + "'"); }
    const auto v = parse_utc(it->second);
    if (!v) { throw InputError(file.string() + ": key '" + key + "' is not an ISO-8601 UTC time"); }
    return *v;
}

// ---------------------------------------------------------------------------
// Event datasets: triggers.csv, active.csv, metadata.txt

inline const std::vector<std::string> kTriggerHeader{"id", "lat", "lon", "trigger_time_utc"};
inline const std::vector<std::string> kActiveHeader{"id", "lat", "lon"};
inline const std::set<std::string> kMetadataKeys{"detection_lat", "detection_lon", "detection_time_utc", "epoch_utc",
                                                 "origin_reference_utc"};
inline constexpr double kTriggerWindowS = 120.0;

struct TriggerRow
{
    std::string id;
    geo::GeoPoint location;
    UtcTime time;

    friend bool operator==(const TriggerRow &, const TriggerRow &) = default;
};

struct ActiveRow
{
    std::string id;
    geo::GeoPoint location;

    friend bool operator==(const ActiveRow &, const ActiveRow &) = default;
};

struct EventMetadata
{
    geo::GeoPoint detection_location;
    UtcTime detection_time;
    std::optional<UtcTime> epoch;
    std::optional<UtcTime> origin_reference;
};

struct DatasetFiles
{
    std::vector<TriggerRow> triggers;
    std::vector<ActiveRow> active;
    EventMetadata metadata;
};

struct DatasetPaths
{
    fs::path triggers;
    fs::path active;
    fs::path metadata;

    [[nodiscard]] static DatasetPaths in(const fs::path &dir)
    {
        return {dir / "triggers.csv", dir / "active.csv", dir / "metadata.txt"};
    }
};

namespace detail {

inline geo::GeoPoint parse_point(const std::string &lat_s, const std::string &lon_s, const fs::path &file,
                                 std::size_t line)
{
    const auto lat = parse_double(lat_s);
    const auto lon = parse_double(lon_s);
    if (!lat || !lon) { throw input_error(file, line, "latitude/longitude must be numbers"); }
    try
    {
        return {*lat, *lon};
    }
    catch (const std::invalid_argument &e)
    {
        throw input_error(file, line, e.what());
    }
}

inline void check_unique(std::set<std::string> &seen, const std::string &id, const fs::path &file, std::size_t line)
{
    if (id.empty()) { throw input_error(file, line, "empty id"); }
    if (!seen.insert(id).second) { throw input_error(file, line, "duplicate id '" + id + "'"); }
}

} // namespace detail

[[nodiscard]] inline DatasetFiles read_dataset_files(const DatasetPaths &paths)
{
    DatasetFiles files;
    for (const auto *p : {&paths.triggers, &paths.active, &paths.metadata})
    {
        if (!fs::exists(*p)) { throw InputError(p->string() + ": file not found"); }
    }

    const auto trig = read_csv(paths.triggers, kTriggerHeader);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < trig.rows.size(); ++i)
    {
        const auto &row = trig.rows[i];
        const auto line = trig.line_numbers[i];
        detail::check_unique(seen, row[0], paths.triggers, line);
        const auto t = parse_utc(row[3]);
        if (!t) { throw input_error(paths.triggers, line, "trigger_time_utc is not an ISO-8601 UTC time"); }
        files.triggers.push_back({row[0], detail::parse_point(row[1], row[2], paths.triggers, line), *t});
    }

    const auto act = read_csv(paths.active, kActiveHeader);
    seen.clear();
    for (std::size_t i = 0; i < act.rows.size(); ++i)
    {
        const auto &row = act.rows[i];
        const auto line = act.line_numbers[i];
        detail::check_unique(seen, row[0], paths.active, line);
        files.active.push_back({row[0], detail::parse_point(row[1], row[2], paths.active, line)});
    }

    const auto kv = read_key_values(paths.metadata, kMetadataKeys);
    const double lat = require_double(kv, "detection_lat", paths.metadata);
    const double lon = require_double(kv, "detection_lon", paths.metadata);
    try
    {
        files.metadata.detection_location = geo::GeoPoint(lat, lon);
    }
    catch (const std::invalid_argument &e)
    {
        throw InputError(paths.metadata.string() + ": " + e.what());
    }
    files.metadata.detection_time = require_utc(kv, "detection_time_utc", paths.metadata);
    if (kv.contains("epoch_utc")) { files.metadata.epoch = require_utc(kv, "epoch_utc", paths.metadata); }
    if (kv.contains("origin_reference_utc"))
    {
        files.metadata.origin_reference = require_utc(kv, "origin_reference_utc", paths.metadata);
    }
    return files;
}

inline void write_dataset_files(const DatasetPaths &paths, const DatasetFiles &files)
{
    for (const auto *p : {&paths.triggers, &paths.active, &paths.metadata})
    {
        if (p->has_parent_path()) { std::filesystem::create_directories(p->parent_path()); }
    }
    {
        std::ofstream out(paths.triggers);
        write_csv_row(out, kTriggerHeader);
        for (const auto &t : files.triggers)
        {
            write_csv_row(out, {t.id, format_double(t.location.lat()), format_double(t.location.lon()),
                                format_utc(t.time)});
        }
    }
    {
        std::ofstream out(paths.active);
        write_csv_row(out, kActiveHeader);
        for (const auto &a : files.active)
        {
            write_csv_row(out, {a.id, format_double(a.location.lat()), format_double(a.location.lon())});
        }
    }
    std::vector<std::pair<std::string, std::string>> kv{
        {"detection_lat", format_double(files.metadata.detection_location.lat())},
        {"detection_lon", format_double(files.metadata.detection_location.lon())},
        {"detection_time_utc", format_utc(files.metadata.detection_time)},
    };
    if (files.metadata.epoch) { kv.emplace_back("epoch_utc", format_utc(*files.metadata.epoch)); }
    if (files.metadata.origin_reference)
    {
        kv.emplace_back("origin_reference_utc", format_utc(*files.metadata.origin_reference));
    }
    write_key_values(paths.metadata, kv);
}

struct LoadedDataset
{
    model::Dataset data;
    UtcTime epoch;
    std::vector<std::string> warnings;
};

/// Converts files to epoch-relative seconds. The default epoch is two minutes
/// before detection, moved earlier if a trigger precedes it.
[[nodiscard]] inline LoadedDataset to_dataset(const DatasetFiles &files)
{
    LoadedDataset out;
    const auto detection = files.metadata.detection_time;
    const UtcTime window_start = detection.plus_seconds(-kTriggerWindowS);
    UtcTime epoch = window_start;
    for (const auto &t : files.triggers)
    {
        if (t.time > detection)
        {
            throw InputError("trigger '" + t.id + "' at " + format_utc(t.time) + " is after the detection time");
        }
        if (t.time < window_start)
        {
            out.warnings.push_back("trigger '" + t.id + "' precedes the two-minute pre-detection window");
        }
        epoch = std::min(epoch, t.time);
    }
    if (files.metadata.epoch) { epoch = *files.metadata.epoch; }
    if (files.triggers.empty() && files.active.empty()) { throw InputError("dataset has no smartphones"); }

    auto &data = out.data;
    data.detection_location = files.metadata.detection_location;
    data.detection_time_s = detection.seconds_since(epoch);
    data.origin_reference_s = files.metadata.origin_reference.value_or(detection).seconds_since(epoch);
    for (const auto &t : files.triggers)
    {
        const double y = t.time.seconds_since(epoch);
        if (y < 0.0) { throw InputError("trigger '" + t.id + "' precedes the epoch"); }
        // A trigger exactly at detection is still an event, not a censored phone.
        data.records.push_back({t.location, y, true});
    }
    for (const auto &a : files.active) { data.records.push_back({a.location, data.detection_time_s, false}); }
    out.epoch = epoch;
    return out;
}

// ---------------------------------------------------------------------------
// Posterior samples: one natural-space draw per row

inline const std::vector<std::string> kParameterNames{"lat_0", "lon_0", "d_0", "t_0", "alpha", "pi"};

using SampleColumns = std::array<std::vector<double>, 6>;

[[nodiscard]] inline SampleColumns to_columns(const std::vector<model::ModelParams> &draws)
{
    SampleColumns cols;
    for (auto &c : cols) { c.reserve(draws.size()); }
    for (const auto &d : draws)
    {
        cols[0].push_back(d.theta.epicentre.lat());
        cols[1].push_back(d.theta.epicentre.lon());
        cols[2].push_back(d.theta.depth_km);
        cols[3].push_back(d.theta.origin_time_s);
        cols[4].push_back(d.alpha);
        cols[5].push_back(d.pi);
    }
    return cols;
}

inline void write_samples(const fs::path &file, const SampleColumns &cols)
{
    std::ofstream out(file);
    if (!out) { throw std::runtime_error(file.string() + ": cannot write"); }
    write_csv_row(out, kParameterNames);
    for (std::size_t i = 0; i < cols[0].size(); ++i)
    {
        std::vector<std::string> row;
        for (const auto &c : cols) { row.push_back(format_double(c[i])); }
        write_csv_row(out, row);
    }
}

[[nodiscard]] inline SampleColumns read_samples(const fs::path &file)
{
    if (!fs::exists(file)) { throw InputError(file.string() + ": file not found"); }
    const auto t = read_csv(file, kParameterNames);
    SampleColumns cols;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
    {
        for (std::size_t j = 0; j < cols.size(); ++j)
        {
            const auto v = parse_double(t.rows[i][j]);
            if (!v || !std::isfinite(*v))
            {
                throw input_error(file, t.line_numbers[i], "column '" + kParameterNames[j] + "' is not a number");
            }
            cols[j].push_back(*v);
        }
    }
    return cols;
}

} // namespace seqm::io
