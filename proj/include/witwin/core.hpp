// Core value types shared by every witwin module.
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace witwin
{

// Error categories. Configuration errors are raised before a run starts,
// domain errors flag a contract violation by the caller, parse errors come
// from the text codecs.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class DomainError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Simulation clock. Integer nanoseconds keep event ordering exact.
using SimTime = std::chrono::nanoseconds;

inline SimTime from_seconds(double s)
{
    return SimTime{static_cast<std::int64_t>(std::llround(s * 1e9))};
}

inline double to_seconds(SimTime t)
{
    return static_cast<double>(t.count()) * 1e-9;
}

struct Position
{
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(const Position& a, const Position& b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct BoundingBox
{
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    bool contains(const Position& p) const
    {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }

    Position clamp(const Position& p) const
    {
        return {std::clamp(p.x, min_x, max_x), std::clamp(p.y, min_y, max_y)};
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class Band : std::uint8_t
{
    Ghz2_4,
    Ghz5,
    Ghz6,
};

inline std::string_view band_name(Band b)
{
    switch (b)
    {
    case Band::Ghz2_4:
        return "2.4";
    case Band::Ghz5:
        return "5";
    case Band::Ghz6:
        return "6";
    }
    return "?";
}

inline Band parse_band(std::string_view s)
{
    if (s == "2.4")
        return Band::Ghz2_4;
    if (s == "5")
        return Band::Ghz5;
    if (s == "6")
        return Band::Ghz6;
    throw ParseError("unknown band '" + std::string(s) + "'");
}

inline constexpr std::size_t band_index(Band b)
{
    return static_cast<std::size_t>(b);
}

inline constexpr std::size_t kBandCount = 3;

// 20 MHz primary channel numbers allowed in each band.
inline bool channel_valid_for_band(Band band, int number)
{
    switch (band)
    {
    case Band::Ghz2_4:
        return number >= 1 && number <= 14;
    case Band::Ghz5: {
        static constexpr std::array<int, 25> k5{36,  40,  44,  48,  52,  56,  60,  64,  100,
                                                104, 108, 112, 116, 120, 124, 128, 132, 136,
                                                140, 144, 149, 153, 157, 161, 165};
        return std::find(k5.begin(), k5.end(), number) != k5.end();
    }
    case Band::Ghz6:
        return number >= 1 && number <= 233 && (number - 1) % 4 == 0;
    }
    return false;
}

struct ChannelId
{
    Band band = Band::Ghz2_4;
    int number = 1;

    auto operator<=>(const ChannelId&) const = default;

    // Builds a channel after checking it against the band whitelist.
    static ChannelId make(Band band, int number)
    {
        if (!channel_valid_for_band(band, number))
        {
            throw DomainError("channel " + std::to_string(number) + " is not valid in the " +
                              std::string(band_name(band)) + " GHz band");
        }
        return ChannelId{band, number};
    }

    // "ch44@5"
    std::string to_string() const
    {
        return "ch" + std::to_string(number) + "@" + std::string(band_name(band));
    }
};

// String identifiers with a tag so AP and STA ids cannot be mixed up.
template <typename Tag>
struct Identifier
{
    std::string value;

    Identifier() = default;
    explicit Identifier(std::string v) : value(std::move(v)) {}

    auto operator<=>(const Identifier&) const = default;
    bool operator==(const Identifier&) const = default;

    const std::string& str() const { return value; }
};

struct ApTag;
struct StaTag;
using ApId = Identifier<ApTag>;
using StaId = Identifier<StaTag>;

// L-MAC index inside one MLD, 1-based as in l1, l2, l3.
struct LinkId
{
    int value = 1;

    auto operator<=>(const LinkId&) const = default;

    std::string to_string() const { return "l" + std::to_string(value); }
};

// Roaming behaviour of a station.
enum class Policy : std::uint8_t
{
    Proactive, // twin-driven, evaluated ahead of the station's motion
    Reactive,  // station asks the twin once its local quality collapses
    Legacy,    // station-driven RSSI roaming, break-before-make
};

inline std::string_view policy_name(Policy p)
{
    switch (p)
    {
    case Policy::Proactive:
        return "proactive";
    case Policy::Reactive:
        return "reactive";
    case Policy::Legacy:
        return "legacy";
    }
    return "?";
}

inline Policy parse_policy(std::string_view s)
{
    if (s == "proactive")
        return Policy::Proactive;
    if (s == "reactive")
        return Policy::Reactive;
    if (s == "legacy")
        return Policy::Legacy;
    throw ConfigError("unknown policy '" + std::string(s) + "'");
}

} // namespace witwin

template <typename Tag>
struct std::hash<witwin::Identifier<Tag>>
{
    std::size_t operator()(const witwin::Identifier<Tag>& id) const noexcept
    {
        return std::hash<std::string>{}(id.value);
    }
};
