// Ground truth of the simulated deployment: where nodes are and how good
// each AP channel really is at a given point. Only the simulator reads this
// directly; the twin sees it through noisy feature samples.
#pragma once

#include <witwin/core.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace witwin
{

using Rng = std::mt19937_64;

struct ApConfig
{
    ApId id;
    Position position;
    std::vector<ChannelId> channels;
    double tx_power_dbm = 20.0;

    bool has_channel(const ChannelId& c) const
    {
        return std::find(channels.begin(), channels.end(), c) != channels.end();
    }
};

struct Waypoint
{
    double t = 0.0;
    Position pos;
};

// Piecewise-linear path; clamped before the first and after the last waypoint.
struct Trajectory
{
    std::vector<Waypoint> waypoints;

    static Trajectory stationary(Position p) { return Trajectory{{Waypoint{0.0, p}}}; }
};

inline void validate_trajectory(const Trajectory& traj)
{
    if (traj.waypoints.empty())
        throw ConfigError("trajectory has no waypoints");
    for (std::size_t i = 1; i < traj.waypoints.size(); ++i)
    {
        if (!(traj.waypoints[i].t > traj.waypoints[i - 1].t))
            throw ConfigError("trajectory waypoint times must be strictly increasing (index " +
                              std::to_string(i) + ")");
    }
}

inline Position position_at(const Trajectory& traj, double t)
{
    if (traj.waypoints.empty())
        throw ConfigError("trajectory has no waypoints");
    if (t < 0.0)
        throw DomainError("position_at: negative time");

    const auto& wp = traj.waypoints;
    if (t <= wp.front().t)
        return wp.front().pos;
    if (t >= wp.back().t)
        return wp.back().pos;

    auto next = std::upper_bound(wp.begin(), wp.end(), t,
                                 [](double v, const Waypoint& w) { return v < w.t; });
    const Waypoint& b = *next;
    const Waypoint& a = *(next - 1);
    const double f = (t - a.t) / (b.t - a.t);
    return {a.pos.x + f * (b.pos.x - a.pos.x), a.pos.y + f * (b.pos.y - a.pos.y)};
}

struct BandPropagation
{
    double pathloss_exponent = 3.0;
    double ref_loss_db = 40.0; // loss at 1 m
    double fdr_midpoint_snr_db = 20.0;
    double fdr_steepness_db = 3.0;
};

struct InterferenceZone
{
    ChannelId channel;
    BoundingBox area;
    double fdr_penalty = 0.0; // multiplicative, in [0,1]
};

struct RadioField
{
    std::array<BandPropagation, kBandCount> bands{};
    double shadowing_sigma_db = 0.0;
    double noise_floor_dbm = -95.0;
    double fdr_min = 0.0;
    double fdr_max = 0.999;
    std::vector<InterferenceZone> interference_zones;

    const BandPropagation& band(Band b) const { return bands[band_index(b)]; }
    BandPropagation& band(Band b) { return bands[band_index(b)]; }
};

namespace detail
{

inline void require_channel(const ApConfig& ap, const ChannelId& c)
{
    if (!ap.has_channel(c))
        throw DomainError("channel " + c.to_string() + " is not configured on AP " + ap.id.str());
}

inline double logistic(double z)
{
    return 1.0 / (1.0 + std::exp(-z));
}

} // namespace detail

// Log-distance mean received power, no shadowing.
inline double mean_rssi_dbm(const RadioField& field, const Position& pos, const ApConfig& ap,
                            const ChannelId& c)
{
    detail::require_channel(ap, c);
    const BandPropagation& bp = field.band(c.band);
    const double d = std::max(distance(pos, ap.position), 1.0);
    return ap.tx_power_dbm - bp.ref_loss_db - 10.0 * bp.pathloss_exponent * std::log10(d);
}

// One RSSI measurement. With sigma = 0 no random draw is consumed.
inline double rssi_at(const RadioField& field, const Position& pos, const ApConfig& ap,
                      const ChannelId& c, Rng& rng)
{
    double rssi = mean_rssi_dbm(field, pos, ap, c);
    if (field.shadowing_sigma_db > 0.0)
        rssi += std::normal_distribution<double>(0.0, field.shadowing_sigma_db)(rng);
    return rssi;
}

inline double ground_truth_fdr(const RadioField& field, const Position& pos, const ApConfig& ap,
                               const ChannelId& c)
{
    const BandPropagation& bp = field.band(c.band);
    const double snr = mean_rssi_dbm(field, pos, ap, c) - field.noise_floor_dbm;
    const double z = (snr - bp.fdr_midpoint_snr_db) / bp.fdr_steepness_db;

    // Beyond ten steepness units the curve is treated as saturated.
    double fdr = z >= 10.0 ? field.fdr_max : field.fdr_max * detail::logistic(z);
    for (const InterferenceZone& zone : field.interference_zones)
    {
        if (zone.channel == c && zone.area.contains(pos))
            fdr *= 1.0 - zone.fdr_penalty;
    }
    return std::clamp(fdr, field.fdr_min, field.fdr_max);
}

// Bernoulli draw against a success probability; consumes exactly one engine output.
inline bool draw_success(double p, Rng& rng)
{
    return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng);
}

inline bool attempt_succeeds(const RadioField& field, const Position& pos, const ApConfig& ap,
                             const ChannelId& c, Rng& rng)
{
    return draw_success(ground_truth_fdr(field, pos, ap, c), rng);
}

} // namespace witwin
