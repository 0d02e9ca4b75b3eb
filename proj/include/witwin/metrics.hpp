// Run metrics and their text/CSV renderings.
#pragma once

#include <witwin/core.hpp>
#include <witwin/scenario.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace witwin
{

struct LatencyStats
{
    std::uint64_t count = 0;
    double mean = 0.0;
    double p50 = 0.0;
    double p99 = 0.0;
    double max = 0.0;
};

// Nearest-rank percentile of an ascending sample; 0 for an empty one.
inline double percentile_sorted(const std::vector<double>& sorted, double p)
{
    if (sorted.empty())
        return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

inline LatencyStats latency_stats(std::vector<double> samples)
{
    LatencyStats s;
    if (samples.empty())
        return s;
    std::sort(samples.begin(), samples.end());
    s.count = samples.size();
    double sum = 0.0;
    for (double v : samples)
        sum += v;
    s.mean = sum / static_cast<double>(samples.size());
    s.p50 = percentile_sorted(samples, 0.50);
    s.p99 = percentile_sorted(samples, 0.99);
    s.max = samples.back();
    return s;
}

struct FlowMetrics
{
    std::string label; // "flow0" or "all"
    std::uint64_t released = 0;
    std::uint64_t delivered = 0;
    std::uint64_t missed = 0; // includes lost
    std::uint64_t lost = 0;   // retry budget exhausted on every copy
    std::uint64_t in_flight = 0;
    std::uint64_t duplicates_dropped = 0;
    std::uint64_t late_copies = 0;
    LatencyStats latency;
};

struct StaMetrics
{
    StaId sta;
    Policy policy = Policy::Proactive;
    double gap_total = 0.0;
    double gap_max = 0.0;
    std::uint64_t gap_count = 0;
    std::uint64_t reassociations = 0;
    std::uint64_t advisories = 0; // accepted by the station
    std::uint64_t advisories_ignored = 0;
    std::uint64_t roam_requests = 0;
};

struct MetricsReport
{
    std::string scenario;
    std::string scenario_hash;
    Policy policy = Policy::Proactive;
    std::uint64_t seed = 0;
    std::vector<FlowMetrics> flows;
    FlowMetrics aggregate;
    std::vector<StaMetrics> stas;
    std::uint64_t advisories_issued = 0;
    std::uint64_t samples_ingested = 0;
    std::uint64_t events_processed = 0;

    double gap_total() const
    {
        double t = 0.0;
        for (const StaMetrics& s : stas)
            t += s.gap_total;
        return t;
    }

    double gap_max() const
    {
        double m = 0.0;
        for (const StaMetrics& s : stas)
            m = std::max(m, s.gap_max);
        return m;
    }

    template <typename F>
    std::uint64_t sum_sta(F field) const
    {
        std::uint64_t t = 0;
        for (const StaMetrics& s : stas)
            t += field(s);
        return t;
    }
};

inline std::string format_seconds(double s)
{
    return fmt::format("{:.9f}", s);
}

// Flat key=value rendering, one metric per line in a fixed order.
inline std::string metrics_to_text(const MetricsReport& r)
{
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    };
    kv("scenario", r.scenario);
    kv("scenario_hash", r.scenario_hash);
    kv("policy", std::string(policy_name(r.policy)));
    kv("seed", std::to_string(r.seed));
    kv("events_processed", std::to_string(r.events_processed));
    kv("samples_ingested", std::to_string(r.samples_ingested));
    kv("advisories_issued", std::to_string(r.advisories_issued));

    auto flow = [&](const std::string& prefix, const FlowMetrics& f) {
        kv(prefix + ".released", std::to_string(f.released));
        kv(prefix + ".delivered", std::to_string(f.delivered));
        kv(prefix + ".missed", std::to_string(f.missed));
        kv(prefix + ".lost", std::to_string(f.lost));
        kv(prefix + ".in_flight", std::to_string(f.in_flight));
        kv(prefix + ".duplicates_dropped", std::to_string(f.duplicates_dropped));
        kv(prefix + ".late_copies", std::to_string(f.late_copies));
        kv(prefix + ".latency_mean", format_seconds(f.latency.mean));
        kv(prefix + ".latency_p50", format_seconds(f.latency.p50));
        kv(prefix + ".latency_p99", format_seconds(f.latency.p99));
        kv(prefix + ".latency_max", format_seconds(f.latency.max));
    };
    for (const FlowMetrics& f : r.flows)
        flow(f.label, f);
    flow("all", r.aggregate);

    for (const StaMetrics& s : r.stas)
    {
        const std::string p = "sta." + s.sta.str();
        kv(p + ".policy", std::string(policy_name(s.policy)));
        kv(p + ".gap_total", format_seconds(s.gap_total));
        kv(p + ".gap_max", format_seconds(s.gap_max));
        kv(p + ".gap_count", std::to_string(s.gap_count));
        kv(p + ".reassociations", std::to_string(s.reassociations));
        kv(p + ".advisories", std::to_string(s.advisories));
        kv(p + ".advisories_ignored", std::to_string(s.advisories_ignored));
        kv(p + ".roam_requests", std::to_string(s.roam_requests));
    }
    return out;
}

inline constexpr std::string_view kMetricsCsvHeader =
    "policy,seed,released,delivered,missed,lost,in_flight,latency_mean,latency_p50,latency_p99,"
    "latency_max,gap_total,gap_max,gap_count,reassociations,advisories,advisories_ignored,"
    "roam_requests,scenario_hash";

inline std::string metrics_csv_row(const MetricsReport& r)
{
    const FlowMetrics& a = r.aggregate;
    return fmt::format(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", policy_name(r.policy), r.seed,
        a.released, a.delivered, a.missed, a.lost, a.in_flight, format_seconds(a.latency.mean),
        format_seconds(a.latency.p50), format_seconds(a.latency.p99),
        format_seconds(a.latency.max), format_seconds(r.gap_total()), format_seconds(r.gap_max()),
        r.sum_sta([](const StaMetrics& s) { return s.gap_count; }),
        r.sum_sta([](const StaMetrics& s) { return s.reassociations; }),
        r.sum_sta([](const StaMetrics& s) { return s.advisories; }),
        r.sum_sta([](const StaMetrics& s) { return s.advisories_ignored; }),
        r.sum_sta([](const StaMetrics& s) { return s.roam_requests; }), r.scenario_hash);
}

// Mean over seeds of every numeric column, labelled seed=mean.
inline std::string metrics_csv_mean_row(Policy policy, const std::vector<MetricsReport>& runs)
{
    const double n = static_cast<double>(std::max<std::size_t>(runs.size(), 1));
    auto mean = [&](auto field) {
        double t = 0.0;
        for (const MetricsReport& r : runs)
            t += static_cast<double>(field(r));
        return t / n;
    };
    const std::string hash = runs.empty() ? std::string() : runs.front().scenario_hash;
    return fmt::format(
        "{},mean,{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},"
        "{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{}",
        policy_name(policy), mean([](const MetricsReport& r) { return r.aggregate.released; }),
        mean([](const MetricsReport& r) { return r.aggregate.delivered; }),
        mean([](const MetricsReport& r) { return r.aggregate.missed; }),
        mean([](const MetricsReport& r) { return r.aggregate.lost; }),
        mean([](const MetricsReport& r) { return r.aggregate.in_flight; }),
        mean([](const MetricsReport& r) { return r.aggregate.latency.mean; }),
        mean([](const MetricsReport& r) { return r.aggregate.latency.p50; }),
        mean([](const MetricsReport& r) { return r.aggregate.latency.p99; }),
        mean([](const MetricsReport& r) { return r.aggregate.latency.max; }),
        mean([](const MetricsReport& r) { return r.gap_total(); }),
        mean([](const MetricsReport& r) { return r.gap_max(); }),
        mean([](const MetricsReport& r) {
            return r.sum_sta([](const StaMetrics& s) { return s.gap_count; });
        }),
        mean([](const MetricsReport& r) {
            return r.sum_sta([](const StaMetrics& s) { return s.reassociations; });
        }),
        mean([](const MetricsReport& r) {
            return r.sum_sta([](const StaMetrics& s) { return s.advisories; });
        }),
        mean([](const MetricsReport& r) {
            return r.sum_sta([](const StaMetrics& s) { return s.advisories_ignored; });
        }),
        mean([](const MetricsReport& r) {
            return r.sum_sta([](const StaMetrics& s) { return s.roam_requests; });
        }),
        hash);
}

} // namespace witwin
