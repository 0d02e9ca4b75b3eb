// Feature samples reported by stations to the twin, the per-link windows
// they are summarized from, and the line codec of the sample log.
#pragma once

#include <witwin/core.hpp>

#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace witwin
{

// One observation of a (source, destination, channel) link. The feature set
// is fixed to FDR, RSSI and attempts; further channel-quality features would
// extend this struct and the log columns together.
struct FeatureSample
{
    double t = 0.0;
    std::string src;
    std::string dst;
    ChannelId channel;
    Position pos;
    double fdr_observed = 0.0;
    double rssi_dbm = 0.0;
    double attempts_avg = 1.0;

    bool operator==(const FeatureSample&) const = default;

    // x<s,d,c>, e.g. x<3,5,ch1@2.4>
    std::string tag() const { return "x<" + src + "," + dst + "," + channel.to_string() + ">"; }
};

// Counters of one link over the current reporting window. Every on-air
// transmission counts as one attempted frame.
struct SampleWindow
{
    double window_len = 1.0;
    std::uint64_t attempted = 0;
    std::uint64_t delivered = 0;
    double rssi_sum_dbm = 0.0;

    void record_attempt(bool success, double rssi_dbm)
    {
        ++attempted;
        if (success)
            ++delivered;
        rssi_sum_dbm += rssi_dbm;
    }

    void reset()
    {
        attempted = 0;
        delivered = 0;
        rssi_sum_dbm = 0.0;
    }

    std::optional<double> fdr() const
    {
        if (attempted == 0)
            return std::nullopt;
        return static_cast<double>(delivered) / static_cast<double>(attempted);
    }
};

// Which link a window belongs to and where the reporter stands when it closes.
struct LinkContext
{
    std::string src;
    std::string dst;
    ChannelId channel;
    Position pos;
};

// Closes the window: emits a sample (or nothing for an idle window) and resets.
inline std::optional<FeatureSample> collect_sample(SampleWindow& window, const LinkContext& link,
                                                   double t)
{
    if (window.attempted == 0)
    {
        window.reset();
        return std::nullopt;
    }
    FeatureSample s;
    s.t = t;
    s.src = link.src;
    s.dst = link.dst;
    s.channel = link.channel;
    s.pos = link.pos;
    s.fdr_observed = *window.fdr();
    s.rssi_dbm = window.rssi_sum_dbm / static_cast<double>(window.attempted);
    s.attempts_avg = static_cast<double>(window.attempted) /
                     static_cast<double>(std::max<std::uint64_t>(window.delivered, 1));
    window.reset();
    return s;
}

inline constexpr std::string_view kSampleLogHeader = "t,src,dst,band,channel,x,y,z,fdr,rssi,attempts";

namespace detail
{

// Shortest representation that parses back to the same double.
inline void append_double(std::string& out, double v)
{
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

inline double parse_double_field(std::string_view text, std::string_view field)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
        throw ParseError(std::string(field) + " is not a number: '" + std::string(text) + "'");
    return v;
}

inline int parse_int_field(std::string_view text, std::string_view field)
{
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError(std::string(field) + " is not an integer: '" + std::string(text) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true)
    {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos)
        {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace detail

inline std::string encode_sample(const FeatureSample& s)
{
    std::string out;
    out.reserve(96);
    detail::append_double(out, s.t);
    out += ',';
    out += s.src;
    out += ',';
    out += s.dst;
    out += ',';
    out += band_name(s.channel.band);
    out += ',';
    out += std::to_string(s.channel.number);
    out += ',';
    detail::append_double(out, s.pos.x);
    out += ',';
    detail::append_double(out, s.pos.y);
    out += ",0,"; // z is reserved
    detail::append_double(out, s.fdr_observed);
    out += ',';
    detail::append_double(out, s.rssi_dbm);
    out += ',';
    detail::append_double(out, s.attempts_avg);
    return out;
}

inline FeatureSample decode_sample(std::string_view line)
{
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    const auto f = detail::split(line, ',');
    if (f.size() != 11)
        throw ParseError("expected 11 fields, got " + std::to_string(f.size()));

    FeatureSample s;
    s.t = detail::parse_double_field(f[0], "t");
    if (s.t < 0.0)
        throw ParseError("t out of range");
    if (f[1].empty())
        throw ParseError("src is empty");
    if (f[2].empty())
        throw ParseError("dst is empty");
    s.src = std::string(f[1]);
    s.dst = std::string(f[2]);

    Band band{};
    try
    {
        band = parse_band(f[3]);
    }
    catch (const ParseError&)
    {
        throw ParseError("band is invalid: '" + std::string(f[3]) + "'");
    }
    const int number = detail::parse_int_field(f[4], "channel");
    if (!channel_valid_for_band(band, number))
        throw ParseError("channel out of range for band");
    s.channel = ChannelId{band, number};

    s.pos.x = detail::parse_double_field(f[5], "x");
    s.pos.y = detail::parse_double_field(f[6], "y");
    if (detail::parse_double_field(f[7], "z") != 0.0)
        throw ParseError("z must be 0");
    s.fdr_observed = detail::parse_double_field(f[8], "fdr");
    if (s.fdr_observed < 0.0 || s.fdr_observed > 1.0)
        throw ParseError("fdr out of range");
    s.rssi_dbm = detail::parse_double_field(f[9], "rssi");
    s.attempts_avg = detail::parse_double_field(f[10], "attempts");
    if (s.attempts_avg < 1.0)
        throw ParseError("attempts out of range");
    return s;
}

inline void write_sample_log(std::ostream& os, const std::vector<FeatureSample>& samples)
{
    os << kSampleLogHeader << '\n';
    for (const FeatureSample& s : samples)
        os << encode_sample(s) << '\n';
}

inline std::vector<FeatureSample> read_sample_log(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw ParseError("sample log is empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != kSampleLogHeader)
        throw ParseError("sample log header mismatch");

    std::vector<FeatureSample> samples;
    std::size_t lineno = 1;
    while (std::getline(is, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        try
        {
            samples.push_back(decode_sample(line));
        }
        catch (const ParseError& e)
        {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return samples;
}

// A sample on its way over the wired backbone; lossless, fixed delay.
struct IngestEvent
{
    SimTime at{0};
    FeatureSample sample;
};

inline IngestEvent deliver_to_twin(FeatureSample sample, SimTime wired_delay)
{
    if (wired_delay < SimTime::zero())
        throw DomainError("wired delay must be non-negative");
    const SimTime at = from_seconds(sample.t) + wired_delay;
    return IngestEvent{at, std::move(sample)};
}

} // namespace witwin
