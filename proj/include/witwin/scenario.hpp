// Scenario description and its JSON loader. Every validation error names
// the offending entry by its path in the document, e.g. aps[1].channels.
#pragma once

#include <witwin/core.hpp>
#include <witwin/environment.hpp>
#include <witwin/roaming.hpp>
#include <witwin/twin_model.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace witwin
{

inline constexpr int kScenarioVersion = 1;

enum class Direction : std::uint8_t
{
    Uplink,   // STA -> PLC
    Downlink, // PLC -> STA
};

inline std::string_view direction_name(Direction d)
{
    return d == Direction::Uplink ? "uplink" : "downlink";
}

struct StaSpec
{
    StaId id;
    std::size_t links = 1;
    Trajectory trajectory;
    std::optional<Policy> policy; // overrides the run policy
    std::optional<ApId> initial_ap;
};

// Periodic time-sensitive traffic between the wired endpoint and one STA.
struct TrafficFlow
{
    StaId sta;
    Direction direction = Direction::Uplink;
    double period = 0.01;
    double deadline = 0.01;
    double offset = 0.0;
};

struct TransmissionParams
{
    double attempt_time = 0.002;
    int max_retries = 7;
    double wired_delay = 0.001;
};

struct StaBehavior
{
    double handshake_delay = 0.05;
    double check_period = 0.5;
    double probe_interval = 0.1; // 0 disables keep-alive probes
    double local_alpha = 0.3;
    double reactive_floor = 0.5;
    double reactive_cooldown = 2.0;
    double legacy_rssi_delta_db = 5.0;
    bool duplicate_mode = false;
    std::size_t dedup_window = 1024;
};

// Offline site survey that warms the twin up before the run starts.
struct SurveyParams
{
    bool enabled = false;
    double spacing = 2.0;
    int attempts = 100; // per reported sample
    int passes = 3;     // samples reported at each raster point
};

struct TwinConfig
{
    TwinParams params;
    SurveyParams survey;
    std::optional<std::filesystem::path> training_log;
};

struct Scenario
{
    int version = kScenarioVersion;
    std::string name;
    double duration = 0.0;
    BoundingBox bounds;
    RadioField radio;
    std::vector<ApConfig> aps;
    std::vector<StaSpec> stas;
    std::vector<TrafficFlow> flows;
    TwinConfig twin;
    ControllerConfig controller;
    StaBehavior sta_behavior;
    TransmissionParams transmission;
    double report_window = 1.0;
    std::string hash; // FNV-1a of the canonical JSON text

    const ApConfig& ap(const ApId& id) const
    {
        for (const ApConfig& a : aps)
        {
            if (a.id == id)
                return a;
        }
        throw DomainError("unknown AP " + id.str());
    }
};

namespace detail
{

using nlohmann::json;

inline std::uint64_t fnv1a(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i)
    {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// Cursor into the document that knows its own path for error messages.
class Node
{
  public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return j_; }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ConfigError((path_.empty() ? std::string("scenario") : path_) + ": " + what);
    }

    void expect_object(std::initializer_list<std::string_view> allowed) const
    {
        if (!j_.is_object())
            fail("expected an object");
        for (const auto& [key, value] : j_.items())
        {
            bool ok = false;
            for (std::string_view a : allowed)
                ok = ok || a == key;
            if (!ok)
                Node(value, child_path(key)).fail("unknown key");
        }
    }

    bool has(std::string_view key) const { return j_.contains(std::string(key)); }

    Node at(std::string_view key) const
    {
        if (!has(key))
            Node(j_, child_path(key)).fail("missing");
        return Node(j_.at(std::string(key)), child_path(key));
    }

    Node at(std::size_t i) const
    {
        return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]");
    }

    std::size_t array_size() const
    {
        if (!j_.is_array())
            fail("expected an array");
        return j_.size();
    }

    double number() const
    {
        if (!j_.is_number())
            fail("expected a number");
        const double v = j_.get<double>();
        if (!std::isfinite(v))
            fail("not finite");
        return v;
    }

    long long integer() const
    {
        if (!j_.is_number_integer())
            fail("expected an integer");
        return j_.get<long long>();
    }

    std::string string() const
    {
        if (!j_.is_string())
            fail("expected a string");
        return j_.get<std::string>();
    }

    bool boolean() const
    {
        if (!j_.is_boolean())
            fail("expected a boolean");
        return j_.get<bool>();
    }

    double number_or(std::string_view key, double fallback) const
    {
        return has(key) ? at(key).number() : fallback;
    }

    long long integer_or(std::string_view key, long long fallback) const
    {
        return has(key) ? at(key).integer() : fallback;
    }

    bool boolean_or(std::string_view key, bool fallback) const
    {
        return has(key) ? at(key).boolean() : fallback;
    }

  private:
    std::string child_path(std::string_view key) const
    {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const json& j_;
    std::string path_;
};

inline std::string parse_identifier(const Node& n)
{
    std::string id = n.string();
    if (id.empty())
        n.fail("identifier is empty");
    for (char c : id)
    {
        if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r')
            n.fail("identifier must not contain commas or whitespace");
    }
    return id;
}

inline Position parse_position(const Node& n)
{
    n.expect_object({"x", "y", "z"});
    Position p{n.at("x").number(), n.at("y").number()};
    if (n.has("z") && n.at("z").number() != 0.0)
        n.at("z").fail("z is reserved and must be 0");
    return p;
}

inline BoundingBox parse_box(const Node& n)
{
    n.expect_object({"min_x", "min_y", "max_x", "max_y"});
    BoundingBox b{n.at("min_x").number(), n.at("min_y").number(), n.at("max_x").number(),
                  n.at("max_y").number()};
    if (!(b.max_x > b.min_x && b.max_y > b.min_y))
        n.fail("box must have positive extent");
    return b;
}

inline ChannelId parse_channel(const Node& n)
{
    n.expect_object({"band", "number"});
    Band band{};
    try
    {
        band = parse_band(n.at("band").string());
    }
    catch (const ParseError& e)
    {
        n.at("band").fail(e.what());
    }
    const long long number = n.at("number").integer();
    if (!channel_valid_for_band(band, static_cast<int>(number)))
        n.at("number").fail("channel " + std::to_string(number) + " is not valid in band " +
                            std::string(band_name(band)));
    return ChannelId{band, static_cast<int>(number)};
}

inline void parse_radio(const Node& n, RadioField& radio)
{
    n.expect_object({"bands", "shadowing_sigma_db", "noise_floor_dbm", "fdr_min", "fdr_max",
                     "interference_zones"});
    if (n.has("bands"))
    {
        const Node bands = n.at("bands");
        bands.expect_object({"2.4", "5", "6"});
        for (Band b : {Band::Ghz2_4, Band::Ghz5, Band::Ghz6})
        {
            if (!bands.has(band_name(b)))
                continue;
            const Node bn = bands.at(band_name(b));
            bn.expect_object(
                {"pathloss_exponent", "ref_loss_db", "fdr_midpoint_snr_db", "fdr_steepness_db"});
            BandPropagation& bp = radio.band(b);
            bp.pathloss_exponent = bn.number_or("pathloss_exponent", bp.pathloss_exponent);
            bp.ref_loss_db = bn.number_or("ref_loss_db", bp.ref_loss_db);
            bp.fdr_midpoint_snr_db = bn.number_or("fdr_midpoint_snr_db", bp.fdr_midpoint_snr_db);
            bp.fdr_steepness_db = bn.number_or("fdr_steepness_db", bp.fdr_steepness_db);
            if (!(bp.pathloss_exponent > 0.0))
                bn.at("pathloss_exponent").fail("must be > 0");
            if (!(bp.fdr_steepness_db > 0.0))
                bn.at("fdr_steepness_db").fail("must be > 0");
        }
    }
    radio.shadowing_sigma_db = n.number_or("shadowing_sigma_db", radio.shadowing_sigma_db);
    if (radio.shadowing_sigma_db < 0.0)
        n.at("shadowing_sigma_db").fail("must be >= 0");
    radio.noise_floor_dbm = n.number_or("noise_floor_dbm", radio.noise_floor_dbm);
    radio.fdr_min = n.number_or("fdr_min", radio.fdr_min);
    radio.fdr_max = n.number_or("fdr_max", radio.fdr_max);
    if (!(radio.fdr_min >= 0.0 && radio.fdr_min <= radio.fdr_max && radio.fdr_max <= 1.0))
        n.fail("need 0 <= fdr_min <= fdr_max <= 1");
    if (n.has("interference_zones"))
    {
        const Node zones = n.at("interference_zones");
        for (std::size_t i = 0; i < zones.array_size(); ++i)
        {
            const Node z = zones.at(i);
            z.expect_object({"channel", "area", "fdr_penalty"});
            InterferenceZone zone;
            zone.channel = parse_channel(z.at("channel"));
            zone.area = parse_box(z.at("area"));
            zone.fdr_penalty = z.at("fdr_penalty").number();
            if (zone.fdr_penalty < 0.0 || zone.fdr_penalty > 1.0)
                z.at("fdr_penalty").fail("must be in [0,1]");
            radio.interference_zones.push_back(zone);
        }
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace detail

inline Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {})
{
    using detail::Node;
    const Node root(doc, "");
    root.expect_object({"version", "name", "duration", "bounds", "radio", "aps", "stas", "flows",
                        "twin", "controller", "sta_behavior", "transmission", "report_window"});

    Scenario sc;
    sc.version = static_cast<int>(root.at("version").integer());
    if (sc.version != kScenarioVersion)
        root.at("version").fail("unsupported version " + std::to_string(sc.version));
    sc.name = root.has("name") ? root.at("name").string() : std::string("unnamed");
    sc.duration = root.at("duration").number();
    if (!(sc.duration > 0.0))
        root.at("duration").fail("must be > 0");
    sc.bounds = detail::parse_box(root.at("bounds"));
    sc.report_window = root.number_or("report_window", sc.report_window);
    if (!(sc.report_window > 0.0))
        root.at("report_window").fail("must be > 0");

    if (root.has("radio"))
        detail::parse_radio(root.at("radio"), sc.radio);

    // Access points.
    const Node aps = root.at("aps");
    if (aps.array_size() == 0)
        aps.fail("at least one AP is required");
    std::set<std::string> ap_ids;
    for (std::size_t i = 0; i < aps.array_size(); ++i)
    {
        const Node a = aps.at(i);
        a.expect_object({"id", "position", "channels", "tx_power_dbm"});
        ApConfig ap;
        ap.id = ApId{detail::parse_identifier(a.at("id"))};
        if (!ap_ids.insert(ap.id.str()).second)
            a.at("id").fail("duplicate AP id '" + ap.id.str() + "'");
        ap.position = detail::parse_position(a.at("position"));
        if (!sc.bounds.contains(ap.position))
            a.at("position").fail("outside the bounding box");
        ap.tx_power_dbm = a.number_or("tx_power_dbm", ap.tx_power_dbm);
        const Node ch = a.at("channels");
        if (ch.array_size() < 1 || ch.array_size() > 3)
            ch.fail("an AP has 1 to 3 channels, got " + std::to_string(ch.array_size()));
        for (std::size_t k = 0; k < ch.array_size(); ++k)
        {
            const ChannelId c = detail::parse_channel(ch.at(k));
            if (ap.has_channel(c))
                ch.at(k).fail("duplicate channel " + c.to_string());
            ap.channels.push_back(c);
        }
        sc.aps.push_back(std::move(ap));
    }
    std::size_t min_channels = 3;
    for (const ApConfig& ap : sc.aps)
        min_channels = std::min(min_channels, ap.channels.size());

    // Stations.
    std::set<std::string> sta_ids;
    if (root.has("stas"))
    {
        const Node stas = root.at("stas");
        for (std::size_t i = 0; i < stas.array_size(); ++i)
        {
            const Node s = stas.at(i);
            s.expect_object({"id", "links", "trajectory", "policy", "initial_ap"});
            StaSpec spec;
            spec.id = StaId{detail::parse_identifier(s.at("id"))};
            if (!sta_ids.insert(spec.id.str()).second)
                s.at("id").fail("duplicate STA id '" + spec.id.str() + "'");
            if (ap_ids.count(spec.id.str()) != 0)
                s.at("id").fail("STA id collides with an AP id");
            const long long links = s.at("links").integer();
            if (links < 1 || links > 3)
                s.at("links").fail("a station has 1 to 3 links");
            spec.links = static_cast<std::size_t>(links);
            if (spec.links > min_channels)
                s.at("links").fail("every AP must offer a channel for each link");

            const Node traj = s.at("trajectory");
            if (traj.array_size() == 0)
                traj.fail("trajectory has no waypoints");
            for (std::size_t k = 0; k < traj.array_size(); ++k)
            {
                const Node w = traj.at(k);
                w.expect_object({"t", "x", "y"});
                Waypoint wp{w.at("t").number(), {w.at("x").number(), w.at("y").number()}};
                if (wp.t < 0.0)
                    w.at("t").fail("must be >= 0");
                if (!sc.bounds.contains(wp.pos))
                    w.fail("waypoint outside the bounding box");
                if (!spec.trajectory.waypoints.empty() &&
                    !(wp.t > spec.trajectory.waypoints.back().t))
                    w.at("t").fail("waypoint times must be strictly increasing");
                spec.trajectory.waypoints.push_back(wp);
            }
            if (s.has("policy"))
            {
                try
                {
                    spec.policy = parse_policy(s.at("policy").string());
                }
                catch (const ConfigError& e)
                {
                    s.at("policy").fail(e.what());
                }
            }
            if (s.has("initial_ap"))
            {
                const std::string ap = s.at("initial_ap").string();
                if (ap_ids.count(ap) == 0)
                    s.at("initial_ap").fail("unknown AP '" + ap + "'");
                spec.initial_ap = ApId{ap};
            }
            sc.stas.push_back(std::move(spec));
        }
    }

    // Traffic.
    if (root.has("flows"))
    {
        const Node flows = root.at("flows");
        for (std::size_t i = 0; i < flows.array_size(); ++i)
        {
            const Node f = flows.at(i);
            f.expect_object({"sta", "direction", "period", "deadline", "offset"});
            TrafficFlow flow;
            flow.sta = StaId{f.at("sta").string()};
            if (sta_ids.count(flow.sta.str()) == 0)
                f.at("sta").fail("unknown STA '" + flow.sta.str() + "'");
            const std::string dir = f.at("direction").string();
            if (dir == "uplink")
                flow.direction = Direction::Uplink;
            else if (dir == "downlink")
                flow.direction = Direction::Downlink;
            else
                f.at("direction").fail("expected uplink or downlink");
            flow.period = f.at("period").number();
            if (!(flow.period > 0.0))
                f.at("period").fail("must be > 0");
            flow.deadline = f.number_or("deadline", flow.period);
            if (!(flow.deadline > 0.0 && flow.deadline <= flow.period))
                f.at("deadline").fail("must be in (0, period]");
            flow.offset = f.number_or("offset", 0.0);
            if (flow.offset < 0.0)
                f.at("offset").fail("must be >= 0");
            sc.flows.push_back(flow);
        }
    }

    if (root.has("twin"))
    {
        const Node t = root.at("twin");
        t.expect_object(
            {"cell_size", "prior_fdr", "decay_alpha", "min_samples", "survey", "training_log"});
        TwinParams& p = sc.twin.params;
        p.cell_size = t.number_or("cell_size", p.cell_size);
        if (!(p.cell_size > 0.0))
            t.at("cell_size").fail("must be > 0");
        p.prior_fdr = t.number_or("prior_fdr", p.prior_fdr);
        if (p.prior_fdr < 0.0 || p.prior_fdr > 1.0)
            t.at("prior_fdr").fail("must be in [0,1]");
        p.decay_alpha = t.number_or("decay_alpha", p.decay_alpha);
        if (!(p.decay_alpha > 0.0 && p.decay_alpha <= 1.0))
            t.at("decay_alpha").fail("must be in (0,1]");
        const long long ms = t.integer_or("min_samples", static_cast<long long>(p.min_samples));
        if (ms < 1)
            t.at("min_samples").fail("must be >= 1");
        p.min_samples = static_cast<std::uint64_t>(ms);
        if (t.has("survey"))
        {
            const Node s = t.at("survey");
            s.expect_object({"enabled", "spacing", "attempts", "passes"});
            SurveyParams& sp = sc.twin.survey;
            sp.enabled = s.boolean_or("enabled", true);
            sp.spacing = s.number_or("spacing", sp.spacing);
            if (!(sp.spacing > 0.0))
                s.at("spacing").fail("must be > 0");
            sp.attempts = static_cast<int>(s.integer_or("attempts", sp.attempts));
            if (sp.attempts < 1)
                s.at("attempts").fail("must be >= 1");
            sp.passes = static_cast<int>(s.integer_or("passes", sp.passes));
            if (sp.passes < 1)
                s.at("passes").fail("must be >= 1");
        }
        if (t.has("training_log"))
            sc.twin.training_log = detail::resolve(base_dir, t.at("training_log").string());
    }

    if (root.has("controller"))
    {
        const Node c = root.at("controller");
        c.expect_object({"hysteresis", "evaluation_period", "lookahead", "advisory_cooldown"});
        ControllerConfig& cfg = sc.controller;
        cfg.hysteresis_threshold = c.number_or("hysteresis", cfg.hysteresis_threshold);
        cfg.evaluation_period = c.number_or("evaluation_period", cfg.evaluation_period);
        cfg.lookahead = c.number_or("lookahead", cfg.lookahead);
        cfg.advisory_cooldown = c.number_or("advisory_cooldown", cfg.advisory_cooldown);
        try
        {
            validate(cfg);
        }
        catch (const ConfigError& e)
        {
            c.fail(e.what());
        }
    }

    if (root.has("sta_behavior"))
    {
        const Node b = root.at("sta_behavior");
        b.expect_object({"handshake_delay", "check_period", "probe_interval", "local_alpha",
                         "reactive_floor", "reactive_cooldown", "legacy_rssi_delta_db",
                         "duplicate_mode", "dedup_window"});
        StaBehavior& sb = sc.sta_behavior;
        sb.handshake_delay = b.number_or("handshake_delay", sb.handshake_delay);
        if (!(sb.handshake_delay > 0.0))
            b.at("handshake_delay").fail("must be > 0");
        sb.check_period = b.number_or("check_period", sb.check_period);
        if (!(sb.check_period > 0.0))
            b.at("check_period").fail("must be > 0");
        sb.probe_interval = b.number_or("probe_interval", sb.probe_interval);
        if (sb.probe_interval < 0.0)
            b.at("probe_interval").fail("must be >= 0");
        sb.local_alpha = b.number_or("local_alpha", sb.local_alpha);
        if (!(sb.local_alpha > 0.0 && sb.local_alpha <= 1.0))
            b.at("local_alpha").fail("must be in (0,1]");
        sb.reactive_floor = b.number_or("reactive_floor", sb.reactive_floor);
        if (sb.reactive_floor < 0.0 || sb.reactive_floor > 1.0)
            b.at("reactive_floor").fail("must be in [0,1]");
        sb.reactive_cooldown = b.number_or("reactive_cooldown", sb.reactive_cooldown);
        if (!(sb.reactive_cooldown > 0.0))
            b.at("reactive_cooldown").fail("must be > 0");
        sb.legacy_rssi_delta_db = b.number_or("legacy_rssi_delta_db", sb.legacy_rssi_delta_db);
        if (sb.legacy_rssi_delta_db < 0.0)
            b.at("legacy_rssi_delta_db").fail("must be >= 0");
        sb.duplicate_mode = b.boolean_or("duplicate_mode", sb.duplicate_mode);
        const long long dw = b.integer_or("dedup_window", static_cast<long long>(sb.dedup_window));
        if (dw < 1)
            b.at("dedup_window").fail("must be >= 1");
        sb.dedup_window = static_cast<std::size_t>(dw);
    }

    if (root.has("transmission"))
    {
        const Node t = root.at("transmission");
        t.expect_object({"attempt_time", "max_retries", "wired_delay"});
        TransmissionParams& tp = sc.transmission;
        tp.attempt_time = t.number_or("attempt_time", tp.attempt_time);
        if (!(tp.attempt_time > 0.0))
            t.at("attempt_time").fail("must be > 0");
        tp.max_retries = static_cast<int>(t.integer_or("max_retries", tp.max_retries));
        if (tp.max_retries < 0)
            t.at("max_retries").fail("must be >= 0");
        tp.wired_delay = t.number_or("wired_delay", tp.wired_delay);
        if (tp.wired_delay < 0.0)
            t.at("wired_delay").fail("must be >= 0");
    }

    sc.hash = detail::hex64(detail::fnv1a(doc.dump()));
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse(buf.str());
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ConfigError("scenario '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(doc, path.parent_path());
}

} // namespace witwin
