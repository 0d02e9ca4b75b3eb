// Network-driven roaming decisions made by the twin: AP scoring, target
// selection with hysteresis, and the order in which an MLD moves its links.
#pragma once

#include <witwin/core.hpp>
#include <witwin/environment.hpp>
#include <witwin/twin_model.hpp>

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace witwin
{

struct ControllerConfig
{
    double hysteresis_threshold = 0.15; // in cost units
    double evaluation_period = 0.5;     // s
    double lookahead = 1.0;             // s
    double advisory_cooldown = 5.0;     // s
};

inline void validate(const ControllerConfig& cfg)
{
    if (!(cfg.hysteresis_threshold >= 0.0))
        throw ConfigError("controller.hysteresis must be >= 0");
    if (!(cfg.evaluation_period > 0.0))
        throw ConfigError("controller.evaluation_period must be > 0");
    if (!(cfg.lookahead >= 0.0))
        throw ConfigError("controller.lookahead must be >= 0");
    if (!(cfg.advisory_cooldown > 0.0))
        throw ConfigError("controller.advisory_cooldown must be > 0");
}

struct RoamingAdvisory
{
    StaId sta_id;
    ApId from_ap;
    ApId target_ap;
    std::vector<LinkId> migration_order;
    double issued_at = 0.0;
    double expected_gain = 0.0;
    Policy trigger = Policy::Proactive;
};

// Sum over the AP's channels of (1 - h^). Lower is better; no normalization
// by channel count.
inline double ap_cost(const HeatmapModel& model, const Position& pos, const ApConfig& ap)
{
    double cost = 0.0;
    for (const ChannelId& c : ap.channels)
        cost += 1.0 - model.estimate(pos, ap.id.str(), c);
    return cost;
}

struct ApChoice
{
    ApId ap;
    double cost = 0.0;
};

// argmin of ap_cost over the candidates; equal costs go to the smallest id.
inline ApChoice select_best_ap(const HeatmapModel& model, const Position& pos,
                               std::span<const ApConfig> candidates)
{
    if (candidates.empty())
        throw DomainError("select_best_ap: empty candidate set");
    std::optional<ApChoice> best;
    for (const ApConfig& ap : candidates)
    {
        const double cost = ap_cost(model, pos, ap);
        if (!best || cost < best->cost || (cost == best->cost && ap.id < best->ap))
            best = ApChoice{ap.id, cost};
    }
    return *best;
}

struct PositionReport
{
    double t = 0.0;
    Position pos;
};

// Constant-velocity projection from the two latest reports, clamped to bounds.
inline std::optional<Position> extrapolate_position(std::span<const PositionReport> history,
                                                    double lookahead, const BoundingBox& bounds)
{
    if (history.empty())
        return std::nullopt;
    const PositionReport& last = history.back();
    if (history.size() == 1 || lookahead == 0.0)
        return bounds.clamp(last.pos);
    const PositionReport& prev = history[history.size() - 2];
    const double dt = last.t - prev.t;
    if (!(dt > 0.0))
        return bounds.clamp(last.pos);
    const double vx = (last.pos.x - prev.pos.x) / dt;
    const double vy = (last.pos.y - prev.pos.y) / dt;
    return bounds.clamp({last.pos.x + vx * lookahead, last.pos.y + vy * lookahead});
}

inline bool should_trigger(double current_cost, double best_cost, const ControllerConfig& cfg,
                           std::optional<double> last_advisory_at, double now)
{
    if (!(current_cost - best_cost > cfg.hysteresis_threshold))
        return false;
    return !last_advisory_at || now - *last_advisory_at >= cfg.advisory_cooldown;
}

// Total link quality seen across the migration phases for a given order.
// In phase j link order[j] is in handshake and carries nothing; earlier links
// already sit on the new AP, later ones still on the old AP. Qualities are
// indexed by LinkId::value - 1.
inline double migration_score(std::span<const LinkId> order, std::span<const double> old_quality,
                              std::span<const double> new_quality)
{
    double total = 0.0;
    for (std::size_t phase = 0; phase < order.size(); ++phase)
    {
        for (std::size_t i = 0; i < order.size(); ++i)
        {
            const auto k = static_cast<std::size_t>(order[i].value - 1);
            if (i < phase)
                total += new_quality[k];
            else if (i > phase)
                total += old_quality[k];
        }
    }
    return total;
}

// Exhaustive search over all orders; ties go to the lexicographically
// smallest sequence because permutations are visited in that order.
inline std::vector<LinkId> plan_migration_order(std::vector<LinkId> links,
                                                std::span<const double> old_quality,
                                                std::span<const double> new_quality)
{
    if (links.empty())
        throw DomainError("plan_migration_order: no links");
    if (links.size() > 3)
        throw DomainError("plan_migration_order: at most 3 links");
    for (const LinkId& l : links)
    {
        const auto k = static_cast<std::size_t>(l.value - 1);
        if (l.value < 1 || k >= old_quality.size() || k >= new_quality.size())
            throw DomainError("plan_migration_order: no quality for link " + l.to_string());
    }

    std::sort(links.begin(), links.end());
    std::vector<LinkId> best = links;
    double best_score = migration_score(links, old_quality, new_quality);
    while (std::next_permutation(links.begin(), links.end()))
    {
        const double score = migration_score(links, old_quality, new_quality);
        if (score > best_score)
        {
            best_score = score;
            best = links;
        }
    }
    return best;
}

// Link k uses the k-th configured channel on both APs.
inline std::vector<LinkId> plan_migration_order(const HeatmapModel& model, const Position& pos,
                                                const ApConfig& from_ap, const ApConfig& to_ap,
                                                const std::vector<LinkId>& links)
{
    if (links.empty())
        throw DomainError("plan_migration_order: no links");
    std::vector<double> old_q(3, 0.0);
    std::vector<double> new_q(3, 0.0);
    for (const LinkId& l : links)
    {
        const auto k = static_cast<std::size_t>(l.value - 1);
        if (l.value < 1 || k >= from_ap.channels.size() || k >= to_ap.channels.size())
            throw DomainError("plan_migration_order: link " + l.to_string() +
                              " has no channel on both APs");
        old_q[k] = model.estimate(pos, from_ap.id.str(), from_ap.channels[k]);
        new_q[k] = model.estimate(pos, to_ap.id.str(), to_ap.channels[k]);
    }
    return plan_migration_order(links, old_q, new_q);
}

// What the twin knows about one station when it evaluates it.
struct StaView
{
    StaId sta_id;
    Policy policy = Policy::Proactive;
    std::optional<ApId> current_ap; // empty while no link is associated
    std::vector<LinkId> links;
    bool migrating = false;
};

class RoamingController
{
  public:
    RoamingController(ControllerConfig cfg, BoundingBox bounds, std::vector<ApConfig> aps)
        : cfg_(cfg), bounds_(bounds), aps_(std::move(aps))
    {
        validate(cfg_);
        if (aps_.empty())
            throw ConfigError("controller needs at least one AP");
    }

    const ControllerConfig& config() const { return cfg_; }
    const std::vector<RoamingAdvisory>& decision_log() const { return log_; }

    // Position reports piggyback on feature samples; only strictly newer ones are kept.
    void observe_position(const StaId& sta, double t, const Position& pos)
    {
        auto& hist = history_[sta];
        if (!hist.empty() && !(t > hist.back().t))
            return;
        hist.push_back({t, pos});
        if (hist.size() > 2)
            hist.pop_front();
    }

    std::vector<PositionReport> history(const StaId& sta) const
    {
        auto it = history_.find(sta);
        if (it == history_.end())
            return {};
        return {it->second.begin(), it->second.end()};
    }

    // Periodic proactive evaluation at the extrapolated position.
    std::vector<RoamingAdvisory> controller_tick(const HeatmapModel& model,
                                                 std::span<const StaView> stas, double now)
    {
        std::vector<RoamingAdvisory> out;
        for (const StaView& sta : stas)
        {
            if (sta.policy != Policy::Proactive || sta.migrating || !sta.current_ap)
                continue;
            const auto hist = history(sta.sta_id);
            const auto pos = extrapolate_position(hist, cfg_.lookahead, bounds_);
            if (!pos)
                continue;
            if (auto adv = evaluate(model, sta, *pos, now, Policy::Proactive))
                out.push_back(std::move(*adv));
        }
        return out;
    }

    // A reactive station reports collapsing quality; evaluated where it stands.
    std::optional<RoamingAdvisory> handle_request(const HeatmapModel& model, const StaView& sta,
                                                  const Position& pos, double now)
    {
        if (sta.migrating || !sta.current_ap)
            return std::nullopt;
        return evaluate(model, sta, bounds_.clamp(pos), now, Policy::Reactive);
    }

    const ApConfig& ap(const ApId& id) const
    {
        for (const ApConfig& a : aps_)
        {
            if (a.id == id)
                return a;
        }
        throw DomainError("controller: unknown AP " + id.str());
    }

  private:
    std::optional<RoamingAdvisory> evaluate(const HeatmapModel& model, const StaView& sta,
                                            const Position& pos, double now, Policy trigger)
    {
        const ApConfig& current = ap(*sta.current_ap);
        const ApChoice best = select_best_ap(model, pos, aps_);
        if (best.ap == current.id)
            return std::nullopt;
        const double current_cost = ap_cost(model, pos, current);
        std::optional<double> last;
        if (auto it = last_advisory_.find(sta.sta_id); it != last_advisory_.end())
            last = it->second;
        if (!should_trigger(current_cost, best.cost, cfg_, last, now))
            return std::nullopt;

        RoamingAdvisory adv;
        adv.sta_id = sta.sta_id;
        adv.from_ap = current.id;
        adv.target_ap = best.ap;
        adv.migration_order = plan_migration_order(model, pos, current, ap(best.ap), sta.links);
        adv.issued_at = now;
        adv.expected_gain = current_cost - best.cost;
        adv.trigger = trigger;
        last_advisory_[sta.sta_id] = now;
        log_.push_back(adv);
        return adv;
    }

    ControllerConfig cfg_;
    BoundingBox bounds_;
    std::vector<ApConfig> aps_;
    std::map<StaId, std::deque<PositionReport>> history_;
    std::map<StaId, double> last_advisory_;
    std::vector<RoamingAdvisory> log_;
};

} // namespace witwin
