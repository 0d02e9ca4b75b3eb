// Station-side MLD model: one U-MAC coordinating up to three L-MACs,
// one-link-at-a-time reassociation, per-frame link choice, duplicate
// removal, and the reactive and legacy roaming baselines.
#pragma once

#include <witwin/core.hpp>
#include <witwin/environment.hpp>
#include <witwin/roaming.hpp>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace witwin
{

enum class AssocState : std::uint8_t
{
    Unassociated,
    Associating,
    // Handshake finished but the multi-link setup is not complete yet, so the
    // link carries no traffic. Only used by break-before-make rejoins.
    Authenticated,
    Associated,
};

inline std::string_view assoc_state_name(AssocState s)
{
    switch (s)
    {
    case AssocState::Unassociated:
        return "Unassociated";
    case AssocState::Associating:
        return "Associating";
    case AssocState::Authenticated:
        return "Authenticated";
    case AssocState::Associated:
        return "Associated";
    }
    return "?";
}

struct LMacState
{
    LinkId link_id;
    AssocState state = AssocState::Unassociated;
    std::optional<ApId> ap; // target while Associating/Authenticated
    ChannelId channel;
    SimTime started_at{0};

    bool operator==(const LMacState&) const = default;

    std::string describe() const
    {
        if (state == AssocState::Unassociated)
            return "Unassociated";
        return std::string(assoc_state_name(state)) + "(" + ap->str() + "," + channel.to_string() +
               ")";
    }
};

struct LinkTransition
{
    SimTime at{0};
    StaId sta;
    LinkId link;
    LMacState from;
    LMacState to;
};

using TransitionLog = std::vector<LinkTransition>;

struct Migration
{
    RoamingAdvisory advisory;
    std::vector<ChannelId> target_channels;
    std::deque<LinkId> remaining; // links not yet started
};

struct LegacyRejoin
{
    ApId target;
    std::vector<ChannelId> target_channels;
    std::size_t next = 0; // index into lmacs of the link in handshake
};

// Receiver-side duplicate filter over (flow, sequence) with FIFO eviction.
class DedupWindow
{
  public:
    explicit DedupWindow(std::size_t bound = 1024) : bound_(std::max<std::size_t>(bound, 1)) {}

    // True for the first copy of a (flow, sequence) pair.
    bool accept(std::uint32_t flow, std::uint64_t seq)
    {
        const Key key{flow, seq};
        if (seen_.count(key) != 0)
            return false;
        seen_.insert(key);
        order_.push_back(key);
        while (order_.size() > bound_)
        {
            seen_.erase(order_.front());
            order_.pop_front();
        }
        return true;
    }

    std::size_t size() const { return order_.size(); }
    std::size_t bound() const { return bound_; }

  private:
    struct Key
    {
        std::uint32_t flow;
        std::uint64_t seq;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash
    {
        std::size_t operator()(const Key& k) const noexcept
        {
            return std::hash<std::uint64_t>{}(k.seq * 0x9E3779B97F4A7C15ULL ^ k.flow);
        }
    };

    std::size_t bound_;
    std::unordered_set<Key, KeyHash> seen_;
    std::deque<Key> order_;
};

class UMacState
{
  public:
    UMacState(StaId sta, std::size_t link_count, Policy policy, std::size_t dedup_bound = 1024)
        : sta_id_(std::move(sta)), policy_(policy), dedup_(dedup_bound)
    {
        if (link_count < 1 || link_count > 3)
            throw ConfigError("a station has 1 to 3 links");
        for (std::size_t i = 0; i < link_count; ++i)
        {
            LMacState l;
            l.link_id = LinkId{static_cast<int>(i + 1)};
            lmacs_.push_back(std::move(l));
        }
    }

    const StaId& sta_id() const { return sta_id_; }
    Policy policy() const { return policy_; }
    const std::vector<LMacState>& lmacs() const { return lmacs_; }
    const LMacState& lmac(LinkId l) const { return lmacs_.at(static_cast<std::size_t>(l.value - 1)); }
    const std::optional<Migration>& migration() const { return migration_; }
    bool migrating() const { return migration_.has_value(); }
    bool rejoining() const { return rejoin_.has_value(); }
    DedupWindow& dedup() { return dedup_; }
    std::uint64_t ignored_advisories() const { return ignored_advisories_; }
    std::uint64_t reassociations() const { return reassociations_; }

    std::vector<LinkId> links() const
    {
        std::vector<LinkId> out;
        for (const LMacState& l : lmacs_)
            out.push_back(l.link_id);
        return out;
    }

    std::size_t count(AssocState s) const
    {
        return static_cast<std::size_t>(std::count_if(
            lmacs_.begin(), lmacs_.end(), [s](const LMacState& l) { return l.state == s; }));
    }

    std::set<ApId> associated_aps() const
    {
        std::set<ApId> aps;
        for (const LMacState& l : lmacs_)
        {
            if (l.state == AssocState::Associated)
                aps.insert(*l.ap);
        }
        return aps;
    }

    // The AP this station belongs to outside of any migration or rejoin.
    std::optional<ApId> current_ap() const
    {
        if (migration_)
            return migration_->advisory.from_ap;
        if (rejoin_)
            return std::nullopt;
        const auto aps = associated_aps();
        if (aps.size() != 1)
            return std::nullopt;
        return *aps.begin();
    }

    // Initial association of every link to the AP's k-th channel.
    void associate_all(const ApConfig& ap, SimTime now, TransitionLog& log)
    {
        if (ap.channels.size() < lmacs_.size())
            throw ConfigError("AP " + ap.id.str() + " has fewer channels than station " +
                              sta_id_.str() + " has links");
        for (std::size_t i = 0; i < lmacs_.size(); ++i)
            set_state(i, AssocState::Associated, ap.id, ap.channels[i], now, log);
    }

    enum class AdvisoryOutcome
    {
        Accepted,
        IgnoredMigrating,
        RejectedSameAp,
        RejectedInvalid,
    };

    // Installs the migration and starts the handshake of the first link in the order.
    AdvisoryOutcome handle_advisory(const RoamingAdvisory& adv, const ApConfig& target, SimTime now,
                                    TransitionLog& log)
    {
        if (migration_ || rejoin_)
        {
            ++ignored_advisories_;
            return AdvisoryOutcome::IgnoredMigrating;
        }
        const auto cur = current_ap();
        if (!cur || adv.target_ap == *cur || target.id != adv.target_ap)
        {
            ++ignored_advisories_;
            return AdvisoryOutcome::RejectedSameAp;
        }
        auto order = adv.migration_order;
        std::sort(order.begin(), order.end());
        if (order != links() || target.channels.size() < lmacs_.size())
        {
            ++ignored_advisories_;
            return AdvisoryOutcome::RejectedInvalid;
        }

        Migration m{adv, target.channels, {adv.migration_order.begin(), adv.migration_order.end()}};
        migration_ = std::move(m);
        start_next_migration_link(now, log);
        return AdvisoryOutcome::Accepted;
    }

    // The link currently in handshake, if any.
    std::optional<LinkId> associating_link() const
    {
        for (const LMacState& l : lmacs_)
        {
            if (l.state == AssocState::Associating)
                return l.link_id;
        }
        return std::nullopt;
    }

    // Completes the running handshake. Returns the link that starts its own
    // handshake next, so the caller can schedule its completion.
    std::optional<LinkId> step_reassociation(SimTime now, SimTime handshake_delay,
                                             TransitionLog& log)
    {
        const auto link = associating_link();
        if (!link)
            throw DomainError("step_reassociation: no link is associating");
        const std::size_t i = index(*link);
        if (now < lmacs_[i].started_at + handshake_delay)
            throw DomainError("step_reassociation: handshake still running");

        if (rejoin_)
            return step_rejoin(i, now, log);
        if (!migration_)
            throw DomainError("step_reassociation: no migration in progress");

        set_state(i, AssocState::Associated, migration_->advisory.target_ap, lmacs_[i].channel, now,
                  log);
        if (migration_->remaining.empty())
        {
            migration_.reset();
            ++reassociations_;
            return std::nullopt;
        }
        return start_next_migration_link(now, log);
    }

    // Legacy break-before-make roam: every link drops at once, then the links
    // handshake one after another and come up together at the end.
    // strongest_rssi maps each AP to the RSSI of its strongest channel.
    bool legacy_roam(const std::map<ApId, double>& strongest_rssi, double rssi_delta_db,
                     std::span<const ApConfig> aps, SimTime now, TransitionLog& log)
    {
        if (policy_ != Policy::Legacy)
            throw DomainError("legacy_roam: station is not legacy");
        if (rejoin_)
            return false;
        const auto cur = current_ap();
        if (!cur)
            return false;
        const auto cur_it = strongest_rssi.find(*cur);
        if (cur_it == strongest_rssi.end())
            return false;

        std::optional<ApId> best;
        double best_rssi = 0.0;
        for (const auto& [ap, rssi] : strongest_rssi)
        {
            if (ap == *cur)
                continue;
            if (!best || rssi > best_rssi)
            {
                best = ap;
                best_rssi = rssi;
            }
        }
        if (!best || !(best_rssi > cur_it->second + rssi_delta_db))
            return false;

        const ApConfig* target = nullptr;
        for (const ApConfig& a : aps)
        {
            if (a.id == *best)
                target = &a;
        }
        if (target == nullptr || target->channels.size() < lmacs_.size())
            throw DomainError("legacy_roam: target AP cannot host all links");

        for (std::size_t i = 0; i < lmacs_.size(); ++i)
            set_state(i, AssocState::Unassociated, std::nullopt, lmacs_[i].channel, now, log);
        rejoin_ = LegacyRejoin{target->id, target->channels, 0};
        set_state(0, AssocState::Associating, target->id, target->channels[0], now, log);
        return true;
    }

  private:
    std::size_t index(LinkId l) const { return static_cast<std::size_t>(l.value - 1); }

    std::optional<LinkId> start_next_migration_link(SimTime now, TransitionLog& log)
    {
        const LinkId next = migration_->remaining.front();
        migration_->remaining.pop_front();
        const std::size_t i = index(next);
        set_state(i, AssocState::Associating, migration_->advisory.target_ap,
                  migration_->target_channels[i], now, log);
        return next;
    }

    std::optional<LinkId> step_rejoin(std::size_t i, SimTime now, TransitionLog& log)
    {
        set_state(i, AssocState::Authenticated, rejoin_->target, lmacs_[i].channel, now, log);
        rejoin_->next = i + 1;
        if (rejoin_->next < lmacs_.size())
        {
            const std::size_t n = rejoin_->next;
            set_state(n, AssocState::Associating, rejoin_->target, rejoin_->target_channels[n], now,
                      log);
            return lmacs_[n].link_id;
        }
        for (std::size_t k = 0; k < lmacs_.size(); ++k)
            set_state(k, AssocState::Associated, rejoin_->target, lmacs_[k].channel, now, log);
        rejoin_.reset();
        ++reassociations_;
        return std::nullopt;
    }

    void set_state(std::size_t i, AssocState s, std::optional<ApId> ap, ChannelId channel,
                   SimTime now, TransitionLog& log)
    {
        LMacState next{lmacs_[i].link_id, s, std::move(ap), channel, now};
        if (s == AssocState::Unassociated)
            next.ap.reset();
        log.push_back({now, sta_id_, lmacs_[i].link_id, lmacs_[i], next});
        lmacs_[i] = std::move(next);
    }

    StaId sta_id_;
    Policy policy_;
    std::vector<LMacState> lmacs_;
    std::optional<Migration> migration_;
    std::optional<LegacyRejoin> rejoin_;
    DedupWindow dedup_;
    std::uint64_t ignored_advisories_ = 0;
    std::uint64_t reassociations_ = 0;
};

// Per-frame link choice from the station's local quality view (indexed by
// LinkId::value - 1). Single mode returns the best associated link; duplicate
// mode returns the best associated link on each associated AP. An empty
// result means no link is usable and the frame has to wait.
inline std::vector<LinkId> select_link_for_frame(const UMacState& umac,
                                                 std::span<const double> local_quality,
                                                 bool duplicate)
{
    std::map<ApId, LinkId> best_per_ap;
    std::optional<LinkId> best;
    auto q = [&](LinkId l) { return local_quality[static_cast<std::size_t>(l.value - 1)]; };
    for (const LMacState& l : umac.lmacs())
    {
        if (l.state != AssocState::Associated)
            continue;
        // Strict comparison keeps the lowest link id on ties.
        if (!best || q(l.link_id) > q(*best))
            best = l.link_id;
        auto it = best_per_ap.find(*l.ap);
        if (it == best_per_ap.end())
            best_per_ap.emplace(*l.ap, l.link_id);
        else if (q(l.link_id) > q(it->second))
            it->second = l.link_id;
    }
    if (!best)
        return {};
    if (!duplicate)
        return {*best};
    std::vector<LinkId> out;
    for (const auto& [ap, link] : best_per_ap)
        out.push_back(link);
    std::sort(out.begin(), out.end());
    return out;
}

// Reactive stations ask the twin for help once even their best link falls
// below the floor, at most once per cooldown.
inline bool reactive_trigger(const UMacState& umac, std::span<const double> local_quality,
                             double floor, std::optional<double> last_request_at,
                             double request_cooldown, double now)
{
    if (umac.policy() != Policy::Reactive)
        throw DomainError("reactive_trigger: station is not reactive");
    if (umac.migrating() || umac.rejoining())
        return false;
    std::optional<double> best;
    for (const LMacState& l : umac.lmacs())
    {
        if (l.state != AssocState::Associated)
            continue;
        const double q = local_quality[static_cast<std::size_t>(l.link_id.value - 1)];
        best = best ? std::max(*best, q) : q;
    }
    if (!best || !(*best < floor))
        return false;
    return !last_request_at || now - *last_request_at >= request_cooldown;
}

// Station-local recent FDR of one link: an EMA across closed windows.
struct LocalQuality
{
    double value = 0.5;
    bool seeded = false;

    void update(double window_fdr, double alpha)
    {
        if (!seeded)
        {
            value = window_fdr;
            seeded = true;
            return;
        }
        value += alpha * (window_fdr - value);
    }

    void reset()
    {
        value = 0.5;
        seeded = false;
    }
};

} // namespace witwin
