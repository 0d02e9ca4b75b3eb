// Discrete-event run of a scenario under one roaming policy. All randomness
// comes from a single engine seeded per run and consumed in event order, so
// a (scenario, policy, seed) triple always produces the same event log.
#pragma once

#include <witwin/core.hpp>
#include <witwin/environment.hpp>
#include <witwin/event_queue.hpp>
#include <witwin/feature.hpp>
#include <witwin/metrics.hpp>
#include <witwin/mld_node.hpp>
#include <witwin/roaming.hpp>
#include <witwin/scenario.hpp>
#include <witwin/twin_model.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace witwin
{

struct Frame
{
    std::uint32_t flow = 0;
    std::uint64_t seq = 0;
    SimTime created_at{0};
    SimTime deadline{0};
    Direction direction = Direction::Uplink;
};

// Synchronous retry loop over a link of fixed delivery probability: up to
// 1 + max_retries attempts, each taking attempt_time.
struct TransmitOutcome
{
    bool delivered = false;
    int attempts = 0;
    double latency = 0.0; // only meaningful when delivered
};

inline TransmitOutcome transmit_frame(double fdr, const TransmissionParams& params,
                                      bool crosses_backbone, Rng& rng)
{
    TransmitOutcome out;
    const int budget = 1 + params.max_retries;
    while (out.attempts < budget)
    {
        ++out.attempts;
        if (draw_success(fdr, rng))
        {
            out.delivered = true;
            out.latency = out.attempts * params.attempt_time +
                          (crosses_backbone ? params.wired_delay : 0.0);
            return out;
        }
    }
    return out;
}

// Frames released by one flow between [0, duration): offset + k * period.
inline std::vector<SimTime> release_times(const TrafficFlow& flow, SimTime duration)
{
    std::vector<SimTime> out;
    const SimTime offset = from_seconds(flow.offset);
    const SimTime period = from_seconds(flow.period);
    for (SimTime t = offset; t < duration; t += period)
        out.push_back(t);
    return out;
}

inline Frame release_traffic(const TrafficFlow& flow, std::uint32_t flow_index,
                             std::uint64_t& next_seq, SimTime now)
{
    return Frame{flow_index, next_seq++, now, now + from_seconds(flow.deadline), flow.direction};
}

struct Gap
{
    SimTime start{0};
    SimTime end{0};

    SimTime length() const { return end - start; }
    bool operator==(const Gap&) const = default;
};

// Maximal intervals during which the station has no Associated link. The
// count starts once the station has been associated for the first time;
// an interval still open at run_end is closed there.
inline std::vector<Gap> measure_gaps(const TransitionLog& log, const StaId& sta, SimTime run_end)
{
    std::map<int, bool> associated;
    auto count = [&associated] {
        return std::count_if(associated.begin(), associated.end(),
                             [](const auto& kv) { return kv.second; });
    };
    std::vector<Gap> gaps;
    bool open = false;
    SimTime opened_at{0};
    bool started = false;
    for (const LinkTransition& tr : log)
    {
        if (tr.sta != sta)
            continue;
        const auto before = count();
        associated[tr.link.value] = tr.to.state == AssocState::Associated;
        const auto after = count();
        if (after > 0)
            started = true;
        if (started && before > 0 && after == 0)
        {
            open = true;
            opened_at = tr.at;
        }
        else if (open && before == 0 && after > 0)
        {
            if (tr.at > opened_at)
                gaps.push_back({opened_at, tr.at});
            open = false;
        }
    }
    if (open && run_end > opened_at)
        gaps.push_back({opened_at, run_end});
    return gaps;
}

struct RunResult
{
    MetricsReport report;
    std::string event_log;
    TransitionLog transitions;
    std::vector<RoamingAdvisory> decisions;
    std::vector<FeatureSample> samples; // reported during the run
    std::vector<FeatureSample> training_samples;
    HeatmapModel model;
};

inline std::string decision_log_text(const std::vector<RoamingAdvisory>& decisions)
{
    std::string out = "time,sta,from_ap,to_ap,gain,order,trigger\n";
    for (const RoamingAdvisory& a : decisions)
    {
        std::string order;
        for (const LinkId& l : a.migration_order)
        {
            if (!order.empty())
                order += ' ';
            order += l.to_string();
        }
        out += fmt::format("{:.9f},{},{},{},{:.6f},{},{}\n", a.issued_at, a.sta_id.str(),
                           a.from_ap.str(), a.target_ap.str(), a.expected_gain, order,
                           policy_name(a.trigger));
    }
    return out;
}

class Simulator
{
  public:
    Simulator(const Scenario& scenario, Policy policy, std::uint64_t seed)
        : sc_(scenario), policy_(policy), seed_(seed), rng_(seed),
          model_(scenario.bounds, scenario.twin.params),
          controller_(scenario.controller, scenario.bounds, scenario.aps),
          plc_dedup_(scenario.sta_behavior.dedup_window)
    {
        for (const ApConfig& ap : sc_.aps)
            model_.declare(ap);
        attempt_time_ = from_seconds(sc_.transmission.attempt_time);
        wired_delay_ = from_seconds(sc_.transmission.wired_delay);
        handshake_ = from_seconds(sc_.sta_behavior.handshake_delay);
        duration_ = from_seconds(sc_.duration);

        for (const StaSpec& spec : sc_.stas)
        {
            const Policy p = spec.policy.value_or(policy_);
            stas_.push_back(StaRt{&spec,
                                  UMacState(spec.id, spec.links, p, sc_.sta_behavior.dedup_window),
                                  std::vector<SampleWindow>(spec.links,
                                                            SampleWindow{sc_.report_window}),
                                  std::vector<LocalQuality>(spec.links),
                                  std::nullopt});
        }
        for (std::size_t i = 0; i < sc_.flows.size(); ++i)
        {
            FlowRt f;
            f.spec = sc_.flows[i];
            f.sta = sta_index(f.spec.sta);
            f.metrics.label = "flow" + std::to_string(i);
            flows_.push_back(std::move(f));
        }
    }

    RunResult run()
    {
        train_offline();
        start();
        while (!queue_.empty())
        {
            const Event e = queue_.pop();
            ++events_processed_;
            log_event(e);
            if (e.kind == EventKind::RunEnd)
                break;
            dispatch(e);
        }
        return finish();
    }

  private:
    enum class FrameStatus
    {
        Pending,
        Delivered,
        Missed,
        Lost,
    };

    enum class CopyState
    {
        Radio,
        Wired,
        Done,
    };

    struct Copy
    {
        int link = 0;
        int attempts = 0;
        bool rerouted = false;
        CopyState state = CopyState::Radio;
        std::uint64_t epoch = 0;
    };

    struct FrameRt
    {
        Frame frame;
        FrameStatus status = FrameStatus::Pending;
        std::vector<Copy> copies;
        bool queued = false;
        bool delivered_to_app = false;
    };

    struct FlowRt
    {
        TrafficFlow spec;
        std::size_t sta = 0;
        std::uint64_t next_seq = 0;
        std::optional<FrameRt> current;
        FlowMetrics metrics;
        std::vector<double> latencies;
    };

    struct StaRt
    {
        const StaSpec* spec = nullptr;
        UMacState umac;
        std::vector<SampleWindow> windows;
        std::vector<LocalQuality> quality;
        std::optional<double> last_request;
        std::uint64_t requests = 0;
        std::uint64_t advisories = 0;
    };

    // -- setup -------------------------------------------------------------

    std::size_t sta_index(const StaId& id) const
    {
        for (std::size_t i = 0; i < sc_.stas.size(); ++i)
        {
            if (sc_.stas[i].id == id)
                return i;
        }
        throw ConfigError("unknown STA " + id.str());
    }

    std::size_t ap_index(const ApId& id) const
    {
        for (std::size_t i = 0; i < sc_.aps.size(); ++i)
        {
            if (sc_.aps[i].id == id)
                return i;
        }
        throw DomainError("unknown AP " + id.str());
    }

    void train_offline()
    {
        if (sc_.twin.training_log)
        {
            std::ifstream in(*sc_.twin.training_log);
            if (!in)
                throw ConfigError("cannot open training log '" +
                                  sc_.twin.training_log->string() + "'");
            for (FeatureSample& s : read_sample_log(in))
            {
                model_.ingest(s);
                training_.push_back(std::move(s));
            }
        }
        if (!sc_.twin.survey.enabled)
            return;

        // Site survey: a walk over a regular raster, reporting every channel
        // of every AP from each point.
        const SurveyParams& sv = sc_.twin.survey;
        const BoundingBox& b = sc_.bounds;
        for (const ApConfig& ap : sc_.aps)
        {
            for (const ChannelId& c : ap.channels)
            {
                std::uint64_t k = 0;
                for (double y = b.min_y + sv.spacing / 2; y < b.max_y; y += sv.spacing)
                {
                    for (double x = b.min_x + sv.spacing / 2; x < b.max_x; x += sv.spacing)
                    {
                        const Position pos{x, y};
                        const double p = ground_truth_fdr(sc_.radio, pos, ap, c);
                        for (int pass = 0; pass < sv.passes; ++pass)
                        {
                            SampleWindow w{sc_.report_window};
                            for (int a = 0; a < sv.attempts; ++a)
                                w.record_attempt(draw_success(p, rng_),
                                                 mean_rssi_dbm(sc_.radio, pos, ap, c));
                            auto sample =
                                collect_sample(w, LinkContext{"survey", ap.id.str(), c, pos},
                                               static_cast<double>(k++) * 1e-3);
                            model_.ingest(*sample);
                            training_.push_back(std::move(*sample));
                        }
                    }
                }
            }
        }
    }

    const ApConfig& initial_ap(const StaSpec& spec) const
    {
        if (spec.initial_ap)
            return sc_.ap(*spec.initial_ap);
        const Position start = position_at(spec.trajectory, 0.0);
        const ApConfig* best = nullptr;
        double best_rssi = -std::numeric_limits<double>::infinity();
        for (const ApConfig& ap : sc_.aps)
        {
            for (const ChannelId& c : ap.channels)
            {
                const double r = mean_rssi_dbm(sc_.radio, start, ap, c);
                if (r > best_rssi)
                {
                    best_rssi = r;
                    best = &ap;
                }
            }
        }
        return *best;
    }

    void start()
    {
        queue_.schedule(duration_, EventKind::RunEnd);
        for (std::size_t i = 0; i < stas_.size(); ++i)
        {
            TransitionLog tr;
            stas_[i].umac.associate_all(initial_ap(*stas_[i].spec), SimTime::zero(), tr);
            apply_transitions(i, tr);
        }
        for (std::size_t f = 0; f < flows_.size(); ++f)
        {
            const SimTime first = from_seconds(flows_[f].spec.offset);
            if (first < duration_)
                queue_.schedule(first, EventKind::TrafficRelease, EventPayload{.flow = f});
        }
        const auto& sb = sc_.sta_behavior;
        bool any_proactive = false;
        for (std::size_t i = 0; i < stas_.size(); ++i)
        {
            const Policy p = stas_[i].umac.policy();
            any_proactive = any_proactive || p == Policy::Proactive;
            if (sb.probe_interval > 0.0)
                queue_.schedule(from_seconds(sb.probe_interval), EventKind::Probe,
                                EventPayload{.sta = i});
            queue_.schedule(from_seconds(sc_.report_window), EventKind::SampleWindowClose,
                            EventPayload{.sta = i});
            if (p != Policy::Proactive)
                queue_.schedule(from_seconds(sb.check_period), EventKind::StaCheck,
                                EventPayload{.sta = i});
        }
        if (any_proactive)
            queue_.schedule(from_seconds(sc_.controller.evaluation_period),
                            EventKind::ControllerTick);
    }

    // -- event handling ----------------------------------------------------

    void dispatch(const Event& e)
    {
        switch (e.kind)
        {
        case EventKind::TrafficRelease:
            on_release(e);
            break;
        case EventKind::FrameArrival:
            on_frame_arrival(e);
            break;
        case EventKind::RetryTimer:
            on_attempt(e);
            break;
        case EventKind::FrameExpiry:
            on_expiry(e);
            break;
        case EventKind::Probe:
            on_probe(e);
            break;
        case EventKind::SampleWindowClose:
            on_window_close(e);
            break;
        case EventKind::TwinIngest:
            on_ingest(e);
            break;
        case EventKind::ControllerTick:
            on_controller_tick(e);
            break;
        case EventKind::RoamRequest:
            on_roam_request(e);
            break;
        case EventKind::AdvisoryArrival:
            on_advisory(e);
            break;
        case EventKind::ReassocComplete:
            on_reassoc_complete(e);
            break;
        case EventKind::StaCheck:
            on_sta_check(e);
            break;
        case EventKind::RunEnd:
            break;
        }
    }

    SimTime now() const { return queue_.now(); }
    double now_s() const { return to_seconds(queue_.now()); }

    Position sta_position(std::size_t sta) const
    {
        return position_at(stas_[sta].spec->trajectory, now_s());
    }

    std::vector<double> quality_view(std::size_t sta) const
    {
        std::vector<double> q;
        for (const LocalQuality& lq : stas_[sta].quality)
            q.push_back(lq.value);
        return q;
    }

    void on_release(const Event& e)
    {
        FlowRt& flow = flows_[e.payload.flow];
        const Frame frame = release_traffic(flow.spec, static_cast<std::uint32_t>(e.payload.flow),
                                            flow.next_seq, now());
        ++flow.metrics.released;
        flow.current.emplace();
        flow.current->frame = frame;
        queue_.schedule(frame.deadline, EventKind::FrameExpiry,
                        EventPayload{.flow = e.payload.flow, .frame_seq = frame.seq});
        if (frame.direction == Direction::Uplink)
            send_frame(e.payload.flow);
        else
            queue_.schedule(now() + wired_delay_, EventKind::FrameArrival,
                            EventPayload{.flow = e.payload.flow,
                                         .copy = kFromBackbone,
                                         .frame_seq = frame.seq});

        const SimTime next = from_seconds(flow.spec.offset) +
                             static_cast<std::int64_t>(flow.next_seq) *
                                 from_seconds(flow.spec.period);
        if (next < duration_)
            queue_.schedule(next, EventKind::TrafficRelease, EventPayload{.flow = e.payload.flow});
    }

    FrameRt* live_frame(std::size_t flow, std::uint64_t seq)
    {
        auto& cur = flows_[flow].current;
        if (!cur || cur->frame.seq != seq)
            return nullptr;
        return &*cur;
    }

    // Hands the flow's current frame to the U-MAC for link selection.
    void send_frame(std::size_t flow)
    {
        FrameRt& fr = *flows_[flow].current;
        StaRt& sta = stas_[flows_[flow].sta];
        const auto links = select_link_for_frame(sta.umac, quality_view(flows_[flow].sta),
                                                 sc_.sta_behavior.duplicate_mode);
        if (links.empty())
        {
            fr.queued = true;
            record("QUEUE", fmt::format("flow={} seq={}", flow, fr.frame.seq));
            return;
        }
        fr.queued = false;
        for (const LinkId& l : links)
        {
            fr.copies.push_back(Copy{l.value});
            schedule_attempt(flow, fr, fr.copies.size() - 1);
        }
    }

    void schedule_attempt(std::size_t flow, const FrameRt& fr, std::size_t copy)
    {
        const Copy& c = fr.copies[copy];
        queue_.schedule(now() + attempt_time_, EventKind::RetryTimer,
                        EventPayload{.sta = flows_[flow].sta,
                                     .flow = flow,
                                     .copy = copy,
                                     .frame_seq = fr.frame.seq,
                                     .epoch = c.epoch,
                                     .link = c.link});
    }

    bool copies_active(const FrameRt& fr) const
    {
        return std::any_of(fr.copies.begin(), fr.copies.end(),
                           [](const Copy& c) { return c.state != CopyState::Done; });
    }

    void on_attempt(const Event& e)
    {
        // Sibling copies keep going after a delivery; the receiver drops them.
        FrameRt* fr = live_frame(e.payload.flow, e.payload.frame_seq);
        if (fr == nullptr)
            return;
        Copy& copy = fr->copies[e.payload.copy];
        if (copy.epoch != e.payload.epoch || copy.state != CopyState::Radio)
            return;

        const std::size_t si = flows_[e.payload.flow].sta;
        StaRt& sta = stas_[si];
        const LMacState& lm = sta.umac.lmac(LinkId{copy.link});
        const ApConfig& ap = sc_.aps[ap_index(*lm.ap)];
        const Position pos = sta_position(si);
        const bool ok = attempt_succeeds(sc_.radio, pos, ap, lm.channel, rng_);
        const double rssi = rssi_at(sc_.radio, pos, ap, lm.channel, rng_);
        sta.windows[static_cast<std::size_t>(copy.link - 1)].record_attempt(ok, rssi);
        ++copy.attempts;

        if (ok)
        {
            if (fr->frame.direction == Direction::Uplink)
            {
                copy.state = CopyState::Wired;
                queue_.schedule(now() + wired_delay_, EventKind::FrameArrival,
                                EventPayload{.flow = e.payload.flow,
                                             .copy = e.payload.copy,
                                             .frame_seq = fr->frame.seq});
            }
            else
            {
                copy.state = CopyState::Done;
                app_receive(e.payload.flow, *fr, e.payload.copy);
            }
            return;
        }
        if (copy.attempts >= 1 + sc_.transmission.max_retries)
        {
            copy.state = CopyState::Done;
            record("COPY_FAIL", fmt::format("flow={} seq={} copy={} link=l{} attempts={}",
                                            e.payload.flow, fr->frame.seq, e.payload.copy,
                                            copy.link, copy.attempts));
            if (fr->status == FrameStatus::Pending && !copies_active(*fr) && !fr->queued)
                finish_frame(e.payload.flow, *fr, FrameStatus::Lost);
            return;
        }
        schedule_attempt(e.payload.flow, *fr, e.payload.copy);
    }

    void on_frame_arrival(const Event& e)
    {
        FrameRt* fr = live_frame(e.payload.flow, e.payload.frame_seq);
        if (e.payload.copy == kFromBackbone)
        {
            // Downlink frame reached the AP side.
            if (fr != nullptr && fr->status == FrameStatus::Pending)
                send_frame(e.payload.flow);
            return;
        }
        if (fr == nullptr)
            return;
        fr->copies[e.payload.copy].state = CopyState::Done;
        app_receive(e.payload.flow, *fr, e.payload.copy);
    }

    // Application-side arrival of one copy; duplicates are removed where the
    // paths reconverge (wired endpoint for uplink, STA U-MAC for downlink).
    void app_receive(std::size_t flow, FrameRt& fr, std::size_t copy)
    {
        FlowRt& f = flows_[flow];
        DedupWindow& dedup = fr.frame.direction == Direction::Uplink
                                 ? plc_dedup_
                                 : stas_[f.sta].umac.dedup();
        const Copy& c = fr.copies[copy];
        if (!dedup.accept(fr.frame.flow, fr.frame.seq))
        {
            ++f.metrics.duplicates_dropped;
            record("DUP_DROP", fmt::format("flow={} seq={} copy={} link=l{}", flow, fr.frame.seq,
                                           copy, c.link));
            return;
        }
        fr.delivered_to_app = true;
        if (fr.status != FrameStatus::Pending)
        {
            ++f.metrics.late_copies;
            record("LATE", fmt::format("flow={} seq={} copy={} link=l{}", flow, fr.frame.seq,
                                       copy, c.link));
            return;
        }
        const double latency = to_seconds(now() - fr.frame.created_at);
        f.latencies.push_back(latency);
        ++f.metrics.delivered;
        fr.status = FrameStatus::Delivered;
        record("DELIVER", fmt::format("flow={} seq={} copy={} link=l{} attempts={} latency={:.9f}",
                                      flow, fr.frame.seq, copy, c.link, c.attempts, latency));
    }

    void finish_frame(std::size_t flow, FrameRt& fr, FrameStatus status)
    {
        FlowRt& f = flows_[flow];
        fr.status = status;
        fr.queued = false;
        for (Copy& c : fr.copies)
        {
            if (c.state == CopyState::Radio)
            {
                c.state = CopyState::Done;
                ++c.epoch;
            }
        }
        ++f.metrics.missed;
        if (status == FrameStatus::Lost)
            ++f.metrics.lost;
        record(status == FrameStatus::Lost ? "LOST" : "MISS",
               fmt::format("flow={} seq={}", flow, fr.frame.seq));
    }

    void on_expiry(const Event& e)
    {
        FrameRt* fr = live_frame(e.payload.flow, e.payload.frame_seq);
        if (fr == nullptr || fr->status != FrameStatus::Pending)
            return;
        finish_frame(e.payload.flow, *fr, FrameStatus::Missed);
    }

    void on_probe(const Event& e)
    {
        const std::size_t si = e.payload.sta;
        StaRt& sta = stas_[si];
        const Position pos = sta_position(si);
        for (const LMacState& lm : sta.umac.lmacs())
        {
            if (lm.state != AssocState::Associated)
                continue;
            const ApConfig& ap = sc_.aps[ap_index(*lm.ap)];
            const bool ok = attempt_succeeds(sc_.radio, pos, ap, lm.channel, rng_);
            const double rssi = rssi_at(sc_.radio, pos, ap, lm.channel, rng_);
            sta.windows[static_cast<std::size_t>(lm.link_id.value - 1)].record_attempt(ok, rssi);
        }
        queue_.schedule(now() + from_seconds(sc_.sta_behavior.probe_interval), EventKind::Probe,
                        EventPayload{.sta = si});
    }

    void on_window_close(const Event& e)
    {
        const std::size_t si = e.payload.sta;
        StaRt& sta = stas_[si];
        const Position pos = sta_position(si);
        for (const LMacState& lm : sta.umac.lmacs())
        {
            const auto k = static_cast<std::size_t>(lm.link_id.value - 1);
            if (lm.state != AssocState::Associated)
            {
                sta.windows[k].reset();
                continue;
            }
            auto sample = collect_sample(
                sta.windows[k], LinkContext{sta.spec->id.str(), lm.ap->str(), lm.channel, pos},
                now_s());
            if (!sample)
                continue;
            sta.quality[k].update(sample->fdr_observed, sc_.sta_behavior.local_alpha);
            record("SAMPLE", encode_sample(*sample));
            IngestEvent ev = deliver_to_twin(*sample, wired_delay_);
            samples_.push_back(std::move(ev.sample));
            queue_.schedule(ev.at, EventKind::TwinIngest,
                            EventPayload{.sta = si, .index = samples_.size() - 1});
        }
        queue_.schedule(now() + from_seconds(sc_.report_window), EventKind::SampleWindowClose,
                        EventPayload{.sta = si});
    }

    void on_ingest(const Event& e)
    {
        const FeatureSample& s = samples_[e.payload.index];
        if (model_.ingest(s) != IngestOutcome::Rejected)
            ++samples_ingested_;
        controller_.observe_position(StaId{s.src}, s.t, s.pos);
    }

    StaView view_of(std::size_t si) const
    {
        const UMacState& u = stas_[si].umac;
        return StaView{u.sta_id(), u.policy(), u.current_ap(), u.links(),
                       u.migrating() || u.rejoining()};
    }

    void issue(const RoamingAdvisory& adv)
    {
        advisories_.push_back(adv);
        std::string order;
        for (const LinkId& l : adv.migration_order)
            order += (order.empty() ? "" : ",") + l.to_string();
        record("ADVISORY", fmt::format("sta={} from={} to={} gain={:.6f} order={} trigger={}",
                                       adv.sta_id.str(), adv.from_ap.str(), adv.target_ap.str(),
                                       adv.expected_gain, order, policy_name(adv.trigger)));
        queue_.schedule(now() + wired_delay_, EventKind::AdvisoryArrival,
                        EventPayload{.sta = sta_index(adv.sta_id), .index = advisories_.size() - 1});
    }

    void on_controller_tick(const Event&)
    {
        std::vector<StaView> views;
        for (std::size_t i = 0; i < stas_.size(); ++i)
            views.push_back(view_of(i));
        for (const RoamingAdvisory& adv : controller_.controller_tick(model_, views, now_s()))
            issue(adv);
        queue_.schedule(now() + from_seconds(sc_.controller.evaluation_period),
                        EventKind::ControllerTick);
    }

    void on_sta_check(const Event& e)
    {
        const std::size_t si = e.payload.sta;
        StaRt& sta = stas_[si];
        const auto& sb = sc_.sta_behavior;
        if (sta.umac.policy() == Policy::Reactive)
        {
            if (reactive_trigger(sta.umac, quality_view(si), sb.reactive_floor, sta.last_request,
                                 sb.reactive_cooldown, now_s()))
            {
                sta.last_request = now_s();
                ++sta.requests;
                request_positions_.push_back(sta_position(si));
                record("REQUEST", fmt::format("sta={}", sta.spec->id.str()));
                queue_.schedule(now() + wired_delay_, EventKind::RoamRequest,
                                EventPayload{.sta = si, .index = request_positions_.size() - 1});
            }
        }
        else if (sta.umac.policy() == Policy::Legacy && !sta.umac.rejoining())
        {
            // Scan: strongest channel of every AP, one noisy reading per channel.
            const Position pos = sta_position(si);
            std::map<ApId, double> strongest;
            for (const ApConfig& ap : sc_.aps)
            {
                double best = -std::numeric_limits<double>::infinity();
                for (const ChannelId& c : ap.channels)
                    best = std::max(best, rssi_at(sc_.radio, pos, ap, c, rng_));
                strongest[ap.id] = best;
            }
            TransitionLog tr;
            if (sta.umac.legacy_roam(strongest, sb.legacy_rssi_delta_db, sc_.aps, now(), tr))
            {
                record("LEGACY_ROAM", fmt::format("sta={}", sta.spec->id.str()));
                apply_transitions(si, tr);
                queue_.schedule(now() + handshake_, EventKind::ReassocComplete,
                                EventPayload{.sta = si});
            }
        }
        queue_.schedule(now() + from_seconds(sb.check_period), EventKind::StaCheck,
                        EventPayload{.sta = si});
    }

    void on_roam_request(const Event& e)
    {
        const auto adv = controller_.handle_request(model_, view_of(e.payload.sta),
                                                    request_positions_[e.payload.index], now_s());
        if (adv)
            issue(*adv);
    }

    void on_advisory(const Event& e)
    {
        const std::size_t si = e.payload.sta;
        StaRt& sta = stas_[si];
        const RoamingAdvisory& adv = advisories_[e.payload.index];
        TransitionLog tr;
        const auto outcome = sta.umac.handle_advisory(adv, sc_.ap(adv.target_ap), now(), tr);
        if (outcome != UMacState::AdvisoryOutcome::Accepted)
        {
            record("ADVISORY_IGNORED", fmt::format("sta={}", sta.spec->id.str()));
            return;
        }
        ++sta.advisories;
        apply_transitions(si, tr);
        queue_.schedule(now() + handshake_, EventKind::ReassocComplete, EventPayload{.sta = si});
    }

    void on_reassoc_complete(const Event& e)
    {
        const std::size_t si = e.payload.sta;
        TransitionLog tr;
        const auto next = stas_[si].umac.step_reassociation(now(), handshake_, tr);
        apply_transitions(si, tr);
        if (next)
            queue_.schedule(now() + handshake_, EventKind::ReassocComplete,
                            EventPayload{.sta = si});
    }

    // Logs link transitions and keeps traffic consistent with them: frames
    // on a link that stops being usable are rerouted once, waiting frames
    // go out as soon as a link comes up.
    void apply_transitions(std::size_t si, const TransitionLog& tr)
    {
        StaRt& sta = stas_[si];
        bool link_up = false;
        for (const LinkTransition& t : tr)
        {
            record("LINK", fmt::format("sta={} link={} from={} to={}", t.sta.str(),
                                       t.link.to_string(), t.from.describe(), t.to.describe()));
            transitions_.push_back(t);
            const auto k = static_cast<std::size_t>(t.link.value - 1);
            if (!(t.from.state == t.to.state && t.from.ap == t.to.ap))
            {
                sta.windows[k].reset();
                sta.quality[k].reset();
            }
            link_up = link_up || t.to.state == AssocState::Associated;
        }
        for (const LinkTransition& t : tr)
        {
            if (t.from.state == AssocState::Associated && t.to.state != AssocState::Associated)
                reroute_from(si, t.link.value);
        }
        if (link_up)
            flush_waiting(si);
    }

    void reroute_from(std::size_t si, int link)
    {
        StaRt& sta = stas_[si];
        for (std::size_t f = 0; f < flows_.size(); ++f)
        {
            if (flows_[f].sta != si || !flows_[f].current)
                continue;
            FrameRt& fr = *flows_[f].current;
            for (std::size_t ci = 0; ci < fr.copies.size(); ++ci)
            {
                Copy& c = fr.copies[ci];
                if (c.state != CopyState::Radio || c.link != link)
                    continue;
                ++c.epoch;
                if (fr.status != FrameStatus::Pending)
                {
                    c.state = CopyState::Done;
                    continue;
                }
                std::optional<LinkId> alt;
                if (!c.rerouted)
                {
                    const auto q = quality_view(si);
                    for (const LMacState& lm : sta.umac.lmacs())
                    {
                        if (lm.state != AssocState::Associated)
                            continue;
                        const bool busy = std::any_of(
                            fr.copies.begin(), fr.copies.end(), [&](const Copy& o) {
                                return o.state == CopyState::Radio && o.link == lm.link_id.value;
                            });
                        if (busy)
                            continue;
                        if (!alt || q[static_cast<std::size_t>(lm.link_id.value - 1)] >
                                        q[static_cast<std::size_t>(alt->value - 1)])
                            alt = lm.link_id;
                    }
                }
                if (alt)
                {
                    record("REROUTE", fmt::format("flow={} seq={} copy={} from=l{} to={}", f,
                                                  fr.frame.seq, ci, c.link, alt->to_string()));
                    c.link = alt->value;
                    c.rerouted = true;
                    schedule_attempt(f, fr, ci);
                    continue;
                }
                c.state = CopyState::Done;
                if (!copies_active(fr))
                {
                    fr.queued = true;
                    record("QUEUE", fmt::format("flow={} seq={}", f, fr.frame.seq));
                }
            }
        }
    }

    void flush_waiting(std::size_t si)
    {
        for (std::size_t f = 0; f < flows_.size(); ++f)
        {
            if (flows_[f].sta != si || !flows_[f].current)
                continue;
            FrameRt& fr = *flows_[f].current;
            if (fr.status == FrameStatus::Pending && fr.queued)
                send_frame(f);
        }
    }

    // -- logging and results -----------------------------------------------

    void log_event(const Event& e)
    {
        fmt::format_to(std::back_inserter(log_), "{:.9f} {} {} sta={} flow={} seq={} copy={}\n",
                       to_seconds(e.time), e.seq, event_kind_name(e.kind), e.payload.sta,
                       e.payload.flow, e.payload.frame_seq,
                       e.payload.copy == kFromBackbone ? std::string("-")
                                                       : std::to_string(e.payload.copy));
    }

    void record(std::string_view type, const std::string& details)
    {
        fmt::format_to(std::back_inserter(log_), "{:.9f} - {} {}\n", now_s(), type, details);
    }

    RunResult finish()
    {
        MetricsReport r;
        r.scenario = sc_.name;
        r.scenario_hash = sc_.hash;
        r.policy = policy_;
        r.seed = seed_;
        r.events_processed = events_processed_;
        r.samples_ingested = samples_ingested_;
        r.advisories_issued = advisories_.size();

        std::vector<double> all;
        FlowMetrics agg;
        agg.label = "all";
        for (FlowRt& f : flows_)
        {
            if (f.current && f.current->status == FrameStatus::Pending)
                ++f.metrics.in_flight;
            f.metrics.latency = latency_stats(f.latencies);
            all.insert(all.end(), f.latencies.begin(), f.latencies.end());
            agg.released += f.metrics.released;
            agg.delivered += f.metrics.delivered;
            agg.missed += f.metrics.missed;
            agg.lost += f.metrics.lost;
            agg.in_flight += f.metrics.in_flight;
            agg.duplicates_dropped += f.metrics.duplicates_dropped;
            agg.late_copies += f.metrics.late_copies;
            r.flows.push_back(f.metrics);
        }
        agg.latency = latency_stats(std::move(all));
        r.aggregate = agg;

        for (const StaRt& s : stas_)
        {
            StaMetrics m;
            m.sta = s.spec->id;
            m.policy = s.umac.policy();
            for (const Gap& g : measure_gaps(transitions_, m.sta, duration_))
            {
                const double len = to_seconds(g.length());
                m.gap_total += len;
                m.gap_max = std::max(m.gap_max, len);
                ++m.gap_count;
            }
            m.reassociations = s.umac.reassociations();
            m.advisories = s.advisories;
            m.advisories_ignored = s.umac.ignored_advisories();
            m.roam_requests = s.requests;
            r.stas.push_back(m);
        }

        return RunResult{std::move(r),           std::move(log_),     std::move(transitions_),
                         controller_.decision_log(), std::move(samples_), std::move(training_),
                         std::move(model_)};
    }

    static constexpr std::size_t kFromBackbone = std::numeric_limits<std::size_t>::max();

    const Scenario& sc_;
    Policy policy_;
    std::uint64_t seed_;
    Rng rng_;
    EventQueue queue_;
    HeatmapModel model_;
    RoamingController controller_;
    DedupWindow plc_dedup_;
    SimTime attempt_time_{0};
    SimTime wired_delay_{0};
    SimTime handshake_{0};
    SimTime duration_{0};

    std::vector<StaRt> stas_;
    std::vector<FlowRt> flows_;
    std::vector<FeatureSample> samples_;
    std::vector<FeatureSample> training_;
    std::vector<RoamingAdvisory> advisories_;
    std::vector<Position> request_positions_;
    TransitionLog transitions_;
    std::string log_;
    std::uint64_t events_processed_ = 0;
    std::uint64_t samples_ingested_ = 0;
};

inline RunResult run(const Scenario& scenario, Policy policy, std::uint64_t seed)
{
    return Simulator(scenario, policy, seed).run();
}

} // namespace witwin
