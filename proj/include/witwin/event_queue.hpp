// Deterministic event queue ordered by (time, insertion sequence).
#pragma once

#include <witwin/core.hpp>

#include <cstdint>
#include <queue>
#include <string_view>
#include <vector>

namespace witwin
{

enum class EventKind : std::uint8_t
{
    TrafficRelease,
    FrameArrival,    // a frame copy leaves the wired backbone
    RetryTimer,      // an on-air transmission attempt completes
    FrameExpiry,     // a frame reaches its deadline
    Probe,           // per-link keep-alive transmission
    SampleWindowClose,
    TwinIngest,
    ControllerTick,
    RoamRequest,     // reactive station asks the twin for an advisory
    AdvisoryArrival, // advisory reaches the station
    ReassocComplete,
    StaCheck,        // station-side roaming check (reactive / legacy)
    RunEnd,
};

inline std::string_view event_kind_name(EventKind k)
{
    switch (k)
    {
    case EventKind::TrafficRelease:
        return "TrafficRelease";
    case EventKind::FrameArrival:
        return "FrameArrival";
    case EventKind::RetryTimer:
        return "RetryTimer";
    case EventKind::FrameExpiry:
        return "FrameExpiry";
    case EventKind::Probe:
        return "Probe";
    case EventKind::SampleWindowClose:
        return "SampleWindowClose";
    case EventKind::TwinIngest:
        return "TwinIngest";
    case EventKind::ControllerTick:
        return "ControllerTick";
    case EventKind::RoamRequest:
        return "RoamRequest";
    case EventKind::AdvisoryArrival:
        return "AdvisoryArrival";
    case EventKind::ReassocComplete:
        return "ReassocComplete";
    case EventKind::StaCheck:
        return "StaCheck";
    case EventKind::RunEnd:
        return "RunEnd";
    }
    return "?";
}

// Small fixed payload; meaning of each slot depends on the kind.
struct EventPayload
{
    std::size_t sta = 0;
    std::size_t flow = 0;
    std::size_t copy = 0;
    std::size_t index = 0;
    std::uint64_t frame_seq = 0;
    std::uint64_t epoch = 0;
    int link = 0;
};

struct Event
{
    SimTime time{0};
    std::uint64_t seq = 0;
    EventKind kind = EventKind::RunEnd;
    EventPayload payload;
};

class EventQueue
{
  public:
    SimTime now() const { return now_; }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

    void schedule(SimTime at, EventKind kind, EventPayload payload = {})
    {
        if (at < now_)
            throw DomainError("event scheduled in the past");
        heap_.push(Event{at, next_seq_++, kind, payload});
    }

    Event pop()
    {
        Event e = heap_.top();
        heap_.pop();
        now_ = e.time;
        return e;
    }

  private:
    struct Later
    {
        bool operator()(const Event& a, const Event& b) const
        {
            if (a.time != b.time)
                return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    SimTime now_{0};
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
};

} // namespace witwin
