#include "oracles.hpp"

#include <witwin/simulator.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace witwin;
using nlohmann::json;

namespace
{

const std::string kDir = WITWIN_SCENARIO_DIR;

Scenario golden(const std::string& name)
{
    return load_scenario(kDir + "/" + name + ".json");
}

// Two APs, one single-AP-range STA parked next to AP1, everything saturated.
json small_doc()
{
    return json::parse(R"({
      "version": 1, "name": "small", "duration": 5,
      "bounds": {"min_x": 0, "min_y": 0, "max_x": 40, "max_y": 10},
      "radio": {"fdr_max": 1.0},
      "aps": [
        {"id": "AP1", "position": {"x": 5, "y": 5},
         "channels": [{"band": "2.4", "number": 1}, {"band": "5", "number": 36}]},
        {"id": "AP2", "position": {"x": 35, "y": 5},
         "channels": [{"band": "2.4", "number": 6}, {"band": "5", "number": 44}]}
      ],
      "stas": [{"id": "s1", "links": 2, "trajectory": [{"t": 0, "x": 6, "y": 5}]}],
      "flows": [{"sta": "s1", "direction": "uplink", "period": 0.01}]
    })");
}

std::size_t count_lines(const std::string& log, const std::string& needle)
{
    std::size_t n = 0;
    std::istringstream in(log);
    std::string line;
    while (std::getline(in, line))
        n += line.find(needle) != std::string::npos ? 1 : 0;
    return n;
}

} // namespace

TEST(TransmitFrame, PerfectLink)
{
    Rng rng(1);
    const TransmissionParams p;
    const auto out = transmit_frame(1.0, p, true, rng);
    EXPECT_TRUE(out.delivered);
    EXPECT_EQ(out.attempts, 1);
    EXPECT_DOUBLE_EQ(out.latency, p.attempt_time + p.wired_delay);
}

TEST(TransmitFrame, DeadLinkExhaustsBudget)
{
    Rng rng(1);
    const TransmissionParams p;
    const auto out = transmit_frame(0.0, p, true, rng);
    EXPECT_FALSE(out.delivered);
    EXPECT_EQ(out.attempts, 1 + p.max_retries);
}

TEST(TransmitFrame, TruncatedGeometricMean)
{
    Rng rng(17);
    const TransmissionParams p;
    double sum = 0;
    int delivered = 0;
    for (int i = 0; i < 100000; ++i)
    {
        const auto out = transmit_frame(0.5, p, false, rng);
        if (out.delivered)
        {
            sum += out.attempts;
            ++delivered;
        }
    }
    const double expect = oracle::truncated_geometric_mean(0.5, 8);
    EXPECT_NEAR(sum / delivered / expect, 1.0, 0.01);
}

TEST(ReleaseTraffic, CountAndPhase)
{
    TrafficFlow f;
    f.period = 0.01;
    f.deadline = 0.01;
    EXPECT_EQ(release_times(f, from_seconds(1.0)).size(), 100u);
    f.offset = 0.003;
    const auto t = release_times(f, from_seconds(1.0));
    EXPECT_EQ(t[0], from_seconds(0.003));
    EXPECT_EQ(t[1], from_seconds(0.013));
    EXPECT_EQ(t[2], from_seconds(0.023));

    std::uint64_t seq = 0;
    const Frame a = release_traffic(f, 2, seq, from_seconds(0.003));
    const Frame b = release_traffic(f, 2, seq, from_seconds(0.013));
    EXPECT_EQ(a.seq, 0u);
    EXPECT_EQ(b.seq, 1u);
    EXPECT_EQ(b.deadline, from_seconds(0.023));
}

TEST(MeasureGaps, SyntheticLog)
{
    const StaId sta{"s"};
    auto tr = [&](double t, int link, AssocState from, AssocState to) {
        LMacState a, b;
        a.link_id = b.link_id = LinkId{link};
        a.state = from;
        b.state = to;
        if (from != AssocState::Unassociated)
            a.ap = ApId{"AP1"};
        if (to != AssocState::Unassociated)
            b.ap = ApId{"AP1"};
        return LinkTransition{from_seconds(t), sta, LinkId{link}, a, b};
    };
    using S = AssocState;
    TransitionLog log{tr(0, 1, S::Unassociated, S::Associated),
                      tr(0, 2, S::Unassociated, S::Associated),
                      tr(1, 1, S::Associated, S::Unassociated),
                      tr(2, 2, S::Associated, S::Unassociated),
                      tr(2, 1, S::Unassociated, S::Associating),
                      tr(2.15, 1, S::Associating, S::Associated),
                      tr(3, 1, S::Associated, S::Unassociated)};
    const auto gaps = measure_gaps(log, sta, from_seconds(4));
    ASSERT_EQ(gaps.size(), 2u);
    EXPECT_EQ(gaps[0], (Gap{from_seconds(2), from_seconds(2.15)}));
    EXPECT_EQ(gaps[1], (Gap{from_seconds(3), from_seconds(4)}));
    EXPECT_TRUE(measure_gaps(log, StaId{"other"}, from_seconds(4)).empty());
}

TEST(Run, EmptyScenarioHasZeroCounters)
{
    json doc = small_doc();
    doc.erase("flows");
    const RunResult r = run(parse_scenario(doc), Policy::Proactive, 1);
    EXPECT_EQ(r.report.aggregate.released, 0u);
    EXPECT_EQ(r.report.aggregate.delivered, 0u);
    EXPECT_EQ(r.report.aggregate.missed, 0u);
    EXPECT_EQ(r.report.advisories_issued, 0u);
    EXPECT_EQ(r.report.stas[0].gap_count, 0u);
}

TEST(Run, SameSeedSameEverything)
{
    const Scenario sc = golden("corridor");
    const RunResult a = run(sc, Policy::Proactive, 7);
    const RunResult b = run(sc, Policy::Proactive, 7);
    EXPECT_EQ(a.event_log, b.event_log);
    EXPECT_EQ(metrics_to_text(a.report), metrics_to_text(b.report));
}

TEST(Run, LosslessSeedsAgreeOnStructure)
{
    json doc = small_doc();
    doc["radio"]["shadowing_sigma_db"] = 3.0;
    const Scenario sc = parse_scenario(doc);
    const RunResult a = run(sc, Policy::Proactive, 1);
    const RunResult b = run(sc, Policy::Proactive, 2);
    EXPECT_EQ(a.report.aggregate.released, b.report.aggregate.released);
    EXPECT_EQ(a.report.aggregate.delivered, b.report.aggregate.delivered);
    EXPECT_EQ(a.report.aggregate.missed, 0u);
    // Only RSSI differs between seeds on a lossless link.
    EXPECT_NE(a.event_log, b.event_log);
    EXPECT_EQ(a.report.aggregate.latency.max, b.report.aggregate.latency.max);
}

TEST(Run, InterleavedFlowsAreStable)
{
    json doc = small_doc();
    doc["flows"].push_back({{"sta", "s1"}, {"direction", "downlink"}, {"period", 0.01},
                            {"offset", 0.005}});
    const Scenario sc = parse_scenario(doc);
    const RunResult a = run(sc, Policy::Proactive, 3);
    const RunResult b = run(sc, Policy::Proactive, 3);
    EXPECT_EQ(a.event_log, b.event_log);
    EXPECT_EQ(a.report.flows[0].released, 500u);
    EXPECT_EQ(a.report.flows[1].released, 500u);
    // Releases alternate between the two flows.
    std::istringstream in(a.event_log);
    std::string line;
    std::vector<char> flows;
    while (std::getline(in, line))
    {
        if (line.find(" TrafficRelease ") != std::string::npos)
            flows.push_back(line.find("flow=0") != std::string::npos ? '0' : '1');
    }
    for (std::size_t i = 1; i < flows.size(); ++i)
        ASSERT_NE(flows[i], flows[i - 1]);
}

TEST(Run, CorridorProactiveMakesBeforeBreak)
{
    const RunResult r = run(golden("corridor"), Policy::Proactive, 1);
    EXPECT_TRUE(measure_gaps(r.transitions, StaId{"agv1"}, from_seconds(60)).empty());
    ASSERT_EQ(r.decisions.size(), 1u);
    EXPECT_EQ(r.decisions[0].target_ap, ApId{"AP2"});
    EXPECT_EQ(r.report.stas[0].reassociations, 1u);
}

TEST(Run, CorridorLegacyGapCoversAllHandshakes)
{
    const RunResult r = run(golden("corridor"), Policy::Legacy, 1);
    const auto gaps = measure_gaps(r.transitions, StaId{"agv1"}, from_seconds(60));
    ASSERT_FALSE(gaps.empty());
    for (const Gap& g : gaps)
        EXPECT_GE(g.length(), from_seconds(0.15));
    EXPECT_TRUE(r.decisions.empty());
}

TEST(Run, StationaryLegacyNeverRoams)
{
    const RunResult r = run(golden("static"), Policy::Legacy, 1);
    EXPECT_EQ(r.report.stas[0].reassociations, 0u);
    EXPECT_EQ(r.report.stas[0].gap_count, 0u);
}

TEST(Run, DuplicateModeDeliversOnce)
{
    json doc = json::parse(std::ifstream(kDir + "/corridor.json"));
    doc["sta_behavior"]["duplicate_mode"] = true;
    doc["duration"] = 40;
    const RunResult r = run(parse_scenario(doc), Policy::Proactive, 4);
    EXPECT_EQ(r.report.aggregate.delivered, count_lines(r.event_log, " DELIVER "));
    EXPECT_GT(r.report.aggregate.duplicates_dropped + r.report.aggregate.late_copies, 0u);
}

TEST(Run, TrainingLogFeedsTheTwin)
{
    const std::string path = testing::TempDir() + "training.csv";
    {
        std::vector<FeatureSample> samples;
        FeatureSample s{0, "s1", "AP1", ChannelId::make(Band::Ghz2_4, 1), {6, 5}, 0.25, -50, 4};
        samples.push_back(s);
        std::ofstream out(path);
        write_sample_log(out, samples);
    }
    json doc = small_doc();
    doc["twin"] = {{"training_log", path}, {"min_samples", 1}};
    doc["duration"] = 0.05;
    const RunResult r = run(parse_scenario(doc), Policy::Proactive, 1);
    ASSERT_EQ(r.training_samples.size(), 1u);
    EXPECT_DOUBLE_EQ(r.model.estimate({6, 5}, "AP1", ChannelId::make(Band::Ghz2_4, 1)), 0.25);
}

TEST(Metrics, CsvRowMatchesHeader)
{
    const RunResult r = run(golden("static"), Policy::Proactive, 1);
    auto columns = [](std::string_view s) { return std::count(s.begin(), s.end(), ',') + 1; };
    EXPECT_EQ(columns(metrics_csv_row(r.report)), columns(kMetricsCsvHeader));
    EXPECT_EQ(columns(metrics_csv_mean_row(Policy::Proactive, {r.report})),
              columns(kMetricsCsvHeader));
}

TEST(Run, ConservationAndLatencyFloor)
{
    for (const char* name : {"corridor", "grid", "static"})
    {
        const Scenario sc = golden(name);
        const double floor = sc.transmission.attempt_time + sc.transmission.wired_delay;
        for (Policy p : {Policy::Proactive, Policy::Reactive, Policy::Legacy})
        {
            const RunResult r = run(sc, p, 5);
            for (const FlowMetrics& f : r.report.flows)
            {
                EXPECT_EQ(f.released, f.delivered + f.missed + f.in_flight) << name;
                EXPECT_LE(f.lost, f.missed);
                if (f.delivered > 0)
                {
                    EXPECT_GE(f.latency.mean, floor);
                }
            }
            std::istringstream in(r.event_log);
            std::string line;
            while (std::getline(in, line))
            {
                const auto at = line.find("latency=");
                if (line.find(" - DELIVER ") == std::string::npos || at == std::string::npos)
                    continue;
                ASSERT_GE(std::stod(line.substr(at + 8)) + 1e-12, floor) << line;
            }
        }
    }
}

TEST(Run, GapsAgreeWithIndependentReplay)
{
    const Scenario sc = golden("corridor");
    const RunResult r = run(sc, Policy::Legacy, 2);
    // Replay LINK records of the event log: count Associated links over time.
    std::map<std::string, bool> up;
    double opened = -1;
    double total = 0;
    std::istringstream in(r.event_log);
    std::string line;
    while (std::getline(in, line))
    {
        if (line.find(" - LINK ") == std::string::npos)
            continue;
        const double t = std::stod(line);
        const auto link = line.substr(line.find("link=") + 5, 2);
        const bool now_up = line.find("to=Associated(") != std::string::npos;
        const auto before = std::count_if(up.begin(), up.end(), [](auto& kv) { return kv.second; });
        up[link] = now_up;
        const auto after = std::count_if(up.begin(), up.end(), [](auto& kv) { return kv.second; });
        if (before > 0 && after == 0)
            opened = t;
        if (before == 0 && after > 0 && opened >= 0)
        {
            total += t - opened;
            opened = -1;
        }
    }
    EXPECT_NEAR(total, r.report.stas[0].gap_total, 1e-9);
    EXPECT_GT(total, 0.0);
}
