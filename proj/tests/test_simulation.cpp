#include "vinesim/errors.hpp"
#include "vinesim/simulation.hpp"
#include "vinesim/units.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <sstream>
#include <thread>

using namespace vinesim;

namespace {

CommandRecord grow_record(double left_kpa, double right_kpa = 0.0, double speed = 10.0)
{
    CommandRecord r;
    r.mode = Mode::grow;
    r.supply_left_kpa = left_kpa;
    r.supply_right_kpa = right_kpa;
    r.speed_mm_s = speed;
    return r;
}

std::string trace_of(const std::vector<StateFrame>& frames, int groups)
{
    std::ostringstream out;
    write_frame_trace_header(out, groups);
    for (const auto& f : frames) write_frame_trace_row(out, f);
    return out.str();
}

}  // namespace

TEST(Simulation, FrameCadence)
{
    SimSettings st;
    st.frame_rate_hz = 10;
    Simulation sim(VineConfig::prototype(), st);
    std::vector<StateFrame> frames;
    for (int i = 0; i < 100; ++i) {
        if (auto f = sim.tick()) frames.push_back(*f);
    }
    ASSERT_EQ(frames.size(), 10u);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        EXPECT_NEAR(frames[i].t_s, 0.1 * static_cast<double>(i + 1), 1e-12);
        if (i > 0) {
            EXPECT_GT(frames[i].t_s, frames[i - 1].t_s);
        }
    }
}

TEST(Simulation, DefaultThirtyHertz)
{
    Simulation sim(VineConfig::prototype(), SimSettings{});
    int n = 0;
    for (int i = 0; i < 300; ++i) n += sim.tick().has_value();
    EXPECT_EQ(n, 90);
}

TEST(Simulation, CommandAppliesAtNextTick)
{
    Simulation sim(VineConfig::prototype(), SimSettings{});
    for (int i = 0; i < 7; ++i) sim.tick();
    const double t = sim.enqueue(grow_record(40));
    EXPECT_DOUBLE_EQ(t, 0.07);
    sim.tick();
    const auto s = sim.snapshot();
    EXPECT_EQ(s.mode, Mode::grow);
    EXPECT_EQ(s.supply_left, units::kpa(40));
    ASSERT_EQ(sim.command_log().size(), 1u);
    EXPECT_DOUBLE_EQ(sim.command_log()[0].t_s, 0.07);
}

TEST(Simulation, RejectedCommandLeavesStateAlone)
{
    Simulation sim(VineConfig::prototype(), SimSettings{});
    sim.tick();
    const auto before = sim.snapshot();
    EXPECT_THROW(sim.enqueue(grow_record(60)), CommandRejected);
    sim.tick();
    auto after = sim.snapshot();
    EXPECT_EQ(after.mode, before.mode);
    EXPECT_EQ(after.supply_left, before.supply_left);
    EXPECT_TRUE(sim.command_log().empty());
}

TEST(Simulation, FrameShowsFirstPouchAfterTipPasses)
{
    Simulation sim(VineConfig::prototype(), SimSettings{});
    sim.enqueue(grow_record(40));
    std::optional<StateFrame> last;
    for (int i = 0; i < 1000; ++i) {
        if (auto f = sim.tick()) last = f;
    }
    ASSERT_TRUE(last);
    EXPECT_NEAR(last->everted_mm, 100.0, 1e-9);
    // oracle: the same inputs through step()
    const auto cfg = VineConfig::prototype();
    VineState s = VineState::initial(cfg);
    s = step(s, 0.01, grow_record(40).to_command(), cfg).state;
    for (int i = 1; i < 1000; ++i) s = step(s, 0.01, {}, cfg).state;
    EXPECT_EQ(sim.snapshot(), s);
    const auto& p = last->pouches;
    const auto it = std::find_if(p.begin(), p.end(), [](const PouchReading& r) { return r.group == 1 && r.side == Side::left; });
    ASSERT_NE(it, p.end());
    EXPECT_EQ(it->kpa, 40.0);
}

TEST(Simulation, ZeroPressureFrameIsStraight)
{
    Simulation sim(VineConfig::prototype(), SimSettings{});
    sim.enqueue(grow_record(0));
    std::optional<StateFrame> last;
    for (int i = 0; i < 500; ++i) {
        if (auto f = sim.tick()) last = f;
    }
    ASSERT_TRUE(last);
    for (const auto& pt : last->backbone_mm) EXPECT_EQ(pt[1], 0.0);
    EXPECT_NEAR(last->backbone_mm.back()[0], last->everted_mm, 1e-9);
}

TEST(Simulation, ReplayReproducesTraceBytes)
{
    const auto cfg = VineConfig::prototype();
    const SimSettings st;
    Simulation live(cfg, st);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> p(-20, 40);
    std::uniform_int_distribution<int> mode(0, 2);
    std::bernoulli_distribution send(0.02);
    std::vector<StateFrame> frames;
    for (int i = 0; i < 5000; ++i) {
        if (send(rng)) {
            CommandRecord r;
            r.mode = static_cast<Mode>(mode(rng));
            r.supply_left_kpa = p(rng);
            if (send(rng)) r.speed_mm_s = 25.0;
            live.enqueue(r);
        }
        if (auto f = live.tick()) frames.push_back(*f);
    }
    const auto log = live.command_log();
    std::ostringstream log_text;
    write_command_log(log_text, log);
    std::istringstream log_in(log_text.str());
    const auto parsed = parse_command_log(log_in);
    const auto again = replay(cfg, st, parsed, 5000);
    EXPECT_EQ(trace_of(frames, 4), trace_of(again, 4));
}

TEST(Simulation, ConcurrentEnqueueIsRecordedAtItsTick)
{
    const auto cfg = VineConfig::prototype();
    const SimSettings st;
    Simulation live(cfg, st);
    std::vector<StateFrame> frames;
    std::atomic<bool> done{false};
    std::thread producer([&] {
        for (int i = 0; i < 200; ++i) {
            live.enqueue(grow_record(static_cast<double>(i % 40), 0.0, 5.0 + i % 10));
            std::this_thread::yield();
        }
        done = true;
    });
    std::int64_t ticks = 0;
    // one more tick after the producer finishes drains anything still pending
    for (bool last = false; ticks < 2000 || !last; ++ticks) {
        last = done;
        if (auto f = live.tick()) frames.push_back(*f);
        std::this_thread::yield();
    }
    producer.join();
    const auto log = live.command_log();
    EXPECT_EQ(log.size(), 200u);
    EXPECT_EQ(trace_of(frames, 4), trace_of(replay(cfg, st, log, ticks), 4));
}

TEST(Simulation, FrameJsonSchema)
{
    Simulation sim(VineConfig::prototype(), SimSettings{});
    sim.enqueue(grow_record(40));
    StateFrame f;
    for (int i = 0; i < 900; ++i) {
        if (auto x = sim.tick()) f = *x;
    }
    const auto j = frame_to_json(f, "abc");
    EXPECT_EQ(j.at("type"), "frame");
    EXPECT_EQ(j.at("session"), "abc");
    for (const char* key : {"t_s", "everted_mm", "backbone_mm", "pouches", "warnings", "mode"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_TRUE(j.at("backbone_mm").at(0).is_array());
    EXPECT_EQ(j.at("backbone_mm").at(0).size(), 2u);
    const auto& p0 = j.at("pouches").at(0);
    EXPECT_EQ(p0.at("group"), 1);
    EXPECT_EQ(p0.at("side"), "left");
    EXPECT_EQ(p0.at("kpa"), 40.0);
}

TEST(Simulation, ScheduleDrivenRunMatchesSchedule)
{
    const auto cfg = VineConfig::prototype();
    const SimSettings st;
    const std::vector<double> left{units::kpa(10), units::kpa(20), units::kpa(30), units::kpa(40)};
    const std::vector<double> right{0, 0, 0, 0};
    const auto sched = PressureSchedule::from_groups(left, right);
    Simulation sim(cfg, st);
    for (int i = 0; i < 100000 && sim.snapshot().everted_length < cfg.geometry.total_length(); ++i) {
        if (auto c = schedule_command(sim.snapshot(), sched, cfg, st)) sim.enqueue(*c);
        sim.tick();
    }
    const auto s = sim.snapshot();
    for (int g = 0; g < 4; ++g) EXPECT_EQ(s.left[g].held_pressure, left[g]) << g;
}

TEST(SimSettings, Validation)
{
    SimSettings st;
    st.dt = 0.0;
    EXPECT_THROW(st.validate(), ValidationError);
    st = {};
    st.frame_rate_hz = 0;
    EXPECT_THROW(st.validate(), ValidationError);
}
