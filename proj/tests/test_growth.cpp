#include "vinesim/errors.hpp"
#include "vinesim/growth.hpp"
#include "vinesim/units.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace vinesim;
using units::kpa;
using units::mm;

namespace {

Command grow_at(double speed_mm_s, double left_kpa = 0.0, double right_kpa = 0.0)
{
    Command c;
    c.set_mode = Mode::grow;
    c.set_speed = mm(speed_mm_s);
    c.set_supply_left = kpa(left_kpa);
    c.set_supply_right = kpa(right_kpa);
    return c;
}

VineState run(VineState s, const VineConfig& cfg, const Command& first, int steps, double dt = 0.01)
{
    s = step(s, dt, first, cfg).state;
    for (int i = 1; i < steps; ++i) s = step(s, dt, {}, cfg).state;
    return s;
}

// Everted length at which cell i (0-based) starts.
double arc_start(int cell, const RobotGeometry& g) { return cell * g.l_cpam; }

}  // namespace

TEST(Step, GrowAdvancesBySpeedTimesDt)
{
    const auto cfg = VineConfig::prototype();
    const auto s = step(VineState::initial(cfg), 0.1, grow_at(10), cfg).state;
    EXPECT_DOUBLE_EQ(s.everted_length, mm(1));
    EXPECT_EQ(s.ticks, 1);
}

TEST(Step, ClampsToTotalAndZero)
{
    const auto cfg = VineConfig::prototype();
    auto s = run(VineState::initial(cfg), cfg, grow_at(100), 1000);
    EXPECT_EQ(s.everted_length, cfg.geometry.total_length());
    Command r;
    r.set_mode = Mode::retract;
    s = run(s, cfg, r, 10000);
    EXPECT_EQ(s.everted_length, 0.0);

    // retract at zero length: accepted, no movement
    const auto z = step(VineState::initial(cfg), 0.01, r, cfg).state;
    EXPECT_EQ(z.everted_length, 0.0);
    EXPECT_EQ(z.mode, Mode::retract);
}

TEST(Step, PassedValveHoldsSupply)
{
    const auto cfg = VineConfig::prototype();
    // group 0's valve sits at 80 mm; grow to 85 mm at 40 kPa left
    auto s = run(VineState::initial(cfg), cfg, grow_at(10, 40), 850);
    EXPECT_EQ(s.left[0].held_pressure, kpa(40));
    EXPECT_TRUE(s.left[0].is_open);
    // past the magnet window, then drop the supply: group 0 keeps 40 kPa
    s = run(s, cfg, Command{}, 100);
    EXPECT_FALSE(s.left[0].is_open);
    Command c;
    c.set_supply_left = 0.0;
    s = run(s, cfg, c, 500);
    EXPECT_FALSE(s.left[0].is_open);
    EXPECT_EQ(s.left[0].held_pressure, kpa(40));
    EXPECT_EQ(s.left[1].held_pressure, 0.0);
}

TEST(Step, RetractWithVacuumDeflatesEachValve)
{
    const auto cfg = VineConfig::prototype();
    auto s = run(VineState::initial(cfg), cfg, grow_at(20, 40, 0), 2000);
    ASSERT_EQ(s.everted_length, cfg.geometry.total_length());
    for (const auto& v : s.left) EXPECT_EQ(v.held_pressure, kpa(40));

    Command r;
    r.set_mode = Mode::retract;
    r.set_supply_left = cfg.valves.p_vacuum;
    r.set_supply_right = cfg.valves.p_vacuum;
    // before a pouch has been drawn back into the tip mount it deflates to the vacuum
    const int groups = cfg.geometry.groups_per_side();
    VineState prev = s;
    s = step(s, 0.01, r, cfg).state;
    for (int i = 0; i < 5000 && s.everted_length > 0.0; ++i) {
        for (int g = 0; g < groups; ++g) {
            const double pos = valve_position(g, cfg.geometry);
            if (prev.everted_length >= pos && s.everted_length < pos) {
                EXPECT_EQ(s.left[g].held_pressure, cfg.valves.p_vacuum) << g;
                EXPECT_EQ(s.right[g].held_pressure, cfg.valves.p_vacuum) << g;
            }
        }
        prev = s;
        s = step(s, 0.01, {}, cfg).state;
    }
    for (const auto& v : s.left) EXPECT_EQ(v.held_pressure, cfg.valves.p_vacuum);
}

TEST(Step, InvalidCommandRejected)
{
    const auto cfg = VineConfig::prototype();
    const auto s0 = VineState::initial(cfg);
    EXPECT_THROW(step(s0, 0.01, grow_at(10, 60), cfg), CommandRejected);
    EXPECT_THROW(step(s0, 0.01, grow_at(-1), cfg), CommandRejected);
    EXPECT_THROW(step(s0, 0.0, {}, cfg), CommandRejected);
    EXPECT_THROW(step(s0, 0.01, grow_at(10, 0, -30), cfg), CommandRejected);
}

TEST(Step, FastEversionSkipsValveWithWarning)
{
    auto cfg = VineConfig::prototype();
    cfg.tip.magnet_window = mm(2);
    auto s = VineState::initial(cfg);
    s.everted_length = mm(79);
    // 5 mm in one step crosses the valve at 80 mm and leaves the 2 mm window behind
    const auto r = step(s, 0.1, grow_at(50, 40), cfg);
    ASSERT_FALSE(r.warnings.empty());
    EXPECT_NE(r.warnings[0].find("skipped_valve group=1"), std::string::npos);
    EXPECT_EQ(r.state.left[0].held_pressure, 0.0);
    EXPECT_FALSE(r.state.left[0].is_open);
}

TEST(Step, Deterministic)
{
    const auto cfg = VineConfig::prototype();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> p(-20, 40);
    std::vector<Command> cmds;
    for (int i = 0; i < 500; ++i) cmds.push_back(grow_at(10, p(rng), p(rng)));
    auto a = VineState::initial(cfg), b = VineState::initial(cfg);
    for (const auto& c : cmds) {
        a = step(a, 0.01, c, cfg).state;
        b = step(b, 0.01, c, cfg).state;
        ASSERT_EQ(a, b);
    }
}

// Randomized operator sessions checked against the valve and eversion invariants.
TEST(StepProperties, RandomizedSequences)
{
    const auto cfg = VineConfig::prototype();
    const auto& geo = cfg.geometry;
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> mode_dist(0, 2);
    std::uniform_real_distribution<double> p(cfg.valves.p_vacuum, cfg.valves.p_max);
    std::uniform_real_distribution<double> speed(0.0, 0.03);
    std::bernoulli_distribution change(0.05);

    for (int run_id = 0; run_id < 20; ++run_id) {
        VineState s = VineState::initial(cfg);
        for (int i = 0; i < 1000; ++i) {
            Command c;
            if (change(rng)) c.set_mode = static_cast<Mode>(mode_dist(rng));
            if (change(rng)) c.set_supply_left = p(rng);
            if (change(rng)) c.set_supply_right = p(rng);
            if (change(rng)) c.set_speed = speed(rng);
            const VineState next = step(s, 0.01, c, cfg).state;

            if (next.mode == Mode::grow) {

                ASSERT_GE(next.everted_length, s.everted_length);

            }
            if (next.mode == Mode::retract) {
                ASSERT_LE(next.everted_length, s.everted_length);
            }
            if (next.mode == Mode::hold) {
                ASSERT_EQ(next.everted_length, s.everted_length);
            }
            ASSERT_GE(next.everted_length, 0.0);
            ASSERT_LE(next.everted_length, geo.total_length());

            for (Side side : {Side::left, Side::right}) {
                const double supply = side == Side::left ? next.supply_left : next.supply_right;
                for (int g = 0; g < geo.groups_per_side(); ++g) {
                    const auto& before = s.valves(side)[g];
                    const auto& after = next.valves(side)[g];
                    if (!after.is_open) {
                        ASSERT_EQ(after.held_pressure, before.held_pressure);
                    } else if (valve_position(g, geo) <= next.everted_length) {
                        ASSERT_EQ(after.held_pressure, supply);
                    } else {
                        ASSERT_EQ(after.held_pressure, std::min(supply, 0.0));
                    }
                    if (after.is_open && supply < 0.0) {
                        ASSERT_EQ(after.held_pressure, supply);
                    }
                }
                // no pouch ahead of the tip holds positive pressure
                for (int cell = 0; cell < geo.cells_per_side; ++cell) {
                    if (arc_start(cell, geo) >= next.everted_length) {
                        ASSERT_LE(next.valves(side)[cell / geo.cpams_per_valve].held_pressure, 0.0);
                    }
                }
            }
            s = next;
        }
    }
}

TEST(Shape, ZeroPressuresStraight)
{
    const auto cfg = VineConfig::prototype();
    auto s = VineState::initial(cfg);
    s.everted_length = mm(123);
    const Backbone b = shape(s, cfg);
    EXPECT_NEAR(b.tip().x, mm(123), 1e-15);
    EXPECT_EQ(b.tip().y, 0.0);
    EXPECT_EQ(b.tip().theta, 0.0);
}

TEST(Shape, AllLeftSaturatedTurns59Degrees)
{
    const auto cfg = VineConfig::prototype();
    auto s = VineState::initial(cfg);
    s.everted_length = cfg.geometry.total_length();
    for (auto& v : s.left) v.held_pressure = kpa(40);
    EXPECT_NEAR(units::to_deg(shape(s, cfg).tip().theta), 59.2, 1e-9);
}

TEST(Shape, RightThenStraightThenLeft)
{
    auto cfg = VineConfig::prototype();
    cfg.geometry.cells_per_side = 9;
    cfg.geometry.cpams_per_valve = 1;
    auto s = VineState::initial(cfg);
    s.everted_length = cfg.geometry.total_length();
    for (int g = 0; g < 3; ++g) s.right[g].held_pressure = kpa(40);
    for (int g = 4; g < 9; ++g) s.left[g].held_pressure = kpa(40);
    EXPECT_NEAR(units::to_deg(shape(s, cfg).tip().theta), 14.8, 1e-9);
}

TEST(Shape, PartialCellIsStraight)
{
    const auto cfg = VineConfig::prototype();
    auto s = VineState::initial(cfg);
    s.everted_length = mm(100);
    s.left[0].held_pressure = kpa(40);
    const Backbone b = shape(s, cfg);
    ASSERT_EQ(b.segments.size(), 3u);
    EXPECT_EQ(b.segments[2].bend.q, 0.0);
    EXPECT_DOUBLE_EQ(b.segments[2].bend.l, mm(20));
    EXPECT_NEAR(units::to_deg(b.tip().theta), 14.8, 1e-9);
}

TEST(Shape, LengthCorrectionScalesSegments)
{
    auto cfg = VineConfig::prototype();
    cfg.geometry.length_correction = 0.95;
    auto s = VineState::initial(cfg);
    s.everted_length = cfg.geometry.total_length();
    EXPECT_NEAR(shape(s, cfg).tip().x, 0.95 * cfg.geometry.total_length(), 1e-15);
}

TEST(RetractionRisk, Rules)
{
    const auto cfg = VineConfig::prototype();
    auto s = VineState::initial(cfg);
    s.everted_length = mm(200);
    s.mode = Mode::retract;
    EXPECT_TRUE(check_retraction_risk(s, cfg).empty());

    s.left[0].held_pressure = kpa(40);
    const auto risk = check_retraction_risk(s, cfg);
    ASSERT_EQ(risk.size(), 2u);  // both cells of group 1
    EXPECT_EQ(risk[0].cell, 0);
    EXPECT_EQ(risk[0].side, Side::left);
    EXPECT_EQ(risk[0].pressure, kpa(40));

    s.mode = Mode::hold;
    EXPECT_TRUE(check_retraction_risk(s, cfg).empty());
}

TEST(CommandLog, RoundTrip)
{
    std::vector<CommandRecord> log(3);
    log[0].t_s = 0.0;
    log[0].mode = Mode::grow;
    log[0].supply_left_kpa = 40.0;
    log[0].speed_mm_s = 10.0;
    log[1].t_s = 1.25;
    log[1].supply_right_kpa = 12.345678901;
    log[2].t_s = 3.0;
    log[2].mode = Mode::retract;
    std::ostringstream out;
    write_command_log(out, log);
    EXPECT_EQ(out.str().substr(0, kCommandLogHeader.size()), kCommandLogHeader);
    std::istringstream in(out.str());
    const auto back = parse_command_log(in);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].t_s, log[i].t_s);
        EXPECT_EQ(back[i].mode, log[i].mode);
        EXPECT_EQ(back[i].supply_left_kpa, log[i].supply_left_kpa);
        EXPECT_EQ(back[i].supply_right_kpa, log[i].supply_right_kpa);
        EXPECT_EQ(back[i].speed_mm_s, log[i].speed_mm_s);
    }
}

TEST(CommandLog, RejectsUnsortedAndBadMode)
{
    std::istringstream unsorted(std::string(kCommandLogHeader) + "\n1,grow,,,\n0.5,hold,,,\n");
    EXPECT_THROW(parse_command_log(unsorted), ValidationError);
    std::istringstream bad_mode(std::string(kCommandLogHeader) + "\n0,fly,,,\n");
    EXPECT_THROW(parse_command_log(bad_mode), ValidationError);
}

TEST(VineConfig, WindowBounds)
{
    auto cfg = VineConfig::prototype();
    cfg.tip.magnet_window = mm(41);
    try {
        cfg.validate();
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.invariant(), "tip.magnet_window");
    }
}
