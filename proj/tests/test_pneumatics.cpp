#include "vinesim/errors.hpp"
#include "vinesim/pneumatics.hpp"
#include "vinesim/units.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace vinesim;
using units::kpa;

TEST(ValveDesign, PrototypeConstants)
{
    const auto v = ValveParams::prototype();
    const double r = v.d_ball / 2;
    EXPECT_NEAR(cpam_max_force(v), 0.5 * 4 * std::numbers::pi * r * r * v.p_max, 1e-15);
    EXPECT_NEAR(cpam_max_force(v), 0.3927, 1e-4);
    EXPECT_NEAR(units::to_mm(required_pretension(v)), 0.424, 0.002);
    EXPECT_NEAR(required_magnet_force(v), 0.785, 0.001);
    EXPECT_NO_THROW(v.validate());
}

TEST(ValveDesign, ZeroPressureNeedsNothing)
{
    auto v = ValveParams::prototype();
    v.p_max = 0.0;
    EXPECT_EQ(required_pretension(v), 0.0);
    EXPECT_EQ(required_magnet_force(v), 0.0);
}

TEST(ValveDesign, MagnetThresholdScalesWithBallArea)
{
    auto v = ValveParams::prototype();
    const double f = required_magnet_force(v);
    v.d_ball *= 2;
    EXPECT_NEAR(required_magnet_force(v), 4 * f, 1e-12);
}

TEST(ValveDesign, RejectsNonPositiveStiffness)
{
    auto v = ValveParams::prototype();
    v.k_spring = 0.0;
    EXPECT_THROW(required_pretension(v), DomainError);
}

TEST(ValveDesign, DesignInequalitiesChecked)
{
    auto weak_spring = ValveParams::prototype();
    weak_spring.x0 = 0.1e-3;
    try {
        weak_spring.validate();
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.invariant(), "valve.closes_without_magnet");
    }
    auto weak_magnet = ValveParams::prototype();
    weak_magnet.f_magnet = 0.5;
    try {
        weak_magnet.validate();
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.invariant(), "valve.opens_with_magnet");
    }
}

TEST(ValveStep, ClosedHoldsWithoutSupply)
{
    const auto v = ValveParams::prototype();
    const ValveState s = valve_step({false, kpa(30)}, false, 0.0, v);
    EXPECT_FALSE(s.is_open);
    EXPECT_EQ(s.held_pressure, kpa(30));
}

TEST(ValveStep, MagnetOpensAndEqualizes)
{
    const auto v = ValveParams::prototype();
    const ValveState s = valve_step({false, kpa(30)}, true, kpa(40), v);
    EXPECT_TRUE(s.is_open);
    EXPECT_EQ(s.held_pressure, kpa(40));
}

TEST(ValveStep, VacuumDeflates)
{
    const auto v = ValveParams::prototype();
    const ValveState s = valve_step({false, kpa(20)}, true, kpa(-10), v);
    EXPECT_TRUE(s.is_open);
    EXPECT_EQ(s.held_pressure, kpa(-10));
}

TEST(ValveStep, OutOfRangeSupplyRejected)
{
    const auto v = ValveParams::prototype();
    EXPECT_THROW(valve_step({}, true, kpa(41), v), CommandRejected);
    EXPECT_THROW(valve_step({}, false, kpa(-25), v), CommandRejected);
    EXPECT_THROW(valve_step({}, true, std::nan(""), v), CommandRejected);
}

TEST(ValveStep, RandomSequencesHoldAndTrack)
{
    const auto v = ValveParams::prototype();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> p(v.p_vacuum, v.p_max);
    std::bernoulli_distribution magnet(0.3);
    ValveState s{false, kpa(12.5)};
    for (int i = 0; i < 10000; ++i) {
        const bool m = magnet(rng);
        const double supply = p(rng);
        const ValveState next = valve_step(s, m, supply, v);
        if (m) {
            EXPECT_TRUE(next.is_open);
            EXPECT_EQ(next.held_pressure, supply);
        } else {
            EXPECT_FALSE(next.is_open);
            EXPECT_EQ(next.held_pressure, s.held_pressure);
        }
        s = next;
    }
}

TEST(Calibration, DefaultAnchors)
{
    const CalibrationCurve c;
    EXPECT_NEAR(units::to_deg_per_mm(c.bend_from_pressure(kpa(40))), 0.185, 1e-12);
    EXPECT_EQ(c.bend_from_pressure(0.0), 0.0);
    EXPECT_NEAR(units::to_deg_per_mm(c.bend_from_pressure(kpa(20))), 0.0925, 1e-12);
    EXPECT_EQ(c.bend_from_pressure(kpa(-10)), 0.0);
    EXPECT_EQ(c.bend_from_pressure(kpa(60)), c.max_bend());
}

TEST(Calibration, InverseLookup)
{
    const CalibrationCurve c;
    EXPECT_EQ(c.pressure_from_bend(0.0), 0.0);
    EXPECT_EQ(c.pressure_from_bend(units::deg_per_mm(0.185)), kpa(40));
    EXPECT_THROW(c.pressure_from_bend(units::deg_per_mm(0.2)), InfeasibleBend);
    EXPECT_THROW(c.pressure_from_bend(-1.0), DomainError);
}

TEST(Calibration, NodeRoundTripAndPlateau)
{
    const CalibrationCurve c({{0, 0},
                              {kpa(10), units::deg_per_mm(0.05)},
                              {kpa(20), units::deg_per_mm(0.12)},
                              {kpa(30), units::deg_per_mm(0.12)},
                              {kpa(40), units::deg_per_mm(0.16)}});
    for (const auto& pt : c.points()) {
        if (pt.pressure == kpa(30)) continue;  // plateau: smallest pressure wins
        EXPECT_EQ(c.pressure_from_bend(c.bend_from_pressure(pt.pressure)), pt.pressure);
    }
    EXPECT_EQ(c.pressure_from_bend(units::deg_per_mm(0.12)), kpa(20));
    for (double p = 0; p <= kpa(40); p += 250.0) {
        if (p > kpa(20) && p <= kpa(30)) continue;
        EXPECT_NEAR(c.pressure_from_bend(c.bend_from_pressure(p)), p, 1e-9);
    }
}

TEST(Calibration, MonotoneAndContinuous)
{
    const CalibrationCurve c({{0, 0}, {kpa(15), 2.0}, {kpa(25), 2.5}, {kpa(40), 3.2}});
    double prev = c.bend_from_pressure(0.0);
    for (double p = 1.0; p <= kpa(50); p += 1.0) {
        const double b = c.bend_from_pressure(p);
        EXPECT_GE(b, prev);
        EXPECT_LT(b - prev, 1e-3);
        prev = b;
    }
}

TEST(Calibration, InvalidTablesRejected)
{
    auto invariant_of = [](std::vector<CalibrationPoint> pts) {
        try {
            CalibrationCurve c(std::move(pts));
        } catch (const ValidationError& e) {
            return e.invariant();
        }
        return std::string{};
    };
    EXPECT_EQ(invariant_of({{0, 0}}), "calibration.size");
    EXPECT_EQ(invariant_of({{kpa(1), 0}, {kpa(2), 1}}), "calibration.origin");
    EXPECT_EQ(invariant_of({{0, 0}, {kpa(20), 1}, {kpa(20), 2}}), "calibration.pressure_increasing");
    EXPECT_EQ(invariant_of({{0, 0}, {kpa(20), 2}, {kpa(30), 1}}), "calibration.monotone");
}

TEST(Calibration, CsvRoundTrip)
{
    std::istringstream in("pressure_kpa,bend_deg_per_mm\n0,0\n# measured\n20,0.08\n40,0.185\n");
    const CalibrationCurve c = parse_calibration_csv(in);
    ASSERT_EQ(c.points().size(), 3u);
    EXPECT_NEAR(units::to_deg_per_mm(c.points()[1].bend_per_length), 0.08, 1e-12);
    std::ostringstream out;
    write_calibration_csv(out, c);
    std::istringstream back(out.str());
    const CalibrationCurve c2 = parse_calibration_csv(back);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(c2.points()[i].pressure, c.points()[i].pressure, 1e-9);
        EXPECT_NEAR(c2.points()[i].bend_per_length, c.points()[i].bend_per_length, 1e-9);
    }
    std::ostringstream si;
    write_calibration_csv_si(si, c);
    EXPECT_EQ(si.str().rfind("pressure_pa,bend_rad_per_m\n", 0), 0u);
}

TEST(Calibration, CsvErrorsNameTheProblem)
{
    std::istringstream bad_header("p,b\n0,0\n");
    EXPECT_THROW(parse_calibration_csv(bad_header), ValidationError);
    std::istringstream bad_number("pressure_kpa,bend_deg_per_mm\n0,0\n40,abc\n");
    try {
        parse_calibration_csv(bad_number);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.invariant(), "csv.number");
    }
    std::istringstream decreasing("pressure_kpa,bend_deg_per_mm\n0,0\n20,0.1\n40,0.05\n");
    try {
        parse_calibration_csv(decreasing);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.invariant(), "calibration.monotone");
    }
}
