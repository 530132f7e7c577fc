#include "vinesim/kinematics.hpp"

#include "vinesim/errors.hpp"
#include "vinesim/units.hpp"

#include <fmt/format.h>

#include <cmath>

namespace vinesim {

using units::kPi;

std::string_view to_string(Side side) { return side == Side::left ? "left" : "right"; }

Side side_from_string(std::string_view text)
{
    if (text == "left" || text == "L" || text == "l") return Side::left;
    if (text == "right" || text == "R" || text == "r") return Side::right;
    throw ValidationError("side", fmt::format("unknown side '{}'", text));
}

void RobotGeometry::validate() const
{
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(d_vine) || !positive(l_cpam) || !positive(w_cpam) || !positive(f_cpam)) {
        throw ValidationError("geometry.positive_lengths",
                              "d_vine, l_cpam, w_cpam and f_cpam must be strictly positive");
    }
    if (2.0 * f_cpam > w_cpam) {
        throw ValidationError("geometry.fold_fits_width",
                              fmt::format("fold width {:.3f} mm is too wide: 2*f_cpam must not "
                                          "exceed w_cpam = {:.3f} mm",
                                          units::to_mm(f_cpam), units::to_mm(w_cpam)));
    }
    if (cells_per_side < 1 || cpams_per_valve < 1) {
        throw ValidationError("geometry.counts", "cells_per_side and cpams_per_valve must be >= 1");
    }
    if (cells_per_side % cpams_per_valve != 0) {
        throw ValidationError("geometry.valve_grouping",
                              fmt::format("cells_per_side ({}) is not a multiple of "
                                          "cpams_per_valve ({})",
                                          cells_per_side, cpams_per_valve));
    }
    if (!positive(length_correction)) {
        throw ValidationError("geometry.length_correction", "length_correction must be positive");
    }
}

double Backbone::reference_length() const
{
    double total = 0.0;
    for (const auto& s : segments) total += s.bend.l;
    return total;
}

double normalize_angle(double theta)
{
    double r = std::remainder(theta, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

double fold_width(double l_cpam)
{
    if (!(l_cpam > 0.0)) throw DomainError("fold_width: cPAM length must be positive");
    // Half the diameter of a cylinder whose circumference is twice the pouch length.
    return 0.5 * (2.0 / kPi) * l_cpam;
}

double theoretical_bend_per_length(double epsilon, double d_vine)
{
    if (!(epsilon >= 0.0 && epsilon < 1.0)) {
        throw DomainError("theoretical_bend_per_length: contraction must lie in [0, 1)");
    }
    if (!(d_vine > 0.0)) throw DomainError("theoretical_bend_per_length: diameter must be positive");
    return epsilon * (2.0 * kPi) / (2.0 * kPi * d_vine);
}

namespace {

Transform2 lateral_shift(double dy)
{
    Transform2 t = Transform2::Identity();
    t(1, 2) = dy;
    return t;
}

Transform2 arc_transform(double q, double l)
{
    Transform2 t = Transform2::Identity();
    if (std::abs(q) < kStraightThreshold) {
        t(0, 2) = l;
        return t;
    }
    const double c = std::cos(q);
    const double s = std::sin(q);
    const double chord = l / (q / 2.0) * std::sin(q / 2.0);
    t(0, 0) = c;
    t(0, 1) = -s;
    t(1, 0) = s;
    t(1, 1) = c;
    t(0, 2) = chord * std::sin((kPi - q) / 2.0);
    t(1, 2) = chord * std::cos((kPi - q) / 2.0);
    return t;
}

void check_bend(const SegmentBend& bend)
{
    if (!(std::abs(bend.q) < kPi)) {
        throw DomainError(fmt::format("segment bend |q| = {} rad must stay below pi", std::abs(bend.q)));
    }
    if (!(bend.l > 0.0)) throw DomainError("segment length must be positive");
}

// The constant-length reference line is the unactuated side, opposite the pouch.
double reference_offset(double d_vine, Side side)
{
    return side == Side::left ? -d_vine / 2.0 : d_vine / 2.0;
}

PlanarPose to_pose(const Transform2& t, double heading)
{
    return {t(0, 2), t(1, 2), normalize_angle(heading)};
}

}  // namespace

Transform2 segment_transform(const SegmentBend& bend, double d_vine, Side side)
{
    check_bend(bend);
    const double offset = reference_offset(d_vine, side);
    return lateral_shift(offset) * arc_transform(bend.q, bend.l) * lateral_shift(-offset);
}

Segment make_segment(double q, double l)
{
    return {{q, l}, q < 0.0 ? Side::right : Side::left};
}

Backbone chain_pose(std::span<const Segment> segments, double d_vine)
{
    Backbone out;
    out.d_vine = d_vine;
    out.segments.assign(segments.begin(), segments.end());
    out.poses.reserve(segments.size() + 1);

    Transform2 frame = Transform2::Identity();
    double heading = 0.0;
    for (const auto& seg : segments) {
        frame = frame * segment_transform(seg.bend, d_vine, seg.side);
        heading += seg.bend.q;
        out.poses.push_back(to_pose(frame, heading));
    }
    return out;
}

Backbone chain_pose(std::span<const Segment> segments, const RobotGeometry& geometry)
{
    return chain_pose(segments, geometry.d_vine);
}

Backbone sample_backbone(Backbone backbone, int points_per_segment)
{
    if (points_per_segment < 1) throw DomainError("sample_backbone: need at least one point per segment");

    std::vector<BackbonePoint> pts;
    pts.reserve(1 + backbone.segments.size() * static_cast<std::size_t>(points_per_segment));
    pts.push_back({0.0, 0.0, 0.0, 0.0});

    Transform2 frame = Transform2::Identity();
    double heading = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < backbone.segments.size(); ++i) {
        const auto& seg = backbone.segments[i];
        for (int j = 1; j < points_per_segment; ++j) {
            const double t = static_cast<double>(j) / points_per_segment;
            const SegmentBend partial{seg.bend.q * t, seg.bend.l * t};
            const Transform2 local = frame * segment_transform(partial, backbone.d_vine, seg.side);
            pts.push_back({s + partial.l, local(0, 2), local(1, 2), normalize_angle(heading + partial.q)});
        }
        frame = frame * segment_transform(seg.bend, backbone.d_vine, seg.side);
        heading += seg.bend.q;
        s += seg.bend.l;
        const auto& end = backbone.poses[i + 1];
        pts.push_back({s, end.x, end.y, end.theta});
    }
    backbone.samples = std::move(pts);
    return backbone;
}

}  // namespace vinesim
