#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace vinesim {

enum class Side { left, right };

std::string_view to_string(Side side);
Side side_from_string(std::string_view text);

// Static dimensions of the vine body and its pouch layout. SI units.
struct RobotGeometry {
    double d_vine = 0.080;   // tube diameter
    double l_cpam = 0.040;   // deflated cPAM length, one cell along the backbone
    double w_cpam = 0.040;   // cPAM width
    double f_cpam = 0.010;   // fold width
    int cells_per_side = 8;
    int cpams_per_valve = 2;
    // Scales the kinematic segment length of every cell. 1.0 uses the ideal cPAM length.
    double length_correction = 1.0;

    static RobotGeometry prototype() { return {}; }

    // Throws ValidationError naming the first violated invariant.
    void validate() const;

    int groups_per_side() const { return cells_per_side / cpams_per_valve; }
    double total_length() const { return cells_per_side * l_cpam; }
};

// Signed bend of one constant-curvature piece. Positive q bends toward +y (left).
// `l` is the length of the unactuated side.
struct SegmentBend {
    double q = 0.0;
    double l = 0.0;
};

struct Segment {
    SegmentBend bend;
    Side side = Side::left;  // actuated side
};

using Transform2 = Eigen::Matrix3d;

struct PlanarPose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // (-pi, pi]
};

struct BackbonePoint {
    double s = 0.0;  // arc length along the unactuated reference line
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

// Boundary poses of a segment chain, base first. `samples` is filled by sample_backbone().
struct Backbone {
    std::vector<PlanarPose> poses{PlanarPose{}};
    std::vector<Segment> segments;
    double d_vine = 0.0;
    std::optional<std::vector<BackbonePoint>> samples;

    const PlanarPose& tip() const { return poses.back(); }
    double reference_length() const;
};

double normalize_angle(double theta);

// Width of the side fold that forms the base of the inflated cylinder.
double fold_width(double l_cpam);

// Ideal bend per unit length (rad/m) for a pouch contracting by `epsilon` on a tube of
// diameter `d_vine`.
double theoretical_bend_per_length(double epsilon, double d_vine);

// Offset constant-curvature transform: shift from the centreline to the unactuated side,
// bend along that side with arc length `bend.l`, shift back. Straight segments below
// |q| < kStraightThreshold take the exact translation (l, 0).
Transform2 segment_transform(const SegmentBend& bend, double d_vine, Side side);

inline constexpr double kStraightThreshold = 1e-9;

Backbone chain_pose(std::span<const Segment> segments, double d_vine);
Backbone chain_pose(std::span<const Segment> segments, const RobotGeometry& geometry);

// Dense polyline with `points_per_segment` intervals per segment (1 + n * segments points).
// Interior points follow each segment's arc; boundary points are the chain poses exactly.
Backbone sample_backbone(Backbone backbone, int points_per_segment);

// Picks the actuated side from the sign of q.
Segment make_segment(double q, double l);

}  // namespace vinesim
