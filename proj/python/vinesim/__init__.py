"""Vine robot kinematics, valve growth simulation and pressure planning.

Lengths are in metres, angles in radians and pressures in pascals, except where a name
says otherwise (``*_mm``, ``*_kpa``, ``*_deg``) or a dict follows the JSON message schema.
"""

from ._vinesim import (
    Backbone,
    CalibrationCurve,
    CommandRejected,
    DomainError,
    InfeasibleBend,
    IoError,
    Mode,
    PathScore,
    PlanarPose,
    PlanResult,
    RobotGeometry,
    Side,
    Simulation,
    ValidationError,
    chain_pose,
    fold_width,
    plan_pressures,
    predict_path,
    run_scenario,
    score_path,
    segment_transform,
    theoretical_bend_per_length,
    validate_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
