"""Algebraic maps between trajectories and model states/inputs.

For both supported models the planar position doubles as the flat output:
states and inputs follow from the output and its first two derivatives
without integrating the dynamics, so constraint checks reduce to pointwise
algebra on the sampled trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clothoids import Trajectory
from .scenario import DiffDriveParams

DEGENERATE_SPEED = 1e-9


class ZeroSpeedSample(ValueError):
    """Trajectory contains a sample with nonpositive speed."""


class DegenerateVelocity(ValueError):
    """Output velocity too small: heading and turn rate are undefined."""


class ZeroInput(ValueError):
    """Forward speed input is zero; the inverse map is undefined."""


@dataclass(frozen=True)
class FlatTrace:
    """Sampled flat output and derivatives; theta/theta_dot ride along for
    the quadruped map."""

    t: np.ndarray
    y: np.ndarray        # (n, 2)
    y_dot: np.ndarray    # (n, 2)
    y_ddot: np.ndarray   # (n, 2)
    theta: np.ndarray
    theta_dot: np.ndarray


@dataclass(frozen=True)
class StateInputTrace:
    """Model states and inputs on the same timestamps as the source trace.

    ``u`` is (n, 2) = (v, omega) for the differential drive and (n, 3) =
    (left-right, forward-backward, rotational speed) for the quadruped.
    """

    t: np.ndarray
    x: np.ndarray            # (n, 3)
    u: np.ndarray
    u1_dot: np.ndarray | None = None
    wheel_speeds: np.ndarray | None = None   # (n, 2) = (right, left)


def flat_trace_from_trajectory(traj: Trajectory) -> FlatTrace:
    """Analytic output derivatives of a constant-speed trajectory.

    Tangential acceleration is zero at constant speed, so the second
    derivative is purely centripetal: ``v^2 * kappa`` along the normal.
    """
    if np.any(traj.v <= 0.0):
        raise ZeroSpeedSample("trajectory has a sample with nonpositive speed")
    cos_t = np.cos(traj.theta)
    sin_t = np.sin(traj.theta)
    y_dot = np.column_stack((traj.v * cos_t, traj.v * sin_t))
    centripetal = traj.v ** 2 * traj.kappa
    y_ddot = np.column_stack((-centripetal * sin_t, centripetal * cos_t))
    return FlatTrace(t=traj.t, y=traj.positions(), y_dot=y_dot, y_ddot=y_ddot,
                     theta=np.array(traj.theta), theta_dot=traj.v * traj.kappa)


def diffdrive_forward(flat: FlatTrace,
                      params: DiffDriveParams | None = None) -> StateInputTrace:
    """States and inputs of the differential drive from the flat output.

    Uses the forward-motion branch (positive speed); wheel speeds are added
    when the drive geometry is supplied.
    """
    y1d, y2d = flat.y_dot[:, 0], flat.y_dot[:, 1]
    y1dd, y2dd = flat.y_ddot[:, 0], flat.y_ddot[:, 1]
    speed_sq = y1d ** 2 + y2d ** 2
    speed = np.sqrt(speed_sq)
    if np.any(speed < DEGENERATE_SPEED):
        raise DegenerateVelocity("output velocity below the degeneracy threshold")
    x3 = np.arctan2(y2d, y1d)
    u1 = speed
    u2 = (y1d * y2dd - y1dd * y2d) / speed_sq
    u1_dot = (y1d * y1dd + y2d * y2dd) / speed
    x = np.column_stack((flat.y[:, 0], flat.y[:, 1], x3))
    wheels = None
    if params is not None:
        wheels = wheel_speeds(u1, u2, params)
    return StateInputTrace(t=flat.t, x=x, u=np.column_stack((u1, u2)),
                           u1_dot=u1_dot, wheel_speeds=wheels)


def diffdrive_inverse(trace: StateInputTrace) -> FlatTrace:
    """Flat output and derivatives from differential-drive states/inputs."""
    u1 = trace.u[:, 0]
    u2 = trace.u[:, 1]
    if np.any(np.abs(u1) < DEGENERATE_SPEED):
        raise ZeroInput("forward speed input is zero")
    if trace.u1_dot is None:
        raise ValueError("trace is missing the speed derivative")
    x3 = trace.x[:, 2]
    cos_t = np.cos(x3)
    sin_t = np.sin(x3)
    y_dot = np.column_stack((u1 * cos_t, u1 * sin_t))
    y_ddot = np.column_stack((trace.u1_dot * cos_t - u1 * u2 * sin_t,
                              trace.u1_dot * sin_t + u1 * u2 * cos_t))
    return FlatTrace(t=trace.t, y=np.array(trace.x[:, :2]), y_dot=y_dot,
                     y_ddot=y_ddot, theta=np.array(x3), theta_dot=np.array(u2))


def wheel_speeds(v: np.ndarray, omega: np.ndarray,
                 params: DiffDriveParams) -> np.ndarray:
    """(right, left) wheel angular speeds realizing (v, omega)."""
    r = params.wheel_radius
    half_track = params.track_width / 2.0
    right = (v + half_track * omega) / r
    left = (v - half_track * omega) / r
    return np.column_stack((right, left))


def body_speeds(wheels: np.ndarray, params: DiffDriveParams) -> np.ndarray:
    """(v, omega) from (right, left) wheel angular speeds."""
    r = params.wheel_radius
    v = r / 2.0 * (wheels[:, 0] + wheels[:, 1])
    omega = r / params.track_width * (wheels[:, 0] - wheels[:, 1])
    return np.column_stack((v, omega))


def quadruped_forward(flat: FlatTrace,
                      standard_body_twist: bool = False) -> StateInputTrace:
    """Body-velocity inputs of the kinematic quadruped model.

    The default follows the position-dependent transform

        u = R(theta) [y1_dot, y2_dot, theta_dot]
            + theta_dot * M(theta) [y1, y2, theta]

    with R the planar rotation extended by identity and M its derivative
    with respect to theta (zero in the rotational row).  With
    ``standard_body_twist`` the planar part is replaced by the conventional
    world-to-body velocity transform R(theta)^T [y1_dot, y2_dot].
    """
    theta = flat.theta
    theta_dot = flat.theta_dot
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    if standard_body_twist:
        u1 = cos_t * flat.y_dot[:, 0] + sin_t * flat.y_dot[:, 1]
        u2 = -sin_t * flat.y_dot[:, 0] + cos_t * flat.y_dot[:, 1]
        u3 = theta_dot
    else:
        u1 = (cos_t * flat.y_dot[:, 0] - sin_t * flat.y_dot[:, 1]
              + theta_dot * (-sin_t * flat.y[:, 0] - cos_t * flat.y[:, 1]))
        u2 = (sin_t * flat.y_dot[:, 0] + cos_t * flat.y_dot[:, 1]
              + theta_dot * (cos_t * flat.y[:, 0] - sin_t * flat.y[:, 1]))
        u3 = theta_dot
    x = np.column_stack((flat.y[:, 0], flat.y[:, 1], theta))
    return StateInputTrace(t=flat.t, x=x, u=np.column_stack((u1, u2, u3)))


def states_to_csv(trace: StateInputTrace) -> str:
    """CSV export: t,x1,x2,x3,u1,u2[,u3|,u1_dot[,wR,wL]]; 9 significant digits."""
    columns = [trace.t, trace.x[:, 0], trace.x[:, 1], trace.x[:, 2],
               trace.u[:, 0], trace.u[:, 1]]
    header = ["t", "x1", "x2", "x3", "u1", "u2"]
    if trace.u.shape[1] > 2:
        header.append("u3")
        columns.append(trace.u[:, 2])
    if trace.u1_dot is not None:
        header.append("u1_dot")
        columns.append(trace.u1_dot)
    if trace.wheel_speeds is not None:
        header.extend(["wL", "wR"])
        columns.extend([trace.wheel_speeds[:, 1], trace.wheel_speeds[:, 0]])
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(f"{value:.9g}" for value in row))
    return "\n".join(lines) + "\n"
