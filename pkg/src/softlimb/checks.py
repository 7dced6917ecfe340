"""Invariant suite behind ``softlimb check``: fast paths against the slow oracles."""
from __future__ import annotations

import math
import time
from typing import NamedTuple

import numpy as np

from .evaluation import holm_bonferroni, t_sf_two_sided, t_test
from .kinematics import Frame, LimbModel, forward_kinematics, tip_position
from .neural import Network, gradient_check
from .oracles import integrated_tip, rasterized_visible, t_two_sided_p_quadrature
from .vision import CameraIntrinsics, project


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def squared_error_loss(target):
    target = np.asarray(target, dtype=float)

    def loss(out):
        diff = out - target
        return 0.5 * np.sum(diff ** 2, axis=-1), diff
    return loss


def random_network(rng: np.random.Generator) -> tuple[Network, np.ndarray, np.ndarray]:
    """A small tanh MLP with random shape, plus an input and a regression target."""
    n_hidden = int(rng.integers(1, 3))
    sizes = [int(rng.integers(2, 9))] + [int(rng.integers(3, 65)) for _ in range(n_hidden)]
    sizes.append(int(rng.integers(1, 5)))
    net = Network.build(sizes, rng, output_gain=1.0)
    return net, rng.normal(size=sizes[0]), rng.normal(size=sizes[-1])


def check_gradients(n_networks: int = 100, seed: int = 0, tol: float = 1e-4) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(n_networks):
        net, x, y = random_network(rng)
        worst = max(worst, gradient_check(net, squared_error_loss(y), x))
    elapsed = time.perf_counter() - start
    return CheckResult("gradient check", worst < tol,
                       f"worst relative error {worst:.2e} over {n_networks} networks in {elapsed:.1f}s")


def check_kinematics(model: LimbModel, n_states: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    joints = rng.uniform(model.lower, model.upper, size=(n_states, 4))
    worst = max(float(np.linalg.norm(tip_position(q, model) - integrated_tip(q, model))) for q in joints)

    straight = tip_position(np.zeros(4), model)
    expected = np.array([model.rigid_link_length + model.soft_section_length, 0.0, model.base_height])
    closed_err = float(np.linalg.norm(straight - expected))
    if model.upper[3] >= 180:
        frames = forward_kinematics([0.0, 0.0, 0.0, 180.0], model)
        chord = np.linalg.norm(frames[-1].position - frames[2].position)
        closed_err = max(closed_err, abs(chord - 2 * model.soft_section_length / math.pi),
                         float(np.linalg.norm(frames[-1].orientation[:, 0] - [-1.0, 0.0, 0.0])))
    ok = worst < 1e-6 and closed_err < 1e-9
    return CheckResult("kinematics oracle", ok,
                       f"max tip error {worst:.2e} m over {n_states} states; closed forms {closed_err:.1e}")


def check_visibility(n_cases: int = 10_000, seed: int = 0, intr: CameraIntrinsics | None = None) -> CheckResult:
    """Random camera-local points, oversampled near the frustum so both verdicts occur often."""
    intr = intr or CameraIntrinsics()
    rng = np.random.default_rng(seed)
    f = intr.focal_length
    cx, cy = intr.principal_point
    depth = rng.uniform(-0.2, intr.far * 1.1, n_cases)
    u = rng.uniform(-0.2 * intr.image_width, 1.2 * intr.image_width, n_cases)
    v = rng.uniform(-0.2 * intr.image_height, 1.2 * intr.image_height, n_cases)
    points = np.column_stack([depth, (cx - u) * depth / f, (cy - v) * depth / f])

    pose = Frame.identity()
    disagreements, far_from_border = 0, 0
    for p in points:
        if (project(pose, intr, p) is not None) != rasterized_visible(p, intr):
            disagreements += 1
            pu = cx - f * p[1] / p[0]
            pv = cy - f * p[2] / p[0]
            border = min(abs(pu), abs(pu - intr.image_width), abs(pv), abs(pv - intr.image_height))
            far_from_border += border > 0.5
    agreement = 1 - disagreements / n_cases
    return CheckResult("visibility oracle", agreement >= 0.999 and far_from_border == 0,
                       f"agreement {agreement:.4%}, {disagreements} disagreements, "
                       f"{far_from_border} more than half a pixel from the border")


def check_statistics() -> CheckResult:
    worst = 0.0
    for df in range(2, 61):
        for t in np.linspace(-6.0, 6.0, 25):
            worst = max(worst, abs(t_sf_two_sided(t, df) - t_two_sided_p_quadrature(t, df)))
    example = t_test([1, 2, 3, 4], [3, 4, 5, 6])
    worst = max(worst, abs(example.p - t_two_sided_p_quadrature(example.t, example.df)))
    holm = holm_bonferroni([0.01, 0.04, 0.03], 0.05)
    ok = worst < 1e-6 and list(holm) == [True, False, False]
    return CheckResult("statistics oracle", ok,
                       f"max p-value error {worst:.1e} for df 2..60; Holm example {list(map(bool, holm))}")


def run_all(model: LimbModel) -> list[CheckResult]:
    return [check_gradients(), check_kinematics(model), check_visibility(), check_statistics()]
