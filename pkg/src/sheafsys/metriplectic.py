"""Metriplectic systems and their port-control diagrams.

A metriplectic system carries two generators: an energy H driven through an
antisymmetric J and an entropy S driven through a symmetric PSD G, subject
to the noninteraction conditions J grad S = 0 and G grad H = 0, so that H
is conserved and S is nondecreasing along the closed flow

    x' = J grad H + G grad S.

Opening ports gives the control system

    x' = J grad H + G grad S + B u + A tau,
    y  = B^T grad H - A^T grad S - Jt u - Gt tau,

valid only where the algebraic side conditions hold (B tau = 0, A u = 0,
B^T grad S = 0, A^T grad H = 0, Jt tau = 0, Gt u = 0); membership of the
port machine enforces them as residuals with names.  The extended closed
system on (x, zeta) mirrors the port-Hamiltonian construction with paired
auxiliary energies (one for H, one for S) and the coupling blocks

    Jext = [[J, B], [-B^T, Jt]],      Gext = [[G, A], [A^T, Gt]].

The zeta rate that makes embedded trajectories members is
-B^T grad H + A^T grad S + Jt u + Gt tau (the signs the extended blocks
produce), and the port output is exactly its negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ConstraintViolation,
    DimensionMismatch,
    MissingAuxTag,
    NoninteractionViolation,
    NotAMember,
    StructureViolation,
)
from .interval_sheaf import (
    DEFAULT_STEP,
    BehaviorSheaf,
    Trajectory,
    restrict,
)
from .machine import Machine, MachineMorphism, verify_port_control_diagram
from .ode_behavior import (
    DEFAULT_RESIDUAL_TOL,
    OdeBehavior,
    VectorField,
    grid_derivative,
    membership_residual,
)
from .port_hamiltonian import (
    MATRIX_TOL,
    AuxHamiltonian,
    SampledCurve,
    as_matrix_field,
    aux_linear,
    aux_zero,
    cumulative_trapezoid,
    default_probe_points,
    fd_gradient,
)

SIDE_CONDITION_TOL = 1e-8


@dataclass(frozen=True)
class MetriplecticSystem:
    """Two-generator system with ports.

    Parameters
    ----------
    n, m : int
        State and port dimensions.
    poisson : callable
        x -> antisymmetric (n, n) matrix J(x), drives the energy.
    friction : callable
        x -> symmetric PSD (n, n) matrix G(x), drives the entropy.
    energy_port, entropy_port : callable
        x -> (n, m) matrices B(x) and A(x).
    port_poisson, port_friction : callable
        x -> (m, m) matrices Jt(x) (antisymmetric) and Gt(x); the block
        [[G, A], [A^T, Gt]] must be PSD.
    energy, entropy : callable
        Scalar fields H and S.
    grad_energy, grad_entropy : callable
        Their gradients.
    state_labels : tuple of str
    """

    n: int
    m: int
    poisson: Callable
    friction: Callable
    energy_port: Callable
    entropy_port: Callable
    port_poisson: Callable
    port_friction: Callable
    energy: Callable
    entropy: Callable
    grad_energy: Callable
    grad_entropy: Callable
    state_labels: tuple = ()

    @property
    def zeta_labels(self) -> tuple:
        return tuple(f"zeta{i}" for i in range(self.m))

    @property
    def input_labels(self) -> tuple:
        return tuple(f"u{i}" for i in range(self.m))

    @property
    def tau_labels(self) -> tuple:
        # the input curve the source text overloads with the interval
        # length symbol; renamed throughout
        return tuple(f"tau_in{i}" for i in range(self.m))

    @property
    def output_labels(self) -> tuple:
        return tuple(f"y{i}" for i in range(self.m))

    def grad_h(self, x) -> np.ndarray:
        out = np.asarray(self.grad_energy(np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (self.n,):
            raise DimensionMismatch(f"grad H shape {out.shape}")
        return out

    def grad_s(self, x) -> np.ndarray:
        out = np.asarray(self.grad_entropy(np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (self.n,):
            raise DimensionMismatch(f"grad S shape {out.shape}")
        return out


def metriplectic_system(
    n: int,
    m: int,
    J,
    G,
    B,
    A,
    Jt,
    Gt,
    H: Callable,
    S: Callable,
    gradH: Optional[Callable] = None,
    gradS: Optional[Callable] = None,
    labels: Optional[tuple] = None,
) -> MetriplecticSystem:
    """Assemble a MetriplecticSystem from constants or callables."""
    labels = tuple(labels) if labels else tuple(f"x{i}" for i in range(n))
    if len(labels) != n:
        raise DimensionMismatch(f"{len(labels)} labels for state dimension {n}")
    return MetriplecticSystem(
        n,
        m,
        as_matrix_field(J, n, n, "J"),
        as_matrix_field(G, n, n, "G"),
        as_matrix_field(B, n, m, "B"),
        as_matrix_field(A, n, m, "A"),
        as_matrix_field(Jt, m, m, "Jt"),
        as_matrix_field(Gt, m, m, "Gt"),
        H,
        S,
        gradH if gradH is not None else fd_gradient(H, n),
        gradS if gradS is not None else fd_gradient(S, n),
        labels,
    )


def extended_friction_block(sys: MetriplecticSystem, x) -> np.ndarray:
    """The (n+m) x (n+m) block [[G, A], [A^T, Gt]] at a state point."""
    n, m = sys.n, sys.m
    out = np.zeros((n + m, n + m))
    out[:n, :n] = sys.friction(x)
    A = sys.entropy_port(x)
    out[:n, n:] = A
    out[n:, :n] = A.T
    out[n:, n:] = sys.port_friction(x)
    return out


def noninteraction_residuals(sys: MetriplecticSystem, points: Optional[Sequence] = None):
    """Worst probe-point residuals of J grad S and G grad H."""
    if points is None:
        points = default_probe_points(sys.n)
    worst_js = 0.0
    worst_gh = 0.0
    at_js = at_gh = None
    for x in points:
        x = np.asarray(x, dtype=float)
        js = float(np.max(np.abs(sys.poisson(x) @ sys.grad_s(x))))
        gh = float(np.max(np.abs(sys.friction(x) @ sys.grad_h(x))))
        if js > worst_js:
            worst_js, at_js = js, x
        if gh > worst_gh:
            worst_gh, at_gh = gh, x
    return worst_js, worst_gh, at_js, at_gh


def check_metriplectic_structure(
    sys: MetriplecticSystem, points: Optional[Sequence] = None
) -> None:
    """Verify antisymmetry, PSD blocks, gradient consistency, noninteraction."""
    if points is None:
        points = default_probe_points(sys.n)
    fd_h = fd_gradient(sys.energy, sys.n)
    fd_s = fd_gradient(sys.entropy, sys.n)
    for x in points:
        x = np.asarray(x, dtype=float)
        J = sys.poisson(x)
        if np.max(np.abs(J + J.T)) > MATRIX_TOL:
            raise StructureViolation(f"J(x) not antisymmetric at x = {x.tolist()}")
        Jt = sys.port_poisson(x)
        if np.max(np.abs(Jt + Jt.T)) > MATRIX_TOL:
            raise StructureViolation(f"Jt(x) not antisymmetric at x = {x.tolist()}")
        G = sys.friction(x)
        if np.max(np.abs(G - G.T)) > MATRIX_TOL:
            raise StructureViolation(f"G(x) not symmetric at x = {x.tolist()}")
        if np.linalg.eigvalsh(0.5 * (G + G.T)).min() < -MATRIX_TOL:
            raise StructureViolation(f"G(x) not positive semidefinite at x = {x.tolist()}")
        block = extended_friction_block(sys, x)
        if np.linalg.eigvalsh(0.5 * (block + block.T)).min() < -MATRIX_TOL:
            raise StructureViolation(
                f"[[G, A], [A^T, Gt]] not positive semidefinite at x = {x.tolist()}"
            )
        for grad, fd, tag in ((sys.grad_h, fd_h, "H"), (sys.grad_s, fd_s, "S")):
            reference = fd(x)
            gap = np.max(np.abs(grad(x) - reference))
            if gap > 1e-5 * max(1.0, float(np.max(np.abs(reference)))):
                raise StructureViolation(
                    f"grad {tag} inconsistent with finite differences at x = {x.tolist()}"
                )
    worst_js, worst_gh, at_js, at_gh = noninteraction_residuals(sys, points)
    if worst_js > MATRIX_TOL:
        raise NoninteractionViolation(
            f"J grad S = {worst_js:.3e} at x = {at_js.tolist()}"
        )
    if worst_gh > MATRIX_TOL:
        raise NoninteractionViolation(
            f"G grad H = {worst_gh:.3e} at x = {at_gh.tolist()}"
        )


def closed_metriplectic_field(sys: MetriplecticSystem) -> VectorField:
    def rhs(t, x):
        return sys.poisson(x) @ sys.grad_h(x) + sys.friction(x) @ sys.grad_s(x)

    return VectorField(sys.n, rhs, "closed metriplectic flow")


def closed_metriplectic_behavior(
    sys: MetriplecticSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
    check_points: Optional[Sequence] = None,
) -> OdeBehavior:
    check_metriplectic_structure(sys, check_points)
    return OdeBehavior(
        closed_metriplectic_field(sys), grid_step, residual_tolerance, sys.state_labels
    )


def extended_metriplectic_structure(sys: MetriplecticSystem):
    """Extended matrix fields [[J, B], [-B^T, Jt]] and [[G, A], [A^T, Gt]]."""
    n, m = sys.n, sys.m

    def j_ext(xi):
        xi = np.asarray(xi, dtype=float)
        x = xi[:n]
        out = np.zeros((n + m, n + m))
        out[:n, :n] = sys.poisson(x)
        B = sys.energy_port(x)
        out[:n, n:] = B
        out[n:, :n] = -B.T
        out[n:, n:] = sys.port_poisson(x)
        return out

    def g_ext(xi):
        return extended_friction_block(sys, np.asarray(xi, dtype=float)[:n])

    return j_ext, g_ext


# ---------------------------------------------------------------------------
# shared node-wise formulas


def zeta_rate_along(
    sys: MetriplecticSystem,
    states: np.ndarray,
    u_nodes: np.ndarray,
    tau_nodes: np.ndarray,
) -> np.ndarray:
    """-B^T grad H + A^T grad S + Jt u + Gt tau at every node.

    This is the zeta row of the extended dynamics; the embedding and the
    port-to-extended map both integrate exactly this array, which is what
    makes the diagram triangle close bit-exactly.
    """
    rows = []
    for i, x in enumerate(states):
        rows.append(
            -sys.energy_port(x).T @ sys.grad_h(x)
            + sys.entropy_port(x).T @ sys.grad_s(x)
            + sys.port_poisson(x) @ u_nodes[i]
            + sys.port_friction(x) @ tau_nodes[i]
        )
    return np.stack(rows)


def port_output_along(
    sys: MetriplecticSystem,
    states: np.ndarray,
    u_nodes: np.ndarray,
    tau_nodes: np.ndarray,
) -> np.ndarray:
    """B^T grad H - A^T grad S - Jt u - Gt tau at every node (this is
    minus the zeta rate)."""
    return -zeta_rate_along(sys, states, u_nodes, tau_nodes)


def side_condition_residuals(sys: MetriplecticSystem, e: Trajectory) -> dict:
    """Worst node residual of each algebraic side condition on a port run.

    Returns a dict mapping condition names to (residual, node) pairs; the
    conditions are J gradS, G gradH, B tau, A u, B^T gradS, A^T gradH,
    Jt tau, Gt u.
    """
    x = e.channels(sys.state_labels)
    u = e.channels(sys.input_labels)
    tau = e.channels(sys.tau_labels)
    worst = {
        name: (0.0, 0)
        for name in (
            "J gradS",
            "G gradH",
            "B tau",
            "A u",
            "B^T gradS",
            "A^T gradH",
            "Jt tau",
            "Gt u",
        )
    }

    def update(name, value, node):
        value = float(np.max(np.abs(value))) if np.size(value) else 0.0
        if value > worst[name][0]:
            worst[name] = (value, node)

    for i in range(e.num_nodes):
        xi = x[i]
        gh = sys.grad_h(xi)
        gs = sys.grad_s(xi)
        update("J gradS", sys.poisson(xi) @ gs, i)
        update("G gradH", sys.friction(xi) @ gh, i)
        update("B tau", sys.energy_port(xi) @ tau[i], i)
        update("A u", sys.entropy_port(xi) @ u[i], i)
        update("B^T gradS", sys.energy_port(xi).T @ gs, i)
        update("A^T gradH", sys.entropy_port(xi).T @ gh, i)
        update("Jt tau", sys.port_poisson(xi) @ tau[i], i)
        update("Gt u", sys.port_friction(xi) @ u[i], i)
    return worst


def assert_side_conditions(
    sys: MetriplecticSystem,
    e: Trajectory,
    tolerance: float = SIDE_CONDITION_TOL,
) -> None:
    """Raise ConstraintViolation naming the first condition that fails."""
    for name, (residual, node) in side_condition_residuals(sys, e).items():
        if residual > tolerance:
            raise ConstraintViolation(name, node, residual)


# ---------------------------------------------------------------------------
# extended behavior with paired auxiliary energies


def extended_metriplectic_field(
    sys: MetriplecticSystem, aux_h: AuxHamiltonian, aux_s: AuxHamiltonian
) -> VectorField:
    if aux_h.m != sys.m or aux_s.m != sys.m:
        raise DimensionMismatch("aux port dimensions do not match the system")
    j_ext, g_ext = extended_metriplectic_structure(sys)
    n = sys.n

    def rhs(t, xi):
        zeta = xi[n:]
        grad_total_h = np.concatenate([sys.grad_h(xi[:n]), aux_h.gradient(t, zeta)])
        grad_total_s = np.concatenate([sys.grad_s(xi[:n]), aux_s.gradient(t, zeta)])
        return j_ext(xi) @ grad_total_h + g_ext(xi) @ grad_total_s

    return VectorField(sys.n + sys.m, rhs, "extended metriplectic flow")


def _resolve_aux_pair(sys: MetriplecticSystem, tag):
    if tag is None:
        return aux_zero(sys.m), aux_zero(sys.m)
    if (
        isinstance(tag, tuple)
        and len(tag) == 2
        and all(isinstance(a, AuxHamiltonian) for a in tag)
    ):
        return tag
    raise MissingAuxTag(
        "extended metriplectic member needs a pair of auxiliary energies"
    )


@dataclass(frozen=True)
class ExtendedMetriplecticBehavior:
    """Extended behavior for one fixed pair of auxiliary energies.

    Membership is the (n + m)-channel dynamics residual together with the
    algebraic side conditions Jt grad_zeta H_aux and Gt grad_zeta S_aux
    evaluated at every node.
    """

    sys: MetriplecticSystem
    aux_h: AuxHamiltonian
    aux_s: AuxHamiltonian
    grid_step: float = DEFAULT_STEP
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL

    @property
    def labels(self) -> tuple:
        return self.sys.state_labels + self.sys.zeta_labels

    def sample(self, x0_ext, length: float, shift: float = 0.0) -> Trajectory:
        from .ode_behavior import integrate

        return integrate(
            extended_metriplectic_field(self.sys, self.aux_h, self.aux_s),
            x0_ext,
            length,
            self.grid_step,
            shift,
            self.labels,
            (self.aux_h, self.aux_s),
        )

    def side_residuals(self, e: Trajectory) -> dict:
        zeta = e.channels(self.sys.zeta_labels)
        x = e.channels(self.sys.state_labels)
        worst = {"Jt grad aux H": (0.0, 0), "Gt grad aux S": (0.0, 0)}
        for i, t in enumerate(e.absolute_times):
            jt = np.max(np.abs(self.sys.port_poisson(x[i]) @ self.aux_h.gradient(t, zeta[i])))
            gt = np.max(np.abs(self.sys.port_friction(x[i]) @ self.aux_s.gradient(t, zeta[i])))
            if jt > worst["Jt grad aux H"][0]:
                worst["Jt grad aux H"] = (float(jt), i)
            if gt > worst["Gt grad aux S"][0]:
                worst["Gt grad aux S"] = (float(gt), i)
        return worst

    def assert_conditions(self, e: Trajectory, tolerance: float = SIDE_CONDITION_TOL):
        for name, (residual, node) in self.side_residuals(e).items():
            if residual > tolerance:
                raise ConstraintViolation(name, node, residual)

    def membership(self, e: Trajectory) -> float:
        if e.labels != self.labels or e.aux != (self.aux_h, self.aux_s):
            return float("inf")
        dynamics = membership_residual(
            extended_metriplectic_field(self.sys, self.aux_h, self.aux_s),
            e,
            self.grid_step,
        )
        side = max(v for v, _ in self.side_residuals(e).values())
        return max(dynamics, side)

    def as_behavior_sheaf(self) -> BehaviorSheaf:
        return BehaviorSheaf(
            membership=self.membership,
            restrict=restrict,
            sampler=self.sample,
            tolerance=self.residual_tolerance,
        )


def extended_metriplectic_behavior(
    sys: MetriplecticSystem,
    aux_h: AuxHamiltonian,
    aux_s: AuxHamiltonian,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> ExtendedMetriplecticBehavior:
    check_metriplectic_structure(sys)
    return ExtendedMetriplecticBehavior(sys, aux_h, aux_s, grid_step, residual_tolerance)


def extended_metriplectic_sheaf(
    sys: MetriplecticSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> BehaviorSheaf:
    """Enclosing behavior: members carry their own (H, S) aux pair."""
    labels = sys.state_labels + sys.zeta_labels

    def membership(e: Trajectory) -> float:
        if e.labels != labels:
            return float("inf")
        aux_h, aux_s = _resolve_aux_pair(sys, e.aux)
        fixed = ExtendedMetriplecticBehavior(
            sys, aux_h, aux_s, grid_step, residual_tolerance
        )
        if e.aux is None:
            e = e.replace_aux((aux_h, aux_s))
        return fixed.membership(e)

    def sampler(x0_ext, length, shift=0.0, aux_h=None, aux_s=None):
        fixed = ExtendedMetriplecticBehavior(
            sys,
            aux_h if aux_h is not None else aux_zero(sys.m),
            aux_s if aux_s is not None else aux_zero(sys.m),
            grid_step,
            residual_tolerance,
        )
        return fixed.sample(x0_ext, length, shift)

    return BehaviorSheaf(
        membership=membership,
        restrict=restrict,
        sampler=sampler,
        tolerance=residual_tolerance,
    )


def embed_metriplectic(
    sys: MetriplecticSystem,
    e: Trajectory,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Trajectory:
    """Embed a closed member into the extended behavior with zero aux pair.

    The zeta channels integrate the shared zeta-rate formula with zero port
    signals; zeta(0) = 0.
    """
    residual = membership_residual(closed_metriplectic_field(sys), e)
    if residual > residual_tolerance:
        raise NotAMember(
            f"trajectory is not a closed metriplectic member (residual {residual:.3e})"
        )
    zeros = np.zeros((e.num_nodes, sys.m))
    zeta = cumulative_trapezoid(
        zeta_rate_along(sys, e.values, zeros, zeros), e.grid_step
    )
    return Trajectory(
        np.concatenate([e.values, zeta], axis=1),
        e.grid_step,
        e.shift,
        e.labels + sys.zeta_labels,
        (aux_zero(sys.m), aux_zero(sys.m)),
    )


# ---------------------------------------------------------------------------
# audits


def degeneracy_audit(sys: MetriplecticSystem, e: Trajectory) -> dict:
    """Energy and entropy rates along a closed run, by the grid stencils.

    Returns max |dH/dt|, min dS/dt, and the total energy drift
    max |H(x(t)) - H(x(0))|.
    """
    x = e.channels(sys.state_labels) if e.labels != sys.state_labels else e.values
    energy = np.array([sys.energy(xi) for xi in x])[:, np.newaxis]
    entropy = np.array([sys.entropy(xi) for xi in x])[:, np.newaxis]
    h_rate = grid_derivative(energy, e.grid_step)[:, 0]
    s_rate = grid_derivative(entropy, e.grid_step)[:, 0]
    return {
        "energy_rate_max": float(np.max(np.abs(h_rate))),
        "entropy_rate_min": float(np.min(s_rate)),
        "energy_drift": float(np.max(np.abs(energy[:, 0] - energy[0, 0]))),
    }


def rate_audit(sys: MetriplecticSystem, e: Trajectory) -> dict:
    """Chain-rule identities along a port run.

    Checks dH/dt = grad H^T (B u + A tau) and
    dS/dt = grad S^T G grad S + grad S^T (B u + A tau) node-wise, with the
    left sides taken by the grid stencils.
    """
    x = e.channels(sys.state_labels)
    u = e.channels(sys.input_labels)
    tau = e.channels(sys.tau_labels)
    energy = np.array([sys.energy(xi) for xi in x])[:, np.newaxis]
    entropy = np.array([sys.entropy(xi) for xi in x])[:, np.newaxis]
    h_rate = grid_derivative(energy, e.grid_step)[:, 0]
    s_rate = grid_derivative(entropy, e.grid_step)[:, 0]
    worst_h = 0.0
    worst_s = 0.0
    for i in range(e.num_nodes):
        xi = x[i]
        drive = sys.energy_port(xi) @ u[i] + sys.entropy_port(xi) @ tau[i]
        gh = sys.grad_h(xi)
        gs = sys.grad_s(xi)
        worst_h = max(worst_h, abs(h_rate[i] - float(gh @ drive)))
        production = float(gs @ sys.friction(xi) @ gs)
        worst_s = max(worst_s, abs(s_rate[i] - production - float(gs @ drive)))
    return {"energy_rate_defect": float(worst_h), "entropy_rate_defect": float(worst_s)}


def extended_psd_min(sys: MetriplecticSystem, states: np.ndarray) -> float:
    """Smallest eigenvalue of [[G, A], [A^T, Gt]] along a state array."""
    worst = float("inf")
    for x in states:
        block = extended_friction_block(sys, x)
        worst = min(worst, float(np.linalg.eigvalsh(0.5 * (block + block.T)).min()))
    return worst


# ---------------------------------------------------------------------------
# machines and the diagram


def port_metriplectic_machine(
    sys: MetriplecticSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Machine:
    """The open port machine of the two-generator system.

    Members pack (x, u, tau_in) as n + 2m channels; membership is the
    dynamics residual on the state channels together with every algebraic
    side condition.  The output leg evaluates
    B^T grad H - A^T grad S - Jt u - Gt tau node-wise.
    """
    check_metriplectic_structure(sys)
    member_labels = sys.state_labels + sys.input_labels + sys.tau_labels
    signal_labels = sys.input_labels + sys.tau_labels

    def split(e: Trajectory):
        return (
            e.channels(sys.state_labels),
            e.channels(sys.input_labels),
            e.channels(sys.tau_labels),
        )

    def membership(e: Trajectory) -> float:
        if e.labels != member_labels:
            return float("inf")
        x, u, tau = split(e)
        d = grid_derivative(x, e.grid_step)
        worst = 0.0
        for i in range(e.num_nodes):
            xi = x[i]
            rhs = (
                sys.poisson(xi) @ sys.grad_h(xi)
                + sys.friction(xi) @ sys.grad_s(xi)
                + sys.energy_port(xi) @ u[i]
                + sys.entropy_port(xi) @ tau[i]
            )
            worst = max(worst, float(np.max(np.abs(d[i] - rhs))))
        side = max(v for v, _ in side_condition_residuals(sys, e).values())
        return max(worst, side)

    def a_leg(e: Trajectory) -> Trajectory:
        return Trajectory(
            e.channels(signal_labels), e.grid_step, e.shift, signal_labels
        )

    def e_leg(e: Trajectory) -> Trajectory:
        x, u, tau = split(e)
        return Trajectory(
            port_output_along(sys, x, u, tau),
            e.grid_step,
            e.shift,
            sys.output_labels,
        )

    def sampler(x0, u_curve, tau_curve, length, shift=0.0):
        from .ode_behavior import integrate

        def rhs(t, x):
            return (
                sys.poisson(x) @ sys.grad_h(x)
                + sys.friction(x) @ sys.grad_s(x)
                + sys.energy_port(x) @ np.atleast_1d(u_curve(t))
                + sys.entropy_port(x) @ np.atleast_1d(tau_curve(t))
            )

        state = integrate(
            VectorField(sys.n, rhs, "driven metriplectic flow"),
            x0,
            length,
            grid_step,
            shift,
            sys.state_labels,
        )
        u_nodes = np.stack([np.atleast_1d(u_curve(t)) for t in state.absolute_times])
        tau_nodes = np.stack([np.atleast_1d(tau_curve(t)) for t in state.absolute_times])
        return Trajectory(
            np.concatenate([state.values, u_nodes, tau_nodes], axis=1),
            grid_step,
            shift,
            member_labels,
        )

    behavior = BehaviorSheaf(
        membership=membership,
        restrict=restrict,
        sampler=sampler,
        tolerance=residual_tolerance,
    )
    return Machine(
        behavior, a_leg, e_leg, signal_labels, sys.output_labels, "port"
    )


def closed_metriplectic_machine(
    sys: MetriplecticSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Machine:
    """Closed system as a machine: port-leg B^T grad H - A^T grad S,
    constant-leg 2m zero channels."""
    behavior = closed_metriplectic_behavior(sys, grid_step, residual_tolerance)
    constant_labels = tuple(f"o{i}" for i in range(2 * sys.m))

    def a_leg(e: Trajectory) -> Trajectory:
        zeros = np.zeros((e.num_nodes, sys.m))
        return Trajectory(
            port_output_along(sys, e.values, zeros, zeros),
            e.grid_step,
            e.shift,
            sys.output_labels,
        )

    def e_leg(e: Trajectory) -> Trajectory:
        return Trajectory(
            np.zeros((e.num_nodes, 2 * sys.m)), e.grid_step, e.shift, constant_labels
        )

    probes = []
    try:
        probes.append(behavior.sample(0.3 * np.ones(sys.n), 32 * grid_step))
    except Exception:
        pass
    return Machine(
        behavior.as_behavior_sheaf(),
        a_leg,
        e_leg,
        sys.output_labels,
        constant_labels,
        "closed",
        check_probes=probes,
    )


def enclosing_metriplectic_machine(
    sys: MetriplecticSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Machine:
    """Extended behavior with the paired-gradient input leg (2m channels)
    and the node-local port-output leg."""
    sheaf = extended_metriplectic_sheaf(sys, grid_step, residual_tolerance)
    signal_labels = sys.input_labels + sys.tau_labels

    def a_leg(e: Trajectory) -> Trajectory:
        aux_h, aux_s = _resolve_aux_pair(sys, e.aux)
        zeta = e.channels(sys.zeta_labels)
        values = np.stack(
            [
                np.concatenate(
                    [aux_h.gradient(t, zeta[i]), aux_s.gradient(t, zeta[i])]
                )
                for i, t in enumerate(e.absolute_times)
            ]
        )
        return Trajectory(values, e.grid_step, e.shift, signal_labels)

    def e_leg(e: Trajectory) -> Trajectory:
        aux_h, aux_s = _resolve_aux_pair(sys, e.aux)
        x = e.channels(sys.state_labels)
        zeta = e.channels(sys.zeta_labels)
        u_nodes = np.stack(
            [aux_h.gradient(t, zeta[i]) for i, t in enumerate(e.absolute_times)]
        )
        tau_nodes = np.stack(
            [aux_s.gradient(t, zeta[i]) for i, t in enumerate(e.absolute_times)]
        )
        return Trajectory(
            port_output_along(sys, x, u_nodes, tau_nodes),
            e.grid_step,
            e.shift,
            sys.output_labels,
        )

    probes = []
    try:
        probes.append(sheaf.sampler(0.3 * np.ones(sys.n + sys.m), 32 * grid_step))
    except Exception:
        pass
    return Machine(
        sheaf,
        a_leg,
        e_leg,
        signal_labels,
        sys.output_labels,
        "enclosing",
        check_probes=probes,
    )


def closed_to_port_morphism(sys: MetriplecticSystem) -> MachineMorphism:
    """Include the closed system into the port machine with zero signals."""

    def beta(e: Trajectory) -> Trajectory:
        zeros = np.zeros((e.num_nodes, 2 * sys.m))
        return Trajectory(
            np.concatenate([e.values, zeros], axis=1),
            e.grid_step,
            e.shift,
            e.labels + sys.input_labels + sys.tau_labels,
        )

    ident = lambda e: e
    return MachineMorphism(beta, ident, ident, "swapped", "closed into port")


def port_to_extended_morphism(
    sys: MetriplecticSystem, integral_sign: float = 1.0
) -> MachineMorphism:
    """Map a port run (x, u, tau) to the extended member (x, zeta) with the
    paired linear aux tags carrying the sampled signals."""

    def beta(e: Trajectory) -> Trajectory:
        x = e.channels(sys.state_labels)
        u = e.channels(sys.input_labels)
        tau = e.channels(sys.tau_labels)
        zeta = integral_sign * cumulative_trapezoid(
            zeta_rate_along(sys, x, u, tau), e.grid_step
        )
        aux_pair = (
            aux_linear(SampledCurve(-e.shift, e.grid_step, u), sys.m),
            aux_linear(SampledCurve(-e.shift, e.grid_step, tau), sys.m),
        )
        return Trajectory(
            np.concatenate([x, zeta], axis=1),
            e.grid_step,
            e.shift,
            sys.state_labels + sys.zeta_labels,
            aux_pair,
        )

    ident = lambda e: e
    return MachineMorphism(beta, ident, ident, "straight", "port into extended")


def embedding_morphism(sys: MetriplecticSystem) -> MachineMorphism:
    def beta(e: Trajectory) -> Trajectory:
        return embed_metriplectic(sys, e)

    ident = lambda e: e
    return MachineMorphism(beta, ident, ident, "swapped", "closed into extended")


def build_metriplectic_diagram(
    sys: MetriplecticSystem,
    probes: Sequence[Trajectory],
    tolerance: float = 1e-5,
    grid_step: Optional[float] = None,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
    integral_sign: float = 1.0,
):
    """Assemble the metriplectic triangle and hand it to the verifier."""
    if not probes:
        raise NotAMember("need at least one closed-system probe")
    h = grid_step if grid_step is not None else probes[0].grid_step
    closed = closed_metriplectic_machine(sys, h, residual_tolerance)
    port = port_metriplectic_machine(sys, h, residual_tolerance)
    enclosing = enclosing_metriplectic_machine(sys, h, residual_tolerance)
    return verify_port_control_diagram(
        closed,
        enclosing,
        port,
        closed_to_port_morphism(sys),
        port_to_extended_morphism(sys, integral_sign),
        embedding_morphism(sys),
        probes,
        tolerance,
    )
