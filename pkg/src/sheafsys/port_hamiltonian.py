"""Port-Hamiltonian structure as a commuting diagram of machines.

A dissipative Hamiltonian system x' = (J - R) grad H closes up; opening a
port B turns it into the input-state-output system

    x' = (J - R) grad H + B u,        y = B^T grad H.

The same open system embeds into a closed one on the extended space
(x, zeta): an auxiliary energy H_aux(t, zeta) supplies the drive through
the extended antisymmetric block [[J, B], [-B^T, 0]], and the port variable
zeta integrates -B^T grad H.  This module builds all three machines (closed,
port, extended) and the three behavior maps between them, and hands the
triangle to the diagram verifier.

Leg maps are computed node-locally from the trajectory channels and the aux
tag, so they commute with restriction bit-exactly; the finite-difference
reading of the output projection (minus the sampled derivative of the zeta
channels) is available as an audit and agrees on members to stencil order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingAuxTag,
    NotAMember,
    StructureViolation,
)
from .interval_sheaf import (
    DEFAULT_STEP,
    BehaviorSheaf,
    Trajectory,
    restrict,
)
from .machine import (
    ControlledField,
    Machine,
    MachineMorphism,
    iso_machine,
)
from .ode_behavior import (
    DEFAULT_RESIDUAL_TOL,
    OdeBehavior,
    VectorField,
    grid_derivative,
    membership_residual,
)

MATRIX_TOL = 1e-10
GRAD_CONSISTENCY_RTOL = 1e-5


def as_matrix_field(value, rows: int, cols: int, name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a constant matrix or a callable into a checked matrix field."""
    if callable(value):
        fn = value
    else:
        constant = np.array(value, dtype=float)
        if constant.shape != (rows, cols):
            raise DimensionMismatch(
                f"{name} has shape {constant.shape}, expected ({rows}, {cols})"
            )
        fn = lambda x, _c=constant: _c

    def field(x):
        out = np.asarray(fn(np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (rows, cols):
            raise DimensionMismatch(
                f"{name}(x) has shape {out.shape}, expected ({rows}, {cols})"
            )
        return out

    return field


def fd_gradient(h_fn: Callable[[np.ndarray], float], n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Central-difference gradient with step 1e-6 * (1 + |x_i|) per axis."""

    def grad(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(n)
        for i in range(n):
            step = 1e-6 * (1.0 + abs(x[i]))
            plus = x.copy()
            minus = x.copy()
            plus[i] += step
            minus[i] -= step
            out[i] = (h_fn(plus) - h_fn(minus)) / (2.0 * step)
        return out

    return grad


@dataclass(frozen=True)
class PHSystem:
    """A port-Hamiltonian system in coordinates.

    Parameters
    ----------
    n, m : int
        State and port dimensions.
    interconnection : callable
        x -> antisymmetric (n, n) matrix J(x).
    dissipation : callable
        x -> symmetric positive-semidefinite (n, n) matrix R(x).
    port_map : callable
        x -> (n, m) matrix B(x).
    hamiltonian : callable
        x -> float, the stored energy H.
    grad_hamiltonian : callable
        x -> (n,) gradient of H; supply a closed form when available.
    state_labels : tuple of str
        Channel names for the state.
    """

    n: int
    m: int
    interconnection: Callable[[np.ndarray], np.ndarray]
    dissipation: Callable[[np.ndarray], np.ndarray]
    port_map: Callable[[np.ndarray], np.ndarray]
    hamiltonian: Callable[[np.ndarray], float]
    grad_hamiltonian: Callable[[np.ndarray], np.ndarray]
    state_labels: tuple = ()

    @property
    def zeta_labels(self) -> tuple:
        return tuple(f"zeta{i}" for i in range(self.m))

    @property
    def input_labels(self) -> tuple:
        return tuple(f"u{i}" for i in range(self.m))

    @property
    def output_labels(self) -> tuple:
        return tuple(f"y{i}" for i in range(self.m))

    def grad(self, x) -> np.ndarray:
        out = np.asarray(self.grad_hamiltonian(np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (self.n,):
            raise DimensionMismatch(f"gradient shape {out.shape}, expected ({self.n},)")
        return out

    def port_output(self, x) -> np.ndarray:
        """The natural port output B(x)^T grad H(x)."""
        return self.port_map(x).T @ self.grad(x)


def ph_system(
    n: int,
    m: int,
    J,
    R,
    B,
    H: Callable[[np.ndarray], float],
    gradH: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    labels: Optional[tuple] = None,
) -> PHSystem:
    """Assemble a PHSystem from constants or callables; gradient falls back
    to central differences when no closed form is given."""
    labels = tuple(labels) if labels else tuple(f"x{i}" for i in range(n))
    if len(labels) != n:
        raise DimensionMismatch(f"{len(labels)} labels for state dimension {n}")
    return PHSystem(
        n,
        m,
        as_matrix_field(J, n, n, "J"),
        as_matrix_field(R, n, n, "R"),
        as_matrix_field(B, n, m, "B"),
        H,
        gradH if gradH is not None else fd_gradient(H, n),
        labels,
    )


def default_probe_points(n: int) -> list:
    """Deterministic structure-check points: origin, axes, mixed corners."""
    points = [np.zeros(n)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        points.append(e)
        points.append(-0.5 * e)
    points.append(0.3 * np.ones(n))
    points.append(np.array([(-0.7) ** (i + 1) for i in range(n)]))
    return points


def check_structure(sys: PHSystem, points: Optional[Sequence] = None) -> None:
    """Verify antisymmetry of J, symmetric PSD R, gradient consistency.

    Raises StructureViolation naming the failing probe point.
    """
    if points is None:
        points = default_probe_points(sys.n)
    fd = fd_gradient(sys.hamiltonian, sys.n)
    for x in points:
        x = np.asarray(x, dtype=float)
        J = sys.interconnection(x)
        if np.max(np.abs(J + J.T)) > MATRIX_TOL:
            raise StructureViolation(f"J(x) not antisymmetric at x = {x.tolist()}")
        R = sys.dissipation(x)
        if np.max(np.abs(R - R.T)) > MATRIX_TOL:
            raise StructureViolation(f"R(x) not symmetric at x = {x.tolist()}")
        if np.linalg.eigvalsh(0.5 * (R + R.T)).min() < -MATRIX_TOL:
            raise StructureViolation(f"R(x) not positive semidefinite at x = {x.tolist()}")
        reference = fd(x)
        gap = np.max(np.abs(sys.grad(x) - reference))
        if gap > GRAD_CONSISTENCY_RTOL * max(1.0, float(np.max(np.abs(reference)))):
            raise StructureViolation(
                f"grad H inconsistent with finite differences at x = {x.tolist()} "
                f"(gap {gap:.3e})"
            )


def closed_field(sys: PHSystem) -> VectorField:
    """The closed dissipative dynamics x' = (J - R) grad H."""

    def rhs(t, x):
        return (sys.interconnection(x) - sys.dissipation(x)) @ sys.grad(x)

    return VectorField(sys.n, rhs, "closed dissipative Hamiltonian flow")


def closed_behavior(
    sys: PHSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
    check_points: Optional[Sequence] = None,
) -> OdeBehavior:
    check_structure(sys, check_points)
    return OdeBehavior(
        closed_field(sys), grid_step, residual_tolerance, sys.state_labels
    )


def extended_structure(sys: PHSystem):
    """Extended matrix fields over (x, zeta): [[J, B], [-B^T, 0]] and
    [[R, 0], [0, 0]].  Antisymmetry / PSD hold by construction."""
    n, m = sys.n, sys.m

    def j_ext(xi):
        xi = np.asarray(xi, dtype=float)
        x = xi[:n]
        out = np.zeros((n + m, n + m))
        out[:n, :n] = sys.interconnection(x)
        B = sys.port_map(x)
        out[:n, n:] = B
        out[n:, :n] = -B.T
        return out

    def r_ext(xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros((n + m, n + m))
        out[:n, :n] = sys.dissipation(xi[:n])
        return out

    return j_ext, r_ext


# ---------------------------------------------------------------------------
# auxiliary energies


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Piecewise-linear curve through samples on a uniform absolute-time grid.

    Equality is by value (start, step, and samples bit-exact), so aux tags
    built from the same data compare equal.
    """

    start: float
    step: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, np.newaxis]
        if samples.shape[0] < 1:
            raise DimensionMismatch("a sampled curve needs at least one sample")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if not (self.step > 0):
            raise DimensionMismatch(f"curve step must be positive, got {self.step}")

    def __call__(self, s: float) -> np.ndarray:
        position = (s - self.start) / self.step
        position = min(max(position, 0.0), self.samples.shape[0] - 1.0)
        low = int(np.floor(position))
        low = min(low, self.samples.shape[0] - 2) if self.samples.shape[0] > 1 else 0
        frac = position - low
        if self.samples.shape[0] == 1:
            return self.samples[0]
        return (1.0 - frac) * self.samples[low] + frac * self.samples[low + 1]

    def __eq__(self, other):
        return (
            isinstance(other, SampledCurve)
            and self.start == other.start
            and self.step == other.step
            and self.samples.shape == other.samples.shape
            and bool(np.all(self.samples == other.samples))
        )

    def __hash__(self):
        return hash((self.start, self.step, self.samples.shape))


@dataclass(frozen=True, eq=False)
class AuxHamiltonian:
    """Auxiliary energy H_aux(s, zeta) on the port variables.

    Three kinds cover the constructions here: ``zero``; ``linear``,
    H_aux = u(s)^T zeta with gradient u(s); and ``quadratic``,
    H_aux = kappa(s) * zeta^T Q zeta / 2 with gradient kappa(s) Q zeta.
    The time argument s is absolute (node time minus shift), so the tag is
    unchanged by restriction.
    """

    kind: str
    m: int
    curve: Optional[Callable] = None
    quad: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "quadratic"):
            raise StructureViolation(f"unknown aux kind {self.kind!r}")
        if self.kind != "zero" and self.curve is None:
            raise StructureViolation(f"{self.kind} aux needs a curve")
        if self.kind == "quadratic":
            if self.quad is None:
                raise StructureViolation("quadratic aux needs its matrix")
            quad = np.array(self.quad, dtype=float)
            if quad.shape != (self.m, self.m) or np.max(np.abs(quad - quad.T)) > MATRIX_TOL:
                raise StructureViolation("quadratic aux matrix must be symmetric (m, m)")
            quad.setflags(write=False)
            object.__setattr__(self, "quad", quad)

    def gradient(self, s: float, zeta: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(self.m)
        if self.kind == "linear":
            out = np.atleast_1d(np.asarray(self.curve(s), dtype=float))
            if out.shape != (self.m,):
                raise DimensionMismatch(
                    f"linear aux curve returned shape {out.shape}, expected ({self.m},)"
                )
            return out
        return float(self.curve(s)) * (self.quad @ np.asarray(zeta, dtype=float))

    def value(self, s: float, zeta: np.ndarray) -> float:
        zeta = np.asarray(zeta, dtype=float)
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return float(self.gradient(s, zeta) @ zeta)
        return 0.5 * float(self.curve(s)) * float(zeta @ self.quad @ zeta)

    def __eq__(self, other):
        if not isinstance(other, AuxHamiltonian):
            return NotImplemented
        if self.kind != other.kind or self.m != other.m:
            return False
        if self.kind == "zero":
            return True
        if self.curve is not other.curve and self.curve != other.curve:
            return False
        if self.kind == "quadratic":
            return bool(np.all(self.quad == other.quad))
        return True

    def __hash__(self):
        return hash((self.kind, self.m))


def aux_zero(m: int) -> AuxHamiltonian:
    return AuxHamiltonian("zero", m)


def aux_linear(curve, m: int) -> AuxHamiltonian:
    """H_aux(s, zeta) = u(s)^T zeta; ``curve`` maps absolute time to (m,)."""
    return AuxHamiltonian("linear", m, curve)


def aux_quadratic(kappa, quad) -> AuxHamiltonian:
    """H_aux(s, zeta) = kappa(s) zeta^T Q zeta / 2; scalar kappa allowed."""
    quad = np.array(quad, dtype=float)
    curve = kappa if callable(kappa) else (lambda s, _k=float(kappa): _k)
    return AuxHamiltonian("quadratic", quad.shape[0], curve, quad)


# ---------------------------------------------------------------------------
# the extended behavior


def extended_field(sys: PHSystem, aux: AuxHamiltonian) -> VectorField:
    """Dynamics on (x, zeta) driven by the total energy H + H_aux."""
    if aux.m != sys.m:
        raise DimensionMismatch(f"aux port dimension {aux.m}, system has {sys.m}")
    j_ext, r_ext = extended_structure(sys)
    n = sys.n

    def rhs(t, xi):
        grad = np.concatenate([sys.grad(xi[:n]), aux.gradient(t, xi[n:])])
        return (j_ext(xi) - r_ext(xi)) @ grad

    return VectorField(sys.n + sys.m, rhs, "extended port-Hamiltonian flow")


def extended_behavior(
    sys: PHSystem,
    aux: AuxHamiltonian,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> OdeBehavior:
    """The (n + m)-dimensional behavior for one fixed auxiliary energy."""
    check_structure(sys)
    return OdeBehavior(
        extended_field(sys, aux),
        grid_step,
        residual_tolerance,
        sys.state_labels + sys.zeta_labels,
        aux,
    )


def extended_sheaf(
    sys: PHSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> BehaviorSheaf:
    """The enclosing behavior: members carry their own auxiliary energy.

    Membership reads the aux tag from the trajectory (untagged members count
    as aux zero) and measures the full (n + m)-channel residual against the
    extended dynamics for that tag.
    """
    labels = sys.state_labels + sys.zeta_labels

    def resolve_aux(e: Trajectory) -> AuxHamiltonian:
        if e.aux is None:
            return aux_zero(sys.m)
        if isinstance(e.aux, AuxHamiltonian):
            return e.aux
        raise MissingAuxTag(f"expected an auxiliary-energy tag, found {type(e.aux).__name__}")

    def membership(e: Trajectory) -> float:
        if e.labels != labels:
            return float("inf")
        aux = resolve_aux(e)
        return membership_residual(extended_field(sys, aux), e, grid_step)

    def sampler(x0_ext, length, shift=0.0, aux: Optional[AuxHamiltonian] = None):
        aux = aux if aux is not None else aux_zero(sys.m)
        return extended_behavior(sys, aux, grid_step, residual_tolerance).sample(
            x0_ext, length, shift
        )

    return BehaviorSheaf(
        membership=membership,
        restrict=restrict,
        sampler=sampler,
        tolerance=residual_tolerance,
    )


# ---------------------------------------------------------------------------
# embedding and projections


def cumulative_trapezoid(w: np.ndarray, h: float) -> np.ndarray:
    """Trapezoidal antiderivative on the grid with value 0 at the first node.

    Shared by the closed-system embedding and the port-to-extended map so
    that the diagram triangle closes bit-exactly on the integrated channels.
    """
    w = np.asarray(w, dtype=float)
    out = np.zeros_like(w)
    out[1:] = np.cumsum(0.5 * h * (w[:-1] + w[1:]), axis=0)
    return out


def port_outputs_along(sys: PHSystem, states: np.ndarray) -> np.ndarray:
    """B(x)^T grad H(x) at every node of a state array."""
    return np.stack([sys.port_output(x) for x in states])


def embed_closed(
    sys: PHSystem,
    e: Trajectory,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Trajectory:
    """Embed a closed-system member into the extended behavior.

    Appends the zeta channels, the trapezoidal antiderivative of
    -B^T grad H along the trajectory anchored at zeta(0) = 0, and tags the
    result with the zero auxiliary energy.
    """
    residual = membership_residual(closed_field(sys), e)
    if residual > residual_tolerance:
        raise NotAMember(
            f"trajectory is not a closed-system member (residual {residual:.3e})"
        )
    zeta = cumulative_trapezoid(-port_outputs_along(sys, e.values), e.grid_step)
    values = np.concatenate([e.values, zeta], axis=1)
    return Trajectory(
        values,
        e.grid_step,
        e.shift,
        e.labels + sys.zeta_labels,
        aux_zero(sys.m),
    )


def projections(sys: PHSystem):
    """Leg maps of the enclosing machine.

    The input-side leg evaluates the aux gradient at each node, recovering
    the generalized input that drives the port.  The output-side leg
    evaluates B^T grad H on the state channels, the value -zeta' takes on
    members; computing it node-locally keeps the leg commuting with
    restriction exactly.  Raises MissingAuxTag on untagged trajectories.
    """
    state_labels = sys.state_labels
    z_labels = sys.zeta_labels

    def a_leg(e: Trajectory) -> Trajectory:
        if not isinstance(e.aux, AuxHamiltonian):
            raise MissingAuxTag("extended member carries no auxiliary-energy tag")
        zeta = e.channels(z_labels)
        values = np.stack(
            [e.aux.gradient(t, zeta[i]) for i, t in enumerate(e.absolute_times)]
        )
        return Trajectory(values, e.grid_step, e.shift, sys.input_labels)

    def e_leg(e: Trajectory) -> Trajectory:
        values = port_outputs_along(sys, e.channels(state_labels))
        return Trajectory(values, e.grid_step, e.shift, sys.output_labels)

    return a_leg, e_leg


def output_stencil_defect(sys: PHSystem, e: Trajectory) -> float:
    """Gap between the node-local output leg and -d/dt of the zeta channels.

    The sampled-derivative reading of the output projection differs from the
    node-local one by the differentiation error; this audit bounds it.
    """
    _, e_leg = projections(sys)
    local = e_leg(e).values
    stencil = -grid_derivative(e.channels(sys.zeta_labels), e.grid_step)
    return float(np.max(np.abs(local - stencil)))


# ---------------------------------------------------------------------------
# machines


def _construction_probes(behavior, samples) -> list:
    probes = []
    for args in samples:
        try:
            probes.append(behavior.sampler(*args))
        except Exception:
            continue
    return probes


def closed_machine(
    sys: PHSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Machine:
    """The closed system as a machine: port-leg B^T grad H, constant-leg 0.

    The output slot lands in the one-point sheaf (m zero channels), which is
    what the diagram verifier checks for closedness.
    """
    behavior = closed_behavior(sys, grid_step, residual_tolerance)

    def a_leg(e: Trajectory) -> Trajectory:
        return Trajectory(
            port_outputs_along(sys, e.values), e.grid_step, e.shift, sys.output_labels
        )

    def e_leg(e: Trajectory) -> Trajectory:
        return Trajectory(
            np.zeros((e.num_nodes, sys.m)),
            e.grid_step,
            e.shift,
            tuple(f"o{i}" for i in range(sys.m)),
        )

    probes = _construction_probes(
        behavior.as_behavior_sheaf(),
        [(0.3 * np.ones(sys.n), 32 * grid_step)],
    )
    return Machine(
        behavior.as_behavior_sheaf(),
        a_leg,
        e_leg,
        sys.output_labels,
        tuple(f"o{i}" for i in range(sys.m)),
        "closed",
        check_probes=probes,
    )


def enclosing_machine(
    sys: PHSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Machine:
    """The extended behavior with its aux-gradient and port-output legs."""
    sheaf = extended_sheaf(sys, grid_step, residual_tolerance)
    a_leg, e_leg = projections(sys)
    probes = _construction_probes(
        sheaf,
        [(0.3 * np.ones(sys.n + sys.m), 32 * grid_step)],
    )
    return Machine(
        sheaf,
        a_leg,
        e_leg,
        sys.input_labels,
        sys.output_labels,
        "enclosing",
        check_probes=probes,
    )


def ph_iso_machine(
    sys: PHSystem,
    grid_step: float = DEFAULT_STEP,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
) -> Machine:
    """The open port machine: x' = (J - R) grad H + B u, y = B^T grad H."""
    check_structure(sys)

    def rhs(t, x, u):
        return (sys.interconnection(x) - sys.dissipation(x)) @ sys.grad(x) + sys.port_map(x) @ u

    def readout(t, x, u):
        return sys.port_output(x)

    return iso_machine(
        ControlledField(sys.n, rhs, "port-Hamiltonian dynamics"),
        readout,
        sys.m,
        sys.m,
        grid_step,
        residual_tolerance,
        state_labels=sys.state_labels,
        input_labels=sys.input_labels,
        output_labels=sys.output_labels,
        name="port",
    )


# ---------------------------------------------------------------------------
# audits


def _split_port_run(sys: PHSystem, e: Trajectory):
    x = e.channels(sys.state_labels)
    u = e.channels(sys.input_labels)
    return x, u


def power_balance(sys: PHSystem, e: Trajectory) -> float:
    """Worst node defect of |dH/dt - (y^T u - grad H^T R grad H)|.

    ``e`` is a port-machine member (state and input channels together);
    dH/dt is taken by the grid stencils on the sampled energy.
    """
    x, u = _split_port_run(sys, e)
    energy = np.array([sys.hamiltonian(xi) for xi in x])[:, np.newaxis]
    rate = grid_derivative(energy, e.grid_step)[:, 0]
    worst = 0.0
    for i in range(e.num_nodes):
        grad = sys.grad(x[i])
        supply = float(sys.port_output(x[i]) @ u[i])
        dissipated = float(grad @ sys.dissipation(x[i]) @ grad)
        worst = max(worst, abs(rate[i] - (supply - dissipated)))
    return worst


def dissipation_margin(sys: PHSystem, e: Trajectory) -> float:
    """Worst node excess of dH/dt over the supplied power y^T u.

    Nonpositive (up to stencil error) whenever R is positive semidefinite.
    """
    x, u = _split_port_run(sys, e)
    energy = np.array([sys.hamiltonian(xi) for xi in x])[:, np.newaxis]
    rate = grid_derivative(energy, e.grid_step)[:, 0]
    excess = [
        rate[i] - float(sys.port_output(x[i]) @ u[i]) for i in range(e.num_nodes)
    ]
    return float(np.max(excess))


def closed_energy_drift(sys: PHSystem, e: Trajectory) -> float:
    """Max |H(x(t)) - H(x(0))| along a closed-system member."""
    energy = np.array([sys.hamiltonian(xi) for xi in e.values])
    return float(np.max(np.abs(energy - energy[0])))


def extended_energy(sys: PHSystem, aux: AuxHamiltonian, e: Trajectory) -> np.ndarray:
    """Total energy H(x) + H_aux(s, zeta) at every node."""
    x = e.channels(sys.state_labels)
    zeta = e.channels(sys.zeta_labels)
    return np.array(
        [
            sys.hamiltonian(x[i]) + aux.value(t, zeta[i])
            for i, t in enumerate(e.absolute_times)
        ]
    )


# ---------------------------------------------------------------------------
# the diagram


def closed_to_port_morphism(sys: PHSystem) -> MachineMorphism:
    """Include the closed system into the port machine with input zero.

    Swapped variant: the closed port-leg pairs with the port machine's
    output and the constant-leg with its (zero) input.
    """

    def beta(e: Trajectory) -> Trajectory:
        values = np.concatenate([e.values, np.zeros((e.num_nodes, sys.m))], axis=1)
        return Trajectory(values, e.grid_step, e.shift, e.labels + sys.input_labels)

    ident = lambda e: e
    return MachineMorphism(beta, ident, ident, "swapped", "closed into port")


def port_to_extended_morphism(sys: PHSystem, integral_sign: float = 1.0) -> MachineMorphism:
    """Map a port run (x, u) to the extended member (x, zeta) with linear aux.

    zeta is the shared trapezoidal antiderivative of -B^T grad H and the aux
    tag carries the sampled input curve, so the composite through the port
    agrees with the direct embedding bit-exactly on channels.
    ``integral_sign`` exists for violation tests; any value other than 1.0
    corrupts the quadrature deliberately.
    """

    def beta(e: Trajectory) -> Trajectory:
        x, u = _split_port_run(sys, e)
        zeta = integral_sign * cumulative_trapezoid(
            -port_outputs_along(sys, x), e.grid_step
        )
        values = np.concatenate([x, zeta], axis=1)
        curve = SampledCurve(-e.shift, e.grid_step, u)
        return Trajectory(
            values,
            e.grid_step,
            e.shift,
            sys.state_labels + sys.zeta_labels,
            aux_linear(curve, sys.m),
        )

    ident = lambda e: e
    return MachineMorphism(beta, ident, ident, "straight", "port into extended")


def embedding_morphism(sys: PHSystem) -> MachineMorphism:
    """The closed-into-extended embedding with identity leg maps (swapped)."""

    def beta(e: Trajectory) -> Trajectory:
        return embed_closed(sys, e)

    ident = lambda e: e
    return MachineMorphism(beta, ident, ident, "swapped", "closed into extended")


def build_ph_diagram(
    sys: PHSystem,
    probes: Sequence[Trajectory],
    tolerance: float = 1e-5,
    grid_step: Optional[float] = None,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
    integral_sign: float = 1.0,
):
    """Assemble the three machines and morphisms and verify the triangle.

    Probes must be closed-system members; their grid step fixes the
    machines' grid unless ``grid_step`` is given.  ``integral_sign`` is
    passed to the port-to-extended map so violation tests can corrupt the
    quadrature.
    """
    from .machine import verify_port_control_diagram

    if not probes:
        raise NotAMember("need at least one closed-system probe")
    h = grid_step if grid_step is not None else probes[0].grid_step
    closed = closed_machine(sys, h, residual_tolerance)
    port = ph_iso_machine(sys, h, residual_tolerance)
    enclosing = enclosing_machine(sys, h, residual_tolerance)
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
