"""Intervals, sampled trajectories, and behavior sheaves.

The base category has the nonnegative reals as objects and translations as
morphisms: the morphisms from a to b form the interval [0, b - a] (empty when
b < a) and compose by adding offsets.  A behavior assigns to each interval
length a set of trajectories and to each morphism a restriction map.  On a
uniform grid both sheaf axioms (separation and gluing) reduce to index
arithmetic on the sample arrays, so the laws can be tested bit-exactly
instead of approximately.

Two equality regimes are used throughout: ``identical`` (bit-exact, for the
categorical laws) and ``sup_distance`` against a tolerance (for membership
and junction tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import (
    DomainMismatch,
    EmptyHom,
    GridMismatch,
    JunctionMismatch,
    MisalignedOffset,
    NotAMember,
    OutOfRange,
    ShiftMismatch,
)

#: relative tolerance for deciding whether an offset sits on the grid
GRID_ALIGN_RTOL = 1e-12

#: default tolerance for junction and membership comparisons
DEFAULT_TOLERANCE = 1e-9

#: default grid step (time units)
DEFAULT_STEP = 1e-3


# ---------------------------------------------------------------------------
# the interval category


@dataclass(frozen=True)
class IntObject:
    """An interval [0, length] with length >= 0."""

    length: float

    def __post_init__(self):
        if not (self.length >= 0.0):
            raise EmptyHom(f"interval length must be nonnegative, got {self.length}")


@dataclass(frozen=True)
class IntMorphism:
    """A translation placing [0, source.length] inside [0, target.length].

    The offset must satisfy 0 <= offset <= target.length - source.length;
    otherwise the hom set contains no such morphism.
    """

    source: IntObject
    target: IntObject
    offset: float

    def __post_init__(self):
        room = self.target.length - self.source.length
        if room < -GRID_ALIGN_RTOL * max(1.0, self.target.length):
            raise EmptyHom(
                f"no morphisms from length {self.source.length} "
                f"into length {self.target.length}"
            )
        if self.offset < -GRID_ALIGN_RTOL or self.offset > room + GRID_ALIGN_RTOL * max(1.0, room):
            raise EmptyHom(
                f"offset {self.offset} outside [0, {room}] for this hom set"
            )


def identity_int(obj: IntObject) -> IntMorphism:
    return IntMorphism(obj, obj, 0.0)


def compose_int(outer: IntMorphism, inner: IntMorphism) -> IntMorphism:
    """Compose two interval morphisms (offsets add)."""
    if inner.target != outer.source:
        raise DomainMismatch(
            f"inner target {inner.target} does not match outer source {outer.source}"
        )
    return IntMorphism(inner.source, outer.target, outer.offset + inner.offset)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Token:
    """Value carried by a zero-dimensional trajectory of a constant sheaf."""

    label: int


def _default_labels(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(n))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A sampled curve on [0, length] together with a time-shift tag.

    Parameters
    ----------
    values : array, shape (num_nodes, n)
        One state vector per grid node 0, h, 2h, ..., length.  The array is
        copied and frozen; n = 0 is allowed (token trajectories).
    grid_step : float
        Uniform node spacing h > 0.
    shift : float
        The time-shift tag.  A trajectory with shift theta represents the
        curve t -> x(t) observed from absolute time t - theta.
    labels : tuple of str
        Channel names, one per state component.
    aux : optional
        Extra metadata that rides along restriction and gluing unchanged:
        a Token for constant sheaves, or auxiliary-energy tags for extended
        behaviors.

    The interval length is derived from the node count, so restriction and
    glue round trips reproduce lengths bit-exactly.
    """

    values: np.ndarray
    grid_step: float = DEFAULT_STEP
    shift: float = 0.0
    labels: tuple[str, ...] = None  # type: ignore[assignment]
    aux: Any = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, np.newaxis]
        if vals.ndim != 2 or vals.shape[0] < 1:
            raise GridMismatch(f"values must be a (num_nodes, n) array, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if not (self.grid_step > 0.0):
            raise GridMismatch(f"grid step must be positive, got {self.grid_step}")
        labels = self.labels
        if labels is None:
            labels = _default_labels(vals.shape[1])
        labels = tuple(str(name) for name in labels)
        if len(labels) != vals.shape[1]:
            raise GridMismatch(
                f"{len(labels)} labels for {vals.shape[1]} channels"
            )
        object.__setattr__(self, "labels", labels)

    @property
    def num_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def length(self) -> float:
        return (self.num_nodes - 1) * self.grid_step

    @property
    def times(self) -> np.ndarray:
        """Grid node times 0, h, ..., length."""
        return np.arange(self.num_nodes) * self.grid_step

    @property
    def absolute_times(self) -> np.ndarray:
        """Node times minus the shift; the argument the dynamics law sees."""
        return self.times - self.shift

    def channel_indices(self, names) -> tuple[int, ...]:
        """Positions of the named channels, in the order given."""
        try:
            return tuple(self.labels.index(name) for name in names)
        except ValueError as exc:
            raise GridMismatch(f"channel not present: {exc}") from exc

    def channels(self, names) -> np.ndarray:
        return self.values[:, list(self.channel_indices(names))]

    def replace_aux(self, aux) -> "Trajectory":
        return Trajectory(self.values, self.grid_step, self.shift, self.labels, aux)

    def __repr__(self):
        return (
            f"Trajectory(nodes={self.num_nodes}, dim={self.dimension}, "
            f"step={self.grid_step:g}, shift={self.shift:g}, labels={self.labels})"
        )


def identical(a: Trajectory, b: Trajectory) -> bool:
    """Bit-exact equality, the regime for the sheaf-law tests."""
    return (
        a.grid_step == b.grid_step
        and a.shift == b.shift
        and a.labels == b.labels
        and a.values.shape == b.values.shape
        and bool(np.all(a.values == b.values))
        and a.aux == b.aux
    )


def sup_distance(a: Trajectory, b: Trajectory) -> float:
    """Sup-norm distance over channels plus shift disagreement.

    Trajectories on different grids or with different channel counts are
    infinitely far apart.  Aux tags are not compared here; use
    ``close_members`` when set-theoretic equality is meant.
    """
    if (
        a.grid_step != b.grid_step
        or a.values.shape != b.values.shape
    ):
        return float("inf")
    if a.values.size == 0:
        value_gap = 0.0
    else:
        value_gap = float(np.max(np.abs(a.values - b.values)))
    return max(value_gap, abs(a.shift - b.shift))


def close_members(a: Trajectory, b: Trajectory, tolerance: float) -> bool:
    """Equality surrogate for members of a behavior set."""
    return a.aux == b.aux and sup_distance(a, b) <= tolerance


def _aligned_count(x: float, h: float, what: str) -> int:
    """Number of grid steps in x, or raise if x is off-grid."""
    k = int(round(x / h))
    if abs(k * h - x) > GRID_ALIGN_RTOL * max(1.0, abs(x)):
        raise MisalignedOffset(f"{what} {x!r} is not a multiple of the grid step {h!r}")
    if k < 0:
        raise OutOfRange(f"{what} must be nonnegative, got {x!r}")
    return k


def restrict(
    e: Trajectory,
    new_length: float,
    offset: float,
    interpolate: bool = False,
) -> Trajectory:
    """Restriction map: drop the first `offset` of the domain, keep `new_length`.

    The shift decreases by the offset, so the absolute times seen by the
    dynamics are preserved.  Offsets must sit on the grid; misaligned
    restriction is an error unless ``interpolate`` is set, in which case the
    values are resampled with a cubic spline (and the bit-exact laws no
    longer apply).
    """
    if interpolate:
        return _restrict_interpolating(e, new_length, offset)
    k = _aligned_count(offset, e.grid_step, "offset")
    m = _aligned_count(new_length, e.grid_step, "new length")
    if k + m > e.num_nodes - 1:
        raise OutOfRange(
            f"window offset {offset} + length {new_length} exceeds domain {e.length}"
        )
    return Trajectory(
        e.values[k : k + m + 1],
        e.grid_step,
        e.shift - k * e.grid_step,
        e.labels,
        e.aux,
    )


def _restrict_interpolating(e: Trajectory, new_length: float, offset: float) -> Trajectory:
    from scipy.interpolate import CubicSpline

    if offset < 0 or new_length < 0 or offset + new_length > e.length + GRID_ALIGN_RTOL:
        raise OutOfRange(
            f"window offset {offset} + length {new_length} exceeds domain {e.length}"
        )
    if e.num_nodes < 4:
        raise OutOfRange("cubic resampling needs at least 4 nodes")
    m = int(round(new_length / e.grid_step))
    spline = CubicSpline(e.times, e.values, axis=0)
    new_times = offset + np.arange(m + 1) * e.grid_step
    new_times = np.minimum(new_times, e.length)  # guard the last node against roundoff
    return Trajectory(
        spline(new_times), e.grid_step, e.shift - offset, e.labels, e.aux
    )


def glue(left: Trajectory, right: Trajectory, tolerance: float = DEFAULT_TOLERANCE) -> Trajectory:
    """Concatenate two compatible pieces, keeping the junction node once.

    The right piece must start where the left piece ends, both in value
    (within ``tolerance``) and in shift bookkeeping: right.shift must equal
    left.shift - left.length.
    """
    if left.grid_step != right.grid_step:
        raise GridMismatch(
            f"grid steps differ: {left.grid_step} vs {right.grid_step}"
        )
    if left.dimension != right.dimension or left.labels != right.labels:
        raise GridMismatch(
            f"channel layouts differ: {left.labels} vs {right.labels}"
        )
    if left.aux != right.aux:
        raise JunctionMismatch("aux tags of the pieces differ")
    shift_defect = abs(right.shift - (left.shift - left.length))
    if shift_defect > tolerance:
        raise ShiftMismatch(
            f"right shift {right.shift} vs expected {left.shift - left.length} "
            f"(defect {shift_defect:.3e})"
        )
    if left.dimension > 0:
        junction = float(np.max(np.abs(left.values[-1] - right.values[0])))
    else:
        junction = 0.0
    if junction > tolerance:
        raise JunctionMismatch(f"junction defect {junction:.3e} exceeds {tolerance:.3e}")
    values = np.concatenate([left.values, right.values[1:]], axis=0)
    return Trajectory(values, left.grid_step, left.shift, left.labels, left.aux)


# ---------------------------------------------------------------------------
# behavior sheaves


@dataclass(frozen=True)
class BehaviorSheaf:
    """A behavior family: membership residual, restriction, optional sampler.

    ``membership`` maps a trajectory to a nonnegative residual; residual at
    most ``tolerance`` counts as membership.  ``restrict`` implements the
    restriction maps (the sampled default suits every behavior built here).
    ``sampler``, when present, generates members from initial data.
    """

    membership: Callable[[Trajectory], float]
    restrict: Callable[..., Trajectory] = restrict
    sampler: Optional[Callable[..., Trajectory]] = None
    tolerance: float = DEFAULT_TOLERANCE


@dataclass(frozen=True)
class CutCheck:
    """Axiom evidence for one probe at one cut point."""

    probe: int
    cut: float
    glue_exact: bool
    glue_residual: float
    separation_collisions: tuple[int, ...]


@dataclass(frozen=True)
class AxiomReport:
    checks: tuple[CutCheck, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(
            c.glue_exact
            and c.glue_residual <= self.tolerance
            and not c.separation_collisions
            for c in self.checks
        )

    def worst_glue_residual(self) -> float:
        return max((c.glue_residual for c in self.checks), default=0.0)


def check_sheaf_axioms(
    sheaf: BehaviorSheaf,
    probes: list[Trajectory],
    cut_points: list[float],
) -> AxiomReport:
    """Test separation and gluing on a finite probe set.

    For every probe and every cut: the glued pair of restrictions must
    reproduce the probe bit-exactly and remain a member; and no distinct
    probe may agree with it on both pieces (separation).  Raises NotAMember
    if a probe fails membership up front.
    """
    for i, e in enumerate(probes):
        residual = sheaf.membership(e)
        if residual > sheaf.tolerance:
            raise NotAMember(
                f"probe {i} has membership residual {residual:.3e} "
                f"> tolerance {sheaf.tolerance:.3e}"
            )
    checks = []
    for i, e in enumerate(probes):
        for cut in cut_points:
            if not (0.0 < cut < e.length):
                raise OutOfRange(
                    f"cut {cut} is not interior to probe {i} of length {e.length}"
                )
            left = sheaf.restrict(e, cut, 0.0)
            right = sheaf.restrict(e, e.length - cut, cut)
            glued = glue(left, right, sheaf.tolerance)
            glue_exact = identical(glued, e)
            glue_residual = float(sheaf.membership(glued))
            collisions = []
            for j, other in enumerate(probes):
                if j == i or close_members(e, other, sheaf.tolerance):
                    continue
                if other.num_nodes != e.num_nodes or other.grid_step != e.grid_step:
                    continue
                other_left = sheaf.restrict(other, cut, 0.0)
                other_right = sheaf.restrict(other, other.length - cut, cut)
                if close_members(left, other_left, sheaf.tolerance) and close_members(
                    right, other_right, sheaf.tolerance
                ):
                    collisions.append(j)
            checks.append(
                CutCheck(i, cut, glue_exact, glue_residual, tuple(collisions))
            )
    return AxiomReport(tuple(checks), sheaf.tolerance)


def token_trajectory(
    label: int,
    length: float,
    grid_step: float = DEFAULT_STEP,
    shift: float = 0.0,
) -> Trajectory:
    """Zero-dimensional trajectory carrying a token."""
    nodes = _aligned_count(length, grid_step, "length") + 1
    return Trajectory(
        np.empty((nodes, 0)), grid_step, shift, (), Token(int(label))
    )


def constant_sheaf(value_set_size: int, grid_step: float = DEFAULT_STEP) -> BehaviorSheaf:
    """The sheaf assigning the same finite token set to every interval.

    Restriction is the identity on tokens; with one token this is the
    one-point sheaf that constant machine legs land in.
    """
    if value_set_size < 1:
        raise OutOfRange("value_set_size must be a positive integer")

    def membership(e: Trajectory) -> float:
        ok = (
            e.dimension == 0
            and isinstance(e.aux, Token)
            and 0 <= e.aux.label < value_set_size
        )
        return 0.0 if ok else float("inf")

    def sampler(label: int, length: float, shift: float = 0.0) -> Trajectory:
        if not 0 <= int(label) < value_set_size:
            raise OutOfRange(f"token {label} outside range({value_set_size})")
        return token_trajectory(label, length, grid_step, shift)

    return BehaviorSheaf(membership=membership, sampler=sampler)


# ---------------------------------------------------------------------------
# trajectory file format


def write_csv(e: Trajectory, path) -> None:
    """Write the trajectory with 17 significant digits (bit-exact round trip)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# shift={e.shift:.17g} step={e.grid_step:.17g}\n")
        fh.write(",".join(["t", *e.labels]) + "\n")
        times = e.times
        for i in range(e.num_nodes):
            row = [f"{times[i]:.17g}"] + [f"{v:.17g}" for v in e.values[i]]
            fh.write(",".join(row) + "\n")


def read_csv(path) -> Trajectory:
    """Read a trajectory written by :func:`write_csv`."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith("# shift="):
            raise GridMismatch(f"missing shift/step comment line in {path}")
        parts = dict(
            item.split("=", 1) for item in header[2:].split() if "=" in item
        )
        shift = float(parts["shift"])
        step = float(parts["step"])
        labels = fh.readline().strip().split(",")[1:]
        rows = [line.strip().split(",") for line in fh if line.strip()]
    values = np.array([[float(v) for v in row[1:]] for row in rows], dtype=float)
    if values.size == 0:
        values = np.empty((len(rows), 0))
    return Trajectory(values, step, shift, tuple(labels))
