"""Finite causal models of I/O systems and their belief updates.

A causal model is an ordered list of typed random variables together with
one conditional table per variable, ``P(X_t | X_<t)``.  Tables are dense
numpy arrays of shape ``sizes[:t] + (sizes[t],)``; rows for histories that
cannot occur may be left undefined.

Three belief updates are supported: logical (``condition``), causal
(``intervene``) and unobserved (identity).  ``obs`` types a realized history
into the sequence of updates an I/O system actually performs and
``behavior_from_beliefs`` turns a model of beliefs into the model of
behavior it generates.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import ValidationError, ZeroProbabilityError

NORM_TOL = 1e-9

History = tuple  # tuple of symbol indices


class IOType(enum.Enum):
    OUTPUT = "output"
    DISCLOSED_INPUT = "disclosed_input"
    UNDISCLOSED_INPUT = "undisclosed_input"


class VPMode(enum.Enum):
    CONTROLLED = "controlled"
    ESTIMATED = "estimated"


class UpdateKind(enum.Enum):
    CAUSAL = "causal"
    LOGICAL = "logical"


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise ValidationError("alphabet must contain at least one symbol")
        if len(set(symbols)) != len(symbols):
            raise ValidationError(f"duplicate symbols in alphabet {symbols}")
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def of_size(cls, n: int) -> "Alphabet":
        return cls(tuple(str(i) for i in range(n)))

    def __len__(self):
        return len(self.symbols)

    def index(self, label: str) -> int:
        try:
            return self.symbols.index(str(label))
        except ValueError:
            raise ValidationError(
                f"unknown symbol {label!r}; expected one of {self.symbols}"
            ) from None


@dataclass(frozen=True)
class VariableSpec:
    name: str
    alphabet: Alphabet
    io_type: IOType = IOType.DISCLOSED_INPUT
    vp_mode: VPMode = VPMode.ESTIMATED

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @property
    def observable(self) -> bool:
        return self.io_type is not IOType.UNDISCLOSED_INPUT


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float if a.dtype != bool else bool)
    a.setflags(write=False)
    return a


def check_distribution(rows, name="distribution", defined=None) -> np.ndarray:
    """Validate rows along the last axis; renormalize small deviations.

    Rows must be non-negative and sum to one within ``NORM_TOL``.  Rows
    masked out by ``defined`` are replaced by the uniform distribution.
    """
    rows = np.array(rows, dtype=float)
    if rows.ndim == 0:
        raise ValidationError(f"{name}: expected a vector, got a scalar")
    k = rows.shape[-1]
    if defined is not None:
        rows[~defined] = 1.0 / k
    if not np.all(np.isfinite(rows)):
        raise ValidationError(f"{name}: non-finite probabilities")
    if np.any(rows < 0):
        bad = np.argwhere(np.any(rows < 0, axis=-1))[0]
        raise ValidationError(f"{name}: negative probability in row {tuple(bad)}")
    sums = rows.sum(axis=-1)
    off = np.abs(sums - 1.0) > NORM_TOL
    if np.any(off):
        bad = tuple(int(i) for i in np.argwhere(off)[0])
        raise ValidationError(
            f"{name}: row {bad} sums to {float(sums[bad]):.12g}, expected 1"
        )
    return rows / sums[..., None]


@dataclass(frozen=True)
class DistTable:
    """Conditional table ``P(X_t | X_<t)`` for one variable.

    ``probs`` has shape ``parent_sizes + (variable.size,)``.  ``defined``
    (same shape minus the last axis) flags histories for which the row is
    meaningful; undefined rows are stored as uniform placeholders.
    """

    variable: VariableSpec
    probs: np.ndarray
    defined: Optional[np.ndarray] = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim == 0 or probs.shape[-1] != self.variable.size:
            raise ValidationError(
                f"table for {self.variable.name!r}: last axis must have size "
                f"{self.variable.size}, got shape {probs.shape}"
            )
        defined = None
        if self.defined is not None:
            defined = np.broadcast_to(
                np.asarray(self.defined, dtype=bool), probs.shape[:-1]
            )
            if defined.all():
                defined = None
        probs = check_distribution(probs, f"table for {self.variable.name!r}", defined)
        object.__setattr__(self, "probs", _frozen(probs))
        object.__setattr__(
            self, "defined", None if defined is None else _frozen(defined)
        )

    @classmethod
    def from_entries(
        cls,
        variable: VariableSpec,
        parent_sizes: Sequence[int],
        entries: Mapping[History, Sequence[float]],
    ) -> "DistTable":
        """Build a sparse table; histories absent from ``entries`` are undefined."""
        shape = tuple(parent_sizes)
        probs = np.full(shape + (variable.size,), 1.0 / variable.size)
        defined = np.zeros(shape, dtype=bool)
        for hist, row in entries.items():
            hist = tuple(hist)
            if len(hist) != len(shape) or any(
                not 0 <= h < n for h, n in zip(hist, shape)
            ):
                raise ValidationError(
                    f"table for {variable.name!r}: invalid history {hist}"
                )
            row = np.asarray(row, dtype=float)
            if row.shape != (variable.size,):
                raise ValidationError(
                    f"table for {variable.name!r}: row {hist} has {row.size} "
                    f"entries, expected {variable.size}"
                )
            probs[hist] = row
            defined[hist] = True
        return cls(variable, probs, defined)

    @property
    def parent_shape(self) -> tuple:
        return self.probs.shape[:-1]

    def is_defined(self, history: History) -> bool:
        return self.defined is None or bool(self.defined[tuple(history)])

    def row(self, history: History) -> np.ndarray:
        return self.probs[tuple(history)]

    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log2(self.probs)

    @property
    def entries(self) -> dict:
        """Mapping from each defined history to its probability vector."""
        out = {}
        for hist in itertools.product(*(range(n) for n in self.parent_shape)):
            if self.is_defined(hist):
                out[hist] = self.probs[hist]
        return out


@dataclass(frozen=True)
class CausalModel:
    variables: tuple
    conditionals: tuple

    def __post_init__(self):
        variables = tuple(self.variables)
        conditionals = tuple(self.conditionals)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "conditionals", conditionals)
        if len(variables) != len(conditionals):
            raise ValidationError(
                f"{len(variables)} variables but {len(conditionals)} conditionals"
            )
        sizes = tuple(v.size for v in variables)
        for t, (var, table) in enumerate(zip(variables, conditionals)):
            if table.variable != var:
                raise ValidationError(f"conditional {t} belongs to {table.variable.name!r}")
            if table.probs.shape != sizes[: t + 1]:
                raise ValidationError(
                    f"conditional {t} ({var.name!r}) has shape {table.probs.shape}, "
                    f"expected {sizes[: t + 1]}"
                )
        mass = np.ones(())
        for t, table in enumerate(conditionals):
            if table.defined is not None:
                missing = (mass > 0) & ~table.defined
                if np.any(missing):
                    hist = tuple(int(i) for i in np.argwhere(missing)[0])
                    raise ValidationError(
                        f"conditional {t} ({variables[t].name!r}) is undefined on "
                        f"reachable history {hist}"
                    )
            mass = mass[..., None] * table.probs

    @classmethod
    def from_arrays(cls, variables: Sequence[VariableSpec], arrays) -> "CausalModel":
        return cls(
            tuple(variables),
            tuple(DistTable(v, a) for v, a in zip(variables, arrays)),
        )

    @property
    def T(self) -> int:
        return len(self.variables)

    @property
    def sizes(self) -> tuple:
        return tuple(v.size for v in self.variables)

    def conditional(self, t: int, history: History) -> np.ndarray:
        return self.conditionals[t].row(history)

    def prefix_array(self, t: int) -> np.ndarray:
        """Joint probability of ``X_<t`` as a dense array of shape ``sizes[:t]``."""
        mass = np.ones(())
        for table in self.conditionals[:t]:
            mass = mass[..., None] * table.probs
        return mass

    def joint_array(self) -> np.ndarray:
        return self.prefix_array(self.T)

    def sequences(self) -> Iterator[History]:
        return itertools.product(*(range(n) for n in self.sizes))

    def check_history(self, seq: History, full: bool = False) -> History:
        seq = tuple(int(x) for x in seq)
        if len(seq) > self.T or (full and len(seq) != self.T):
            want = f"exactly {self.T}" if full else f"at most {self.T}"
            raise ValidationError(f"history of length {len(seq)}; expected {want}")
        for t, x in enumerate(seq):
            if not 0 <= x < self.variables[t].size:
                raise ValidationError(
                    f"symbol index {x} out of range for {self.variables[t].name!r}"
                )
        return seq

    def log_joint(self, seq: History) -> float:
        """log2 of the joint probability of a full sequence."""
        p = joint_probability(self, seq)
        return float(np.log2(p)) if p > 0 else -np.inf


def _check_index(model: CausalModel, t: int, value: int):
    if not 0 <= t < model.T:
        raise ValidationError(f"variable index {t} out of range for T={model.T}")
    if not 0 <= value < model.variables[t].size:
        raise ValidationError(
            f"value {value} out of range for {model.variables[t].name!r}"
        )


def joint_probability(model: CausalModel, seq: History) -> float:
    """Product rule: ``prod_t P(x_t | x_<t)``."""
    seq = model.check_history(seq, full=True)
    p = 1.0
    for t, table in enumerate(model.conditionals):
        p *= float(table.probs[seq[: t + 1]])
    return p


def marginal(model: CausalModel, t: int) -> np.ndarray:
    if not 0 <= t < model.T:
        raise ValidationError(f"variable index {t} out of range for T={model.T}")
    mass = model.prefix_array(t + 1)
    return mass.reshape(-1, mass.shape[-1]).sum(axis=0)


def from_joint(
    variables: Sequence[VariableSpec],
    joint: np.ndarray,
    fallback: Optional[CausalModel] = None,
) -> CausalModel:
    """Factorize a joint array into causal-order conditionals.

    Histories with zero prefix mass take the row from ``fallback`` when given
    and are otherwise left undefined.
    """
    variables = tuple(variables)
    joint = np.asarray(joint, dtype=float)
    tables = []
    for t, var in enumerate(variables):
        upto = joint.sum(axis=tuple(range(t + 1, joint.ndim))) if t + 1 < joint.ndim else joint
        prefix = upto.sum(axis=-1)
        ok = prefix > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            rows = upto / np.where(ok, prefix, 1.0)[..., None]
        if fallback is not None:
            rows = np.where(ok[..., None], rows, fallback.conditionals[t].probs)
            fb_def = fallback.conditionals[t].defined
            defined = ok if fb_def is None else (ok | fb_def)
        else:
            defined = ok
        tables.append(DistTable(var, rows, defined))
    return CausalModel(variables, tuple(tables))


def condition(model: CausalModel, t: int, value: int) -> CausalModel:
    """Logical update ``X_t = value``: the model of ``P(. | X_t = value)``."""
    _check_index(model, t, value)
    joint = model.joint_array()
    mask = np.zeros(model.sizes[t], dtype=bool)
    mask[value] = True
    shape = [1] * model.T
    shape[t] = model.sizes[t]
    conditioned = np.where(mask.reshape(shape), joint, 0.0)
    z = conditioned.sum()
    if z <= 0:
        raise ZeroProbabilityError(
            f"P({model.variables[t].name} = {model.variables[t].alphabet.symbols[value]}) = 0"
        )
    return from_joint(model.variables, conditioned / z, fallback=model)


def intervene(model: CausalModel, t: int, value: int) -> CausalModel:
    """Causal update ``X_t <- value``.

    The past conditionals and all future conditionals are kept; the present
    one is replaced by a point mass on ``value`` for every history.
    """
    _check_index(model, t, value)
    var = model.variables[t]
    delta = np.zeros(model.conditionals[t].probs.shape)
    delta[..., value] = 1.0
    tables = list(model.conditionals)
    tables[t] = DistTable(var, delta)
    return CausalModel(model.variables, tuple(tables))


@dataclass(frozen=True)
class Observation:
    index: int
    value: int
    kind: UpdateKind


def obs(model: CausalModel, realized: History) -> tuple:
    """Type the realized history into causal/logical updates.

    Outputs become causal updates, disclosed inputs logical updates, and
    undisclosed inputs are dropped.  Only variable types are consulted.
    """
    realized = model.check_history(realized)
    record = []
    for t, x in enumerate(realized):
        io = model.variables[t].io_type
        if io is IOType.OUTPUT:
            record.append(Observation(t, x, UpdateKind.CAUSAL))
        elif io is IOType.DISCLOSED_INPUT:
            record.append(Observation(t, x, UpdateKind.LOGICAL))
    return tuple(record)


def apply_updates(model: CausalModel, record: Sequence[Observation]) -> CausalModel:
    for o in record:
        if o.kind is UpdateKind.CAUSAL:
            model = intervene(model, o.index, o.value)
        else:
            model = condition(model, o.index, o.value)
    return model


def behavior_from_beliefs(model: CausalModel, strict: bool = False) -> CausalModel:
    """Associated I/O system ``B(x_t | x_<t) = P(x_t | obs(x_<t))``.

    Beliefs are updated incrementally along the tree of histories.  A logical
    update of probability zero can only happen below a history that ``B``
    itself never reaches; those rows are left undefined unless ``strict`` is
    set, in which case ``ZeroProbabilityError`` is raised.
    """
    T = model.T
    sizes = model.sizes
    rows = [np.zeros(sizes[: t + 1]) for t in range(T)]
    defined = [np.zeros(sizes[:t], dtype=bool) for t in range(T)]

    def visit(t: int, hist: History, belief: CausalModel):
        if t == T:
            return
        rows[t][hist] = marginal(belief, t)
        defined[t][hist] = True
        var = model.variables[t]
        for v in range(sizes[t]):
            if var.io_type is IOType.OUTPUT:
                child = intervene(belief, t, v)
            elif var.io_type is IOType.DISCLOSED_INPUT:
                try:
                    child = condition(belief, t, v)
                except ZeroProbabilityError:
                    if strict:
                        raise
                    continue
            else:
                child = belief
            visit(t + 1, hist + (v,), child)

    visit(0, (), model)
    tables = tuple(
        DistTable(var, rows[t], defined[t]) for t, var in enumerate(model.variables)
    )
    return CausalModel(model.variables, tables)
