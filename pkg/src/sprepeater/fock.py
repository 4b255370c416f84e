"""Linear optics on a truncated multimode bosonic Fock space.

States are stored as flat vectors (pure) or square matrices (mixed) over the
product basis ``|n_0, n_1, ..., n_{M-1}>`` with ``0 <= n_k <= truncation``.
The first mode is the most significant index, i.e. the flat index is the
row-major index of the occupation tuple.

Every operation is a pure function returning a new state.  Operations that
would push amplitude above the truncation raise :class:`TruncationError`
instead of silently clipping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial, sqrt
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError, TruncationError

ALGEBRA_TOL = 1e-12
POSITIVITY_TOL = 1e-10


@dataclass(frozen=True)
class ModeRegister:
    """Ordered, uniquely named bosonic modes sharing one photon-number cutoff.

    An empty register (dimension 1) is what remains after every mode has
    been measured.
    """

    mode_names: tuple[str, ...]
    truncation: int = 2

    def __post_init__(self):
        object.__setattr__(self, "mode_names", tuple(self.mode_names))
        if len(set(self.mode_names)) != len(self.mode_names):
            raise InvalidParameterError(f"duplicate mode names in {self.mode_names}")
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise InvalidParameterError("truncation must be an integer >= 1")

    @property
    def num_modes(self) -> int:
        return len(self.mode_names)

    @property
    def local_dim(self) -> int:
        return self.truncation + 1

    @property
    def dim(self) -> int:
        return self.local_dim**self.num_modes

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.local_dim,) * self.num_modes

    def index(self, mode: str) -> int:
        try:
            return self.mode_names.index(mode)
        except ValueError:
            raise InvalidParameterError(f"mode {mode!r} not in register {self.mode_names}") from None

    def without(self, modes: Iterable[str]) -> "ModeRegister":
        drop = set(modes)
        return ModeRegister(tuple(m for m in self.mode_names if m not in drop), self.truncation)

    def with_truncation(self, truncation: int) -> "ModeRegister":
        return ModeRegister(self.mode_names, truncation)


@dataclass(frozen=True)
class PureState:
    register: ModeRegister
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.register.dim:
            raise InvalidParameterError(
                f"amplitude vector has size {amps.size}, register needs {self.register.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "PureState":
        nrm = sqrt(self.norm_sq())
        if nrm == 0.0:
            raise InvalidParameterError("cannot normalize the zero vector")
        return PureState(self.register, self.amplitudes / nrm)

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return complex(self.amplitudes.reshape(self.register.shape)[tuple(occupation)])

    def to_mixed(self) -> "MixedState":
        return MixedState(self.register, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class MixedState:
    """Density operator; the trace is 1 unless the state is a conditional branch."""

    register: ModeRegister
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.register.dim
        if mat.shape != (d, d):
            mat = mat.reshape(d, d)
        object.__setattr__(self, "matrix", mat)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "MixedState":
        tr = self.trace()
        if tr <= 0.0:
            raise InvalidParameterError("cannot normalize a state with zero trace")
        return MixedState(self.register, self.matrix / tr)

    def population(self, occupation: Sequence[int]) -> float:
        idx = int(np.ravel_multi_index(tuple(occupation), self.register.shape))
        return float(self.matrix[idx, idx].real)

    def populations(self) -> np.ndarray:
        """Diagonal as an array indexed by occupation tuple."""
        return np.diagonal(self.matrix).real.reshape(self.register.shape)

    def scaled(self, factor: float) -> "MixedState":
        return MixedState(self.register, self.matrix * factor)

    def __add__(self, other: "MixedState") -> "MixedState":
        if other.register != self.register:
            raise InvalidParameterError("cannot add states on different registers")
        return MixedState(self.register, self.matrix + other.matrix)


@dataclass(frozen=True)
class BeamSplitterSpec:
    alpha: float
    beta: float

    def __post_init__(self):
        if abs(self.alpha**2 + self.beta**2 - 1.0) > ALGEBRA_TOL:
            raise InvalidParameterError(
                f"beam splitter needs alpha^2 + beta^2 = 1, got {self.alpha**2 + self.beta**2!r}"
            )

    @classmethod
    def from_transmission(cls, beta_sq: float) -> "BeamSplitterSpec":
        if not 0.0 <= beta_sq <= 1.0:
            raise InvalidParameterError(f"transmission {beta_sq} outside [0, 1]")
        return cls(sqrt(1.0 - beta_sq), sqrt(beta_sq))


BALANCED = BeamSplitterSpec(1 / sqrt(2), 1 / sqrt(2))


@dataclass(frozen=True)
class DetectorModel:
    eta_d: float = 1.0
    p_dark: float = 0.0
    number_resolving: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta_d <= 1.0:
            raise InvalidParameterError(f"eta_d={self.eta_d} outside [0, 1]")
        if not 0.0 <= self.p_dark < 1.0:
            raise InvalidParameterError(f"p_dark={self.p_dark} outside [0, 1)")


@dataclass(frozen=True)
class Outcome:
    count: int
    probability: float
    state: MixedState


# --------------------------------------------------------------------------
# tensor helpers

def _as_tensor(state: MixedState) -> np.ndarray:
    return state.matrix.reshape(state.register.shape * 2)


def _from_tensor(register: ModeRegister, tensor: np.ndarray) -> MixedState:
    return MixedState(register, tensor.reshape(register.dim, register.dim))


def _apply_local(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``op`` (out..., in...) into ``tensor`` on ``axes``, keeping axis order."""
    k = len(axes)
    moved = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(moved, list(range(k)), list(axes))


def _apply_both_sides(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int], num_modes: int) -> np.ndarray:
    out = _apply_local(tensor, op, axes)
    return _apply_local(out, op.conj(), [a + num_modes for a in axes])


def _diagonal_tensor(tensor: np.ndarray, num_modes: int) -> np.ndarray:
    shape = tensor.shape[:num_modes]
    size = int(np.prod(shape))
    return np.diagonal(tensor.reshape(size, size)).real.reshape(shape)


def _leak_mask(shape: Sequence[int], axes: Sequence[int], truncation: int) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for ax in axes:
        idx = [slice(None)] * len(shape)
        idx[ax] = slice(truncation + 1, None)
        mask[tuple(idx)] = True
    return mask


def _crop(tensor: np.ndarray, axes: Sequence[int], truncation: int) -> np.ndarray:
    idx = [slice(None)] * tensor.ndim
    for ax in axes:
        idx[ax] = slice(0, truncation + 1)
    return tensor[tuple(idx)]


def _embed(tensor: np.ndarray, axes: Sequence[int], size: int) -> np.ndarray:
    pad = [(0, 0)] * tensor.ndim
    for ax in axes:
        pad[ax] = (0, size - tensor.shape[ax])
    return np.pad(tensor, pad)


def beamsplitter_matrix(spec: BeamSplitterSpec, n_max: int) -> np.ndarray:
    """Two-mode transformation on inputs with up to ``n_max`` photons per mode.

    Returns an array indexed ``[k, l, n, m]`` giving the amplitude of output
    ``|k, l>`` for input ``|n, m>``.  Outputs are allowed up to ``2 * n_max``
    photons per mode, so the matrix is exact (no truncation).
    """
    a, b = spec.alpha, spec.beta
    out_dim = 2 * n_max + 1
    mat = np.zeros((out_dim, out_dim, n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        # (a x + b y)^n, x ~ mode_i creation, y ~ mode_j creation
        first = np.zeros((n + 1, n + 1))
        for k in range(n + 1):
            first[k, n - k] = comb(n, k) * a**k * b ** (n - k)
        for m in range(n_max + 1):
            # (b x - a y)^m
            second = np.zeros((m + 1, m + 1))
            for j in range(m + 1):
                second[j, m - j] = comb(m, j) * b**j * (-a) ** (m - j)
            poly = np.zeros((n + m + 1, n + m + 1))
            for (i1, j1), c1 in np.ndenumerate(first):
                if c1 == 0.0:
                    continue
                for (i2, j2), c2 in np.ndenumerate(second):
                    if c2 != 0.0:
                        poly[i1 + i2, j1 + j2] += c1 * c2
            norm = sqrt(factorial(n) * factorial(m))
            for (k, l), c in np.ndenumerate(poly):
                if c != 0.0:
                    mat[k, l, n, m] = c * sqrt(factorial(k) * factorial(l)) / norm
    return mat


def loss_kraus(eta: float, n_max: int) -> list[np.ndarray]:
    """Kraus operators of the pure-loss channel, indexed by lost photon number."""
    ops = []
    for lost in range(n_max + 1):
        k = np.zeros((n_max + 1, n_max + 1))
        for n in range(lost, n_max + 1):
            k[n - lost, n] = sqrt(comb(n, lost) * eta ** (n - lost) * (1.0 - eta) ** lost)
        ops.append(k)
    return ops


# --------------------------------------------------------------------------
# public operations

def prepare(register: ModeRegister, occupation: Sequence[int]) -> PureState:
    occupation = tuple(int(n) for n in occupation)
    if len(occupation) != register.num_modes:
        raise InvalidParameterError(
            f"occupation has {len(occupation)} entries for {register.num_modes} modes"
        )
    if any(n < 0 for n in occupation):
        raise InvalidParameterError("photon numbers must be non-negative")
    if any(n > register.truncation for n in occupation):
        raise TruncationError(f"occupation {occupation} exceeds truncation {register.truncation}")
    amps = np.zeros(register.dim, dtype=complex)
    amps[np.ravel_multi_index(occupation, register.shape)] = 1.0
    return PureState(register, amps)


def vacuum(register: ModeRegister) -> PureState:
    return prepare(register, (0,) * register.num_modes)


def apply_creation(state: PureState, mode: str) -> tuple[PureState, float]:
    """Apply ``a^dagger`` to ``mode`` and renormalize.

    Returns the new state and the squared norm before renormalization, e.g.
    ``2`` for ``a^dagger |1>``.
    """
    reg = state.register
    ax = reg.index(mode)
    psi = state.amplitudes.reshape(reg.shape)
    top = np.take(psi, reg.truncation, axis=ax)
    if np.max(np.abs(top), initial=0.0) > ALGEBRA_TOL:
        raise TruncationError(f"creation on {mode!r} would exceed truncation {reg.truncation}")
    d = reg.local_dim
    raising = np.diag(np.sqrt(np.arange(1, d)), k=-1)
    out = _apply_local(psi, raising, [ax]).reshape(-1)
    weight = float(np.vdot(out, out).real)
    if weight == 0.0:
        raise InvalidParameterError("creation operator annihilated the state")
    return PureState(reg, out / sqrt(weight)), weight


def apply_beamsplitter(state, mode_i: str, mode_j: str, spec: BeamSplitterSpec):
    """Mix two modes: ``a_i^+ -> alpha a_i^+ + beta a_j^+``, ``a_j^+ -> beta a_i^+ - alpha a_j^+``."""
    if not isinstance(spec, BeamSplitterSpec):
        raise InvalidParameterError("spec must be a BeamSplitterSpec")
    spec.__post_init__()
    reg = state.register
    if mode_i == mode_j:
        raise InvalidParameterError("beam splitter needs two distinct modes")
    axes = [reg.index(mode_i), reg.index(mode_j)]
    big = beamsplitter_matrix(spec, reg.truncation)
    if isinstance(state, PureState):
        psi = _apply_local(state.amplitudes.reshape(reg.shape), big, axes)
        leak = float(np.sum(np.abs(psi[_leak_mask(psi.shape, axes, reg.truncation)]) ** 2))
        if leak > ALGEBRA_TOL:
            raise TruncationError(f"beam splitter output leaks weight {leak:.3g} above truncation")
        return PureState(reg, _crop(psi, axes, reg.truncation).reshape(-1))
    rho = _apply_both_sides(_as_tensor(state), big, axes, reg.num_modes)
    diag = _diagonal_tensor(rho, reg.num_modes)
    leak = float(np.sum(diag[_leak_mask(diag.shape, axes, reg.truncation)]))
    if leak > ALGEBRA_TOL:
        raise TruncationError(f"beam splitter output leaks weight {leak:.3g} above truncation")
    cropped = _crop(rho, axes + [a + reg.num_modes for a in axes], reg.truncation)
    return _from_tensor(reg, cropped)


def apply_loss(state: MixedState, mode: str, eta: float) -> MixedState:
    """Pure-loss channel with transmission ``eta`` on one mode."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"transmission {eta} outside [0, 1]")
    if isinstance(state, PureState):
        state = state.to_mixed()
    reg = state.register
    if eta == 1.0:
        reg.index(mode)
        return state
    ax = reg.index(mode)
    rho = _as_tensor(state)
    out = np.zeros_like(rho)
    for k in loss_kraus(eta, reg.truncation):
        out += _apply_both_sides(rho, k, [ax], reg.num_modes)
    return _from_tensor(reg, out)


def _project_number(state: MixedState, mode: str, count: int) -> MixedState:
    """Unnormalized ``<count|rho|count>`` on ``mode``; the mode is removed."""
    reg = state.register
    ax = reg.index(mode)
    rho = _as_tensor(state)
    sub = np.take(np.take(rho, count, axis=ax + reg.num_modes), count, axis=ax)
    return _from_tensor(reg.without([mode]), sub)


def pnr_branches(state: MixedState, mode: str, detector: DetectorModel) -> dict[int, MixedState]:
    """Unnormalized conditional states for every detector count.

    The trace of each branch is the probability of that count.  Efficiency is
    modelled as loss ahead of an ideal number projection; dark counts add at
    most one extra count per window, independently of the light.  A
    non-resolving detector reports 0 or 1 (click).
    """
    if isinstance(state, PureState):
        state = state.to_mixed()
    reg = state.register
    lossy = apply_loss(state, mode, detector.eta_d)
    ideal = {k: _project_number(lossy, mode, k) for k in range(reg.truncation + 1)}
    pd = detector.p_dark
    branches = {k: b.scaled(1.0 - pd) for k, b in ideal.items()}
    if pd > 0.0:
        top = reg.truncation + 1
        branches[top] = ideal[top - 1].scaled(pd)
        for k in range(1, top):
            branches[k] = branches[k] + ideal[k - 1].scaled(pd)
    if not detector.number_resolving:
        click = branches[1]
        for k in sorted(branches)[2:]:
            click = click + branches[k]
        branches = {0: branches[0], 1: click}
    return branches


def measure_pnr(state: MixedState, mode: str, detector: DetectorModel) -> list[Outcome]:
    """Photon-number measurement of one mode with an imperfect detector.

    Returns one :class:`Outcome` per count with non-vanishing probability,
    carrying the normalized state of the remaining modes.
    """
    outcomes = []
    for count, branch in sorted(pnr_branches(state, mode, detector).items()):
        p = branch.trace()
        if p > 1e-300:
            outcomes.append(Outcome(count, p, branch.scaled(1.0 / p)))
    return outcomes


def partial_trace(state: MixedState, modes_to_keep: Iterable[str]) -> MixedState:
    if isinstance(state, PureState):
        state = state.to_mixed()
    keep = set(modes_to_keep)
    reg = state.register
    if not keep:
        raise InvalidParameterError("partial trace needs at least one mode to keep")
    for m in keep:
        reg.index(m)
    rho = _as_tensor(state)
    remaining = list(reg.mode_names)
    for name in reg.mode_names:
        if name in keep:
            continue
        ax = remaining.index(name)
        rho = np.trace(rho, axis1=ax, axis2=ax + len(remaining))
        remaining.remove(name)
    return _from_tensor(ModeRegister(tuple(remaining), reg.truncation), rho)


def fidelity(state: MixedState, target: PureState) -> float:
    """Overlap ``<target|rho|target>`` with a pure target."""
    if isinstance(state, PureState):
        state = state.to_mixed()
    if state.register != target.register:
        raise InvalidParameterError("state and target live on different registers")
    t = target.amplitudes
    return float(np.vdot(t, state.matrix @ t).real)


# --------------------------------------------------------------------------
# register manipulation

def tensor_product(*states: MixedState) -> MixedState:
    """Joint state of independent subsystems; registers must share truncation."""
    mats = []
    names: list[str] = []
    truncation = None
    for s in states:
        if isinstance(s, PureState):
            s = s.to_mixed()
        if truncation is None:
            truncation = s.register.truncation
        elif s.register.truncation != truncation:
            raise InvalidParameterError("tensor_product needs equal truncations")
        names.extend(s.register.mode_names)
        mats.append(s.matrix)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return MixedState(ModeRegister(tuple(names), truncation), out)


def relabel(state: MixedState, mapping: dict[str, str]) -> MixedState:
    reg = state.register
    names = tuple(mapping.get(n, n) for n in reg.mode_names)
    return MixedState(ModeRegister(names, reg.truncation), state.matrix)


def reorder(state: MixedState, mode_names: Sequence[str]) -> MixedState:
    reg = state.register
    if sorted(mode_names) != sorted(reg.mode_names):
        raise InvalidParameterError("reorder needs a permutation of the register modes")
    perm = [reg.index(n) for n in mode_names]
    m = reg.num_modes
    rho = np.transpose(_as_tensor(state), perm + [p + m for p in perm])
    return _from_tensor(ModeRegister(tuple(mode_names), reg.truncation), rho)


def change_truncation(state: MixedState, truncation: int) -> MixedState:
    """Re-express a state with a different per-mode cutoff.

    Lowering the cutoff raises :class:`TruncationError` if any population
    above it exceeds the algebraic tolerance.
    """
    if isinstance(state, PureState):
        state = state.to_mixed()
    reg = state.register
    new_reg = reg.with_truncation(truncation)
    m = reg.num_modes
    rho = _as_tensor(state)
    if truncation >= reg.truncation:
        return _from_tensor(new_reg, _embed(rho, list(range(2 * m)), truncation + 1))
    diag = state.populations()
    leak = float(np.sum(diag[_leak_mask(diag.shape, range(m), truncation)]))
    if leak > ALGEBRA_TOL:
        raise TruncationError(f"lowering truncation drops population {leak:.3g}")
    return _from_tensor(new_reg, _crop(rho, list(range(2 * m)), truncation))


def apply_phase(state: MixedState, mode: str, phase: float) -> MixedState:
    """Apply ``exp(i * phase * n)`` on ``mode``."""
    reg = state.register
    op = np.diag(np.exp(1j * phase * np.arange(reg.local_dim)))
    return _from_tensor(reg, _apply_both_sides(_as_tensor(state), op, [reg.index(mode)], reg.num_modes))


def is_physical(state: MixedState, tol: float = POSITIVITY_TOL) -> bool:
    mat = state.matrix
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > ALGEBRA_TOL:
        return False
    return bool(np.min(np.linalg.eigvalsh(mat)) >= -tol)
