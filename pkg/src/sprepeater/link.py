"""Elementary links, entanglement swapping and post-selection on the Fock engine.

Link states always live on two memory modes named ``"L"`` (left end) and
``"R"`` (right end).  Both protocols share the same central station: the two
travelling modes are attenuated by the fibre, combined on a balanced beam
splitter and read out by two photon-number-resolving detectors; the link is
heralded when exactly one count is registered in total.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import exp, pi, sqrt

import numpy as np

from . import fock
from .errors import InvalidParameterError, TruncationError
from .fock import (
    BALANCED,
    BeamSplitterSpec,
    DetectorModel,
    MixedState,
    ModeRegister,
    PureState,
)

SINGLE_PHOTON = "single_photon"
PAIR = "pair"

MEMORY_MODES = ("L", "R")
MEMORY_REGISTER = ModeRegister(MEMORY_MODES, 2)

# relative population below which a photon number counts as unoccupied
_OCCUPIED = 1e-14


@dataclass(frozen=True)
class SourceModel:
    """Emission statistics of the sources at each end of a link.

    ``single_photon`` sources emit one photon with probability ``p1`` and two
    with probability ``p2``.  ``pair`` sources emit a photon pair into the
    memory and fibre modes with probability ``p / 2``; ``two_pairs`` keeps the
    next term of the two-mode squeezed expansion as well.
    """

    kind: str
    p1: float = 0.0
    p2: float = 0.0
    p: float = 0.0
    two_pairs: bool = False

    def __post_init__(self):
        if self.kind == SINGLE_PHOTON:
            if self.p1 < 0 or self.p2 < 0 or self.p1 + self.p2 > 1.0 + 1e-15:
                raise InvalidParameterError(f"need p1, p2 >= 0 and p1 + p2 <= 1, got {self.p1}, {self.p2}")
        elif self.kind == PAIR:
            if not 0.0 <= self.p < 1.0:
                raise InvalidParameterError(f"pair parameter p={self.p} outside [0, 1)")
        else:
            raise InvalidParameterError(f"unknown source kind {self.kind!r}")

    @classmethod
    def single_photon(cls, p1: float = 1.0, p2: float = 0.0) -> "SourceModel":
        return cls(SINGLE_PHOTON, p1=p1, p2=p2)

    @classmethod
    def pair(cls, p: float, two_pairs: bool = False) -> "SourceModel":
        return cls(PAIR, p=p, two_pairs=two_pairs)

    @property
    def p0(self) -> float:
        return max(0.0, 1.0 - self.p1 - self.p2)

    @property
    def max_photons(self) -> int:
        """Largest photon number this source puts into any single mode."""
        if self.kind == SINGLE_PHOTON:
            return 2 if self.p2 > 0 else 1
        return 2 if self.two_pairs and self.p > 0 else 1


@dataclass(frozen=True)
class RepeaterParams:
    """Configuration of a symmetric repeater chain.

    Lengths are in km, ``c`` in m/s.  ``beta_sq`` is the fraction of each
    single photon sent towards the central station (ignored for pair sources).
    """

    L: float
    n: int
    source: SourceModel = field(default_factory=lambda: SourceModel.single_photon(0.95))
    beta_sq: float = 0.11
    eta_m: float = 0.9
    detector: DetectorModel = field(default_factory=lambda: DetectorModel(eta_d=0.9))
    L_att: float = 22.0
    c: float = 2e8
    swap_p_dark: float = 0.0
    eta_t_override: float | None = None

    def __post_init__(self):
        if self.L <= 0:
            raise InvalidParameterError(f"distance must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 0:
            raise InvalidParameterError(f"nesting level must be a non-negative integer, got {self.n}")
        if not 0.0 <= self.eta_m <= 1.0:
            raise InvalidParameterError(f"eta_m={self.eta_m} outside [0, 1]")
        if not 0.0 < self.beta_sq < 1.0:
            raise InvalidParameterError(f"beta_sq={self.beta_sq} outside (0, 1)")
        if self.L_att <= 0 or self.c <= 0:
            raise InvalidParameterError("L_att and c must be positive")
        if not 0.0 <= self.swap_p_dark < 1.0:
            raise InvalidParameterError(f"swap_p_dark={self.swap_p_dark} outside [0, 1)")
        if self.eta_t_override is not None and not 0.0 < self.eta_t_override <= 1.0:
            raise InvalidParameterError(f"eta_t_override={self.eta_t_override} outside (0, 1]")

    @property
    def L0(self) -> float:
        return self.L / 2**self.n

    @property
    def eta_t(self) -> float:
        """Fibre transmission from an end node to the central station."""
        if self.eta_t_override is not None:
            return self.eta_t_override
        return exp(-self.L0 / (2.0 * self.L_att))

    @property
    def eta_d(self) -> float:
        return self.detector.eta_d

    @property
    def eta(self) -> float:
        return self.eta_m * self.detector.eta_d

    @property
    def p1(self) -> float:
        return self.source.p1

    @property
    def slot(self) -> float:
        """Elementary-link communication time ``L0 / c`` in seconds."""
        return self.L0 * 1e3 / self.c

    def with_(self, **changes) -> "RepeaterParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class LinkOutcome:
    p_success: float
    state: MixedState
    weights: tuple[float, float, float]
    f_single: float

    @classmethod
    def from_state(cls, p_success: float, state: MixedState) -> "LinkOutcome":
        state = state.normalized()
        pops = state.populations()
        totals = np.add.outer(np.arange(pops.shape[0]), np.arange(pops.shape[1]))
        w_vac = float(pops[0, 0])
        w_single = float(pops[totals == 1].sum())
        w_double = float(max(0.0, 1.0 - w_vac - w_single))
        overlap = fock.fidelity(state, entangled_target(state.register))
        f_single = overlap / w_single if w_single > 0 else 0.0
        return cls(p_success, state, (w_vac, w_single, w_double), f_single)

    @property
    def w_vac(self) -> float:
        return self.weights[0]

    @property
    def w_single(self) -> float:
        return self.weights[1]

    @property
    def w_double(self) -> float:
        return self.weights[2]


@dataclass(frozen=True)
class ChainReport:
    P: tuple[float, ...]
    P_pr: float
    F: float
    T_tot: float
    links: tuple[LinkOutcome, ...] = field(default=(), repr=False)

    @property
    def P0(self) -> float:
        return self.P[0]


def entangled_target(register: ModeRegister = MEMORY_REGISTER) -> PureState:
    """``(|0,1> + |1,0>)/sqrt(2)`` on a two-mode register."""
    amps = (
        fock.prepare(register, (1, 0)).amplitudes + fock.prepare(register, (0, 1)).amplitudes
    ) / sqrt(2)
    return PureState(register, amps)


def link_state(weights: tuple[float, float, float] = (0.0, 1.0, 0.0)) -> MixedState:
    """Mixture ``w_vac |00><00| + w_single |psi><psi| + w_double |11><11|`` on the memories."""
    w_vac, w_single, w_double = weights
    psi = entangled_target().to_mixed().matrix
    vac = fock.prepare(MEMORY_REGISTER, (0, 0)).to_mixed().matrix
    dbl = fock.prepare(MEMORY_REGISTER, (1, 1)).to_mixed().matrix
    return MixedState(MEMORY_REGISTER, w_vac * vac + w_single * psi + w_double * dbl)


# --------------------------------------------------------------------------
# sources

def emit(source: SourceModel, register: ModeRegister, local_mode: str, fiber_mode: str) -> MixedState:
    """Source output on ``register``; all modes other than the two named stay empty.

    A pair source populates ``local_mode`` and ``fiber_mode`` jointly.  A
    single-photon source emits into ``local_mode`` only, ahead of the local
    beam splitter that routes it towards memory or fibre.
    """
    if register.truncation < 2:
        raise TruncationError("source emission needs truncation >= 2")
    if local_mode == fiber_mode:
        raise InvalidParameterError("local and fibre modes must differ")
    i, j = register.index(local_mode), register.index(fiber_mode)

    def occ(n_local: int, n_fiber: int) -> tuple[int, ...]:
        o = [0] * register.num_modes
        o[i], o[j] = n_local, n_fiber
        return tuple(o)

    if source.kind == PAIR:
        amps = fock.prepare(register, occ(0, 0)).amplitudes.copy()
        amps += sqrt(source.p / 2) * fock.prepare(register, occ(1, 1)).amplitudes
        if source.two_pairs:
            amps += (source.p / 2) * fock.prepare(register, occ(2, 2)).amplitudes
        return PureState(register, amps).normalized().to_mixed()

    out = fock.prepare(register, occ(0, 0)).to_mixed().scaled(source.p0)
    if source.p1 > 0:
        out = out + fock.prepare(register, occ(1, 0)).to_mixed().scaled(source.p1)
    if source.p2 > 0:
        out = out + fock.prepare(register, occ(2, 0)).to_mixed().scaled(source.p2)
    return out


# --------------------------------------------------------------------------
# shared detection step

def _herald_by_total(
    state: MixedState, mode_1: str, mode_2: str, detector: DetectorModel, compensate: str
) -> dict[int, MixedState]:
    """Unnormalized states of the undetected modes, grouped by total count.

    The single-count branch triggered by ``mode_2`` carries a relative sign
    which is undone by a pi phase on ``compensate``.
    """
    totals: dict[int, MixedState] = {}
    for c1, branch_1 in fock.pnr_branches(state, mode_1, detector).items():
        for c2, branch in fock.pnr_branches(branch_1, mode_2, detector).items():
            if c1 == 0 and c2 == 1:
                branch = fock.apply_phase(branch, compensate, pi)
            total = c1 + c2
            totals[total] = totals[total] + branch if total in totals else branch
    return totals


def _link_register_truncation(state: MixedState, modes: tuple[str, ...]) -> int:
    """Cutoff large enough for a balanced splitter acting on ``modes``."""
    pops = state.populations()
    reg = state.register
    need = 0
    for m in modes:
        marginal = pops.sum(axis=tuple(a for a in range(reg.num_modes) if a != reg.index(m)))
        occupied = np.nonzero(marginal > _OCCUPIED * marginal.sum())[0]
        need += int(occupied.max()) if occupied.size else 0
    return max(reg.truncation, need)


def _memory_truncation(state: MixedState) -> int:
    pops = state.populations()
    occupied = np.argwhere(pops > _OCCUPIED * pops.sum())
    top = int(occupied.max()) if occupied.size else 0
    return max(2, top)


# --------------------------------------------------------------------------
# protocol steps

def _elementary_branches(params: RepeaterParams) -> dict[int, MixedState]:
    source = params.source
    trunc = max(2, 2 * source.max_photons)
    side = {}
    for mem, fib in (("a", "a'"), ("b", "b'")):
        reg = ModeRegister((mem, fib), trunc)
        rho = emit(source, reg, mem, fib)
        if source.kind == SINGLE_PHOTON:
            rho = fock.apply_beamsplitter(rho, mem, fib, BeamSplitterSpec.from_transmission(params.beta_sq))
        side[mem] = fock.apply_loss(rho, fib, params.eta_t)
    rho = fock.tensor_product(side["a"], side["b"])
    rho = fock.apply_beamsplitter(rho, "a'", "b'", BALANCED)
    totals = _herald_by_total(rho, "a'", "b'", params.detector, compensate="a")
    return {k: fock.relabel(v, {"a": "L", "b": "R"}) for k, v in totals.items()}


def heralding_distribution(params: RepeaterParams) -> dict[int, float]:
    """Probability of each total central-station count for one link attempt."""
    return {k: v.trace() for k, v in sorted(_elementary_branches(params).items())}


def elementary_link(params: RepeaterParams) -> LinkOutcome:
    """Herald one elementary link and return its memory state.

    For single-photon sources each photon first meets a local splitter that
    sends a fraction ``beta_sq`` to the fibre; pair sources send one photon of
    the pair directly.  Memory efficiency is not applied here.
    """
    heralded = _elementary_branches(params).get(1)
    if heralded is None or heralded.trace() <= 0.0:
        raise InvalidParameterError("link can never be heralded with these parameters")
    p = heralded.trace()
    state = fock.change_truncation(heralded, _memory_truncation(heralded))
    return LinkOutcome.from_state(p, state)


def swap(
    left: LinkOutcome, right: LinkOutcome, eta_m: float, detector: DetectorModel
) -> tuple[float, LinkOutcome]:
    """Entanglement swapping between two links sharing a middle node.

    Both middle memories are read out with efficiency ``eta_m``, combined on a
    balanced splitter and detected; exactly one count heralds success.
    """
    trunc = max(left.state.register.truncation, right.state.register.truncation)
    lhs = fock.relabel(fock.change_truncation(left.state, trunc), {"R": "m1"})
    rhs = fock.relabel(fock.change_truncation(right.state, trunc), {"L": "m2"})
    rho = fock.tensor_product(lhs, rhs)
    rho = fock.change_truncation(rho, _link_register_truncation(rho, ("m1", "m2")))
    rho = fock.apply_loss(rho, "m1", eta_m)
    rho = fock.apply_loss(rho, "m2", eta_m)
    rho = fock.apply_beamsplitter(rho, "m1", "m2", BALANCED)
    heralded = _herald_by_total(rho, "m1", "m2", detector, compensate="L").get(1)
    p = heralded.trace() if heralded is not None else 0.0
    if p <= 0.0:
        raise InvalidParameterError("swap can never succeed for these inputs")
    out = LinkOutcome.from_state(p, fock.change_truncation(heralded, _memory_truncation(heralded)))
    return p, out


def postselection_target(truncation: int = 2) -> PureState:
    """``(|1_A1 1_Z2> + |1_A2 1_Z1>)/sqrt(2)`` on modes (A1, Z1, A2, Z2)."""
    reg = ModeRegister(("A1", "Z1", "A2", "Z2"), truncation)
    amps = fock.prepare(reg, (1, 0, 0, 1)).amplitudes + fock.prepare(reg, (0, 1, 1, 0)).amplitudes
    return PureState(reg, amps / sqrt(2))


def postselect(link1: LinkOutcome, link2: LinkOutcome, eta: float) -> tuple[float, float]:
    """Read out two parallel end-to-end links, keeping one excitation per end.

    Each of the four memories is read with overall efficiency ``eta``.  Returns
    the success probability and the fidelity of the kept state with the
    two-excitation target.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta={eta} outside [0, 1]")
    s1 = link1.state if isinstance(link1, LinkOutcome) else link1
    s2 = link2.state if isinstance(link2, LinkOutcome) else link2
    trunc = max(s1.register.truncation, s2.register.truncation)
    s1 = fock.relabel(fock.change_truncation(s1.normalized(), trunc), {"L": "A1", "R": "Z1"})
    s2 = fock.relabel(fock.change_truncation(s2.normalized(), trunc), {"L": "A2", "R": "Z2"})
    rho = fock.tensor_product(s1, s2)
    for mode in rho.register.mode_names:
        rho = fock.apply_loss(rho, mode, eta)
    occ = np.indices(rho.register.shape)
    keep = ((occ[0] + occ[2]) == 1) & ((occ[1] + occ[3]) == 1)
    proj = keep.reshape(-1).astype(float)
    kept = rho.matrix * np.outer(proj, proj)
    p_pr = float(np.trace(kept).real)
    if p_pr <= 0.0:
        return 0.0, 0.0
    target = postselection_target(trunc).amplitudes
    f = float(np.vdot(target, kept @ target).real) / p_pr
    return p_pr, f


def chain_analysis(params: RepeaterParams) -> ChainReport:
    """Per-level success probabilities, final fidelity and total time.

    All ``2**n`` links are identical, so one representative state is carried
    through each nesting level.
    """
    from .rates import t_tot_generic

    if params.n > 5:
        raise InvalidParameterError("chain_analysis supports nesting levels up to 5")
    link = elementary_link(params)
    probs = [link.p_success]
    links = [link]
    swap_detector = DetectorModel(params.eta_d, params.swap_p_dark, params.detector.number_resolving)
    for _ in range(params.n):
        p, link = swap(link, link, params.eta_m, swap_detector)
        probs.append(p)
        links.append(link)
    p_pr, f = postselect(link, link, params.eta)
    t = t_tot_generic(probs[0], probs[1:], p_pr, params.L0, params.n, c=params.c)
    return ChainReport(tuple(probs), p_pr, f, t, tuple(links))
