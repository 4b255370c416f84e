"""Closed-form rates, fidelity thresholds and protocol optimisation.

Times are in seconds, lengths in km and the fibre light speed in m/s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DivergenceError, InfeasibleError, InvalidParameterError
from .fock import DetectorModel
from .link import RepeaterParams, SourceModel, chain_analysis

QUOTED_DARK_THRESHOLD = 4.6e-6
QUOTED_TWO_PHOTON_THRESHOLD = 3.7e-4
TABLE1_DISTANCES = (1000.0, 1500.0, 2000.0, 2500.0)


@dataclass(frozen=True)
class Efficiencies:
    eta_m: float = 0.9
    eta_d: float = 0.9
    L_att: float = 22.0
    c: float = 2e8

    def __post_init__(self):
        for name in ("eta_m", "eta_d"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidParameterError(f"{name}={v} outside (0, 1]")
        if self.L_att <= 0 or self.c <= 0:
            raise InvalidParameterError("L_att and c must be positive")


@dataclass(frozen=True)
class PerformanceReport:
    T_tot: float
    n_opt: int
    beta_sq_opt: float | None
    F: float
    gain: float | None = None
    p: float | None = None


@dataclass(frozen=True)
class GainRow:
    distance_km: float
    sps: PerformanceReport
    dlcz: PerformanceReport

    @property
    def gain(self) -> float:
        return self.dlcz.T_tot / self.sps.T_tot


# --------------------------------------------------------------------------
# total time

def t_tot_generic(
    P0: float, P_list: Sequence[float], P_pr: float, L0_km: float, n: int, c: float = 2e8
) -> float:
    """Average distribution time ``(3/2)^(n+1) (L0/c) / (P0 P1 ... Pn P_pr)``."""
    P_list = list(P_list)
    if len(P_list) != n:
        raise InvalidParameterError(f"expected {n} swap probabilities, got {len(P_list)}")
    probs = [P0, *P_list, P_pr]
    if any(p < 0 or p > 1 for p in probs):
        raise InvalidParameterError(f"probabilities must lie in (0, 1], got {probs}")
    denom = math.prod(probs)
    if denom == 0.0:
        raise DivergenceError("a zero success probability makes the waiting time infinite")
    return 1.5 ** (n + 1) * (L0_km * 1e3 / c) / denom


def _sps_time(L, n, beta_sq, p1, eta_m, eta_d, L_att, c):
    """Single-photon-source total time; ``beta_sq`` may be an array."""
    beta_sq = np.asarray(beta_sq, dtype=float)
    L0 = L / 2**n
    eta_t = np.exp(-L0 / (2.0 * L_att))
    eta = eta_m * eta_d
    alpha_sq = 1.0 - beta_sq
    num = np.ones_like(beta_sq)
    for k in range(1, n + 1):
        num = num * (2**k - (2**k - 1) * p1 * alpha_sq * eta)
    den = eta_d * eta_t * p1 ** (n + 3) * beta_sq * alpha_sq ** (n + 2) * eta ** (n + 2)
    with np.errstate(divide="ignore"):
        return 3 ** (n + 1) / 2 * (L0 * 1e3 / c) * num / den


def t_tot_sps(params: RepeaterParams) -> float:
    """Closed-form total time of the single-photon-source protocol."""
    if params.source.kind != "single_photon":
        raise InvalidParameterError("t_tot_sps needs a single-photon source")
    if params.beta_sq <= 0.0 or params.beta_sq >= 1.0:
        raise DivergenceError("beta_sq must be strictly between 0 and 1")
    if params.p1 <= 0.0:
        raise DivergenceError("p1 = 0 never produces a photon")
    return float(
        _sps_time(params.L, params.n, params.beta_sq, params.p1, params.eta_m, params.eta_d, params.L_att, params.c)
    )


def sps_chain_probabilities(params: RepeaterParams) -> tuple[float, list[float], float]:
    """Leading-order ``P0``, swap probabilities and ``P_pr`` for ideal single-photon sources.

    Each link carries a one-excitation fraction ``s`` (``p1 alpha^2`` after
    heralding); a swap succeeds with ``eta s (1 - eta s / 2)`` and leaves
    ``s / (2 - eta s)``; the final read-out succeeds with ``(eta s)^2 / 2``.
    Feeding these into :func:`t_tot_generic` reproduces :func:`t_tot_sps`.
    """
    eta = params.eta
    s = params.p1 * (1.0 - params.beta_sq)
    p0 = 2 * params.p1 * params.beta_sq * params.eta_t * params.eta_d
    swaps = []
    for _ in range(params.n):
        swaps.append(eta * s * (1 - eta * s / 2))
        s = s / (2 - eta * s)
    return p0, swaps, (eta * s) ** 2 / 2


# --------------------------------------------------------------------------
# fidelity under imperfections (8-link repeater)

def _require_eight_links(params: RepeaterParams):
    if params.source.kind != "single_photon":
        raise InvalidParameterError("fidelity formulas apply to single-photon sources")


def fidelity_dark(params: RepeaterParams, p_dark: float) -> float:
    """Final fidelity with detector dark counts, first order in ``p_dark / (eta_t eta_d)``.

    The closed form holds for ``n = 3``; other nesting levels are evaluated on
    the state-level chain instead.
    """
    _require_eight_links(params)
    if not 0.0 <= p_dark < 1.0:
        raise InvalidParameterError(f"p_dark={p_dark} outside [0, 1)")
    if params.n != 3:
        det = DetectorModel(params.eta_d, p_dark, params.detector.number_resolving)
        return chain_analysis(params.with_(detector=det)).F
    return 1.0 - _dark_slope(params) * p_dark


def _dark_slope(params: RepeaterParams) -> float:
    b2, p1, eta = params.beta_sq, params.p1, params.eta
    bracket = 25.0 / (b2 * p1) - (25.0 * eta - 1.0) * (1.0 / p1 - 1.0)
    return 16.0 * bracket / (params.eta_t * params.eta_d)


def fidelity_twophoton(params: RepeaterParams, p2: float) -> float:
    """Final fidelity with two-photon emission probability ``p2``, first order in ``p2``."""
    _require_eight_links(params)
    if not 0.0 <= p2 <= 1.0:
        raise InvalidParameterError(f"p2={p2} outside [0, 1]")
    if params.n != 3:
        src = SourceModel.single_photon(params.p1, p2)
        return chain_analysis(params.with_(source=src)).F
    return 1.0 - _twophoton_slope(params) * p2


def _twophoton_slope(params: RepeaterParams) -> float:
    b2, p1, eta = params.beta_sq, params.p1, params.eta
    return 2.0 * (376.0 / p1 - (1.0 - b2) * (395.0 * eta - 19.0)) / p1


def _affine_threshold(slope: float, target_F: float, what: str) -> float:
    if not 0.0 < target_F < 1.0:
        raise InfeasibleError(f"target fidelity {target_F} needs {what} = 0 in the first-order model")
    if slope <= 0.0:
        raise InfeasibleError(f"fidelity does not decrease with {what}; no threshold")
    return (1.0 - target_F) / slope


def dark_count_threshold(params: RepeaterParams, target_F: float = 0.9) -> float:
    """Largest ``p_dark`` keeping the 8-link fidelity at ``target_F``."""
    _require_eight_links(params)
    if params.n != 3:
        raise InvalidParameterError("the dark-count threshold is defined for n = 3")
    return _affine_threshold(_dark_slope(params), target_F, "p_dark")


def dark_count_threshold_oracle(params: RepeaterParams, target_F: float = 0.9) -> float:
    """Dark-count probability at which the state-level chain reaches ``target_F``.

    Independent of the first-order closed form; dark counts act at the
    central stations only.
    """
    if not 0.0 < target_F < 1.0:
        raise InfeasibleError(f"target fidelity {target_F} needs p_dark = 0")

    def gap(p_dark: float) -> float:
        det = DetectorModel(params.eta_d, p_dark, params.detector.number_resolving)
        return chain_analysis(params.with_(detector=det)).F - target_F

    lo, hi = 0.0, 1e-6
    if gap(lo) < 0:
        raise InfeasibleError(f"fidelity {target_F} unreachable even without dark counts")
    while gap(hi) > 0:
        if hi >= 0.5:
            raise InfeasibleError(f"fidelity stays above {target_F} for all p_dark")
        hi = min(4 * hi, 0.5)
    return float(brentq(gap, lo, hi, xtol=1e-12, rtol=1e-6))


def two_photon_threshold(params: RepeaterParams, target_F: float = 0.9) -> float:
    """Largest ``p2`` keeping the 8-link fidelity at ``target_F``."""
    _require_eight_links(params)
    if params.n != 3:
        raise InvalidParameterError("the two-photon threshold is defined for n = 3")
    return _affine_threshold(_twophoton_slope(params), target_F, "p2")


# --------------------------------------------------------------------------
# optimisation

def optimize_sps(
    L_km: float,
    eff: Efficiencies = Efficiencies(),
    p1: float = 0.95,
    n_range: Iterable[int] = range(1, 6),
    resolution: float = 0.001,
) -> PerformanceReport:
    """Minimise the closed-form time over nesting level and ``beta_sq``.

    An exhaustive grid is refined locally around each level's best point.
    Ties go to the smaller ``n``, then the smaller ``beta_sq``.
    """
    if L_km <= 0:
        raise InvalidParameterError("distance must be positive")
    if not 0.0 < p1 <= 1.0:
        raise InvalidParameterError(f"p1={p1} outside (0, 1]")
    grid = np.arange(resolution, 1.0, resolution)
    best = None
    for n in sorted(n_range):
        times = _sps_time(L_km, n, grid, p1, eff.eta_m, eff.eta_d, eff.L_att, eff.c)
        i = int(np.argmin(times))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(
            lambda b: float(_sps_time(L_km, n, b, p1, eff.eta_m, eff.eta_d, eff.L_att, eff.c)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-7},
        )
        b_opt, t_opt = (float(res.x), float(res.fun)) if res.fun < times[i] else (float(grid[i]), float(times[i]))
        if best is None or t_opt < best[0]:
            best = (t_opt, n, b_opt)
    t, n, b = best
    return PerformanceReport(T_tot=t, n_opt=n, beta_sq_opt=b, F=1.0)


@lru_cache(maxsize=4096)
def _dlcz_chain(L_km: float, n: int, p: float, eff: Efficiencies):
    params = RepeaterParams(
        L_km,
        n,
        source=SourceModel.pair(p),
        eta_m=eff.eta_m,
        detector=DetectorModel(eff.eta_d),
        L_att=eff.L_att,
        c=eff.c,
    )
    return chain_analysis(params)


def dlcz_at_level(L_km: float, n: int, target_F: float = 0.9, eff: Efficiencies = Efficiencies()) -> PerformanceReport:
    """Pair-source chain at a fixed nesting level, with ``p`` tuned to reach ``target_F``."""
    if not 0.5 < target_F < 1.0:
        raise InfeasibleError(f"target fidelity {target_F} outside (0.5, 1)")

    def gap(p: float) -> float:
        return _dlcz_chain(float(L_km), n, float(p), eff).F - target_F

    lo, hi = 1e-7, 1e-2
    if gap(lo) < 0:
        raise InfeasibleError(f"fidelity {target_F} unreachable at n={n} even for p={lo}")
    while gap(hi) > 0:
        if hi >= 0.5:
            raise InfeasibleError(f"fidelity stays above {target_F} for all p at n={n}")
        hi = min(2 * hi, 0.5)
    p = brentq(gap, lo, hi, xtol=1e-12, rtol=1e-8)
    report = _dlcz_chain(float(L_km), n, float(p), eff)
    return PerformanceReport(T_tot=report.T_tot, n_opt=n, beta_sq_opt=None, F=report.F, p=p)


def dlcz_baseline(
    L_km: float,
    target_F: float = 0.9,
    eff: Efficiencies = Efficiencies(),
    n_range: Iterable[int] = range(1, 6),
) -> PerformanceReport:
    """Fastest pair-source repeater reaching ``target_F``, using the state-level chain."""
    best = None
    for n in sorted(n_range):
        try:
            rep = dlcz_at_level(L_km, n, target_F, eff)
        except InfeasibleError:
            continue
        if best is None or rep.T_tot < best.T_tot:
            best = rep
    if best is None:
        raise InfeasibleError(f"no nesting level reaches fidelity {target_F} at {L_km} km")
    return best


def gain_table(
    distances: Sequence[float] = TABLE1_DISTANCES,
    eff: Efficiencies = Efficiencies(),
    p1: float = 0.95,
    target_F: float = 0.9,
) -> list[GainRow]:
    if not distances:
        raise InvalidParameterError("need at least one distance")
    rows = []
    for L in distances:
        sps = optimize_sps(L, eff, p1)
        dlcz = dlcz_baseline(L, target_F, eff)
        gain = dlcz.T_tot / sps.T_tot
        rows.append(
            GainRow(
                L,
                PerformanceReport(sps.T_tot, sps.n_opt, sps.beta_sq_opt, sps.F, gain),
                dlcz,
            )
        )
    return rows


def crossover_p1(
    L_km: float,
    eff: Efficiencies = Efficiencies(),
    target_F: float = 0.9,
    t_dlcz: float | None = None,
) -> float:
    """Smallest single-photon probability for which the optimised SPS repeater beats DLCZ.

    Returns 1.0 when SPS never wins and the lower search bound when it always does.
    """
    if t_dlcz is None:
        t_dlcz = dlcz_baseline(L_km, target_F, eff).T_tot

    def gap(p1: float) -> float:
        return math.log(optimize_sps(L_km, eff, p1).T_tot / t_dlcz)

    lo, hi = 0.01, 1.0
    if gap(hi) >= 0:
        return hi
    if gap(lo) <= 0:
        return lo
    return float(brentq(gap, lo, hi, xtol=1e-6))
