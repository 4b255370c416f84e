"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even when output capture is on.
"""
import numpy as np
import pytest

from conftest import random_mixed
from sprepeater import fock, link, rates, waiting
from sprepeater.fock import BALANCED, BeamSplitterSpec, DetectorModel, MixedState, ModeRegister
from sprepeater.link import LinkOutcome, RepeaterParams, SourceModel

BASE = RepeaterParams(1000, 3)


@pytest.fixture
def verdict(capsys):
    def report(number, name, checks, note=""):
        failed = [label for label, ok in checks if not ok]
        line = f"CRITERION {number:>2} {name}: {'PASS' if not failed else 'FAIL'}"
        if failed:
            line += " (" + "; ".join(failed) + ")"
        with capsys.disabled():
            print("\n" + line + (f"\n    {note}" if note else ""))
        assert not failed, line

    return report


def test_c01_closed_form_times(verdict):
    cases = [(1000, 3, 0.11, 250), (1500, 3, 0.11, 1560), (2000, 4, 0.08, 6000), (2500, 4, 0.08, 15300)]
    checks = []
    for L, n, b2, expected in cases:
        t = rates.t_tot_sps(RepeaterParams(L, n, beta_sq=b2))
        checks.append((f"{L} km: {t:.1f} s vs {expected} s", abs(t / expected - 1) <= 0.03))
    verdict(1, "closed-form SPS times", checks)


def test_c02_optimizer(verdict):
    expected = {1000: (3, 0.11), 1500: (3, 0.11), 2000: (4, 0.08), 2500: (4, 0.08)}
    checks = []
    for L, (n, b2) in expected.items():
        rep = rates.optimize_sps(L)
        ok = rep.n_opt == n and abs(rep.beta_sq_opt - b2) <= 0.01
        checks.append((f"{L} km: n={rep.n_opt}, beta^2={rep.beta_sq_opt:.4f}", ok))
    verdict(2, "optimal nesting level and beam splitter", checks)


def test_c03_two_photon_threshold(verdict):
    p2 = rates.two_photon_threshold(BASE, 0.9)
    verdict(3, "two-photon threshold", [(f"p2 = {p2:.4g} vs 3.7e-4", abs(p2 / 3.7e-4 - 1) <= 0.03)])


def test_c04_dark_count_behaviour(verdict):
    xs = np.linspace(0.0, 2e-6, 9)
    fs = np.array([rates.fidelity_dark(BASE, x) for x in xs])
    computed = rates.dark_count_threshold(BASE, 0.9)
    oracle = rates.dark_count_threshold_oracle(BASE, 0.9)
    with_threshold = rates.fidelity_dark(BASE, computed)
    checks = [
        ("F(0) == 1", rates.fidelity_dark(BASE, 0.0) == 1.0),
        ("strictly decreasing", bool(np.all(np.diff(fs) < 0))),
        ("affine", bool(np.allclose(np.diff(fs, 2), 0.0, atol=1e-13))),
        ("threshold solves F = 0.9", abs(with_threshold - 0.9) <= 1e-9),
    ]
    note = (
        f"dark-count threshold: closed form {computed:.3g}, state-level chain {oracle:.3g}, "
        f"quoted {rates.QUOTED_DARK_THRESHOLD:.2g}"
    )
    verdict(4, "dark-count fidelity behaviour", checks, note)


def test_c05_ideal_link_state(verdict):
    p = RepeaterParams(1000, 3, source=SourceModel.single_photon(1.0), detector=DetectorModel(1.0),
                       eta_t_override=1e-15)
    out = link.elementary_link(p)
    b2 = p.beta_sq
    checks = [
        (f"w_vac = {out.w_vac:.15f}", abs(out.w_vac - b2) <= 1e-12),
        (f"w_single = {out.w_single:.15f}", abs(out.w_single - (1 - b2)) <= 1e-12),
        (f"w_double = {out.w_double:.2e}", out.w_double <= 1e-12),
        (f"fidelity = {out.f_single:.15f}", abs(out.f_single - 1.0) <= 1e-12),
    ]
    # at realistic transmission the double component stays absent
    real = link.elementary_link(p.with_(eta_t_override=None))
    checks.append((f"w_double at finite loss = {real.w_double:.2e}", real.w_double <= 1e-12))
    checks.append((f"fidelity at finite loss = {real.f_single:.15f}", abs(real.f_single - 1.0) <= 1e-12))
    verdict(5, "ideal SPS link state", checks)


def test_c06_first_link_probabilities(verdict):
    sps = link.elementary_link(BASE).p_success
    dlcz = link.elementary_link(BASE.with_(source=SourceModel.pair(0.003))).p_success
    checks = [
        (f"SPS P0 = {sps:.4g} vs 0.01", abs(sps / 0.01 - 1) <= 0.15),
        (f"DLCZ P0 = {dlcz:.4g} vs 1e-4", abs(dlcz / 1e-4 - 1) <= 0.15),
    ]
    verdict(6, "elementary-link success probabilities", checks)


def test_c07_dlcz_baseline(verdict):
    rows = rates.gain_table()
    first = rows[0]
    gains = [r.gain for r in rows]
    checks = [
        (f"p(1000 km) = {first.dlcz.p:.4g}", 0.002 <= first.dlcz.p <= 0.004),
        (f"T(1000 km) = {first.dlcz.T_tot:.4g} s vs 4600 s", 4600 / 2 <= first.dlcz.T_tot <= 4600 * 2),
        (f"gains {['%.1f' % g for g in gains]} increasing", all(b > a for a, b in zip(gains, gains[1:]))),
        (f"gain(1000 km) = {gains[0]:.2f}", 12 <= gains[0] <= 25),
        (f"gain(2500 km) = {gains[-1]:.2f}", gains[-1] >= 30),
    ]
    verdict(7, "pair-source baseline and gains", checks)


def test_c08_crossover(verdict):
    p1 = rates.crossover_p1(1000)
    verdict(8, "source-efficiency crossover", [(f"p1* = {p1:.4f}", 0.60 <= p1 <= 0.75)])


def _fock_case(rng) -> list[str]:
    """Random invariants for one case; returns the names of violated ones."""
    bad = []
    reg = ModeRegister(("a", "b", "c"), 2)
    rho = random_mixed(reg, rng, max_total=2, rank=int(rng.integers(1, 4)))
    spec = BeamSplitterSpec.from_transmission(float(rng.uniform(0, 1)))
    u = fock.beamsplitter_matrix(spec, 4).reshape(81, 25)
    # exact output space, so the columns are orthonormal
    if not np.allclose(u.conj().T @ u, np.eye(25), atol=1e-12):
        bad.append("unitarity")
    out = fock.apply_beamsplitter(rho, "a", "b", spec)
    out = fock.apply_loss(out, "c", float(rng.uniform(0, 1)))
    out = fock.apply_loss(out, "b", float(rng.uniform(0, 1)))
    if abs(out.trace() - 1) > 1e-12:
        bad.append("trace")
    if not fock.is_physical(out):
        bad.append("positivity")
    det = DetectorModel(float(rng.uniform(0, 1)), float(rng.uniform(0, 0.1)), bool(rng.integers(2)))
    if abs(sum(o.probability for o in fock.measure_pnr(out, "a", det)) - 1) > 1e-12:
        bad.append("measurement completeness")
    # Hong-Ou-Mandel with random local phases on the inputs
    pair = ModeRegister(("a", "b"), 2)
    ket = fock.prepare(pair, (1, 1)).to_mixed()
    ket = fock.apply_phase(fock.apply_phase(ket, "a", float(rng.uniform(0, 6.3))), "b", float(rng.uniform(0, 6.3)))
    hom = fock.apply_beamsplitter(ket, "a", "b", BALANCED)
    if hom.population((1, 1)) > 1e-12:
        bad.append("HOM")
    return bad


def test_c09_property_suites(verdict):
    rng = np.random.default_rng(2007)
    failures = {}
    for _ in range(1000):
        for name in _fock_case(rng):
            failures[name] = failures.get(name, 0) + 1
    checks = [(f"fock invariants, 1000 cases, failures {failures}", not failures)]

    geo = waiting.simulate(waiting.SimConfig((0.1,), 1.0, 100_000, 1))
    checks.append((f"geometric mean {geo.mean_T:.4f} vs 10 (se {geo.stderr:.3f})", abs(geo.mean_T - 10) <= 3 * geo.stderr))

    ratios = []
    for n in (1, 2, 3):
        for p0 in (0.05, 0.5):
            for p_pr in (None, 0.5):
                cfg = waiting.SimConfig((p0,) + (0.5,) * n, 1.0, 100_000, 3, p_pr)
                ratios.append(waiting.simulate(cfg).mean_T / waiting.predicted_mean(cfg))
    for n in (1, 2):
        cfg = waiting.SimConfig((0.05,) + (0.2,) * n, 1.0, 20_000, 3, 0.2)
        ratios.append(waiting.simulate(cfg).mean_T / waiting.predicted_mean(cfg))
    checks.append(
        (f"simulated/heuristic in [{min(ratios):.3f}, {max(ratios):.3f}]", all(0.6 <= r <= 1.5 for r in ratios))
    )
    verdict(9, "property suites", checks)


def test_c10_vacuum_blindness(verdict):
    rng = np.random.default_rng(10)
    reg = link.MEMORY_REGISTER
    vac = fock.prepare(reg, (0, 0)).to_mixed().matrix
    worst = 0.0
    for _ in range(200):
        states = [random_mixed(reg, rng, max_total=1) for _ in range(2)]
        eta = float(rng.uniform(0.05, 1))
        _, f = link.postselect(*(LinkOutcome.from_state(1.0, s) for s in states), eta)
        eps = float(rng.uniform(0, 0.999))
        diluted = MixedState(reg, (1 - eps) * states[0].matrix + eps * vac)
        _, f_mixed = link.postselect(LinkOutcome.from_state(1.0, diluted), LinkOutcome.from_state(1.0, states[1]), eta)
        worst = max(worst, abs(f - f_mixed))
    verdict(10, "post-selection ignores vacuum", [(f"max |dF| = {worst:.2e}", worst <= 1e-12)])
