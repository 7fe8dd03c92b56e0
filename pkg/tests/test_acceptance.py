"""Acceptance criteria, each checked at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line (shown in the terminal
summary) before asserting.
"""

import numpy as np
import pytest

from blockjacobi import (
    PeriodicScalarModel,
    analytic_extension,
    build_periodic_scalar,
    count_eigenvalues,
    dense_spectrum,
    interior_transfer,
    iunitarity_defect,
    krein_form,
    monotonicity_certificate,
    multiplicity_at,
    random_admissible,
    reconstruct_solution,
    regauge,
    require_admissible,
    solutions_at,
    spectral_flow,
)
from blockjacobi.oracle import probe_energies
from blockjacobi.periodic import default_grid, monodromy_deviation_grid
from blockjacobi.transfer import TransferChain

from conftest import ACCEPTANCE_LINES, corpus, periodic_corpus


def record(k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def instances():
    ops = corpus(15)
    return [(op, require_admissible(op), dense_spectrum(op)) for op in ops]


def test_criterion_1_monodromy_equality():
    rng = np.random.default_rng(1)
    worst_off, worst_on, n_models = 0.0, 0.0, 0
    for L in (2, 3, 5):
        for _ in range(10):
            model = PeriodicScalarModel(tuple(1.5 * rng.standard_normal(L)), 3)
            grid = default_grid(model, 50)
            assert len(grid) == 50
            lam = np.linalg.eigvalsh(model.cell)
            on = np.array([np.min(np.abs(lam - e)) == 0 for e in grid])
            assert on.sum() == L
            dev = monodromy_deviation_grid(model, grid)
            worst_off = max(worst_off, dev[~on].max())
            worst_on = max(worst_on, dev[on].max())
            n_models += 1
    ok = worst_off <= 1e-8 and worst_on <= 1e-6
    record(1, ok, f"{n_models} models, max deviation {worst_off:.2e} (grid), "
                  f"{worst_on:.2e} (eigenvalues of V)")
    assert ok


def test_criterion_2_iunitarity():
    rng = np.random.default_rng(2)
    sites, worst = 0, 0.0
    while sites < 100:
        op = random_admissible(rng, N=int(rng.integers(3, 7)), rank=1 + sites % 2)
        chain = TransferChain(op, require_admissible(op))
        b = op.gershgorin_bound()
        for n in range(1, op.N + 1):
            if sites >= 100:
                break
            energies = list(rng.uniform(-b, b, 10))
            for z in rng.uniform(-b, b, 5) + 1j * rng.uniform(0.05, 1.0, 5):
                energies += [z, np.conj(z)]
            for E in energies:
                T = chain.transfer(n, E)
                Tc = chain.transfer(n, np.conj(E))
                d = iunitarity_defect(T, Tc) / (1 + np.linalg.norm(T, 2) ** 2)
                worst = max(worst, d)
            sites += 1
    ok = worst <= 1e-10
    record(2, ok, f"{sites} sites x 20 energies, max defect/(1+|T|^2) {worst:.2e}")
    assert ok


def test_criterion_3_positivity_and_monotonicity(instances):
    rng = np.random.default_rng(3)
    worst_form, worst_cert, negative = np.inf, np.inf, 0
    for op, gradings, _ in instances:
        chain = TransferChain.of(op, gradings)
        lo, hi = -op.gershgorin_bound(), op.gershgorin_bound()
        for E in rng.uniform(lo, hi, 5):
            for n in range(1, op.N + 1):
                T, dT = chain.transfer(n, E, derivative=True)
                M = T.conj().T @ krein_form(chain.rank) @ dT
                scale = 1 + np.linalg.norm(T, 2) * np.linalg.norm(dT, 2)
                worst_form = min(worst_form, np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0] / scale)
        for E in rng.uniform(lo, hi, 20):
            worst_cert = min(worst_cert, monotonicity_certificate(op, gradings, E))
        res = spectral_flow(op, gradings)
        negative += sum(c.direction < 0 for c in res.crossings)
    ok = worst_form >= -1e-10 and worst_cert > 0 and negative == 0
    record(3, ok, f"{len(instances)} instances, min form eig/scale {worst_form:.2e}, "
                  f"min certificate {worst_cert:.2e}, negative crossings {negative}")
    assert ok


def test_criterion_4_counting(instances):
    wrong_counts, wrong_mult, probes, eigs = [], [], 0, 0
    for i, (op, gradings, spec) in enumerate(instances):
        energies = probe_energies(op, 10)
        for E, c in zip(energies, count_eigenvalues(op, gradings, energies)):
            probes += 1
            if c != spec.count_leq(E):
                wrong_counts.append((i, float(E), c, spec.count_leq(E)))
        for value, mult in spec.clusters:
            eigs += 1
            got = multiplicity_at(op, gradings, value)
            if got != mult:
                wrong_mult.append((i, value, got, mult))
    ok = len(instances) >= 30 and not wrong_counts and not wrong_mult
    record(4, ok, f"{len(instances)} instances, {probes} probes, {eigs} eigenvalues, "
                  f"{len(wrong_counts)} count and {len(wrong_mult)} multiplicity mismatches")
    assert ok, (wrong_counts[:5], wrong_mult[:5])


def test_criterion_5_reconstruction(instances):
    bad, worst_res, worst_def, n = [], 0.0, 0.0, 0
    for i, (op, gradings, spec) in enumerate(instances):
        for value, mult in spec.clusters:
            sols = solutions_at(op, gradings, value)
            if len(sols) != mult:
                bad.append((i, value, "solutions", len(sols), mult))
                continue
            for s in sols:
                n += 1
                r = reconstruct_solution(op, gradings, value, s.psi_plus[0])
                rel = r.residual / r.norm
                worst_res = max(worst_res, rel)
                worst_def = max(worst_def, r.eigencondition_defect)
                if rel > 1e-8 or r.eigencondition_defect > 1e-8:
                    bad.append((i, value, rel, r.eigencondition_defect))
    ok = not bad
    record(5, ok, f"{n} eigenvectors, max residual/|psi| {worst_res:.2e}, "
                  f"max defect {worst_def:.2e}, {len(bad)} failures")
    assert ok, bad[:5]


def test_criterion_6_analytic_extension():
    worst_ratio, worst_stab, points = 0.0, 0.0, 0
    for model in periodic_corpus(15):
        model = PeriodicScalarModel(model.potential, max(model.periods, 3))
        op = build_periodic_scalar(model)
        gradings = require_admissible(op)
        for n in range(2, op.N):
            for E0 in np.linalg.eigvalsh(op.block(n)):
                ext = analytic_extension(op, gradings, n, E0).matrix
                diffs = {d: np.linalg.norm(ext - interior_transfer(op, gradings, n, E0 + d).matrix, 2)
                         for d in (1e-3, 1e-4)}
                C = max(v / d for d, v in diffs.items())
                for d, v in diffs.items():
                    worst_ratio = max(worst_ratio, v / (10 * d * C))
                ext16 = analytic_extension(op, gradings, n, E0, m=16).matrix
                worst_stab = max(worst_stab, np.linalg.norm(ext - ext16, 2))
                points += 1
    ok = worst_ratio <= 1.0 and worst_stab <= 1e-8
    record(6, ok, f"{points} extension points, max |diff|/(10 delta C) {worst_ratio:.2e}, "
                  f"m=8 vs m=16 {worst_stab:.2e}")
    assert ok


def test_criterion_6_linear_convergence():
    # the per-instance constant C above is fitted from the same samples, so
    # check separately that the error actually shrinks with delta
    worst = 0.0
    for model in periodic_corpus(15):
        model = PeriodicScalarModel(model.potential, max(model.periods, 3))
        op = build_periodic_scalar(model)
        gradings = require_admissible(op)
        for E0 in np.linalg.eigvalsh(op.block(2)):
            ext = analytic_extension(op, gradings, 2, E0).matrix
            big = np.linalg.norm(ext - interior_transfer(op, gradings, 2, E0 + 1e-3).matrix, 2)
            small = np.linalg.norm(ext - interior_transfer(op, gradings, 2, E0 + 1e-4).matrix, 2)
            worst = max(worst, small / max(big, 1e-300))
    assert worst <= 0.2


def test_criterion_7_gauge_invariance(instances):
    rng = np.random.default_rng(7)
    mismatches, checks = [], 0
    for i, (op, gradings, spec) in enumerate(instances[::3]):
        energies = probe_energies(op, 10)
        base = count_eigenvalues(op, gradings, energies)
        base_mult = [multiplicity_at(op, gradings, v) for v, _ in spec.clusters]
        for _ in range(5):
            g2 = regauge(gradings, rng)
            counts = count_eigenvalues(op, g2, energies)
            mult = [multiplicity_at(op, g2, v) for v, _ in spec.clusters]
            checks += 1
            if counts != base or mult != base_mult:
                mismatches.append(i)
    ok = not mismatches
    record(7, ok, f"{checks} gaugings over {len(instances[::3])} instances, "
                  f"{len(mismatches)} changed counts or multiplicities")
    assert ok
