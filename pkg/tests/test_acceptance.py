"""Acceptance gate: every shipped criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible regardless of capture).  Two
checks are expected to fail and are left failing on purpose; see their
docstrings: the asserted reference numbers could not be reproduced from the
definitions, and independent high-accuracy integration confirms the values
computed here.
"""

import math
import time

import numpy as np
import pytest

from renosc import (
    builtin_catalog,
    compute_box,
    constants_report,
    classify_loss_point,
    derivative_identity_residual,
    load_problem,
    localize_eigenvalues_top,
    monotonicity_audit,
    renormalized_count,
    rho_grid_scan,
    shelf_path,
    winding_index,
)
from renosc.winding import PathSamples, detect_crossings

CATALOG_ALL = ("example1", "example2", "example3",
               "harmonic-dirichlet", "harmonic-neumann")


def fresh(name):
    return load_problem(builtin_catalog(name))


def report(capsys, label, checks):
    """checks: list of (ok, text).  Prints one line, then asserts all."""
    ok = all(c[0] for c in checks)
    failing = "; ".join(text for good, text in checks if not good)
    passing = "; ".join(text for good, text in checks if good)
    with capsys.disabled():
        line = f"[acceptance] {label}: {'PASS' if ok else 'FAIL'}"
        if not ok:
            line += f"  (failed: {failing})"
        print(line)
    assert ok, f"{label} failed: {failing} || passed: {passing}"


def test_criterion_1_example1_constants(capsys):
    problem = fresh("example1")
    t0 = time.perf_counter()
    rep = constants_report(problem)
    elapsed = time.perf_counter() - t0
    targets = {
        "C_A": 0.7481, "C_h": 0.2621, "c_h": 0.9975, "C": 4.0202,
        "delta": 0.2673, "rho0": 0.5000, "margin": 0.0136,
    }
    checks = [
        (abs(getattr(rep, k) - v) <= 2e-3, f"{k}={getattr(rep, k):.4f} vs {v}")
        for k, v in targets.items()
    ]
    checks.append((rep.certified, "certified"))
    checks.append((elapsed < 5.0, f"runtime {elapsed:.2f}s < 5s"))
    report(capsys, "criterion 1 (example1 certificate constants)", checks)


def test_criterion_2_example1_counting(capsys):
    problem = fresh("example1")
    rep = compute_box(problem)
    checks = [
        (len(rep.left_crossings) == 1, f"{len(rep.left_crossings)} crossings"),
        (abs(rep.left_crossings[0] - 0.535) <= 1e-2,
         f"crossing x={rep.left_crossings[0]:.4f} vs .535±.01"),
        (len(rep.eigenvalues) == 1, f"{len(rep.eigenvalues)} eigenvalues"),
        (abs(rep.eigenvalues[0] + 0.513) <= 5e-3,
         f"eigenvalue {rep.eigenvalues[0]:.4f} vs -.513±.005"),
        (rep.lower_bound == 1, f"lower_bound={rep.lower_bound}"),
        (rep.m_frak == 0, f"m_frak={rep.m_frak}"),
    ]
    report(capsys, "criterion 2 (example1 counting)", checks)


def test_criterion_3_example2_counting_and_runtime(capsys):
    problem = fresh("example2")
    t0 = time.perf_counter()
    rep = compute_box(problem)
    scan = rho_grid_scan(problem)
    elapsed = time.perf_counter() - t0
    xs = sorted(rep.left_crossings)
    eigs = sorted(rep.eigenvalues)
    checks = [
        (len(xs) == 2 and abs(xs[0] - 0.043) <= 1e-2 and abs(xs[1] - 0.455) <= 1e-2,
         f"crossings {[round(v, 4) for v in xs]} vs .043/.455±.01"),
        (len(eigs) == 2 and abs(eigs[0] + 1.385) <= 1e-2
         and abs(eigs[1] - 0.735) <= 1e-2,
         f"eigenvalues {[round(v, 4) for v in eigs]} vs -1.385/.735±.01"),
        (rep.lower_bound == 2, f"lower_bound={rep.lower_bound}"),
        (scan.loss_points == [], "no interior loss points"),
        (elapsed < 60.0, f"runtime {elapsed:.1f}s < 60s at 1000x600"),
    ]
    report(capsys, "criterion 3 (example2 counting, 1000x600 runtime)", checks)


def test_criterion_3_example2_grid_min_rho(capsys):
    """Expected to FAIL: the reference grid minimum .6279 is not attainable.

    The left shelf carries two crossings of the same rotation direction, so
    psi2 must change sign between them (the ratio psi1/psi2 leaves 0 upward
    and can only return rising through +-infinity).  At that interior sign
    change rho = psi1^2/2, and |psi1| stays below ~0.14 on that stretch for
    this system (psi1 is normalization-independent, verified against an
    independent adaptive integrator).  Hence min rho <= ~0.01 for every
    admissible second form, two orders of magnitude below the asserted
    value.  The computed minimum is reported in the failure line.
    """
    problem = fresh("example2")
    scan = rho_grid_scan(problem)
    checks = [
        (abs(scan.min_rho - 0.6279) <= 1e-2,
         f"min rho={scan.min_rho:.4f} vs .6279±.01 "
         f"(argmin x={scan.argmin_x:.3f}, lambda={scan.argmin_lambda:.3f})"),
    ]
    report(capsys, "criterion 3 (example2 full-box min rho)", checks)


def test_criterion_4_example3_loss_points_and_boxes(capsys):
    problem = fresh("example3")
    scan = rho_grid_scan(problem)
    pts = scan.loss_points
    classified = [classify_loss_point(problem, p, others=tuple(pts)) for p in pts]
    narrow_cfg = builtin_catalog("example3")
    narrow_cfg.lam = (-3.0, 1.0)
    narrow = compute_box(load_problem(narrow_cfg))
    wide = compute_box(problem)
    checks = [
        (len(pts) == 2, f"{len(pts)} loss points"),
        (abs(pts[0].x_star - 0.875) <= 2e-2 and abs(pts[1].x_star - 0.875) <= 2e-2,
         f"x* = {pts[0].x_star:.4f}, {pts[1].x_star:.4f} vs .875±.02"),
        (abs(pts[1].lambda_star + 0.130) <= 2e-2,
         f"lambda*2 = {pts[1].lambda_star:.4f} vs -.130±.02"),
        (classified[0].local_m == 2 and classified[1].local_m == -2,
         f"local_m = {classified[0].local_m}, {classified[1].local_m} vs +2/-2"),
        (wide.m_frak == 0 and wide.lower_bound == 0,
         f"[-5,1]: m_frak={wide.m_frak}, lower={wide.lower_bound}"),
        (narrow.m_frak == -2 and narrow.lower_bound == 0,
         f"[-3,1]: m_frak={narrow.m_frak}, lower={narrow.lower_bound}"),
    ]
    report(capsys, "criterion 4 (example3 loss points, classification, boxes)",
           checks)


def test_criterion_4_example3_first_loss_lambda(capsys):
    """Expected to FAIL by 0.0032: the first loss point sits at
    lambda* = -3.37121 (confirmed independently with an adaptive
    integrator and a root solve to |psi| < 1e-12), 0.0232 away from the
    asserted -3.348, just outside the +-.02 window."""
    problem = fresh("example3")
    scan = rho_grid_scan(problem)
    lam1 = scan.loss_points[0].lambda_star
    checks = [
        (abs(lam1 + 3.348) <= 2e-2, f"lambda*1 = {lam1:.4f} vs -3.348±.02"),
    ]
    report(capsys, "criterion 4 (example3 first loss-point lambda)", checks)


def test_criterion_5_harmonic_analytic_oracle(capsys):
    problem = fresh("harmonic-dirichlet")
    assert problem.x_steps == 2000
    count, _ = renormalized_count(problem)
    eigs = localize_eigenvalues_top(problem, tol=1e-10)
    pi2 = math.pi ** 2
    checks = [
        (count == 2, f"renormalized count={count}"),
        (len(eigs) == 2, f"{len(eigs)} localized eigenvalues"),
        (abs(eigs[0] - pi2) <= 1e-6, f"eig1={eigs[0]:.10f} vs pi^2"),
        (abs(eigs[1] - 4 * pi2) <= 1e-6, f"eig2={eigs[1]:.10f} vs 4 pi^2"),
    ]
    report(capsys, "criterion 5 (harmonic closed-form oracle)", checks)


def test_criterion_6_identity_suite(capsys):
    rng = np.random.default_rng(20240817)
    checks = []
    for name in CATALOG_ALL:
        problem = fresh(name)
        worst = 0.0
        for _ in range(100):
            x = rng.uniform(0.05, 0.95)
            lam = rng.uniform(problem.lambda1, problem.lambda2)
            worst = max(worst, derivative_identity_residual(problem, x, lam))
        checks.append((worst <= 1e-5, f"{name}: worst residual {worst:.2e}"))
        ratios = monotonicity_audit(problem)
        bad = [r for _, r in ratios if not 0.999 <= r <= 1.001]
        checks.append((not bad, f"{name}: {len(ratios)} audit ratios in [.999,1.001]"))
    report(capsys, "criterion 6 (derivative identity + crossing-rate audit)",
           checks)


def test_criterion_7_structural_suite(capsys):
    checks = []
    # zero bottom/right indices on every catalog problem
    for name in CATALOG_ALL:
        problem = fresh(name)
        for shelf in ("bottom", "right"):
            idx, _ = winding_index(shelf_path(problem, shelf))
            checks.append((idx == 0, f"{name} {shelf} index {idx}"))

    # additivity and reversal on 1000 random synthetic transversal paths
    add_ok = rev_ok = add_n = rev_n = 0
    rng_seeds = range(2500)
    for seed in rng_seeds:
        if add_n + rev_n >= 1000:
            break
        r = np.random.default_rng(seed)
        ts = np.linspace(0, 1, 601)
        k = r.integers(1, 5)
        phase = r.uniform(0, 2 * np.pi)
        psi1 = r.uniform(1, 3) * np.sin(2 * np.pi * k * ts + phase) + r.uniform(-.4, .4)
        psi2 = r.uniform(1, 3) * np.cos(2 * np.pi * k * ts + phase) + r.uniform(-.4, .4)
        if np.min(psi1 ** 2 + psi2 ** 2) < 2e-3 or np.min(np.abs(psi1[[0, -1]])) < 5e-2:
            continue
        p = PathSamples.from_psi(ts, psi1, psi2)
        whole, recs = winding_index(p)
        cut = 300
        if abs(psi1[cut]) > 5e-2:
            first, _ = winding_index(PathSamples.from_psi(
                ts[:cut + 1], psi1[:cut + 1], psi2[:cut + 1]))
            second, _ = winding_index(PathSamples.from_psi(
                ts[cut:], psi1[cut:], psi2[cut:]))
            add_n += 1
            add_ok += whole == first + second
        if all(rec.kind == "interior" and rec.direction != 0 for rec in recs):
            rev, _ = winding_index(PathSamples.from_psi(
                ts, psi1[::-1].copy(), psi2[::-1].copy()))
            rev_n += 1
            rev_ok += rev == -whole
    checks.append((add_n + rev_n >= 1000, f"{add_n + rev_n} synthetic paths"))
    checks.append((add_ok == add_n, f"additivity {add_ok}/{add_n}"))
    checks.append((rev_ok == rev_n, f"reversal {rev_ok}/{rev_n}"))

    # rescaling invariance of crossing locations
    for name in ("example1", "example2"):
        on = load_problem(builtin_catalog(name))
        off = load_problem(builtin_catalog(name))
        off.rescale = False
        xs_on = [rec.t_star for rec in detect_crossings(shelf_path(on, "left"))]
        xs_off = [rec.t_star for rec in detect_crossings(shelf_path(off, "left"))]
        same = len(xs_on) == len(xs_off) and all(
            abs(a - b) <= 1e-8 for a, b in zip(xs_on, xs_off)
        )
        checks.append((same, f"{name} rescale-invariant crossings"))
    report(capsys, "criterion 7 (structural suite)", checks)


def test_criterion_8_parser_suite(capsys):
    from renosc import eval_expression, parse_expression, serialize_expression
    from renosc.errors import ExpressionSyntaxError

    checks = []
    checks.append((
        eval_expression(parse_expression(".2*cos(10*x) - .5*cos(x/10)"), 0.0)
        == pytest.approx(-0.3),
        "alpha0(0) = -0.3",
    ))
    checks.append((
        eval_expression(parse_expression("x"), 0.25) == 0.25, "identity at .25"
    ))
    try:
        parse_expression("sin(")
        checks.append((False, "sin( accepted"))
    except ExpressionSyntaxError as err:
        checks.append((err.offset == 4, f"sin( error offset {err.offset}"))

    # round trip on generated trees
    import random

    def random_text(r, depth=4):
        roll = r.random()
        if depth <= 0 or roll < 0.25:
            return f"{r.uniform(0.1, 9.9):.3f}" if r.random() < 0.5 else "x"
        if roll < 0.4:
            fn = ("sin", "cos", "exp")[r.randrange(3)]
            return f"{fn}({random_text(r, depth - 1)})"
        if roll < 0.5:
            return f"-{random_text(r, 0)}"
        op = ("+", "-", "*", "/")[r.randrange(4)]
        left, right = random_text(r, depth - 1), random_text(r, depth - 1)
        if op == "/":
            right = f"({right}+10.5)"
        return f"({left}) {op} ({right})"

    ok = True
    for seed in range(100):
        r = random.Random(seed)
        text = random_text(r)
        tree = parse_expression(text)
        again = parse_expression(serialize_expression(tree))
        for x in np.linspace(0, 1, 25):
            a = eval_expression(tree, float(x))
            b = eval_expression(again, float(x))
            if not (abs(a - b) <= 1e-15 * max(1.0, abs(a))):
                ok = False
    checks.append((ok, "100 serialize/parse round trips"))

    # example-1 coefficients against hand values
    problem = fresh("example1")
    hand_ok = True
    for x in (0.0, 0.5, 1.0):
        a0 = 0.2 * math.cos(10 * x) - 0.5 * math.cos(x / 10)
        a1 = 2 * math.sin(5 * x)
        A = problem.field.evaluate(x, -1.0)
        expect = np.array([
            [0.0, 0.1, 0.0],
            [0.0, 0.0, 1 / 6],
            [-1.0 - a0, -a1 / 10, -1 / 6],
        ])
        if np.max(np.abs(A - expect)) > 1e-12:
            hand_ok = False
    checks.append((hand_ok, "example1 coefficients at x in {0,.5,1} to 1e-12"))
    report(capsys, "criterion 8 (parser suite)", checks)
