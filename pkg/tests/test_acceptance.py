"""The ten acceptance criteria, one test each.

Every test prints one ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line; the lines are repeated in the terminal summary.
"""

import subprocess
import sys
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from cprigid.deformation_basis import divergence_of, h0_expected, l_matrix, rhs_vector, solve_h0
from cprigid.exact import RatFn
from cprigid.numeric_harness import RunParams, run_suite
from cprigid.obstruction import EXPECTED, compute_i1, compute_i2, second_order_criterion, total_obstruction
from cprigid.product_rigidity import (
    ProductConfig,
    conclusion_pipeline,
    obstruction_coefficients,
    root_identity_check,
)
from cprigid.scalar_algebra import GlobalParams, moment

SYM = GlobalParams(m="sym")


@contextmanager
def criterion(n: int, text: str, limit: float | None = None):
    """Run the body, enforce the runtime limit and record one result line."""
    start = time.perf_counter()
    ok, note = False, ""
    try:
        yield
        elapsed = time.perf_counter() - start
        ok = limit is None or elapsed < limit
        note = f"{elapsed:.2f}s" + ("" if limit is None else f" (limit {limit:g}s)")
    except AssertionError as exc:
        note = f"assertion failed: {exc}"
        raise
    finally:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {text} [{note}]"
        print(line)
        ACCEPTANCE_LINES.append(line)
    assert ok, f"criterion {n} exceeded {limit}s ({note})"


def all_pass(results, prefix=""):
    bad = [(r.id, r.observed, r.details) for r in results if r.id.startswith(prefix) and r.status != "pass"]
    assert not bad, bad
    return [r for r in results if r.id.startswith(prefix)]


def test_criterion_1_exact_h0():
    with criterion(1, "exact h0, round trip and divergence free", limit=1.0):
        h0 = solve_h0(SYM)
        assert h0 == h0_expected(SYM)
        L = l_matrix(SYM)
        assert [v / 2 for v in L @ list(h0)] == list(rhs_vector(SYM))
        assert divergence_of(h0, SYM).is_zero()


def test_criterion_2_exact_obstruction():
    with criterion(2, "I1, I2 and total as rational functions; m = 2 values; table 2..50", limit=1.0):
        assert compute_i1(SYM) == EXPECTED["I1"]
        assert compute_i2(SYM) == EXPECTED["I2"]
        rep = total_obstruction(SYM)
        assert rep.total == EXPECTED["total"]
        m2 = total_obstruction(GlobalParams(m=2), table_range=range(0))
        assert (m2.I1, m2.I2, m2.total) == (Fraction(-66, 35), Fraction(34, 35), Fraction(-32, 35))
        assert [row[0] for row in rep.table] == list(range(2, 51))
        assert all(i1 + i2 == tot and tot != 0 for _, i1, i2, tot in rep.table)


def test_criterion_3_exact_intermediates():
    with criterion(3, "u^2/u^4 coefficients of I11, I12, I21 and H0"):
        rep = total_obstruction(SYM, table_range=range(0))
        frozen = EXPECTED["integrands"]
        for key in ("I11", "I12", "I21"):
            assert rep.intermediates[f"{key}_integrand"] == frozen[key], key
        assert rep.intermediates["H0"] == frozen["H0"]
        all_pass(run_suite("intermediates", RunParams(m="sym")))


def test_criterion_4_integrals_double_oracle():
    with criterion(4, "moments by recurrence and sphere oracle; Monte Carlo within 3 SE", limit=10.0):
        m = RatFn.symbol()
        assert moment(2, SYM) == 1 / (2 * m + 1)
        assert moment(4, SYM) == 3 / ((2 * m + 1) * (2 * m + 3))
        res = all_pass(run_suite("integrals", RunParams(m=2)))  # 10^5 samples, seed 7
        ids = {r.id for r in res}
        assert {"integrals.u2-sphere-oracle", "integrals.u4-sphere-oracle", "integrals.u2-mc", "integrals.u4-mc"} <= ids
        assert all(r.observed <= 3.0 for r in res if r.kind == "mc")


def test_criterion_5_pointwise_geometry():
    with criterion(5, "Christoffel, grad/Hess u, |grad u|^2, xi forms at 100 points, m = 2, 3", limit=30.0):
        for m in (2, 3):
            res = all_pass(run_suite("geometry", RunParams(m=m)))
            tols = {r.tolerance for r in res if r.kind == "fd"}
            assert tols <= {1e-6, 1e-10}


def test_criterion_6_l_matrix():
    with criterion(6, "L matrix by finite differences at 10 points, inverse exact, type preserved"):
        res = all_pass(run_suite("l-matrix-fd", RunParams(m=2, points=10)))
        entries = [r for r in res if r.id.startswith("l-matrix.entry")]
        assert len(entries) == 25 and all(r.tolerance == 1e-4 for r in entries)
        assert {r.id for r in res} >= {"l-matrix.inverse-identity", "l-matrix.type-preservation"}


def test_criterion_7_variational_fd():
    with criterion(7, "Ricci variations of (1+tu)g at orders 1, 2 against finite differences"):
        res = all_pass(run_suite("variational-fd", RunParams(m=2, points=10)))
        tol = {r.id: r.tolerance for r in res}
        assert tol["variational.rc-order1"] == 1e-5 and tol["variational.rc-order2"] == 1e-4


def test_criterion_8_second_order_landscape():
    with criterion(8, "exhaustive sign patterns up to 8 slots: balanced iff surviving", limit=5.0):
        all_pass(run_suite("second-order", RunParams(m=2)))
        for N in range(1, 8):
            v = second_order_criterion(N)
            assert all(sum(eps) == 0 for eps in v.surviving_patterns)
            # CP^{2m}: odd slot count, nothing survives; CP^{2m-1}: balanced patterns survive
            assert v.all_obstructed == ((N + 1) % 2 == 1)
            assert v.slope > 0 or N + 1 < 3  # two slots: the slope vanishes identically


def test_criterion_9_product():
    with criterion(9, "square completions for 20 random (m, n2), coefficient triples, u = v = 0", limit=1.0):
        rng = np.random.default_rng(7)
        for _ in range(20):
            m, n2 = int(rng.integers(1, 13)), int(rng.integers(1, 41))
            r = root_identity_check(ProductConfig(m, n2))
            assert r.exact_ok and r.ok, (m, n2)
        cfg = ProductConfig("sym", 3)
        assert obstruction_coefficients(cfg).matches()
        v = conclusion_pipeline(cfg)
        assert v.u_zero and v.v_zero


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    with criterion(10, "two runs of verify --suite all --m 2 --seed 7 are byte-identical"):
        outs = []
        for k in range(2):
            path = tmp_path / f"r{k}.json"
            cmd = [sys.executable, "-m", "cprigid", "verify", "--suite", "all", "--m", "2", "--seed", "7", "--out", str(path)]
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=600)
            assert proc.returncode == 0, proc.stderr
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
