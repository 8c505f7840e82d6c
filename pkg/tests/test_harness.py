import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlewass import harness
from mlewass.errors import ContractError, DomainError, ExperimentError
from mlewass.mle_families import (
    ExpCanonical,
    ExpNonCanonical,
    InvGammaRateUnknown,
    InvGammaShapeUnknown,
    MvnDiagonal,
    NormalCanonical,
)
from mlewass.rng_dist import derive_stream


def _small(family=None, threads=1, **kw):
    args = dict(N=500, K=6, master_seed=7, threads=threads)
    args.update(kw)
    return harness.ExperimentConfig(family or ExpCanonical(1.0), [10, 100], **args)


def test_run_table_rows_and_gap():
    rep = harness.run_table(_small())
    assert [r.n for r in rep.rows] == [10, 100]
    for r in rep.rows:
        assert r.gap == r.bound - r.dhat_mean
        assert r.dhat_stderr >= 0
        assert r.dhat_mean > 0
    assert rep.rows[0].bound == harness.closed_form_bound(ExpCanonical(1.0), 10)
    assert rep.metadata["solvers_used"] == ["sorted1d"]


def test_run_table_deterministic_across_thread_counts():
    a = harness.run_table(_small(threads=1))
    b = harness.run_table(_small(threads=4))
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == b.to_json()


def test_single_repetition_reports_identical():
    a = harness.run_table(_small(K=1))
    b = harness.run_table(_small(K=1))
    assert a.to_csv() == b.to_csv()
    assert a.rows[0].dhat_stderr == 0.0


def test_run_table_two_dimensional_uses_exact_matching():
    cfg = harness.ExperimentConfig(NormalCanonical(0.5, 1.0), [10, 100], N=200, K=3, master_seed=2, threads=2)
    rep = harness.run_table(cfg)
    assert rep.metadata["solvers_used"] == ["exact_matching"]
    assert rep.dominance_violations() == []


def test_run_table_entropic_when_over_cap():
    cfg = harness.ExperimentConfig(
        NormalCanonical(0.5, 1.0), [100], N=150, K=2, master_seed=2, exact_cap=100, threads=1
    )
    rep = harness.run_table(cfg)
    assert rep.metadata["solvers_used"] == ["entropic"]
    assert rep.rows[0].solver_gap >= 0


def test_monotone_trend_small_run():
    for fam in (ExpCanonical(1.0), ExpNonCanonical(1.0)):
        cfg = harness.ExperimentConfig(fam, [10, 10000], N=2000, K=10, master_seed=3)
        rep = harness.run_table(cfg)
        assert rep.rows[0].dhat_mean > rep.rows[1].dhat_mean
        assert rep.dominance_violations() == []


def test_csv_columns_and_json_values_agree():
    import csv
    import io
    import json

    rep = harness.run_table(_small())
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == harness.REPORT_COLUMNS
    js = json.loads(rep.to_json())
    for line, row in zip(rows[1:], js["rows"]):
        assert int(line[0]) == row["n"]
        assert float(line[1]) == row["dhat_mean"]
        assert float(line[4]) == row["gap"]
    assert js["metadata"]["master_seed"] == 7


def test_failure_identifies_task(monkeypatch):
    real = harness.simulate_W

    def flaky(family, n, N, stream):
        if n == 100 and stream.generator is not None and flaky.calls == 3:
            raise ValueError("boom")
        flaky.calls += 1
        return real(family, n, N, stream)

    flaky.calls = 0
    monkeypatch.setattr(harness, "simulate_W", flaky)
    with pytest.raises(ExperimentError) as info:
        harness.run_table(_small(K=2))
    assert info.value.n == 100
    assert info.value.repetition in (0, 1)
    assert "boom" in str(info.value)


def test_config_validation():
    with pytest.raises(DomainError):
        _small(K=0)
    with pytest.raises(DomainError):
        _small(N=1)
    with pytest.raises(DomainError):
        harness.ExperimentConfig(ExpCanonical(1.0), [], N=10, K=1)
    with pytest.raises(DomainError):
        _small(solver="simplex")


def test_no_registered_bound():
    with pytest.raises(ContractError):
        harness.closed_form_bound(ExpNonCanonical(1.0), 100, p=2)


def test_closed_form_registry():
    assert harness.closed_form_bound(MvnDiagonal.unit(3), 1000) == pytest.approx(3.0672, abs=1e-4)
    assert harness.closed_form_bound(NormalCanonical(0.5, 1.0), 1000) == pytest.approx(896.283, abs=1e-3)


# ---------------------------------------------------------------------------
# slope fits


def test_fit_examples():
    xs = np.arange(1, 50, dtype=float)
    assert harness.fit_loglog_slope(xs, xs) == pytest.approx(1.0, abs=1e-12)
    assert harness.fit_loglog_slope(xs, np.sqrt(xs)) == pytest.approx(0.5, abs=1e-12)
    assert harness.fit_loglog_slope(xs, np.full_like(xs, 3.0)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(2, 98), st.integers(0, 40))
def test_synthetic_root_p_slope(c, count, start):
    p = np.arange(2, 2 + count + 1, dtype=float)
    start = min(start, p.size - 2)
    assert harness.fit_loglog_slope(p, c * np.sqrt(p), start) == pytest.approx(0.5, abs=1e-12)


def test_fit_errors():
    with pytest.raises(DomainError):
        harness.fit_loglog_slope([1, 2, 3], [1, 0, 2])
    with pytest.raises(DomainError):
        harness.fit_loglog_slope([1, 2, 3], [1, 2, 3], 2, 2)
    with pytest.raises(ContractError):
        harness.fit_loglog_slope([1, 2, 3], [1, 2])


def test_tail_window():
    assert harness.tail_window(49) == (35, 49)
    assert harness.tail_window(99) == (70, 99)
    a, b = harness.tail_window(3)
    assert b - a + 1 >= 2


def test_dimension_scaling_small_and_deterministic():
    kw = dict(n=100, N=60, K=3, master_seed=4, windows={"all": (1, 5)})
    a = harness.run_dimension_scaling([2, 3, 4, 5, 6], threads=1, **kw)
    b = harness.run_dimension_scaling([2, 3, 4, 5, 6], threads=3, **kw)
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == b.to_json()
    assert len(a.to_csv().strip().splitlines()) == 6
    assert math.isfinite(a.slopes["all"]["slope"])
    assert all(v > 0 for v in a.dhat)


def test_dimension_scaling_default_windows_clip():
    rep = harness.run_dimension_scaling([2, 3], n=50, N=20, K=2, master_seed=1)
    assert rep.slopes == {}
    with pytest.raises(DomainError):
        harness.run_dimension_scaling([2], n=50, N=20, K=2)


# ---------------------------------------------------------------------------
# order checks


def test_rc4_preconditions():
    with pytest.raises(DomainError):
        harness.rc4_order_check(InvGammaRateUnknown(0.3, 1.0), [10, 20], 1000, derive_stream(1, 0))
    with pytest.raises(ContractError):
        harness.rc4_order_check(ExpCanonical(1.0), [10, 20], 1000, derive_stream(1, 0))


def test_rc4_rate_m_squared_slope_is_two_at_truth():
    # M at the true rate is nonrandom and linear in n
    fam = InvGammaRateUnknown(3.0, 1.0)
    chk = harness.rc4_order_check(fam, [50, 100, 200, 400], 20_000, derive_stream(2, 0))
    assert all(m >= float(fam.dominating(1.0, n)) ** 2 for m, n in zip(chk.m_squared, chk.n_values))
    assert 1.8 <= chk.m_squared_slope <= 2.2
    assert -2.5 <= chk.fourth_slope <= -1.5


def test_rc4_shape_runs():
    chk = harness.rc4_order_check(InvGammaShapeUnknown(2.0, 1.0), [50, 100, 200, 400], 20_000, derive_stream(3, 0))
    assert chk.variant
    assert len(chk.fourth_moment) == 4
    assert all(se > 0 for se in chk.fourth_moment_se)
