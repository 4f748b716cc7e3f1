import numpy as np
import pytest

from lvsurgery import IntegratorConfig, State
from lvsurgery.sweep import (
    Cell,
    InvalidSpec,
    RunRecord,
    SweepResult,
    SweepSpec,
    boundary_estimate,
    majority_verdict,
    run_sweep,
)
from lvsurgery.topology import Verdict

V = Verdict
SHORT = IntegratorConfig(t_end=200)


@pytest.mark.parametrize(
    "kw",
    [
        dict(ics=()),
        dict(ratio_range=(0.95, 1.05, 1)),
        dict(ratio_range=(1.05, 0.95, 5)),
        dict(ratio_range=(0.0, 1.0, 5)),
        dict(c_range=(3, 4, 0)),
        dict(c_range=(3, 4, 2.5)),
        dict(fixed_A=-3.0),
        dict(ics=(State(1, -1, 1),)),
        dict(ratio_values=(1.0,)),
        dict(integrator=IntegratorConfig(t_end=50)),
    ],
)
def test_invalid_specs(kw):
    with pytest.raises(InvalidSpec):
        SweepSpec(**kw)


def test_default_spec_grid():
    spec = SweepSpec()
    np.testing.assert_allclose(spec.ratios, np.linspace(0.95, 1.05, 11))
    assert spec.cs.tolist() == [3.0]
    assert len(spec.ics) == 9 and spec.ics[4] == spec.ics[8] == State(1, 1, 1)


def test_majority_and_ties():
    assert majority_verdict([V.SPHERICAL, V.SPHERICAL, V.CHAOTIC]) is V.SPHERICAL
    assert majority_verdict([V.SPHERICAL, V.TOROIDAL]) is V.TOROIDAL
    assert majority_verdict([V.TOROIDAL, V.CHAOTIC]) is V.CHAOTIC
    assert majority_verdict([V.FIXED_POINT, V.SPHERICAL]) is V.SPHERICAL
    assert majority_verdict([V.UNRESOLVED, V.FIXED_POINT]) is V.FIXED_POINT


def _fake(verdicts, ratios):
    spec = SweepSpec(ratio_values=tuple(ratios), ics=(State(1, 1, 1),))
    cells = tuple(
        Cell(0, j, 3.0, r, (RunRecord(0, v),), v) for j, (v, r) in enumerate(zip(verdicts, ratios))
    )
    return SweepResult(spec, cells)


def test_boundary_empty_for_uniform_result():
    assert boundary_estimate(_fake([V.SPHERICAL] * 4, [0.97, 0.98, 0.99, 1.0])) == []


def test_boundary_regime_skips_unresolved_and_same_regime_changes():
    res = _fake([V.SPHERICAL, V.FIXED_POINT, V.UNRESOLVED, V.TOROIDAL, V.CHAOTIC], [0.98, 0.99, 1.0, 1.01, 1.02])
    assert boundary_estimate(res) == [(3.0, pytest.approx(1.0))]
    by_verdict = boundary_estimate(res, by="verdict")
    assert [b[1] for b in by_verdict] == pytest.approx([0.985, 0.995, 1.005, 1.015])
    with pytest.raises(ValueError):
        boundary_estimate(res, by="other")


def test_all_fixed_point_grid():
    spec = SweepSpec(ratio_values=(1.0, 1.0), ics=(State(1, 1, 1), State(1, 1, 1)), integrator=SHORT)
    res = run_sweep(spec)
    assert all(r.verdict is V.FIXED_POINT for c in res.cells for r in c.runs)
    assert boundary_estimate(res) == []


def test_two_cell_sweep_across_the_boundary():
    spec = SweepSpec(ratio_values=(1.0, 3.0 / 2.9851))
    res = run_sweep(spec)
    assert res.shape == (1, 2)
    left, right = res.cell(0, 0), res.cell(0, 1)
    assert len(left.runs) == len(right.runs) == 9
    assert {r.verdict for r in left.runs} <= {V.SPHERICAL, V.FIXED_POINT}
    for k in (5, 6, 7):  # the toroidal nesting ICs
        assert right.runs[k].verdict in (V.TOROIDAL, V.CHAOTIC)
    (b,) = boundary_estimate(res)
    assert left.ratio < b[1] < right.ratio


SMALL = SweepSpec(
    c_range=(2.5, 3.0, 2),
    ratio_range=(0.99, 1.01, 2),
    ics=(State(1, 1.3, 0.89), State(1.1075, 1, 1)),
    integrator=SHORT,
)


def test_order_independence_and_reproducibility():
    base = run_sweep(SMALL)
    n = len(SMALL.cs) * len(SMALL.ratios) * len(SMALL.ics)
    shuffled = run_sweep(SMALL, order=np.random.default_rng(5).permutation(n).tolist())
    again = run_sweep(SMALL)
    assert base.signature() == shuffled.signature() == again.signature()
    # cells are row-major: C outer, ratio inner
    assert [(c.row, c.col) for c in base.cells] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    with pytest.raises(ValueError):
        run_sweep(SMALL, order=[0, 0, 1, 2, 3, 4, 5, 6])


def test_parallel_matches_serial():
    assert run_sweep(SMALL, workers=2).signature() == run_sweep(SMALL).signature()


def test_integration_failures_are_recorded():
    # in the Z = 0 plane the prey escapes in finite time
    spec = SweepSpec(ratio_values=(1.0, 1.01), ics=(State(1, 1.5, 0), State(1, 1, 1)), integrator=SHORT)
    res = run_sweep(spec)
    for cell in res.cells:
        bad, good = cell.runs
        assert bad.verdict is V.UNRESOLVED and bad.error and bad.report is None
        assert good.error is None


def test_monotone_refinement():
    ics = (State(1, 1.3, 0.89), State(1.1075, 1, 1), State(1, 1, 0.9))
    coarse = run_sweep(SweepSpec(ratio_range=(0.98, 1.02, 3), ics=ics))
    fine = run_sweep(SweepSpec(ratio_range=(0.98, 1.02, 5), ics=ics))
    bc, bf = boundary_estimate(coarse), boundary_estimate(fine)
    assert len(bc) == len(bf) == 1
    assert abs(bc[0][1] - bf[0][1]) <= 0.02
