import math

import numpy as np
import pytest

from kerrmag import sweep as sweep_mod
from kerrmag.sweep import (
    Axis,
    FigureSpec,
    SweepSpec,
    emit_csv,
    evaluate_point,
    figure_preset,
    mode_states,
    nonreciprocity_column,
    read_csv,
    run_sweep,
    write_metadata,
    write_plot_data,
)


def _small(**kw):
    base = dict(axes=(Axis("delta_1", -1.0, 1.0, 2), Axis("delta_2", -1.0, 1.0, 2)),
                measures=("E_c1c2",), fixed={"delta_m": 1.0})
    base.update(kw)
    return SweepSpec(**base)


def _same(a, b):
    return a == b or (isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))


def test_two_by_two_grid(baseline):
    res = run_sweep(_small(), baseline)
    assert len(res) == 4
    assert res.columns == ("delta_1", "delta_2", "kerr_mode", "stable", "E_c1c2")
    assert [r[:2] for r in res.rows] == [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
    assert all(r[2] == "zero" for r in res.rows)


def test_row_count_and_mode_order(baseline):
    spec = _small(kerr_modes=("minus", "zero", "plus"), axes=(Axis("delta_1", -1, 1, 3), Axis("delta_2", 0, 1, 2)))
    res = run_sweep(spec, baseline)
    assert len(res) == 3 * 2 * 3
    assert [r[2] for r in res.rows[:3]] == ["zero", "plus", "minus"]


def test_nonreciprocity_columns(baseline):
    spec = _small(kerr_modes="both", measures=("E_c1c2", "R_c1mb"))
    res = run_sweep(spec, baseline)
    assert res.columns[-2:] == ("dEK_E_c1c2", "Bcr_R_c1mb")
    for plus, minus in zip(res.rows[0::2], res.rows[1::2]):
        assert plus[-2] == minus[-2] == abs(plus[4] - minus[4])
    assert nonreciprocity_column("R_c1mc2") == "Bcr_R_c1mc2"


def test_csv_layout_and_round_trip(baseline, tmp_path):
    res = run_sweep(_small(kerr_modes="all"), baseline)
    path = emit_csv(res.select("zero"), tmp_path / "a.csv")
    assert len(path.read_text().splitlines()) == 5
    path = emit_csv(res, tmp_path / "b.csv")
    back = read_csv(path)
    assert back.columns == res.columns
    assert all(all(_same(x, y) for x, y in zip(r, s)) for r, s in zip(back.rows, res.rows))
    assert emit_csv(back, tmp_path / "c.csv").read_bytes() == path.read_bytes()


def test_empty_measure_list(baseline, tmp_path):
    res = run_sweep(_small(measures=()), baseline)
    header = emit_csv(res, tmp_path / "e.csv").read_text().splitlines()[0]
    assert header == "delta_1,delta_2,kerr_mode,stable"


def test_unstable_points_are_flagged(baseline, tmp_path):
    spec = SweepSpec(axes=(Axis("g_ratio", 50.0, 60.0, 3),), measures=("E_mb",), fixed={"delta_1": -1.0, "delta_2": 1.0})
    with pytest.warns(UserWarning, match="unstable"):
        res = run_sweep(spec, baseline)
    assert not any(res.column("stable"))
    assert np.all(np.isnan(res.column("E_mb")))
    lines = emit_csv(res, tmp_path / "u.csv").read_text().splitlines()
    assert lines[1].endswith(",zero,false,")


def test_failures_recorded_per_row(baseline, monkeypatch):
    real = sweep_mod.evaluate_point

    def flaky(params, measures, **kw):
        if params.delta_1 > 0:
            raise ArithmeticError("boom")
        return real(params, measures, **kw)

    monkeypatch.setattr(sweep_mod, "evaluate_point", flaky)
    res = run_sweep(_small(), baseline)
    assert [i for i, _ in res.failures] == [2, 3]
    assert "boom" in res.failures[0][1]
    assert res.rows[0][3] and not res.rows[2][3]


def test_worker_count_does_not_change_output(baseline, tmp_path):
    spec = SweepSpec(axes=(Axis("delta_1", -2, 2, 9), Axis("delta_2", -2, 2, 7)), kerr_modes="all",
                     measures=("E_c1m", "R_c1mb"), fixed={"delta_m": 1.0})
    a = emit_csv(run_sweep(spec, baseline, workers=1), tmp_path / "a.csv").read_bytes()
    b = emit_csv(run_sweep(spec, baseline, workers=3, chunksize=5), tmp_path / "b.csv").read_bytes()
    c = emit_csv(run_sweep(spec, baseline, workers=1), tmp_path / "c.csv").read_bytes()
    assert a == b == c


def test_point_independence(baseline):
    spec = SweepSpec(axes=(Axis("delta_1", -2, 2, 5), Axis("delta_2", -2, 2, 5)), kerr_modes="all",
                     measures=("E_c1c2", "R_c1mc2"), fixed={"delta_m": 1.0})
    res = run_sweep(spec, baseline)
    states = mode_states(spec, baseline)
    tuned = sweep_mod._reference_params(spec, baseline)
    row = res.rows[3 * 7 + 2]  # (delta_1, delta_2) = (-1, 1), minus
    st = states[row[2]]
    stable, vals = evaluate_point(tuned.replace(delta_1=row[0], delta_2=row[1]), spec.measures,
                                  G=st.G, delta_K=st.delta_K, delta_m=st.delta_m)
    assert stable == row[3]
    assert (vals["E_c1c2"], vals["R_c1mc2"]) == row[4:6]


def test_mirror_symmetry(baseline):
    p = baseline
    assert p.kappa_1 == p.kappa_2 and p.coupling_gamma_1 == p.coupling_gamma_2 and p.drive_E1 == p.drive_E2
    measures = ("E_c1m", "E_c2m", "E_c1b", "E_c2b")
    for d1, d2 in ((-1.0, 1.0), (0.4, -1.3), (1.2, 0.7)):
        _, a = evaluate_point(p.replace(delta_1=d1, delta_2=d2), measures, G=0.35, delta_K=0.1, delta_m=1.0)
        _, b = evaluate_point(p.replace(delta_1=d2, delta_2=d1), measures, G=0.35, delta_K=0.1, delta_m=1.0)
        assert a["E_c1m"] == pytest.approx(b["E_c2m"], abs=1e-10)
        assert a["E_c1b"] == pytest.approx(b["E_c2b"], abs=1e-10)


def test_operating_points(baseline):
    spec = _small(kerr_modes="all")
    states = mode_states(spec, baseline)
    gamma = baseline.coupling_gamma_1
    assert states["zero"].G / gamma == pytest.approx(1.1, rel=1e-12)
    assert states["zero"].delta_K == 0
    assert states["plus"].delta_K > 0 > states["minus"].delta_K
    assert states["minus"].G > states["zero"].G > states["plus"].G


def test_fixed_kerr_magnitude(baseline):
    spec = _small(kerr_modes="both", kerr_magnitude=0.1)
    res = run_sweep(spec, baseline)
    ops = res.metadata["operating_points"]
    assert ops["plus"]["delta_K"] == 0.1 and ops["minus"]["delta_K"] == -0.1
    assert res.metadata["kerr_shift_mode"] == "fixed"
    assert run_sweep(_small(), baseline).metadata["kerr_shift_mode"] == "self-consistent"


def test_pointwise_operation(baseline):
    ref = run_sweep(_small(kerr_modes="plus", measures=("E_mb",)), baseline)
    pw = run_sweep(_small(kerr_modes="plus", measures=("E_mb",), operating="pointwise"), baseline)
    assert all(r[4] > 0 for r in ref.rows)
    assert len(pw) == len(ref)
    assert pw.metadata["operating_points"] == {}
    # the reference point coincides; other points see a different steady state
    assert pw.rows[1][4] == pytest.approx(ref.rows[1][4], rel=1e-12)
    assert pw.rows[0][4] != ref.rows[0][4]
    assert pw.rows[3][4] != ref.rows[3][4]


@pytest.mark.parametrize("kwargs, match", [
    (dict(axes=(Axis("delta_1", 0, 1, 2), Axis("delta_1", 0, 1, 2))), "repeated axis"),
    (dict(fixed={"delta_1": 0.0}), "both an axis and fixed"),
    (dict(fixed={"kappa": 1.0}), "unknown fixed"),
    (dict(measures=("E_zz",)), "unknown measure"),
    (dict(kerr_modes="sideways"), "unknown kerr mode"),
    (dict(operating="lazy"), "operating"),
    (dict(kerr_magnitude=-0.1), "kerr_magnitude"),
    (dict(axes=()), "one or two axes"),
])
def test_spec_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        _small(**kwargs)


def test_axis_validation():
    with pytest.raises(ValueError):
        Axis("delta_1", 0, 1, 1)
    with pytest.raises(ValueError):
        Axis("delta_1", 1, 1, 5)
    with pytest.raises(ValueError):
        Axis("omega", 0, 1, 5)
    assert Axis.parse("g_ratio:0:2:201") == Axis("g_ratio", 0.0, 2.0, 201)
    with pytest.raises(ValueError):
        Axis.parse("g_ratio:0:2")


def test_figure_presets():
    fig2 = figure_preset("fig2").spec
    assert [a.name for a in fig2.axes] == ["delta_1", "delta_2"]
    assert fig2.shape == (101, 101)
    assert fig2.measures == ("E_c1c2",) and fig2.kerr_modes == ("zero", "plus", "minus")
    assert fig2.fixed == {"delta_m": 1.0}
    six = figure_preset("fig6e-h")
    assert isinstance(six, FigureSpec) and len(six.panels) == 4
    for panel, measure in zip(six.panels, ("E_c1c2", "E_c1m", "E_c1b", "E_mb")):
        assert panel.axes == (Axis("g_ratio", 0.0, 2.0, 201),)
        assert (panel.fixed["delta_1"], panel.fixed["delta_2"]) == (-1.0, 1.0)
        assert panel.measures == (measure,) and panel.nonreciprocal
    with pytest.raises(ValueError):
        six.spec
    assert figure_preset("fig7", points_1d=11).spec.shape == (11,)
    with pytest.raises(KeyError, match="fig9"):
        figure_preset("fig9")


def test_plot_data(baseline, tmp_path):
    spec = _small(kerr_modes="all", axes=(Axis("delta_1", -1, 1, 3), Axis("delta_2", -1, 1, 4)))
    dat, gp = write_plot_data(run_sweep(spec, baseline), spec, tmp_path / "two")
    assert gp.read_text().count("splot") == 3
    assert len([l for l in dat.read_text().splitlines() if l and not l.startswith("#")]) == 3 * 12
    spec1 = SweepSpec(axes=(Axis("g_ratio", 0, 2, 5),), kerr_modes="all", measures=("E_mb",),
                      fixed={"delta_1": -1.0, "delta_2": 1.0})
    dat, gp = write_plot_data(run_sweep(spec1, baseline), spec1, tmp_path / "one")
    lines = dat.read_text().splitlines()
    assert lines[0] == "# g_ratio E_mb_zero E_mb_plus E_mb_minus dEK_E_mb"
    assert len(lines) == 6


def test_metadata(baseline, tmp_path):
    import json

    res = run_sweep(_small(kerr_modes="both"), baseline)
    data = json.loads(write_metadata(res, tmp_path / "m.json", version="x").read_text())
    assert data["spec"]["kerr_modes"] == ["plus", "minus"]
    assert data["version"] == "x" and data["failures"] == []
