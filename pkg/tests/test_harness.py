import math

import pytest
from numpy.testing import assert_allclose

from ibshell.config import parse_config
from ibshell.harness import (
    ForceErrorRow,
    convergence_study,
    force_error_rows,
    point_set,
    run_convergence_harness,
)
from ibshell.sphere_points import shipped_point_set


def test_rows_layout():
    rows = force_error_rows("ellipsoid", sizes=(100, 400), m_values=(4, 16))
    assert [(r.method, r.m, r.n) for r in rows] == [
        ("shvd", 4, 100), ("shvd", 16, 100), ("ldsm", 0, 100),
        ("shvd", 4, 400), ("shvd", 16, 400), ("ldsm", 0, 400),
    ]
    assert all(r.error >= 0 for r in rows)
    # ellipsoid lies in the span of degree-1 harmonics: exact for m >= 4
    assert all(r.error < 1e-10 for r in rows if r.method == "shvd")
    assert math.isnan(rows[0].exponent) and not math.isnan(rows[-1].exponent)


def test_ldsm_order_positive():
    rows = force_error_rows("ellipsoid", methods=("ldsm",), sizes=(529, 2025))
    assert rows[0].error > rows[1].error
    assert rows[-1].exponent > 1.0


def test_unknown_shape():
    with pytest.raises(ValueError):
        force_error_rows("torus")


def test_point_set_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        point_set(100, tmp_path)
    src = shipped_point_set(100)
    (tmp_path / "md00100.txt").write_text(
        "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in src.xyz))
    p = point_set(100, tmp_path)
    assert_allclose(p.xyz, src.xyz, atol=1e-15)


def test_harness_writes_csv(tmp_path):
    out = tmp_path / "f.csv"
    rows = run_convergence_harness("perturbed", methods=("shvd",), sizes=(100,), m_values=(16,), out=out)
    assert isinstance(rows[0], ForceErrorRow)
    assert len(out.read_text().splitlines()) == 2


def test_convergence_study_shape():
    cfg = parse_config("etas = 16 20 24\nsizes = 100 100 100\nm = 16\nt_end = 0.25\n", scenario="converge")
    res = convergence_study(cfg, methods=("shvd",))
    (r,) = res
    assert r["method"] == "shvd" and len(r["d_max"]) == 3 and len(r["differences"]) == 2
    assert_allclose(r["h"], [4 / 16, 4 / 20, 4 / 24])
    bad = parse_config("etas = 16 20\nsizes = 100\n", scenario="converge")
    with pytest.raises(ValueError):
        convergence_study(bad)
