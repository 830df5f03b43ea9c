import re

import numpy as np

from alcoint.montecarlo import summarize_mixed
from alcoint.plotting import plot_cell


def _summaries():
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(500)
    active = rng.random(500) > 0.3
    vals[~active] = -1.0
    al = summarize_mixed(vals, active, -1.0)
    ols = summarize_mixed(rng.standard_normal(500), np.ones(500, bool), -1.0)
    return al, ols


def _groups(path, prefix):
    return len(re.findall(rf'<g id="{prefix}_\d+"', path.read_text()))


def test_svg_written_and_deterministic(tmp_path):
    al, ols = _summaries()
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_cell(a, al, ols, None, title="T=100")
    plot_cell(b, al, ols, None, title="T=100")
    text = a.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    assert a.read_bytes() == b.read_bytes()
    # two density curves plus one atom spike
    assert _groups(a, "line2d") >= 2 and _groups(a, "LineCollection") == 1


def test_all_atom_cell_has_spike_only(tmp_path):
    atom = summarize_mixed(np.full(50, -2.0), np.zeros(50, bool), -2.0)
    assert atom.kde is None
    out = tmp_path / "atom.svg"
    plot_cell(out, atom, None, None)
    assert _groups(out, "LineCollection") == 1
    al, _ = _summaries()
    with_curve = tmp_path / "curve.svg"
    plot_cell(with_curve, al, None, None)
    # a density curve adds a line plus its legend entry
    assert _groups(with_curve, "line2d") > _groups(out, "line2d")


def test_far_atom_is_clipped(tmp_path):
    far = summarize_mixed(np.full(50, -25.0), np.zeros(50, bool), -25.0)
    near = summarize_mixed(np.full(50, -3.0), np.zeros(50, bool), -3.0)
    p_far, p_near = tmp_path / "far.svg", tmp_path / "near.svg"
    plot_cell(p_far, far, None, None)
    plot_cell(p_near, near, None, None)
    # the clipped atom gets an arrow patch and a label with its true location
    assert _groups(p_far, "text") > _groups(p_near, "text")
