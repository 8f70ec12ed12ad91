import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pentimento.experiment import BurnVector, DelaySeries
from pentimento.plotting import BURN_COLOURS, render_svg


def parse(svg):
    return ET.fromstring(svg)


def polylines(svg):
    return [el for el in parse(svg).iter() if el.tag.endswith("polyline")]


def test_constant_series_is_horizontal():
    s = DelaySeries(["a"], np.array([1000.0]), np.arange(10.0), np.zeros((1, 10)))
    (line,) = polylines(render_svg(s))
    ys = {p.split(",")[1] for p in line.get("points").split()}
    assert len(ys) == 1


def test_colours_follow_burn_bits():
    s = DelaySeries(["a", "b"], np.array([1.0, 1.0]), np.arange(3.0), np.array([[0, 1, 2], [0, -1, -2.0]]))
    lines = polylines(render_svg(s, BurnVector((1, 0)), title="x & y"))
    assert [l.get("stroke") for l in lines] == [BURN_COLOURS[1], BURN_COLOURS[0]]


def test_separated_bundles_do_not_overlap():
    hours = np.arange(0.0, 401.0)
    up = np.minimum(hours, 200) / 100
    rows = np.vstack([up + 0.01 * k for k in range(4)] + [-up - 0.01 * k for k in range(4)])
    s = DelaySeries([f"r{i}" for i in range(8)], np.full(8, 1000.0), hours, rows)
    lines = polylines(render_svg(s, BurnVector((1,) * 4 + (0,) * 4), shade_hours=[(0, 200)]))
    # SVG y grows downwards: burn-1 bundle stays above burn-0 after hour 0
    last_y = [float(l.get("points").split()[-1].split(",")[1]) for l in lines]
    assert max(last_y[:4]) < min(last_y[4:])


def test_empty_series_is_an_error():
    with pytest.raises(ValueError):
        render_svg(DelaySeries([], np.array([]), np.array([]), np.zeros((0, 0))))
