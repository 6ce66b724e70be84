import xml.etree.ElementTree as ET

import numpy as np

from fieldport.svg import heatmap, line_plot


def test_heatmap_is_valid_and_deterministic():
    z = np.arange(12.0).reshape(3, 4)
    a = heatmap(z, [0, 1, 2, 3], [0, 1, 2], "t", "x", "X")
    assert a == heatmap(z, [0, 1, 2, 3], [0, 1, 2], "t", "x", "X")
    root = ET.fromstring(a.split("\n", 1)[1])
    rects = root.findall("{http://www.w3.org/2000/svg}rect")
    assert len(rects) == 1 + 12 + 21


def test_constant_heatmap_and_line_plot():
    ET.fromstring(heatmap(np.ones((2, 2)), [0, 1], [0, 1]).split("\n", 1)[1])
    s = line_plot({"a": ([0, 1, 2], [1, 0, 1]), "b": ([0, 2], [0, 0])}, "t")
    root = ET.fromstring(s.split("\n", 1)[1])
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2
