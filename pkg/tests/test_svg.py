import xml.etree.ElementTree as ET

import pytest

from revhom.svg import Marker, Series, line_plot


def test_plot_is_valid_and_deterministic():
    s = [Series([0, 1, 2], [0, 1, 4], "a & b"), Series([0, 2], [1, 1], dashed=True)]
    text = line_plot(s, title="t<1>", xlabel="x", ylabel="y", markers=[Marker(1, 1, "BP")])
    assert text == line_plot(s, title="t<1>", xlabel="x", ylabel="y", markers=[Marker(1, 1, "BP")])
    root = ET.fromstring(text)
    tags = [el.tag.split("}")[1] for el in root.iter()]
    assert tags.count("polyline") == 2
    assert tags.count("circle") == 1
    assert "t&lt;1&gt;" in text and "a &amp; b" in text


def test_constant_series_gets_a_range():
    ET.fromstring(line_plot([Series([1, 1], [3, 3])]))


def test_empty_plot_rejected():
    with pytest.raises(ValueError):
        line_plot([])


def test_comment_is_embedded_safely():
    text = line_plot([Series([0, 1], [0, 1])], comment="revhom figures\nconfig: {\"a\": \"--\"}")
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    assert "<!--\nrevhom figures" in text
    assert "- -" in text
