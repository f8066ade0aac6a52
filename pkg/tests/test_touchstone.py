import json

import pytest

from risplan.errors import ConfigError, TouchstoneError
from risplan.touchstone import load_cell_manifest, parse_touchstone, read_touchstone


def test_parse_ri_single_row():
    text = "# GHZ S RI R 50\n5.0  -1.0 0.0\n"
    rec = parse_touchstone(text, "on")
    assert rec.port_count == 1
    assert rec.frequencies_hz.tolist() == [5.0e9]
    assert rec.s11[0] == -1.0 + 0.0j
    assert rec.reference_ohm == 50.0


def test_parse_db_ma_conversions():
    # -6.0206 dB at 90 degrees: magnitude 10**(-6.0206/20), pure imaginary
    rec = parse_touchstone("# HZ S DB R 50\n5.3e9  -6.0206 90\n", "x")
    expect = 10 ** (-6.0206 / 20.0)
    assert abs(rec.s11[0] - expect * 1j) < 1e-12
    rec = parse_touchstone("# MHZ S MA R 50\n5300  0.5 180\n", "y")
    assert abs(rec.s11[0] - (-0.5)) < 1e-12
    assert rec.frequencies_hz[0] == 5.3e9


def test_parse_two_port_rows():
    text = "! transmissive cell\n# GHZ S RI R 50\n"
    text += "27.0  0.1 0.0  0.9 0.1  0.9 0.1  0.1 0.0\n"
    text += "28.0  0.1 0.0  -0.9 0.0  -0.9 0.0  0.1 0.0\n"
    rec = parse_touchstone(text, "s")
    assert rec.port_count == 2
    assert rec.s21[1] == -0.9 + 0j
    assert rec.frequencies_hz.tolist() == [27.0e9, 28.0e9]


def test_option_line_defaults_and_order():
    # Touchstone defaults: GHz, S, MA, 50 ohm; token order is free
    rec = parse_touchstone("#\n1.0 1.0 0\n", "d")
    assert rec.frequencies_hz[0] == 1e9
    assert rec.s11[0] == 1.0 + 0j
    rec = parse_touchstone("# R 75 S RI HZ\n10 0.5 0.5\n", "d")
    assert rec.reference_ohm == 75.0
    assert rec.s11[0] == 0.5 + 0.5j


def test_mid_line_comments_stripped():
    rec = parse_touchstone("# GHZ S RI R 50\n1.0 0.0 1.0 ! resonance\n", "c")
    assert rec.s11[0] == 1j


@pytest.mark.parametrize(
    "body,fragment",
    [
        ("# GHZ S XX R 50\n1 0 0\n", "unexpected token"),
        ("# GHZ Z RI R 50\n1 0 0\n", "only S-parameters"),
        ("# GHZ S RI R\n1 0 0\n", "reference resistance"),
        ("1.0 0.0 0.0\n# GHZ S RI R 50\n", "data before option line"),
        ("# GHZ S RI R 50\n1 0 0\n2 0\n", "expected 3 columns"),
        ("# GHZ S RI R 50\n1 0 0 0 0\n", "expected 3 (.s1p) or 9 (.s2p) columns"),
        ("# GHZ S RI R 50\n2.0 0 0\n1.0 0 0\n", "strictly increasing"),
        ("# GHZ S RI R 50\n2.0 0 0\n2.0 0 0\n", "strictly increasing"),
        ("# GHZ S RI R 50\n", "no data rows"),
        ("! only a comment\n", "no option line"),
    ],
)
def test_parse_errors(body, fragment):
    with pytest.raises(TouchstoneError) as err:
        parse_touchstone(body, "bad")
    assert fragment in str(err.value)


def test_error_carries_line_number():
    with pytest.raises(TouchstoneError) as err:
        parse_touchstone("# GHZ S RI R 50\n1 0 0\n2 0 0\n1.5 0 0\n", "bad")
    assert str(err.value).startswith("line 4:")


def test_active_data_warns():
    with pytest.warns(UserWarning, match="looks active"):
        parse_touchstone("# GHZ S RI R 50\n1 1.5 0\n", "hot")


def test_read_touchstone_uses_filename_state_id(tmp_path):
    p = tmp_path / "state_on.s1p"
    p.write_text("# GHZ S RI R 50\n1 0.3 0\n2 0.4 0\n")
    rec = read_touchstone(p)
    assert rec.state_id == "state_on"


def test_load_cell_manifest(tmp_path):
    for name, re_part in [("a.s1p", 0.9), ("b.s1p", -0.9)]:
        (tmp_path / name).write_text(f"# GHZ S RI R 50\n1 {re_part} 0\n2 {re_part} 0\n")
    manifest = tmp_path / "cells.json"
    manifest.write_text(
        json.dumps(
            {
                "cells": [
                    {"name": "demo", "states": {"on": "a.s1p", "off": "b.s1p"}},
                ]
            }
        )
    )
    cells = load_cell_manifest(manifest)
    assert len(cells) == 1
    assert cells[0].name == "demo"
    assert cells[0].kind == "reflection"
    assert not cells[0].use_effective_s11
    assert [sid for sid, _ in cells[0].states] == ["on", "off"]


@pytest.mark.parametrize(
    "doc,fragment",
    [
        ({"cells": []}, "lists no cells"),
        ({"cells": [{"states": {"a": "x.s1p"}}]}, "'name' is required"),
        ({"cells": [{"name": "c", "states": {}}]}, "'states' must map"),
        ({"cells": [{"name": "c", "kind": "weird", "states": {"a": "x"}}]}, "kind must be"),
        ({"cells": [{"name": "c", "bogus": 1, "states": {"a": "x"}}]}, "unknown keys"),
        ({"cells": [{"name": "c", "states": {"a": "missing.s1p"}}]}, "file not found"),
    ],
)
def test_manifest_errors(tmp_path, doc, fragment):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ConfigError) as err:
        load_cell_manifest(p)
    assert fragment in str(err.value)
