import numpy as np
import pytest

from residiff.tsplib import ParseError, UnsupportedFormatError, parse_tsplib

DOC = """NAME : toy5
COMMENT : five points
TYPE : TSP
DIMENSION : 5
EDGE_WEIGHT_TYPE : EUC_2D
NODE_COORD_SECTION
1 10.0 10.0
2 30.0 10.0
3 30.0 25.0
4 10.0 25.0
5 20.0 40.0
EOF
"""


def test_parse_normalizes_to_unit_square():
    inst = parse_tsplib(DOC)
    assert inst.n == 5
    # bounding box spans x:20 y:30, single scale = 30
    assert inst.scale == pytest.approx(30.0)
    want = (np.array([[10, 10], [30, 10], [30, 25], [10, 25], [20, 40]], float)
            - [10, 10]) / 30.0
    assert np.allclose(inst.coords, want, atol=1e-15)
    assert inst.coords.min() >= 0.0 and inst.coords.max() <= 1.0


def test_parse_complete_graph_by_default():
    inst = parse_tsplib(DOC)
    assert inst.num_variables == 10  # C(5,2)
    inst_sparse = parse_tsplib(DOC, k=2)
    assert inst_sparse.num_variables < 10


def test_lengths_map_back_through_scale():
    inst = parse_tsplib(DOC)
    # nodes 1 and 2 are 20 apart in original units
    i = inst.edge_index(0, 1)
    assert inst.edge_lengths()[i] * inst.scale == pytest.approx(20.0)


def test_rejects_non_tsp_type():
    with pytest.raises(UnsupportedFormatError):
        parse_tsplib(DOC.replace("TYPE : TSP", "TYPE : ATSP"))


def test_rejects_other_weight_types():
    with pytest.raises(UnsupportedFormatError):
        parse_tsplib(DOC.replace("EUC_2D", "GEO"))


def test_missing_dimension():
    broken = DOC.replace("DIMENSION : 5\n", "")
    with pytest.raises(ParseError):
        parse_tsplib(broken)


def test_truncated_coords_reports_line():
    broken = "\n".join(DOC.splitlines()[:8]) + "\nEOF\n"
    with pytest.raises(ParseError) as err:
        parse_tsplib(broken)
    assert "expected 5 coordinate lines" in str(err.value)


def test_repeated_node_id():
    broken = DOC.replace("2 30.0 10.0", "1 30.0 10.0")
    with pytest.raises(ParseError, match="repeated"):
        parse_tsplib(broken)


def test_garbage_header_line():
    broken = DOC.replace("COMMENT : five points", "five points")
    with pytest.raises(ParseError):
        parse_tsplib(broken)


def test_non_numeric_coordinate():
    broken = DOC.replace("30.0 25.0", "x y")
    with pytest.raises(ParseError):
        parse_tsplib(broken)
