import math

import numpy as np
import pytest

from tspmdf.core import Tour, TspInstance, tour_length
from tspmdf.tsplib import (
    TsplibError,
    generate_uniform,
    nint_tour_length,
    parse_tour,
    parse_tsplib,
    read_tsplib,
    serialize_tsplib,
)

MINIMAL = """NAME : tiny
TYPE : TSP
DIMENSION : 3
EDGE_WEIGHT_TYPE : EUC_2D
NODE_COORD_SECTION
1 0 0
2 3 0
3 0 4
EOF
"""


def test_minimal_file():
    inst = parse_tsplib(MINIMAL)
    np.testing.assert_array_equal(inst.nodes, [[0, 0], [3, 0], [0, 4]])
    assert tour_length(inst, Tour([0, 1, 2])) == 12.0


def test_eil51_file_order_length_matches_hand_sum(data_dir):
    inst = read_tsplib(data_dir / "eil51.tsp")
    assert inst.n == 51
    # independent summation straight from the text, without the parser
    rows = []
    active = False
    for line in (data_dir / "eil51.tsp").read_text().splitlines():
        if line.startswith("NODE_COORD_SECTION"):
            active = True
        elif active and line.strip() and line.strip() != "EOF":
            _, x, y = line.split()
            rows.append((float(x), float(y)))
    total = sum(math.dist(rows[i], rows[(i + 1) % len(rows)]) for i in range(len(rows)))
    assert tour_length(inst, Tour(np.arange(51))) == pytest.approx(total, rel=1e-12)


def test_eil51_optimal_tour(data_dir):
    inst = read_tsplib(data_dir / "eil51.tsp")
    tour = parse_tour((data_dir / "eil51.opt.tour").read_text())
    assert nint_tour_length(inst, tour) == 426  # published integer optimum
    assert tour_length(inst, tour) == pytest.approx(429.98331198338406, rel=1e-12)


def test_ceil_2d_is_read_as_coordinates():
    inst = parse_tsplib(MINIMAL.replace("EUC_2D", "CEIL_2D"))
    assert inst.n == 3


def test_display_section_after_coordinates_is_ignored():
    text = MINIMAL.replace("EOF\n", "DISPLAY_DATA_SECTION\n")
    assert parse_tsplib(text).n == 3


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda t: t.replace("DIMENSION : 3", "DIMENSION : 5"), "DIMENSION is 5"),
        (lambda t: t.replace("DIMENSION : 3\n", ""), "missing DIMENSION"),
        (lambda t: t.replace("DIMENSION : 3", "DIMENSION : three"), "not an integer"),
        (lambda t: t.replace("EUC_2D", "GEO"), "unsupported EDGE_WEIGHT_TYPE"),
        (lambda t: t.replace("EDGE_WEIGHT_TYPE : EUC_2D\n", ""), "missing EDGE_WEIGHT_TYPE"),
        (lambda t: t.replace("2 3 0", "2 3 zero"), "line 7"),
        (lambda t: t.replace("2 3 0", "2 3"), "line 7"),
        (lambda t: t.replace("3 0 4", "2 0 4"), "duplicate node index"),
        (lambda t: t.replace("3 0 4", "4 0 4"), "node indices"),
        (lambda t: t.replace("TYPE : TSP", "TYPE : ATSP"), "unsupported TYPE"),
        (lambda t: t.replace("NODE_COORD_SECTION\n1 0 0\n2 3 0\n3 0 4\n", ""), "missing NODE_COORD_SECTION"),
        (lambda t: t.replace("2 3 0", "2 3 nan"), "non-finite"),
    ],
)
def test_malformed_files(mutate, message):
    with pytest.raises(TsplibError, match=message):
        parse_tsplib(mutate(MINIMAL))


def test_explicit_weights_unsupported():
    text = MINIMAL.replace("EUC_2D", "EXPLICIT").replace("NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION")
    with pytest.raises(TsplibError):
        parse_tsplib(text)


def test_round_trip_full_precision():
    inst = TspInstance(np.random.default_rng(0).normal(0, 100, (40, 2)))
    back = parse_tsplib(serialize_tsplib(inst, "x", "round trip"))
    assert np.array_equal(back.nodes, inst.nodes)


def test_generate_uniform_properties():
    a = generate_uniform(500, 3)
    b = generate_uniform(500, 3)
    assert np.array_equal(a.nodes, b.nodes)
    assert a.nodes.min() >= 0 and a.nodes.max() < 1
    assert not np.array_equal(generate_uniform(500, 3, 1).nodes, a.nodes)
    assert not np.array_equal(generate_uniform(500, 4).nodes, a.nodes)


def test_generate_uniform_documented_stream():
    rng = np.random.Generator(np.random.Philox(key=np.array([7, 2], dtype=np.uint64)))
    assert np.array_equal(generate_uniform(10, 7, 2).nodes, rng.random((10, 2)))


def test_generate_uniform_moments():
    pooled = np.concatenate([generate_uniform(1000, 11, i).nodes.ravel() for i in range(50)])
    assert pooled.size == 100_000
    n = pooled.size
    assert abs(pooled.mean() - 0.5) < 3 * math.sqrt(1 / 12 / n)
    # variance of the sample variance of U(0,1) is (1/80 - 1/144) / n
    assert abs(pooled.var() - 1 / 12) < 3 * math.sqrt((1 / 80 - 1 / 144) / n)


def test_generate_uniform_size_error():
    with pytest.raises(ValueError):
        generate_uniform(2, 0)
