import numpy as np
import pytest
from hypothesis import given, strategies as st

from graph_cases import graphs_equal, random_graph
from linemanifold.graph_io import (
    CONFIG_KEYS,
    ConfigError,
    GraphFormatError,
    load_graph,
    read_config,
    read_graph,
    save_graph,
    write_graph,
)
from linemanifold.solver import Method, SolveConfig

SMALL = """FORMAT rieman-graph 1
CAMERA 500.0 500.0 320.0 240.0 640 480
VERTEX_POSE 0 1.0 0.0 0.0 0.0 0.0 0.0 0.0
VERTEX_POSE 1 1.0 0.0 0.0 0.0 1.0 0.0 0.0
VERTEX_POINT 3 0.5 0.25 4.0
VERTEX_LINE 7 0.0 -4.0 0.0 1.0 0.0 0.0
VERTEX_LINE 8 0.0 -4.0 1.0 1.0 0.0 0.0
GROUP 2 7 8
EDGE_POINT 0 3 382.5 271.25
EDGE_LINE 1 7 100.0 240.0 500.0 240.0
"""


def test_small_document_fields():
    g, gt = read_graph(SMALL)
    assert gt is None
    assert g.camera.fx == 500.0 and g.image_size == (640, 480)
    np.testing.assert_array_equal(g.poses[1].R, np.eye(3))
    np.testing.assert_array_equal(g.points[3], [0.5, 0.25, 4.0])
    np.testing.assert_array_equal(g.lines[7].n, [0.0, -4.0, 0.0])
    assert g.groups == {2: [7, 8]}
    assert g.point_edge_ids.tolist() == [[0, 3]]
    assert g.line_edge_seg.tolist() == [[100.0, 240.0, 500.0, 240.0]]
    assert write_graph(g) == SMALL


def test_comments_blank_lines_and_crlf_are_accepted():
    text = "# header\n\n" + SMALL.replace("\n", "\r\n", 3).replace("GROUP", "   # note\nGROUP")
    g, _ = read_graph(text)
    assert write_graph(g) == SMALL


@given(st.integers(0, 2**32 - 1))
def test_roundtrip_is_bit_exact(seed):
    g0, gt0 = random_graph(np.random.default_rng(seed))
    text = write_graph(g0, gt0)
    g1, gt1 = read_graph(text)
    assert graphs_equal(g0, g1)
    assert (gt1 is None) == (gt0 is None)
    if gt0 is not None:
        assert all(np.array_equal(gt0.poses[i].t, gt1.poses[i].t) for i in gt0.poses)
        assert all(np.array_equal(gt0.lines[i].d, gt1.lines[i].d) for i in gt0.lines)
        assert gt1.groups == g1.groups
    assert write_graph(g1, gt1) == text


def test_file_helpers(tmp_path):
    g0, gt0 = random_graph(np.random.default_rng(3), with_gt=False)
    save_graph(tmp_path / "g.txt", g0)
    assert b"\r" not in (tmp_path / "g.txt").read_bytes()
    g1, _ = load_graph(tmp_path / "g.txt")
    assert graphs_equal(g0, g1)


def _replace(old, new):
    return SMALL.replace(old, new, 1)


@pytest.mark.parametrize(
    "text, line, column, fragment",
    [
        ("", 1, 1, "FORMAT"),
        (_replace("rieman-graph 1", "rieman-graph 2"), 1, 21, "version"),
        (_replace("rieman-graph", "g2o"), 1, 8, "unknown format"),
        (_replace("VERTEX_POINT 3 0.5", "VERTEX_POINT 3 x.5"), 5, 16, "real number"),
        (_replace("VERTEX_POINT 3 0.5", "VERTEX_POINT 3 nan"), 5, 16, "non-finite"),
        (_replace("VERTEX_POINT 3 0.5 0.25 4.0", "VERTEX_POINT 3 0.5 0.25"), 5, 1, "expects 4"),
        (_replace("VERTEX_POINT 3 0.5 0.25 4.0", "VERTEX_POINT 3 0.5 0.25 4.0 1.0"), 5, 29, "expects 4"),
        (_replace("VERTEX_POINT 3", "VERTEX_PT 3"), 5, 1, "unknown record"),
        (_replace("VERTEX_POSE 1 ", "VERTEX_POSE 0 "), 4, 13, "duplicate"),
        (_replace("VERTEX_POSE 1 1.0", "VERTEX_POSE 1 1.1"), 4, 15, "quaternion"),
        (_replace("0.0 -4.0 1.0 1.0", "1.0 -4.0 1.0 1.0"), 7, 15, "Plücker"),
        (_replace("GROUP 2 7 8", "GROUP 2 7 9"), 8, 11, "undeclared line 9"),
        (_replace("GROUP 2 7 8", "GROUP 2 7"), 8, 1, "at least two"),
        (_replace("EDGE_POINT 0 3", "EDGE_POINT 5 3"), 9, 12, "undeclared pose 5"),
        (_replace("EDGE_LINE 1 7", "EDGE_LINE 1 6"), 10, 13, "undeclared line 6"),
        (_replace("500.0 240.0\n", "100.2 240.3\n"), 10, 15, "0.5 px"),
        (_replace("CAMERA 500.0 500.0 320.0 240.0 640 480\n", ""), 1, 1, "CAMERA"),
        (SMALL + "CAMERA 1.0 1.0 0.0 0.0 1 1\n", 11, 1, "duplicate CAMERA"),
        (SMALL + "GROUP 4 8 7\n", 11, 9, "already belongs"),
    ],
)
def test_malformed_documents_name_line_and_column(text, line, column, fragment):
    with pytest.raises(GraphFormatError) as exc:
        read_graph(text)
    assert (exc.value.line, exc.value.column) == (line, column)
    assert fragment in str(exc.value)
    assert str(exc.value).startswith(f"line {line}, column {column}:")


def test_config_defaults():
    cfg, scene = read_config("")
    assert cfg == SolveConfig()
    assert scene.archetype == "sphere" and scene.n_poses == 50


def test_config_values():
    cfg, scene = read_config(
        "method = Point_StructRiemanLine\nmax_iterations = 7  # short\nloss.kind = none\nscene.archetype = box\n"
        "scene.group_sizes = 3,4\nscene.n_lines = 7\ncamera.width = 800\nperturb.translation = 0\n"
    )
    assert cfg.method is Method.STRUCT and cfg.max_iterations == 7 and cfg.loss.kind == "none"
    assert scene.archetype == "box" and scene.sizes() == (3, 4) and scene.image_size == (800, 480)
    assert scene.perturb.translation == 0.0


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("method = Sparse\n", "line 1"),
        ("loss.scale = -1\n", "invalid configuration"),
        ("damping.up = 0.5\n", "invalid configuration"),
        ("\nsolver.tol = 1\n", "line 2: unknown key"),
        ("seed = 1\nseed = 2\n", "already set on line 1"),
        ("max_iterations 3\n", "key = value"),
        ("scene.n_poses = many\n", "bad value"),
    ],
)
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        read_config(text)


def test_every_config_key_parses():
    sample = {"method": "Point_OrthLine", "loss.kind": "cauchy", "scene.archetype": "corridor",
              "scene.group_sizes": "2,2", "scene.n_lines": "4", "damping.down": "0.5",
              "damping": "0.001", "scene.n_poses": "5", "convergence.rel_decrease": "1e-6", "convergence.step_norm": "1e-9"}
    text = "".join(f"{k} = {sample.get(k, '2')}\n" for k in CONFIG_KEYS)
    cfg, scene = read_config(text)
    assert cfg.max_iterations == 2 and scene.n_poses == 5 and scene.image_size == (2, 2)


def test_minimal_document_and_dangling_reference():
    g, _ = read_graph("FORMAT rieman-graph 1\nCAMERA 1.0 1.0 0.0 0.0 2 2\nVERTEX_POSE 4 1.0 0.0 0.0 0.0 0.0 0.0 0.0\n")
    assert list(g.poses) == [4] and not g.points and not g.lines
    with pytest.raises(GraphFormatError, match="undeclared point 9"):
        read_graph(SMALL + "EDGE_POINT 0 9 1.0 2.0\n")
