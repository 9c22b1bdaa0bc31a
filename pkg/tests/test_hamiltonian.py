import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kickback_walk.hamiltonian import (
    build_reduced,
    build_sector,
    dressing_sign,
    dressing_signs,
    embed_plus,
    flipped_edges,
    kickback_gauge,
    verify_conservation,
    write_coo_csv,
)
from kickback_walk.lattice import ChainConfig, enumerate_sites


@st.composite
def configs(draw, max_s=12):
    s = draw(st.integers(4, max_s))
    a = draw(st.integers(2, s - 2))
    b = draw(st.integers(a + 1, s - 1))
    return ChainConfig(s, a, b, draw(st.booleans()))


@pytest.mark.parametrize(
    "a,p,q,value",
    [
        (4, (2, 5), (2, 6), 0.5),
        (4, (1, 2), (1, 3), -0.5),
        (3, (4, 5), (4, 6), -0.5),
        (3, (3, 5), (3, 6), 0.5),
        (4, (1, 2), (1, 2), 0.0),
        (3, (1, 2), (1, 2), 0.0),
    ],
)
def test_reduced_entries(a, p, q, value):
    h = build_reduced(ChainConfig(7, a, 5))
    assert h.entry(p, q) == value
    assert h.entry(q, p) == value


def test_free_is_plain_laplacian():
    h = build_reduced(ChainConfig(7, 4, 5, free=True))
    assert set(h.weights) == {-0.5}
    assert flipped_edges(ChainConfig(7, 4, 5, free=True)) == []


def _positive_edges(h):
    st = h.indexing.state
    return sorted((st(i), st(j)) for (i, j), w in zip(h.edges, h.weights) if w > 0)


@pytest.mark.parametrize("a,count", [(4, 4), (3, 3)])
def test_flipped_edges_match_positive_entries(a, count):
    cfg = ChainConfig(7, a, 5)
    listed = flipped_edges(cfg)
    assert len(listed) == count
    # oracle: scan the assembled matrix
    assert sorted(listed) == _positive_edges(build_reduced(cfg))


@given(configs(max_s=16))
def test_reduced_structure(cfg):
    h = build_reduced(cfg)
    H = h.dense()
    assert np.array_equal(H, H.T)
    assert not np.any(np.diag(H))
    assert set(np.unique(H[H != 0])) <= {-0.5, 0.5}
    assert len(_positive_edges(h)) == (0 if cfg.free else cfg.a)
    assert np.max(np.abs(np.linalg.eigvalsh(H))) <= 3.0


@given(configs(max_s=10))
@settings(max_examples=30, deadline=None)
def test_sector_restriction_matches_reduced(cfg):
    rep = verify_conservation(cfg)
    assert rep.passed, rep.as_dict()


@pytest.mark.parametrize("a", [4, 3])
def test_conservation_fig1_configs(a):
    for cfg in (ChainConfig(7, a, 5), ChainConfig(7, a, 5, free=True)):
        rep = verify_conservation(cfg)
        assert rep.commutator_norm < 1e-12 and rep.reduction_residual < 1e-12


def test_conservation_refuses_large_chain():
    with pytest.raises(ValueError):
        verify_conservation(ChainConfig(41, 3, 5))


def test_sector_sigma1_flips_register():
    cfg = ChainConfig(7, 4, 5)
    sec = build_sector(cfg)
    idx = sec.indexing
    i, j = idx.index((4, 6)), idx.index((5, 6))  # first walker crosses link a = 4
    H = sec.matrix
    assert H[2 * j + 1, 2 * i] == -0.5  # |+1> -> |-1>
    assert H[2 * j, 2 * i] == 0.0


def test_sector_sigma3_phase():
    cfg = ChainConfig(7, 4, 5)
    sec = build_sector(cfg)
    idx = sec.indexing
    i, j = idx.index((2, 5)), idx.index((2, 6))  # second walker crosses link b = 5
    H = sec.matrix
    assert H[2 * j + 1, 2 * i + 1] == 0.5
    assert H[2 * j, 2 * i] == -0.5
    assert H[2 * j + 1, 2 * i] == 0.0


def test_sector_free_block_diagonal():
    cfg = ChainConfig(7, 3, 5, free=True)
    H = build_sector(cfg).matrix
    L = build_reduced(cfg).dense()
    assert np.array_equal(H[0::2, 0::2], L)
    assert np.array_equal(H[1::2, 1::2], L)
    assert not H[0::2, 1::2].any()


def test_dressing_and_embedding():
    idx = enumerate_sites(7)
    assert dressing_sign((1, 2), 4) == 1
    assert dressing_sign((3, 6), 4) == -1
    assert dressing_sign((5, 6), 4) == 1
    E = embed_plus(dressing_signs(idx, ChainConfig(7, 4, 5)))
    assert np.array_equal(E.T @ E, np.eye(idx.total))
    assert E[2 * idx.index((1, 2)), idx.index((1, 2))] == 1
    assert E[2 * idx.index((2, 6)) + 1, idx.index((2, 6))] == 1


@given(st.integers(5, 20).flatmap(lambda s: st.tuples(st.just(s), st.integers(2, s - 3))))
def test_gauge_identity_adjacent_impurities(sa):
    s, a = sa
    cfg = ChainConfig(s, a, a + 1)
    h = build_reduced(cfg).dense()
    L = build_reduced(cfg.as_free()).dense()
    d = kickback_gauge(enumerate_sites(s), cfg.b)
    assert np.array_equal(d[:, None] * h * d[None, :], L)


def test_gauge_identity_fails_for_gap_two():
    cfg = ChainConfig(7, 3, 5)
    h = build_reduced(cfg).dense()
    L = build_reduced(cfg.as_free()).dense()
    d = kickback_gauge(enumerate_sites(7), cfg.b)
    assert not np.array_equal(d[:, None] * h * d[None, :], L)


def test_coo_dump(tmp_path):
    h = build_reduced(ChainConfig(7, 4, 5))
    path = tmp_path / "h.csv"
    write_coo_csv(h, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "row,col,value"
    assert len(rows) - 1 == h.matrix.nnz
    r, c, v = rows[1].split(",")
    assert h.dense()[int(r), int(c)] == float(v)
