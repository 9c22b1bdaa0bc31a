import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binomtest

from kickback_walk.hamiltonian import build_reduced
from kickback_walk.lattice import ChainConfig
from kickback_walk.process import (
    MAX_SUBDIVISION,
    Sampler,
    SamplerSettings,
    continuity_probe,
    continuity_residual,
    empirical_distribution,
    ensemble,
    rate_field,
    read_trajectories,
    sample_trajectory,
    write_trajectories,
)
from kickback_walk.propagator import Wavefunction, evolve, initial_state


@pytest.fixture(scope="module")
def h7():
    return build_reduced(ChainConfig(7, 4, 5))


def literal_rate(h_xy, px, py):
    # direct transcription with Arg; only used as an oracle
    return abs(h_xy) * abs(py / px) * (1 + np.sin(np.angle(px) - np.angle(py) + np.angle(h_xy)))


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 30.0))
@settings(max_examples=25, deadline=None)
def test_rates_match_arg_formula(seed, t):
    h = build_reduced(ChainConfig(7, 3, 5))
    rng = np.random.default_rng(seed)
    v = rng.normal(size=h.dimension) + 1j * rng.normal(size=h.dimension)
    psi = evolve(h, Wavefunction(0.0, v / np.linalg.norm(v)), t)
    field = rate_field(h, psi)
    H = h.dense()
    for i, j, r in zip(field.src, field.dst, field.rates):
        expected = literal_rate(H[i, j], psi.amplitudes[i], psi.amplitudes[j])
        assert r >= 0
        assert r == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_rate_zero_when_target_empty(h7):
    psi = np.zeros(h7.dimension, dtype=complex)
    psi[h7.indexing.index((1, 3))] = 1.0
    field = rate_field(h7, Wavefunction(0.0, psi))
    assert field.rate((1, 3), (1, 4)) == 0.0
    assert field.rate((1, 3), (2, 3)) == 0.0


def test_rate_real_positive_amplitudes(h7):
    psi = np.zeros(h7.dimension, dtype=complex)
    psi[h7.indexing.index((1, 2))] = 0.6
    psi[h7.indexing.index((1, 3))] = 0.8
    field = rate_field(h7, Wavefunction(0.0, psi))
    assert field.rate((1, 2), (1, 3)) == pytest.approx(0.5 * 0.8 / 0.6)
    assert field.rate((1, 3), (1, 2)) == pytest.approx(0.5 * 0.6 / 0.8)


def test_rates_vanish_at_start(h7):
    field = rate_field(h7, initial_state(h7.indexing))
    assert field.rate((1, 2), (1, 3)) == 0.0
    assert not field.rates.any()


def test_rates_only_on_lattice_edges(h7):
    field = rate_field(h7, evolve(h7, initial_state(h7.indexing), 2.0))
    H = h7.dense()
    assert all(H[i, j] != 0 for i, j in zip(field.src, field.dst))
    assert len(field.as_dict()) == 2 * len(h7.edges)


@pytest.mark.parametrize("free", [False, True])
def test_continuity_s7(free):
    h = build_reduced(ChainConfig(7, 4, 5, free))
    assert continuity_probe(h, 1.0, eps=1e-4) < 1e-5
    assert continuity_probe(h, 13.7, eps=1e-4) < 1e-5


def test_continuity_skips_localized_start(h7):
    psi0 = initial_state(h7.indexing).amplitudes
    times = np.array([-1e-4, 0.0, 1e-4])
    table = h7.spectrum.propagate(psi0, times)
    psis = [Wavefunction(float(t), v) for t, v in zip(times, table)]
    assert np.count_nonzero(np.abs(psis[1].amplitudes) > 1e-6) == 1
    # only (1, 2) is above threshold; its net current vanishes at t = 0
    assert continuity_residual(h7, psis) < 1e-5


@pytest.mark.parametrize("free", [True, False])
def test_each_link_one_direction(free, rng):
    # only edges whose endpoint amplitudes are resolved above round-off
    h = build_reduced(ChainConfig(25, 11, 13, free))
    psi0 = initial_state(h.indexing)
    m = len(h.edges)
    i, j = h.edges.T
    for t in rng.uniform(0.1, 25, size=10):
        psi = evolve(h, psi0, t)
        r = rate_field(h, psi).rates
        forward, backward = r[:m], r[m:]
        amp = np.abs(psi.amplitudes)
        resolved = (amp[i] > 1e-8) & (amp[j] > 1e-8)
        assert resolved.any()
        both = np.minimum(forward, backward) > 1e-6 * np.maximum(forward, backward)
        assert not np.any(both & resolved)


def _check_structure(tr, h, horizon):
    path = np.vstack([tr.start, tr.states])
    steps = np.abs(np.diff(path, axis=0)).sum(axis=1)
    assert np.all(steps == 1)
    assert np.all(path[:, 0] < path[:, 1]) and path.min() >= 1 and path.max() <= h.config.s
    assert np.all(np.diff(tr.times) > 0)
    if len(tr.times):
        assert tr.times[0] > 0 and tr.times[-1] < horizon


def test_free_starts_as_pure_birth():
    h = build_reduced(ChainConfig(25, 11, 13, free=True))
    ens = ensemble(h, None, SamplerSettings(dt=0.005, horizon=1.5, n_traj=400, seed=3))
    moved = 0
    for tr in ens:
        path = tr.path()
        for p, q in zip(path, path[1:]):
            assert q.x1 >= p.x1 and q.x2 >= p.x2
            moved += 1
    assert moved > 0


def test_zero_horizon_has_no_jumps(h7):
    tr = sample_trajectory(h7, None, SamplerSettings(horizon=0.0, n_traj=1), 0)
    assert len(tr) == 0 and tr.start == (1, 2)


def test_trajectory_deterministic(h7):
    st_ = SamplerSettings(dt=0.01, horizon=7.0, n_traj=1, seed=99)
    a = sample_trajectory(h7, None, st_, 5)
    b = sample_trajectory(h7, None, st_, 5)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.states, b.states)
    c = sample_trajectory(h7, None, st_, 6)
    assert not (len(a) == len(c) and np.array_equal(a.times, c.times))


def test_ensemble_independent_of_batching(h7):
    st_ = SamplerSettings(dt=0.01, horizon=7.0, n_traj=40, seed=11)
    sampler = Sampler(h7, st_)
    big = ensemble(h7, None, st_, sampler=sampler)
    small = ensemble(h7, None, st_, chunk_size=7, workers=3, sampler=sampler)
    single = sample_trajectory(h7, None, st_, 23, sampler=sampler)
    assert [t.index for t in big] == list(range(40))
    for x, y in zip(big, small):
        np.testing.assert_array_equal(x.times, y.times)
        np.testing.assert_array_equal(x.states, y.states)
    np.testing.assert_array_equal(single.times, big[23].times)


def test_singleton_ensemble(h7):
    ens = ensemble(h7, None, SamplerSettings(dt=0.01, horizon=3.0, n_traj=1))
    assert len(ens) == 1


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(max_step_prob=1.0), dict(n_traj=0), dict(horizon=-1.0)])
def test_settings_validation(bad):
    with pytest.raises(ValueError):
        SamplerSettings(**bad)


def test_coarse_steps_are_subdivided(h7):
    st_ = SamplerSettings(dt=0.5, horizon=7.0, n_traj=200, seed=4)
    sampler = Sampler(h7, st_)
    ens = ensemble(h7, None, st_, sampler=sampler)
    assert sampler.subdivided_steps > 0
    assert ens.overflow_count == 0
    for tr in ens:
        _check_structure(tr, h7, 7.0)


def test_subdivision_overflow_is_reported(h7):
    st_ = SamplerSettings(dt=0.5, horizon=3.0, n_traj=3, seed=4, max_step_prob=1e-3)
    ens = ensemble(h7, None, st_, sampler=Sampler(h7, st_, max_levels=2))
    assert ens.overflow_count > 0
    for tr in ens:
        _check_structure(tr, h7, 3.0)
    assert Sampler(h7, st_).max_levels == MAX_SUBDIVISION == 20


def test_ensemble_structure(fig4_ensembles, fig4_hamiltonians):
    for ens, h in zip(fig4_ensembles, fig4_hamiltonians):
        assert ens.overflow_count == 0
        for tr in ens:
            _check_structure(tr, h, 25.0)


@pytest.mark.parametrize("which", [0, 1])
def test_marginal_law_exact_binomial(fig4_ensembles, fig4_hamiltonians, which):
    # exact two-sided binomial test per (site, time), Bonferroni over all of them
    ens, h = fig4_ensembles[which], fig4_hamiltonians[which]
    psi0 = initial_state(h.indexing).amplitudes
    n = len(ens)
    pvalues = []
    for t in (2.0, 5.0, 10.0):
        p = np.abs(h.spectrum.propagate(psi0, np.array([t]))[0]) ** 2
        counts = np.rint(empirical_distribution(ens, t, h) * n).astype(int)
        pvalues += [binomtest(int(k), n, float(min(pi, 1.0))).pvalue for k, pi in zip(counts, p)]
    assert min(pvalues) * len(pvalues) > 1e-3


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_trajectory_file_round_trip(tmp_path, h7, fmt):
    ens = ensemble(h7, None, SamplerSettings(dt=0.01, horizon=7.0, n_traj=20, seed=8))
    path = tmp_path / f"traj.{fmt}"
    write_trajectories(ens, path, fmt)
    back = read_trajectories(path, 7.0, fmt)
    for x, y in zip(ens, back):
        assert x.index == y.index and x.start == y.start
        np.testing.assert_array_equal(x.times, y.times)
        np.testing.assert_array_equal(x.states, y.states)
    first = path.read_text().splitlines()[0]
    if fmt == "csv":
        assert first.startswith("0,0,1,2")
