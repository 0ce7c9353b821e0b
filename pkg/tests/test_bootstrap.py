import json
import math

import numpy as np
import pytest

from tailcop import (
    KINDS,
    TWO_POINT,
    BivariateSample,
    Clayton,
    EmpiricalTailCopula,
    MultiplierScheme,
    _kernels,
    build_ensemble,
    default_point_set,
    partial_derivatives,
    process_beta,
    process_dm,
    process_known_margins,
    process_pdm,
    process_resample,
    stream,
)
from tailcop.bootstrap import angular_points, draw_weights

KM_SAMPLE = BivariateSample([[0.1, 0.2], [0.5, 0.9], [0.05, 0.01]])


def four_point_est():
    sample = BivariateSample([
        [0.11, 0.21],
        [0.42, 0.83],
        [0.57, 0.66],
        [0.93, 0.95],
    ])
    return EmpiricalTailCopula(sample, 2)


# ---------------------------------------------------------------------------
# multiplier weights


def test_two_point_weights_moments_and_support():
    w = draw_weights(TWO_POINT, 1_000_000, stream(701))
    assert set(np.unique(w)) <= {0.0, 2.0}
    assert abs(w.mean() - 1.0) < 0.01
    assert abs(w.var() - 1.0) < 0.01
    assert TWO_POINT.mu == 1.0 and TWO_POINT.tau == 1.0


def test_custom_scheme_validated():
    bad = MultiplierScheme(name="neg", draw=lambda rng, n: np.full(n, -1.0))
    with pytest.raises(ValueError):
        bad.draw_weights(stream(1), 4)
    short = MultiplierScheme(name="short", draw=lambda rng, n: np.ones(n - 1))
    with pytest.raises(ValueError):
        short.draw_weights(stream(1), 4)


def test_point_sets():
    phi = np.array([0.2, 0.8])
    ang = angular_points(phi)
    np.testing.assert_allclose(ang, np.column_stack((np.cos(phi),
                                                     np.sin(phi))))
    pts = default_point_set(phi)
    assert pts.shape == (6, 2)
    assert np.all(np.isinf(pts[2:4, 1])) and np.all(np.isinf(pts[4:6, 0]))


# ---------------------------------------------------------------------------
# worked examples


def test_beta_four_point_example():
    est = four_point_est()
    w = np.array([2.0, 0.0, 2.0, 0.0])
    assert process_beta(est, w, 1.0, 1.0) == pytest.approx(1 / math.sqrt(2),
                                                           abs=1e-14)


def test_known_margins_example():
    w = np.array([2.0, 0.0, 2.0])
    # x=(1,1): members (0.1,0.2) and (0.05,0.01), both weight 2;
    # weighted value 3, plain value 2, k=1
    assert process_known_margins(KM_SAMPLE, None, 1, w, 1.0, 1.0) == \
        pytest.approx(1.0, abs=1e-14)
    # x=(1,0.5) leaves the single member (0.05,0.01): 1.5 - 1 = 0.5
    assert process_known_margins(KM_SAMPLE, None, 1, w, 1.0, 0.5) == \
        pytest.approx(0.5, abs=1e-14)
    assert process_known_margins(KM_SAMPLE, None, 1, w, 0.0, 1.0) == 0.0


def test_dm_weighted_inverse_step_function():
    # weights (2,0,2,0) on ranks 1..4: the weighted CDF reaches half the
    # mass at the first order statistic and 0.6 of it at the third
    W = np.array([[2.0, 0.0, 2.0, 0.0]])
    order = np.arange(4)
    r = np.arange(1, 5)
    q = np.array([0.5, 0.6, 0.0, np.inf])
    out = _kernels.dm_weighted_counts(W, order, order, r, r,
                                      q, np.full(4, np.inf))
    np.testing.assert_array_equal(out[0], [2.0, 4.0, 0.0, 4.0])


def test_dm_four_point_example():
    est = four_point_est()
    w = np.array([2.0, 2.0, 2.0, 0.0])
    # weighted thresholds j1 = j2 = 2 keep only the rank-(1,1) point:
    # weighted estimate 2/3 versus plain estimate 1/2
    expected = math.sqrt(2) * (2.0 / 3.0 - 0.5)
    assert process_dm(est, w, 1.0, 1.0) == pytest.approx(expected, abs=1e-14)


def test_pdm_reduces_on_axis():
    gen = stream(702)
    est = EmpiricalTailCopula(BivariateSample(Clayton(0.5).sample(200, gen)),
                              20)
    w = draw_weights(TWO_POINT, 200, gen)
    x1 = 0.8
    d1 = partial_derivatives(est, x1, 0.0, 1)
    expected = -d1 * process_beta(est, w, x1, np.inf)
    assert process_pdm(est, w, x1, 0.0) == pytest.approx(expected, abs=1e-12)


def test_constant_weights_give_zero():
    est = four_point_est()
    w = np.full(4, 2.0)
    assert process_beta(est, w, 1.0, 1.0) == 0.0
    assert process_pdm(est, w, 1.0, 1.0) == 0.0
    assert process_dm(est, w, 1.3, 0.7) == 0.0
    assert process_known_margins(KM_SAMPLE, None, 1, np.full(3, 2.0),
                                 1.0, 1.0) == 0.0


def test_resample_identity_gives_zero():
    est = four_point_est()
    idx = np.arange(4)
    for x in ((1.0, 1.0), (0.5, 1.5), (2.0, np.inf)):
        assert process_resample(est, idx, *x) == 0.0


def test_zero_weights_rejected():
    est = four_point_est()
    with pytest.raises(ValueError):
        process_beta(est, np.zeros(4), 1.0, 1.0)
    with pytest.raises(ValueError):
        process_beta(est, np.array([1.0, -1.0, 1.0, 1.0]), 1.0, 1.0)


def test_resample_indices_validated():
    est = four_point_est()
    with pytest.raises(ValueError):
        process_resample(est, np.array([0, 1, 2]), 1.0, 1.0)
    with pytest.raises(ValueError):
        process_resample(est, np.array([0, 1, 2, 4]), 1.0, 1.0)


# ---------------------------------------------------------------------------
# resample semantics


def occ_ranks(v):
    order = np.argsort(v, kind="stable")
    r = np.empty(v.shape[0], dtype=np.int64)
    r[order] = np.arange(1, v.shape[0] + 1)
    return r


def test_resample_brute_force_all_triples():
    # ties from duplicated rows are ranked by order of occurrence
    sample = BivariateSample([[0.3, 0.1], [0.1, 0.5], [0.2, 0.4]])
    est = EmpiricalTailCopula(sample, 2)
    points = [(1.0, 1.0), (0.5, 1.5), (1.0, np.inf), (0.3, 0.2)]
    for i in range(3):
        for j in range(3):
            for l in range(3):
                idx = np.array([i, j, l])
                s1 = occ_ranks(sample.ranks[idx, 0])
                s2 = occ_ranks(sample.ranks[idx, 1])
                for x1, x2 in points:
                    a = 3 if np.isinf(x1) else math.floor(2 * x1)
                    c = 3 if np.isinf(x2) else math.floor(2 * x2)
                    count = np.sum((s1 <= a) & (s2 <= c))
                    ref = math.sqrt(2) * (count / 2 - est.evaluate(x1, x2))
                    assert process_resample(est, idx, x1, x2) == \
                        pytest.approx(ref, abs=1e-14)


# ---------------------------------------------------------------------------
# ensembles


def test_ensemble_deterministic_and_seeded():
    gen_data = stream(703)
    sample = BivariateSample(Clayton(0.5).sample(300, gen_data))
    pts = default_point_set([math.pi / 8, math.pi / 4])
    for kind in KINDS:
        a = build_ensemble(kind, sample, 30, 8, pts, rng=(703, 1))
        b = build_ensemble(kind, sample, 30, 8, pts, rng=(703, 1))
        np.testing.assert_array_equal(a.draws, b.draws)
        assert a.seed == [703, 1]
        assert a.B == 8 and a.kind == kind


def test_ensemble_matches_pointwise_processes():
    gen_data = stream(704)
    sample = BivariateSample(Clayton(0.5).sample(250, gen_data))
    est = EmpiricalTailCopula(sample, 25)
    pts = default_point_set([0.4, 1.1])
    B = 6
    seed = (704, 9)
    from tailcop.rng import as_generator

    for kind in ("beta", "pdm", "dm"):
        ens = build_ensemble(kind, sample, 25, B, pts, rng=seed)
        streams = as_generator(seed).spawn(B)
        W = np.array([TWO_POINT.draw_weights(g, 250) for g in streams])
        proc = {"beta": process_beta, "pdm": process_pdm, "dm": process_dm}
        for b in range(B):
            np.testing.assert_array_equal(
                ens.draws[b], proc[kind](est, W[b], pts[:, 0], pts[:, 1])
            )
    ens = build_ensemble("resample", sample, 25, B, pts, rng=seed)
    streams = as_generator(seed).spawn(B)
    for b, g in enumerate(streams):
        idx = g.integers(0, 250, size=250)
        np.testing.assert_array_equal(
            ens.draws[b], process_resample(est, idx, pts[:, 0], pts[:, 1])
        )


def test_ensemble_location_invariance():
    gen = stream(705)
    data = Clayton(0.5).sample(200, gen)
    warped = np.column_stack((np.exp(3 * data[:, 0]), data[:, 1] ** 3))
    pts = default_point_set([math.pi / 8, 3 * math.pi / 8])
    for kind in ("beta", "pdm", "dm", "resample"):
        a = build_ensemble(kind, BivariateSample(data), 20, 10, pts,
                           rng=(705, 2))
        b = build_ensemble(kind, BivariateSample(warped), 20, 10, pts,
                           rng=(705, 2))
        np.testing.assert_array_equal(a.draws, b.draws)


def test_known_margins_invariance_with_transformed_margins():
    gen = stream(706)
    data = Clayton(0.5).sample(200, gen)
    cubed = BivariateSample(np.column_stack((data[:, 0] ** 3, data[:, 1])))
    pts = angular_points([0.3, 0.9])
    a = build_ensemble("known_margins", BivariateSample(data), 20, 10, pts,
                       rng=(706, 3))
    b = build_ensemble("known_margins", cubed, 20, 10, pts, rng=(706, 3),
                       margins=(lambda v: np.cbrt(v), lambda v: v))
    np.testing.assert_allclose(a.draws, b.draws, atol=1e-12)


def test_ensemble_centering():
    # beta, pdm and known_margins are conditionally centered given the
    # sample; dm and resample keep a sample-dependent O(k^-1/2) offset
    # (weighted-quantile and rank-recomputation discretization), so they
    # only get the wider envelope
    gen = stream(707)
    sample = BivariateSample(Clayton(0.5).sample(400, gen))
    pts = angular_points([math.pi / 8, math.pi / 4])
    B, k = 2000, 40
    for kind in KINDS:
        ens = build_ensemble(kind, sample, k, B, pts, rng=(707, 5))
        mean = ens.draws.mean(axis=0)
        sd = ens.draws.std(axis=0, ddof=1)
        slack = 1.5 / math.sqrt(k) if kind in ("dm", "resample") else 0.0
        assert np.all(np.abs(mean) <= 4 * sd / math.sqrt(B) + slack), kind


def test_constant_scheme_zero_rows():
    const = MultiplierScheme(name="const2",
                             draw=lambda rng, n: np.full(n, 2.0))
    sample = BivariateSample(Clayton(0.5).sample(100, stream(708)))
    pts = default_point_set([0.5])
    for kind in ("beta", "pdm", "dm", "known_margins"):
        ens = build_ensemble(kind, sample, 10, 1, pts, scheme=const,
                             rng=(708, 1))
        np.testing.assert_array_equal(ens.draws, 0.0)


def test_degenerate_draws_redrawn_once():
    calls = {"count": 0}

    def drop_first(rng, n):
        calls["count"] += 1
        if calls["count"] == 1:
            return np.zeros(n)
        return 2.0 * rng.integers(0, 2, size=n).astype(float)

    scheme = MultiplierScheme(name="droppy", draw=drop_first)
    sample = BivariateSample(Clayton(0.5).sample(50, stream(709)))
    ens = build_ensemble("beta", sample, 5, 3, angular_points([0.5]),
                         scheme=scheme, rng=(709, 1))
    assert ens.degenerate_redraws == 1
    assert np.all(np.isfinite(ens.draws))

    dead = MultiplierScheme(name="dead", draw=lambda rng, n: np.zeros(n))
    with pytest.raises(RuntimeError):
        build_ensemble("beta", sample, 5, 1, angular_points([0.5]),
                       scheme=dead, rng=(709, 2))


def test_build_ensemble_validation():
    sample = BivariateSample(Clayton(0.5).sample(50, stream(710)))
    pts = angular_points([0.5])
    with pytest.raises(ValueError):
        build_ensemble("jackknife", sample, 5, 4, pts)
    with pytest.raises(ValueError):
        build_ensemble("beta", sample, 5, 0, pts)
    with pytest.raises(ValueError):
        build_ensemble("beta", sample, 5, 4, np.ones((3, 3)))
    with pytest.raises(ValueError):
        build_ensemble("known_margins", sample, 5, 4, pts, tail="upper")
    est = EmpiricalTailCopula(sample, 5)
    with pytest.raises(ValueError):
        build_ensemble("beta", est, 6, 4, pts)


def test_prebuilt_estimator_reused():
    sample = BivariateSample(Clayton(0.5).sample(80, stream(711)))
    est = EmpiricalTailCopula(sample, 8)
    pts = angular_points([0.7])
    a = build_ensemble("pdm", est, 8, 6, pts, rng=(711, 1))
    b = build_ensemble("pdm", sample, 8, 6, pts, rng=(711, 1))
    np.testing.assert_array_equal(a.draws, b.draws)


def test_ensemble_csv_round_trip(tmp_path):
    sample = BivariateSample(Clayton(0.5).sample(60, stream(712)))
    pts = default_point_set([0.6])
    ens = build_ensemble("pdm", sample, 6, 5, pts, rng=(712, 4))
    path = tmp_path / "draws.csv"
    ens.to_csv(path)
    back = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    np.testing.assert_allclose(back, ens.draws, rtol=1e-15)
    meta = json.loads((tmp_path / "draws.csv.meta.json").read_text())
    assert meta["kind"] == "pdm"
    assert meta["n"] == 60 and meta["k"] == 6 and meta["B"] == 5
    assert meta["seed"] == [712, 4]
    assert meta["scheme"]["name"] == "two_point_0_2"


# ---------------------------------------------------------------------------
# distributional checks


def test_beta_variance_tracks_known_margins_limit():
    # the beta process approximates the known-margins limit, whose
    # variance at an angular point is the tail copula value itself
    model = Clayton(0.5)
    x = (math.cos(math.pi / 8), math.sin(math.pi / 8))
    sample = BivariateSample(model.sample(10_000, stream(713)))
    est = EmpiricalTailCopula(sample, 500)
    ens = build_ensemble("beta", est, 500, 2000, np.array([x]),
                         rng=(713, 1))
    var = ens.draws[:, 0].var(ddof=1)
    lam_hat = est.evaluate(*x, rule="copula")
    assert var == pytest.approx(lam_hat, abs=4 * lam_hat * math.sqrt(2 / 2000)
                                + 0.005)
    assert var == pytest.approx(model.tail_copula(*x), abs=0.04)


def test_pdm_and_dm_covariances_agree():
    # both bootstraps target the same limit law; their averaged ensemble
    # covariance matrices on the angular points agree entrywise
    model = Clayton(0.5)
    pts = angular_points([math.pi / 8, 2 * math.pi / 8, 3 * math.pi / 8])
    reps = 200
    acc = {"pdm": np.zeros((3, 3)), "dm": np.zeros((3, 3))}
    for rep in range(reps):
        sample = BivariateSample(model.sample(1000, stream(714, rep)))
        for kind in ("pdm", "dm"):
            ens = build_ensemble(kind, sample, 200, 500, pts,
                                 rng=(714, rep, 1))
            acc[kind] += np.cov(ens.draws.T, ddof=1)
    diff = np.abs(acc["pdm"] - acc["dm"]) / reps
    assert diff.max() <= 0.015
