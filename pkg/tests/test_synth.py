import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from _tracking import as_stream
from oracles import brute_force_ari

from routemix.bernstein import design_matrix, evaluate_bezier
from routemix.errors import DomainError, InputError
from routemix.ingest import ColumnMapping, SelectionConfig, parse_tracking, preprocess
from routemix.mixture import MixtureConfig, fit
from routemix.synth import (
    Template,
    adjusted_rand_index,
    default_templates,
    generate,
    load_templates,
    simulate_tracking,
)


def test_zero_noise_points_on_template():
    templates = default_templates()
    corpus = generate(templates, 50, (0.0, 0.0), seed=1)
    for c, k in zip(corpus.curves, corpus.truth):
        expected = evaluate_bezier(templates[k].theta, c.times)
        np.testing.assert_allclose(c.points, expected, atol=1e-12)


def test_one_template_truth_constant():
    corpus = generate(default_templates()[:1], 10, seed=2)
    assert list(corpus.truth) == [0] * 10


def test_fixed_seed_reproducible():
    a = generate(default_templates(), 40, seed=3)
    b = generate(default_templates(), 40, seed=3)
    assert list(a.truth) == list(b.truth)
    for x, y in zip(a.curves, b.curves):
        assert x.points.tobytes() == y.points.tobytes()
        assert x.times.tobytes() == y.times.tobytes()


def test_lengths_and_times():
    corpus = generate(default_templates(), 200, m_range=(5, 9), seed=4)
    assert len(corpus.curves) == len(corpus.truth) == 200
    lengths = {len(c) for c in corpus.curves}
    assert lengths <= set(range(5, 10)) and len(lengths) == 5
    for c in corpus.curves:
        assert c.times[0] == 0.0 and c.times[-1] == 1.0
        assert np.all(np.diff(c.times) >= 0)
        assert np.array_equal(c.points[0], [0.0, 0.0])


def test_weights_respected():
    templates = [Template("a", np.zeros((2, 2)), 3.0), Template("b", np.ones((2, 2)), 1.0)]
    corpus = generate(templates, 4000, seed=5)
    assert np.mean(corpus.truth == 0) == pytest.approx(0.75, abs=0.03)


@pytest.mark.parametrize("kw", [
    {"n": 0}, {"m_range": (1, 5)}, {"m_range": (9, 5)}, {"noise_sigma": (-1.0, 0.0)},
])
def test_invalid_requests(kw):
    args = {"n": 5, "m_range": (5, 9), "noise_sigma": (0.5, 0.5)} | kw
    with pytest.raises(DomainError):
        generate(default_templates(), **args)


def test_template_weight_must_be_positive():
    with pytest.raises(InputError):
        Template("x", np.zeros((3, 2)), 0.0)


def test_templates_file_round_trip(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps([{"name": "z", "theta": [[0, 0], [1, 2], [3, 4]], "weight": 2}]))
    (t,) = load_templates(path)
    assert t.name == "z" and t.weight == 2.0
    np.testing.assert_array_equal(t.theta, [[0, 0], [1, 2], [3, 4]])
    path.write_text("{")
    with pytest.raises(InputError):
        load_templates(path)


def test_default_templates_distinct():
    templates = default_templates()
    assert [t.name for t in templates] == ["go", "post", "corner", "out", "in", "slant",
                                           "flat", "curl"]
    ends = np.array([t.theta[-1] for t in templates])
    gaps = np.linalg.norm(ends[:, None] - ends[None], axis=-1)
    assert gaps[~np.eye(8, dtype=bool)].min() > 2.0


class TestARI:
    def test_identical(self):
        assert adjusted_rand_index([0, 0, 1, 2, 2], [5, 5, 3, 1, 1]) == 1.0

    def test_single_predicted_cluster(self):
        assert adjusted_rand_index([0, 0, 1, 1, 2, 2], [0] * 6) == 0.0

    def test_crossed_small_example(self):
        ari = adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2])
        assert ari == pytest.approx(brute_force_ari([1, 1, 2, 2], [1, 2, 1, 2]), abs=1e-15)
        assert ari == pytest.approx(-0.5)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=2, max_size=30))
    def test_matches_pair_counting(self, pairs):
        truth, pred = zip(*pairs)
        assert adjusted_rand_index(truth, pred) == pytest.approx(brute_force_ari(truth, pred),
                                                                 abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a, b = rng.integers(0, 4, 50), rng.integers(0, 3, 50)
        assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(b, a))

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            adjusted_rand_index([0, 1, 1], [0, 1])
        with pytest.raises(InputError):
            adjusted_rand_index([0], [0])


def _fit_ari(corpus, K, seed):
    _, pi = fit(corpus.curves, K=K, degree=5, config=MixtureConfig(seed=seed))
    return adjusted_rand_index(corpus.truth, pi.argmax(axis=1))


def test_zero_noise_identifiable():
    corpus = generate(default_templates(), 400, (0.0, 0.0), seed=6)
    assert _fit_ari(corpus, 8, 6) == 1.0


def test_mean_ari_drops_with_noise():
    templates = default_templates()[:5]
    means = []
    for noise in (0.25, 1.0, 4.0):
        scores = [_fit_ari(generate(templates, 200, (noise, noise), seed=s), 5, s)
                  for s in range(10)]
        means.append(np.mean(scores))
    assert means[0] >= means[1] >= means[2]
    assert means[2] < means[0]


def test_log_density_approaches_entropy():
    sigma = 0.7
    templates = default_templates()
    corpus = generate(templates, 2000, (sigma, sigma), seed=7)
    total, count = 0.0, 0
    for c, k in zip(corpus.curves, corpus.truth):
        r = c.points - design_matrix(c.times, 5) @ templates[k].theta
        total += np.sum(-0.5 * np.log(2 * np.pi * sigma**2) - r**2 / (2 * sigma**2))
        count += len(c)
    expected = -(np.log(2 * np.pi * sigma**2) + 1.0)
    assert total / count == pytest.approx(expected, rel=0.10)


def test_simulated_tracking_feeds_preprocess():
    rows, truth = simulate_tracking(n_plays=20, seed=8)
    records = parse_tracking(as_stream(rows), ColumnMapping())
    result = preprocess(records, SelectionConfig())
    assert {c.key for c in result.curves} == set(truth)
    assert sum(result.accounting.values()) == len(records)
    for c in result.curves:
        assert np.array_equal(c.points[0], [0.0, 0.0])
