import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tspnn.baselines import held_karp
from tspnn.core import build_instance
from tspnn.errors import ConfigError, NoNeighbors, NumericalError, ShapeError, TooLargeForHeldKarp
from tspnn.gnn import (GraphBatch, GraphSample, TrainConfig, attention_coefficients, backward,
                       build_mlp, dijkstra_path, edge_metrics, forward, forward_edge_logits,
                       forward_node_logits, init_params, make_shortest_path_dataset,
                       make_tsp_dataset, message_passing_round, mlp_backward, mlp_forward,
                       node_update, split, supervised_loss, train_edge_classifier, zero_params)
from tspnn.gnn.io import (dataset_from_dict, dataset_to_dict, load_json, params_from_dict,
                          params_to_dict, save_json)
from tspnn.gnn.model import _segment_softmax


def tiny_sample(seed=0, n=7):
    return make_shortest_path_dataset(1, (n, n), seed)[0]


def relerr(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


# -- attention and update ---------------------------------------------------------------

def test_attention_examples():
    p = init_params(d=2, rounds=1, seed=0)
    p.W3[...] = np.eye(2)
    p.W4[...] = np.eye(2)
    a = attention_coefficients([1, 0], [[1, 0], [0, 1]], p)
    first = 1.0 / (1.0 + math.exp(-1.0 / math.sqrt(2.0)))  # softmax(1/sqrt(2), 0)
    assert a == pytest.approx([first, 1.0 - first], abs=1e-12)
    assert a == pytest.approx([0.66976, 0.33024], abs=1e-4)
    assert attention_coefficients([1, 0], [[0.3, 0.2]], p) == pytest.approx([1.0])
    same = attention_coefficients([1, 2], [[0.5, 0.5]] * 4, p)
    assert np.allclose(same, 0.25)


def test_attention_errors():
    p = init_params(d=3, rounds=1)
    with pytest.raises(NoNeighbors):
        attention_coefficients(np.ones(3), [], p)
    with pytest.raises(NumericalError):
        attention_coefficients([np.nan, 0, 0], [[1, 1, 1]], p)
    with pytest.raises(ShapeError):
        attention_coefficients(np.ones(2), [[1, 1, 1]], p)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32))
def test_attention_is_distribution(d, k, seed):
    rng = np.random.default_rng(seed)
    p = init_params(d=d, rounds=1, seed=seed)
    a = attention_coefficients(rng.normal(size=d), rng.normal(size=(k, d)), p)
    assert abs(a.sum() - 1) <= 1e-12 and np.all((a > 0) & (a <= 1))


def test_node_update_examples():
    p = init_params(d=3, rounds=1, seed=1)
    x = np.array([0.2, -0.4, 1.0])
    nbrs = np.random.default_rng(0).normal(size=(4, 3))
    p.W1[...] = np.eye(3)
    p.W2[...] = 0.0
    assert np.allclose(node_update(x, nbrs, np.full(4, 0.25), p), x)
    p.W2[...] = np.eye(3)
    assert np.allclose(node_update(np.zeros(3), nbrs, np.full(4, 0.25), p), nbrs.mean(axis=0))
    q = init_params(d=3, rounds=1, seed=2)
    al = np.array([0.1, 0.2, 0.3, 0.4])
    expect = q.W1 @ x + sum(al[j] * (q.W2 @ nbrs[j]) for j in range(4))
    assert np.allclose(node_update(x, nbrs, al, q), expect)
    with pytest.raises(ShapeError):
        node_update(x, nbrs, al[:3], q)


def test_batched_round_matches_reference_ops():
    s = tiny_sample(3)
    p = init_params(d=5, rounds=1, seed=3)
    batch = GraphBatch.from_samples([s])
    h = np.random.default_rng(1).normal(size=(s.n, 5))
    out = message_passing_round(batch, h, p)
    for i in range(s.n):
        nbrs = sorted({int(b) for a, b in s.edges if a == i} | {int(a) for a, b in s.edges if b == i})
        al = attention_coefficients(h[i], h[nbrs], p)
        assert np.allclose(out[i], h[i] + np.tanh(node_update(h[i], h[nbrs], al, p)), atol=1e-12)


def test_round_without_edges():
    s = GraphSample(3, np.zeros((0, 2), dtype=np.int64), np.zeros((3, 4)), np.zeros((0, 1)),
                    np.zeros(3), np.zeros(0))
    p = init_params(d=4, rounds=1, seed=0)
    h = np.random.default_rng(0).normal(size=(3, 4))
    out = message_passing_round(GraphBatch.from_samples([s]), h, p)
    assert np.allclose(out, h + np.tanh(h @ p.W1.T))


def test_round_shape_error():
    s = tiny_sample()
    p = init_params(d=4, rounds=1)
    with pytest.raises(ShapeError):
        message_passing_round(GraphBatch.from_samples([s]), np.zeros((s.n, 3)), p)


def test_zero_rounds_is_identity_on_hidden():
    s = tiny_sample()
    p = init_params(d=4, rounds=0, seed=0)
    caches = {}
    forward(s, p, caches)
    h0 = mlp_forward(p.encoder, s.node_features)
    assert np.array_equal(caches["h"], h0)


def test_alpha_rows_are_distributions_in_every_round():
    ds = make_shortest_path_dataset(5, (8, 12), 4)
    batch = GraphBatch.from_samples(ds)
    p = init_params(d=6, rounds=5, seed=1)
    caches = {}
    forward(batch, p, caches)
    for _, _, _, _, alpha, _ in caches["rounds"]:
        sums = batch.to_dst @ alpha
        assert np.all(alpha >= 0)
        assert np.all(np.abs(sums - 1) <= 1e-12)


def test_segment_softmax_is_stable():
    batch = GraphBatch.from_samples([tiny_sample(1)])
    s = np.random.default_rng(0).normal(size=len(batch.src)) * 1e3
    a = _segment_softmax(s, batch)
    assert np.all(np.isfinite(a))


# -- MLP ---------------------------------------------------------------------------------

def test_build_mlp_examples():
    one = build_mlp([4], in_size=3)
    assert len(one.weights) == 1 and one.weights[0].shape == (3, 4)
    x = np.random.default_rng(0).normal(size=(2, 3))
    y = mlp_forward(one, x)
    assert np.allclose(y, x @ one.weights[0] + one.biases[0])
    three = build_mlp([8, 8, 1], in_size=5)
    assert [w.shape for w in three.weights] == [(5, 8), (8, 8), (8, 1)]
    a, b = build_mlp([8, 2], seed=4, in_size=3), build_mlp([8, 2], seed=4, in_size=3)
    assert all(np.array_equal(u, v) for u, v in zip(a.arrays(), b.arrays()))
    with pytest.raises(ConfigError):
        build_mlp([])


@pytest.mark.parametrize("act", ["tanh", "relu", "linear"])
@pytest.mark.parametrize("ln,final", [(False, False), (True, True)])
def test_mlp_gradients(act, ln, final):
    p = build_mlp([6, 5, 4], act, final, ln, seed=7, in_size=3)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 3))
    gy = rng.normal(size=(6, 4))
    _, cache = mlp_forward(p, x, cache=True)
    gx, grads = mlp_backward(p, cache, gy)
    f = lambda: float(np.sum(mlp_forward(p, x) * gy))
    h = 1e-6
    for a, g in zip(p.arrays(), grads):
        for idx in list(np.ndindex(a.shape))[:12]:
            old = a[idx]
            a[idx] = old + h
            up = f()
            a[idx] = old - h
            dn = f()
            a[idx] = old
            assert abs((up - dn) / (2 * h) - g[idx]) <= 1e-5 * max(1.0, abs(g[idx]))
    fx = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        x[idx] += h
        up = f()
        x[idx] -= 2 * h
        dn = f()
        x[idx] += h
        fx[idx] = (up - dn) / (2 * h)
    assert relerr(gx, fx) <= 1e-5


# -- model --------------------------------------------------------------------------------

def test_zero_params_give_equal_logits():
    s = tiny_sample(2)
    s = GraphSample(s.n, s.edges, s.node_features, np.ones_like(s.edge_features),
                    s.node_labels, s.edge_labels)
    z = forward_edge_logits(s, zero_params(d=4, rounds=3))
    assert np.allclose(z, z[0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    s = tiny_sample(seed % 1000, n=int(rng.integers(6, 11)))
    p = init_params(d=5, rounds=4, seed=seed)
    perm = rng.permutation(s.n)
    ze, zn = forward(s, p)
    pe, pn = forward(s.permuted(perm), p)
    assert np.max(np.abs(ze - pe)) <= 1e-9
    assert np.max(np.abs(zn[np.argsort(perm)] - pn)) <= 1e-9


def test_edge_orientation_does_not_matter():
    s = tiny_sample(5)
    flipped = GraphSample(s.n, s.edges[:, ::-1].copy(), s.node_features, s.edge_features,
                          s.node_labels, s.edge_labels)
    p = init_params(d=4, rounds=3, seed=2)
    assert np.allclose(forward_edge_logits(s, p), forward_edge_logits(flipped, p), atol=1e-12)


def test_batch_equals_single_samples():
    ds = make_shortest_path_dataset(3, (7, 9), 8)
    p = init_params(d=4, rounds=3, seed=0)
    ze, zn = forward(ds, p)
    singles = [forward(s, p) for s in ds]
    assert np.allclose(ze, np.concatenate([a for a, _ in singles]), atol=1e-12)
    assert np.allclose(zn, np.concatenate([b for _, b in singles]), atol=1e-12)


def end_to_end_loss(p, batch, ge, gn):
    ze, zn = forward(batch, p)
    return float(ze @ ge + zn @ gn)


@pytest.mark.parametrize("ln", [False, True])
def test_end_to_end_gradient(ln):
    ds = make_shortest_path_dataset(2, (6, 8), 1)
    batch = GraphBatch.from_samples(ds)
    p = init_params(d=4, rounds=3, seed=5, use_layer_norm=ln)
    rng = np.random.default_rng(2)
    ge = rng.normal(size=len(batch.edges))
    gn = rng.normal(size=batch.num_nodes)
    caches = {}
    forward(batch, p, caches)
    grads = backward(p, caches, ge, gn)
    h = 1e-6
    checked = 0
    for a, g in zip(p.arrays(), grads):
        for idx in list(np.ndindex(a.shape))[::7][:4]:
            old = a[idx]
            a[idx] = old + h
            up = end_to_end_loss(p, batch, ge, gn)
            a[idx] = old - h
            dn = end_to_end_loss(p, batch, ge, gn)
            a[idx] = old
            fd = (up - dn) / (2 * h)
            assert abs(fd - g[idx]) <= 1e-5 * max(1.0, abs(fd))
            checked += 1
    assert checked >= 10


# -- loss ---------------------------------------------------------------------------------

def test_loss_examples():
    loss, _ = supervised_loss(np.array([0.0]), np.array([1.0]))
    assert loss == pytest.approx(0.25)
    loss, _ = supervised_loss(np.array([50.0, -50.0]), np.array([1.0, 0.0]))
    assert loss < 1e-20
    with pytest.raises(ShapeError):
        supervised_loss(np.zeros(3), np.zeros(2))


@pytest.mark.parametrize("kind", ["mse", "bce"])
def test_loss_gradient(kind):
    rng = np.random.default_rng(0)
    z = rng.normal(scale=2, size=20)
    y = (rng.random(20) > 0.5).astype(float)
    _, g = supervised_loss(z, y, kind)
    h = 1e-6
    for k in range(20):
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        fd = (supervised_loss(zp, y, kind)[0] - supervised_loss(zm, y, kind)[0]) / (2 * h)
        assert abs(fd - g[k]) <= 1e-5 * max(1.0, abs(fd))


def test_edge_metrics():
    acc, prec, rec, f1, exact = edge_metrics([1, -1, 1, -1], [1, 0, 0, 1], np.array([0, 0, 1, 1]), 2)
    assert (acc, prec, rec, f1, exact) == (0.5, 0.5, 0.5, 0.5, 0.5)


# -- datasets ------------------------------------------------------------------------------

def bellman_ford(n, edges, w, s):
    dist = [math.inf] * n
    pred = [-1] * n
    dist[s] = 0.0
    for _ in range(n - 1):
        for (a, b), c in zip(edges, w):
            for u, v in ((a, b), (b, a)):
                if dist[u] + c < dist[v]:
                    dist[v] = dist[u] + c
                    pred[v] = u
    return dist, pred


def test_shortest_path_labels_match_bellman_ford():
    for s in make_shortest_path_dataset(30, (8, 16), 21):
        src = int(np.flatnonzero(s.node_features[:, 2])[0])
        dst = int(np.flatnonzero(s.node_features[:, 3])[0])
        w = s.edge_features[:, 0]
        dist, pred = bellman_ford(s.n, s.edges.tolist(), w, src)
        path = [dst]
        while path[-1] != src:
            path.append(pred[path[-1]])
        expect = {tuple(sorted(e)) for e in zip(path[:-1], path[1:])}
        got = {tuple(int(v) for v in e) for e, y in zip(s.edges, s.edge_labels) if y == 1}
        assert got == expect
        assert sum(w[s.edge_labels == 1]) == pytest.approx(dist[dst], abs=1e-12)
        assert set(np.flatnonzero(s.node_labels)) == set(path)


def assert_simple_path(s):
    pos = s.edges[s.edge_labels == 1]
    deg = np.bincount(pos.ravel(), minlength=s.n)
    src = int(np.flatnonzero(s.node_features[:, 2])[0])
    dst = int(np.flatnonzero(s.node_features[:, 3])[0])
    assert src != dst
    assert deg[src] == 1 and deg[dst] == 1
    inner = [v for v in range(s.n) if v not in (src, dst)]
    assert all(deg[v] in (0, 2) for v in inner)
    # connected: walk from src covers every labelled edge
    seen, v, prev = 0, src, -1
    while v != dst:
        nxt = [int(b if a == v else a) for a, b in pos if v in (a, b) and prev not in (a, b) or
               (v in (a, b) and prev == -1)]
        prev, v = v, nxt[0]
        seen += 1
    assert seen == len(pos)


def test_shortest_path_samples_are_simple_paths():
    for s in make_shortest_path_dataset(40, (8, 16), 2):
        assert s.task == "shortest_path"
        assert_simple_path(s)
        assert np.all(s.edges[:, 0] < s.edges[:, 1])


def test_dijkstra_tie_prefers_lower_predecessor():
    # square 0-1-3 and 0-2-3 with equal lengths
    path = dijkstra_path(4, [(0, 1), (0, 2), (1, 3), (2, 3)], [1.0, 1.0, 1.0, 1.0], 0, 3)
    assert path == [0, 1, 3]


def test_tsp_samples():
    for s in make_tsp_dataset(12, (5, 9), 3):
        n = s.n
        assert len(s.edges) == n * (n - 1) // 2
        assert s.edge_labels.sum() == n
        assert np.all(s.node_features[:, 2:] == 0)
        pos = s.edges[s.edge_labels == 1]
        deg = np.bincount(pos.ravel(), minlength=n)
        assert np.all(deg == 2)
        inst = build_instance(s.node_features[:, :2])
        assert s.edge_features[s.edge_labels == 1, 0].sum() == pytest.approx(held_karp(inst).length, abs=1e-9)
        # one cycle, not several
        succ = {}
        for a, b in pos:
            succ.setdefault(int(a), []).append(int(b))
            succ.setdefault(int(b), []).append(int(a))
        seen, prev, v = {0}, None, 0
        while True:
            nxt = [u for u in succ[v] if u != prev][0]
            if nxt == 0:
                break
            seen.add(nxt)
            prev, v = v, nxt
        assert len(seen) == n


def test_datasets_deterministic():
    a, b = make_shortest_path_dataset(5, (8, 10), 9), make_shortest_path_dataset(5, (8, 10), 9)
    for s, t in zip(a, b):
        assert np.array_equal(s.edges, t.edges) and np.array_equal(s.node_features, t.node_features)
    with pytest.raises(TooLargeForHeldKarp):
        make_tsp_dataset(2, (8, 19), 0)


def test_split():
    tr, te = split(list(range(200)))
    assert tr == list(range(160)) and te == list(range(160, 200))


def test_sample_validation():
    with pytest.raises(ValueError):
        GraphSample(3, np.array([[0, 0]]), np.zeros((3, 4)), np.zeros((1, 1)), np.zeros(3), np.zeros(1))
    with pytest.raises(ValueError):
        GraphSample(3, np.array([[0, 1], [1, 0]]), np.zeros((3, 4)), np.zeros((2, 1)),
                    np.zeros(3), np.zeros(2))


# -- training and I/O -------------------------------------------------------------------------

def test_zero_epochs_reports_untrained_model():
    ds = make_shortest_path_dataset(10, (8, 10), 0)
    cfg = TrainConfig(epochs=0, d=4, rounds=2)
    p, rep = train_edge_classifier(ds, cfg, seed=1)
    fresh = init_params(4, 2, 1)
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), fresh.arrays()))
    test = split(ds)[1]
    acc, _, rec, f1, _ = edge_metrics(forward_edge_logits(test, fresh), np.concatenate([s.edge_labels for s in test]))
    assert (rep.accuracy, rep.positive_recall, rep.positive_f1) == (acc, rec, f1)
    for v in (rep.accuracy, rep.positive_recall, rep.positive_f1):
        assert 0.0 <= v <= 1.0


def test_training_reduces_loss_and_is_deterministic():
    ds = make_shortest_path_dataset(20, (8, 10), 1)
    cfg = TrainConfig(epochs=40, d=6, rounds=4, learning_rate=0.01)
    p1, r1 = train_edge_classifier(ds, cfg, seed=2)
    p2, r2 = train_edge_classifier(ds, cfg, seed=2)
    assert r1.loss_history[-1] < r1.loss_history[0]
    assert r1.to_dict() == r2.to_dict()
    assert all(np.array_equal(a, b) for a, b in zip(p1.arrays(), p2.arrays()))


def test_train_then_probe_path_graph():
    ds = make_shortest_path_dataset(60, (6, 9), 5)
    p, _ = train_edge_classifier(ds, TrainConfig(epochs=300, d=8, rounds=6, learning_rate=0.01), seed=0)
    # path 0 - 1 - 2 between the marked ends, plus a spur 1 - 3
    nf = np.array([[0.1, 0.5, 1, 0], [0.4, 0.5, 0, 0], [0.7, 0.5, 0, 1], [0.4, 0.8, 0, 0]], float)
    edges = np.array([[0, 1], [1, 2], [1, 3]])
    w = np.array([[0.3], [0.3], [0.3]])
    s = GraphSample(4, edges, nf, w, np.array([1, 1, 1, 0.0]), np.array([1, 1, 0.0]))
    z = forward_edge_logits(s, p)
    assert min(z[0], z[1]) > z[2]


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(loss="hinge")
    with pytest.raises(ConfigError):
        TrainConfig(d=0)
    with pytest.raises(ConfigError):
        train_edge_classifier(make_shortest_path_dataset(1, (8, 8), 0))


def test_json_round_trip(tmp_path):
    ds = make_shortest_path_dataset(3, (8, 9), 0) + make_tsp_dataset(2, (5, 6), 0)
    back = dataset_from_dict(dataset_to_dict(ds))
    for s, t in zip(ds, back):
        assert s.task == t.task
        for f in ("edges", "node_features", "edge_features", "node_labels", "edge_labels"):
            assert np.array_equal(getattr(s, f), getattr(t, f))
    p = init_params(d=5, rounds=3, seed=4, use_layer_norm=True)
    path = tmp_path / "p.json"
    save_json(params_to_dict(p), path)
    q = params_from_dict(load_json(path))
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))
    assert np.array_equal(forward_node_logits(ds[0], p), forward_node_logits(ds[0], q))
    with pytest.raises(ConfigError):
        params_from_dict({**params_to_dict(p), "version": 99})
