"""Network forward pass: symmetries, embeddings, checkpoint format.

The width-doubling test builds the embedding by hand: zero-padded weights,
block-diagonal time projection, and gains divided by sqrt(2) to cancel the
RMS denominator growing from W to 2W channels.
"""

import math

import numpy as np
import pytest

import residiff as rd
from residiff import nets
from residiff.diffusion import DiffusionState, ShapeError
from residiff.instances import SolutionVector, TspInstance, build_mis_instance
from residiff.nets import (
    DenoiserOutput,
    NetParams,
    gnn_forward,
    init_params,
    load_params,
    make_oracle,
    oracle_denoiser,
    params_for,
    save_params,
    sinusoidal_embedding,
)


def _tsp_state(inst, seed=0):
    rng = np.random.default_rng(seed)
    return DiffusionState(x=rng.standard_normal(inst.num_variables), t=0.37)


def test_denoiser_output_requires_finite():
    with pytest.raises(ValueError, match="finite"):
        DenoiserOutput(x_res_hat=np.array([np.nan]), eps_hat=np.zeros(1))
    with pytest.raises(ValueError, match="finite"):
        DenoiserOutput(x_res_hat=np.zeros(1), eps_hat=np.array([np.inf]))


def test_oracle_denoiser_returns_truth_exactly():
    rng = np.random.default_rng(0)
    x0 = SolutionVector(values=np.where(rng.random(9) < 0.5, -1.0, 1.0))
    X_d = SolutionVector(values=np.where(rng.random(9) < 0.5, -1.0, 1.0))
    eps = rng.standard_normal(9)
    state = DiffusionState(x=rng.standard_normal(9), t=0.5)
    out = oracle_denoiser(state, (x0, X_d, eps))
    assert np.array_equal(out.x_res_hat, X_d.values - x0.values)
    assert np.array_equal(out.eps_hat, eps)
    # the (inst, state) adapter must agree
    out2 = make_oracle(x0, X_d, eps)(None, state)
    assert np.array_equal(out2.x_res_hat, out.x_res_hat)


def test_zero_heads_give_zero_outputs():
    tsp = rd.generate_tsp(10, "uniform", seed=1, k=6)
    mis = rd.generate_er(12, 0.3, seed=2)
    for inst in (tsp, mis):
        params = params_for(inst, L=2, W=16)
        out = gnn_forward(params, inst, _tsp_state(inst, seed=3))
        assert np.all(out.x_res_hat == 0.0)
        assert np.all(out.eps_hat == 0.0)


def test_forward_is_deterministic():
    inst = rd.generate_tsp(9, "uniform", seed=4, k=5)
    params = init_params(np.random.default_rng(5), 2, 2, L=2, W=16, zero_heads=False)
    state = _tsp_state(inst, seed=6)
    a = gnn_forward(params, inst, state)
    b = gnn_forward(params, inst, state)
    assert np.array_equal(a.x_res_hat, b.x_res_hat)
    assert np.array_equal(a.eps_hat, b.eps_hat)


def test_shape_errors():
    tsp = rd.generate_tsp(8, "uniform", seed=7, k=5)
    mis = rd.generate_er(8, 0.4, seed=8)
    tsp_params = params_for(tsp, L=1, W=8)
    with pytest.raises(ShapeError):
        gnn_forward(tsp_params, mis, DiffusionState(x=np.zeros(8), t=0.5))
    with pytest.raises(ShapeError):
        gnn_forward(
            tsp_params, tsp,
            DiffusionState(x=np.zeros(tsp.num_variables + 2), t=0.5),
        )


# ------------------------------------------------------------ embedding


def test_sinusoidal_embedding_by_hand():
    t, dim = 0.37, 6
    emb = sinusoidal_embedding(t, dim)
    expected = []
    for m in range(3):
        arg = 30.0 * t * 10000.0 ** (-m / 64.0)
        expected.extend([math.sin(arg), math.cos(arg)])
    assert np.allclose(emb, expected, atol=1e-15)
    assert emb.shape == (dim,)


def test_sinusoidal_embedding_prefix_stable_under_widening():
    # frequencies hang off the absolute channel index, so widening appends
    for t in (0.0, 0.2, 1.0):
        narrow = sinusoidal_embedding(t, 16)
        wide = sinusoidal_embedding(t, 32)
        assert np.array_equal(wide[:16], narrow)


# --------------------------------------------------------- equivariance


def _canonical(pairs: np.ndarray) -> np.ndarray:
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    order = np.lexsort((hi, lo))
    return np.stack([lo[order], hi[order]], axis=1)


def _permute_tsp(inst, perm):
    """Relabeled copy: new node i is old node perm[i]."""
    inv = np.empty(inst.n, dtype=np.int64)
    inv[perm] = np.arange(inst.n)
    edges = _canonical(inv[inst.edges])
    relabeled = TspInstance(
        n=inst.n, coords=inst.coords[perm], edges=edges, k=inst.k
    )
    return relabeled, inv


def test_tsp_forward_equivariant_under_relabeling():
    inst = rd.generate_tsp(11, "uniform", seed=9, k=6)
    params = init_params(np.random.default_rng(10), 2, 2, L=3, W=16, zero_heads=False)
    state = _tsp_state(inst, seed=11)
    base = gnn_forward(params, inst, state)
    rng = np.random.default_rng(12)
    for _ in range(20):
        perm = rng.permutation(inst.n)
        inst_p, inv = _permute_tsp(inst, perm)
        var_map = np.array(
            [inst_p.edge_index(int(inv[a]), int(inv[b])) for a, b in inst.edges]
        )
        assert (var_map >= 0).all()
        x_p = np.empty_like(state.x)
        x_p[var_map] = state.x
        out_p = gnn_forward(params, inst_p, DiffusionState(x=x_p, t=state.t))
        assert np.max(np.abs(out_p.x_res_hat[var_map] - base.x_res_hat)) < 1e-9
        assert np.max(np.abs(out_p.eps_hat[var_map] - base.eps_hat)) < 1e-9


def test_mis_forward_equivariant_under_relabeling():
    inst = rd.generate_er(13, 0.35, seed=13)
    params = init_params(np.random.default_rng(14), 2, 1, L=3, W=16, zero_heads=False)
    x = np.random.default_rng(15).standard_normal(inst.n)
    base = gnn_forward(params, inst, DiffusionState(x=x, t=0.61))
    rng = np.random.default_rng(16)
    for _ in range(20):
        perm = rng.permutation(inst.n)
        inv = np.empty(inst.n, dtype=np.int64)
        inv[perm] = np.arange(inst.n)
        inst_p = build_mis_instance(inst.n, _canonical(inv[inst.edges]))
        out_p = gnn_forward(
            params, inst_p, DiffusionState(x=x[perm], t=0.61)
        )
        # new node i carries old node perm[i]'s prediction
        assert np.max(np.abs(out_p.x_res_hat - base.x_res_hat[perm])) < 1e-9
        assert np.max(np.abs(out_p.eps_hat - base.eps_hat[perm])) < 1e-9


# ------------------------------------------------------- width doubling


def _embed_wider(small: NetParams) -> NetParams:
    """2W-wide net computing the same function as the W-wide one."""
    W = small.W
    big = init_params(
        np.random.default_rng(0), small.d_node, small.d_edge, L=small.L, W=2 * W
    )

    def pad_rows(a):
        out = np.zeros((2 * W, a.shape[1]))
        out[:W] = a
        return out

    def pad_vec(v):
        out = np.zeros(2 * W)
        out[:W] = v
        return out

    def pad_block(a):
        out = np.zeros((2 * W, 2 * W))
        out[:W, :W] = a
        return out

    big.node_in_w = pad_rows(small.node_in_w)
    big.node_in_b = pad_vec(small.node_in_b)
    big.edge_in_w = pad_rows(small.edge_in_w)
    big.edge_in_b = pad_vec(small.edge_in_b)
    root2 = math.sqrt(2.0)
    for bl, sl in zip(big.layers, small.layers):
        for nm in ("P", "Q", "R", "T", "U", "V"):
            setattr(bl, nm, pad_block(getattr(sl, nm)))
        bl.be = pad_vec(sl.be)
        bl.bn = pad_vec(sl.bn)
        # RMS over 2W channels halves the mean square, so gains shrink
        bl.ge = pad_vec(sl.ge / root2)
        bl.gn = pad_vec(sl.gn / root2)
    big.out_g = pad_vec(small.out_g / root2)
    big.head_res_w = pad_vec(small.head_res_w)
    big.head_res_b = small.head_res_b.copy()
    big.head_eps_w = pad_vec(small.head_eps_w)
    big.head_eps_b = small.head_eps_b.copy()
    return big


def test_width_doubling_embedding_matches():
    tsp = rd.generate_tsp(10, "uniform", seed=17, k=6)
    mis = rd.generate_er(12, 0.3, seed=18)
    for inst, dims in ((tsp, (2, 2)), (mis, (2, 1))):
        small = init_params(
            np.random.default_rng(19), *dims, L=2, W=8, zero_heads=False
        )
        big = _embed_wider(small)
        for seed in range(4):
            state = _tsp_state(inst, seed=20 + seed)
            a = gnn_forward(small, inst, state)
            b = gnn_forward(big, inst, state)
            assert np.max(np.abs(a.x_res_hat - b.x_res_hat)) < 1e-9
            assert np.max(np.abs(a.eps_hat - b.eps_hat)) < 1e-9


# ----------------------------------------------------------- checkpoint


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    params = init_params(np.random.default_rng(21), 2, 2, L=3, W=16, zero_heads=False)
    path = tmp_path / "net.bin"
    save_params(path, params)
    loaded = load_params(path)
    assert (loaded.L, loaded.W) == (params.L, params.W)
    assert (loaded.d_node, loaded.d_edge) == (params.d_node, params.d_edge)
    for (na, a), (nb, b) in zip(params.tensors(), loaded.tensors()):
        assert na == nb
        assert np.array_equal(a, b), na


def test_checkpoint_rejects_corruption(tmp_path):
    params = init_params(np.random.default_rng(22), 2, 2, L=1, W=8)
    path = tmp_path / "net.bin"
    save_params(path, params)
    blob = path.read_bytes()

    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ValueError, match="magic"):
        load_params(bad_magic)

    bad_version = tmp_path / "version.bin"
    bad_version.write_bytes(blob[:4] + bytes([99]) + blob[5:])
    with pytest.raises(ValueError, match="version"):
        load_params(bad_version)

    truncated = tmp_path / "short.bin"
    truncated.write_bytes(blob[:-16])
    with pytest.raises(ValueError, match="truncated"):
        load_params(truncated)

    padded = tmp_path / "long.bin"
    padded.write_bytes(blob + b"\x00" * 8)
    with pytest.raises(ValueError, match="trailing"):
        load_params(padded)
