"""Residue/noise predictor: a small anisotropic graph network in numpy.

The forward pass is written once with full caching so the hand-derived
backward pass can replay it exactly; finite differences validate the pair.
Undirected edges are stored as two directed copies, which keeps every
message function a plain gather/matmul/scatter and makes node relabeling
an exact symmetry of the computation.

Activation is SiLU and normalization is RMS with a learned gain; both are
smooth, so central finite differences converge cleanly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .diffusion import DiffusionState, ShapeError
from .instances import MisInstance, SolutionVector, TspInstance

NORM_EPS = 1e-12
TIME_SCALE = 30.0
FREQ_BASE = 64.0

TSP_NODE_DIM, TSP_EDGE_DIM = 2, 2
MIS_NODE_DIM, MIS_EDGE_DIM = 2, 1


@dataclass(eq=False)
class DenoiserOutput:
    """Predicted residue and noise, one entry per variable."""

    x_res_hat: np.ndarray
    eps_hat: np.ndarray

    def __post_init__(self):
        self.x_res_hat = np.asarray(self.x_res_hat, dtype=np.float64)
        self.eps_hat = np.asarray(self.eps_hat, dtype=np.float64)
        if not (
            np.all(np.isfinite(self.x_res_hat)) and np.all(np.isfinite(self.eps_hat))
        ):
            raise ValueError("denoiser output must be finite")


@dataclass(eq=False)
class LayerParams:
    """One message-passing layer.

    Edge stream: e' = e + silu(rms(P e + Q u_src + R u_dst + T emb + be) * ge)
    Node stream: u' = u + silu(rms(U u + sum_in sigmoid(e') * (V u_src) + bn) * gn)

    The gate is the parameter-free sigmoid of the updated edge embedding.
    """

    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    be: np.ndarray
    ge: np.ndarray
    T: np.ndarray
    U: np.ndarray
    V: np.ndarray
    bn: np.ndarray
    gn: np.ndarray


@dataclass(eq=False)
class NetParams:
    """All trainable tensors plus the shape metadata they imply."""

    L: int
    W: int
    d_node: int
    d_edge: int
    node_in_w: np.ndarray
    node_in_b: np.ndarray
    edge_in_w: np.ndarray
    edge_in_b: np.ndarray
    layers: list = field(default_factory=list)
    out_g: np.ndarray = None
    head_res_w: np.ndarray = None
    head_res_b: np.ndarray = None
    head_eps_w: np.ndarray = None
    head_eps_b: np.ndarray = None

    def tensors(self):
        """(name, array) pairs in the fixed declaration order used by the
        checkpoint format and the optimizer."""
        yield "node_in_w", self.node_in_w
        yield "node_in_b", self.node_in_b
        yield "edge_in_w", self.edge_in_w
        yield "edge_in_b", self.edge_in_b
        for i, lay in enumerate(self.layers):
            for nm in ("P", "Q", "R", "be", "ge", "T", "U", "V", "bn", "gn"):
                yield f"layers.{i}.{nm}", getattr(lay, nm)
        yield "out_g", self.out_g
        yield "head_res_w", self.head_res_w
        yield "head_res_b", self.head_res_b
        yield "head_eps_w", self.head_eps_w
        yield "head_eps_b", self.head_eps_b

    def num_params(self) -> int:
        return sum(a.size for _, a in self.tensors())


def init_params(
    rng: np.random.Generator,
    d_node: int,
    d_edge: int,
    L: int = 4,
    W: int = 64,
    zero_heads: bool = True,
) -> NetParams:
    """Random dense weights at 1/sqrt(fan_in) scale, unit gains, zero
    biases.  Output heads start at zero so the untrained net predicts 0;
    zero_heads=False randomizes them too (useful for gradient checks,
    where zero heads make interior gradients vanish identically)."""

    def dense(rows: int, cols: int) -> np.ndarray:
        return rng.standard_normal((rows, cols)) / np.sqrt(cols)

    layers = [
        LayerParams(
            P=dense(W, W),
            Q=dense(W, W),
            R=dense(W, W),
            be=np.zeros(W),
            ge=np.ones(W),
            T=dense(W, W),
            U=dense(W, W),
            V=dense(W, W),
            bn=np.zeros(W),
            gn=np.ones(W),
        )
        for _ in range(L)
    ]
    return NetParams(
        L=L,
        W=W,
        d_node=d_node,
        d_edge=d_edge,
        node_in_w=dense(W, d_node),
        node_in_b=np.zeros(W),
        edge_in_w=dense(W, d_edge),
        edge_in_b=np.zeros(W),
        layers=layers,
        out_g=np.ones(W),
        head_res_w=np.zeros(W) if zero_heads else rng.standard_normal(W) / np.sqrt(W),
        head_res_b=np.zeros(1),
        head_eps_w=np.zeros(W) if zero_heads else rng.standard_normal(W) / np.sqrt(W),
        head_eps_b=np.zeros(1),
    )


def params_for(inst, L: int = 4, W: int = 64, seed: int = 0) -> NetParams:
    rng = np.random.default_rng(seed)
    if isinstance(inst, TspInstance):
        return init_params(rng, TSP_NODE_DIM, TSP_EDGE_DIM, L=L, W=W)
    return init_params(rng, MIS_NODE_DIM, MIS_EDGE_DIM, L=L, W=W)


def sinusoidal_embedding(t: float, dim: int) -> np.ndarray:
    """Interleaved sin/cos channels of TIME_SCALE * t.

    Channel frequency depends on the absolute channel index (decay base
    FREQ_BASE), so widening the embedding appends channels instead of
    reshuffling frequencies; a wide net can then embed a narrow one.
    """
    m = np.arange(dim // 2)
    arg = TIME_SCALE * t * np.power(10000.0, -m / FREQ_BASE)
    emb = np.empty(dim)
    emb[0::2] = np.sin(arg)
    emb[1::2] = np.cos(arg)
    return emb


@dataclass(eq=False)
class FeatStruct:
    """Static per-instance tensors feeding the network.

    src/dst list each undirected pair twice, once per direction.  For TSP
    the variable of directed edge d is var_of_edge[d]; variable embeddings
    average the two directions.  For MIS variables are the nodes.
    """

    kind: str
    n_nodes: int
    node_static: np.ndarray
    edge_static: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    var_of_edge: np.ndarray | None


def build_feats(inst) -> FeatStruct:
    if isinstance(inst, TspInstance):
        e = inst.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        lengths = inst.edge_lengths()
        edge_static = np.zeros((2 * e.shape[0], TSP_EDGE_DIM))
        edge_static[:, 0] = np.concatenate([lengths, lengths])
        var_of_edge = np.concatenate([np.arange(e.shape[0])] * 2)
        return FeatStruct(
            kind="tsp",
            n_nodes=inst.n,
            node_static=inst.coords.copy(),
            edge_static=edge_static,
            src=src,
            dst=dst,
            var_of_edge=var_of_edge,
        )
    if isinstance(inst, MisInstance):
        e = inst.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        node_static = np.zeros((inst.n, MIS_NODE_DIM))
        node_static[:, 0] = inst.degrees() / max(inst.n - 1, 1)
        return FeatStruct(
            kind="mis",
            n_nodes=inst.n,
            node_static=node_static,
            edge_static=np.ones((2 * e.shape[0], MIS_EDGE_DIM)),
            src=src,
            dst=dst,
            var_of_edge=None,
        )
    raise TypeError(f"unsupported instance type {type(inst).__name__}")


def _assemble(fs: FeatStruct, x_t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if fs.kind == "tsp":
        Xe = fs.edge_static.copy()
        Xe[:, 1] = x_t[fs.var_of_edge]
        return fs.node_static, Xe
    Xn = fs.node_static.copy()
    Xn[:, 1] = x_t
    return Xn, fs.edge_static


def _silu(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = 1.0 / (1.0 + np.exp(-y))
    return y * s, s


def _silu_grad(y: np.ndarray, s: np.ndarray) -> np.ndarray:
    return s * (1.0 + y * (1.0 - s))


def _rms(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    inv = 1.0 / np.sqrt(np.mean(p * p, axis=1, keepdims=True) + NORM_EPS)
    return p * inv, inv


def _rms_grad(
    dxh: np.ndarray, p: np.ndarray, inv: np.ndarray, width: int
) -> np.ndarray:
    s = np.sum(dxh * p, axis=1, keepdims=True)
    return inv * dxh - (inv**3 / width) * s * p


def _forward(params: NetParams, fs: FeatStruct, x_t: np.ndarray, t: float):
    """Full pass with caches sufficient for the backward sweep."""
    Xn, Xe = _assemble(fs, x_t)
    emb = sinusoidal_embedding(t, params.W)
    N = Xn @ params.node_in_w.T + params.node_in_b
    E = Xe @ params.edge_in_w.T + params.edge_in_b
    cache = {"Xn": Xn, "Xe": Xe, "emb": emb, "N0": N, "E0": E, "layers": []}

    for lay in params.layers:
        Ns, Nd = N[fs.src], N[fs.dst]
        pe = E @ lay.P.T + Ns @ lay.Q.T + Nd @ lay.R.T + lay.T @ emb + lay.be
        xe, inv_e = _rms(pe)
        ye = xe * lay.ge
        ae, sig_e = _silu(ye)
        E1 = E + ae
        gate = 1.0 / (1.0 + np.exp(-E1))
        H = Ns @ lay.V.T
        msg = gate * H
        agg = np.zeros_like(N)
        kernels.scatter_add_rows(agg, fs.dst, msg)
        pn = N @ lay.U.T + agg + lay.bn
        xn, inv_n = _rms(pn)
        yn = xn * lay.gn
        an, sig_n = _silu(yn)
        N1 = N + an
        cache["layers"].append(
            dict(
                E=E, N=N, pe=pe, xe=xe, inv_e=inv_e, ye=ye, sig_e=sig_e,
                E1=E1, gate=gate, H=H, pn=pn, xn=xn, inv_n=inv_n, yn=yn,
                sig_n=sig_n,
            )
        )
        E, N = E1, N1

    if fs.kind == "tsp":
        half = E.shape[0] // 2
        var = 0.5 * (E[:half] + E[half:])
    else:
        var = N
    # normalize the pooled stream so head gradients stay O(1) per row
    varn, inv_v = _rms(var)
    varh = varn * params.out_g
    res = varh @ params.head_res_w + params.head_res_b[0]
    eps = varh @ params.head_eps_w + params.head_eps_b[0]
    cache["var"] = var
    cache["inv_v"] = inv_v
    cache["varh"] = varh
    cache["E_out"] = E
    cache["N_out"] = N
    return res, eps, cache


def _backward(
    params: NetParams,
    fs: FeatStruct,
    cache: dict,
    dres: np.ndarray,
    deps: np.ndarray,
) -> dict:
    """Exact gradients of every tensor given head output gradients."""
    W = params.W
    var, varh = cache["var"], cache["varh"]
    grads = {
        "head_res_w": varh.T @ dres,
        "head_res_b": np.array([dres.sum()]),
        "head_eps_w": varh.T @ deps,
        "head_eps_b": np.array([deps.sum()]),
    }
    dvarh = np.outer(dres, params.head_res_w) + np.outer(deps, params.head_eps_w)
    grads["out_g"] = np.sum(dvarh * var * cache["inv_v"], axis=0)
    dvar = _rms_grad(dvarh * params.out_g, var, cache["inv_v"], W)
    if fs.kind == "tsp":
        half = cache["E_out"].shape[0] // 2
        dE = np.zeros_like(cache["E_out"])
        dE[:half] = 0.5 * dvar
        dE[half:] = 0.5 * dvar
        dN = np.zeros_like(cache["N_out"])
    else:
        dE = np.zeros_like(cache["E_out"])
        dN = dvar.copy()

    for i in range(params.L - 1, -1, -1):
        lay = params.layers[i]
        c = cache["layers"][i]
        Ns, Nd = c["N"][fs.src], c["N"][fs.dst]

        # node stream: N1 = N + silu(rms(pn) * gn)
        dyn = dN * _silu_grad(c["yn"], c["sig_n"])
        grads[f"layers.{i}.gn"] = np.sum(dyn * c["xn"], axis=0)
        dpn = _rms_grad(dyn * lay.gn, c["pn"], c["inv_n"], W)
        grads[f"layers.{i}.U"] = dpn.T @ c["N"]
        grads[f"layers.{i}.bn"] = dpn.sum(axis=0)
        dN_next = dN + dpn @ lay.U

        dmsg = dpn[fs.dst]
        dgate = dmsg * c["H"]
        dH = dmsg * c["gate"]
        grads[f"layers.{i}.V"] = dH.T @ Ns
        dNs_total = dH @ lay.V

        # edge stream: E1 feeds both the gate and the next layer
        dE1 = dE + dgate * c["gate"] * (1.0 - c["gate"])
        dye = dE1 * _silu_grad(c["ye"], c["sig_e"])
        grads[f"layers.{i}.ge"] = np.sum(dye * c["xe"], axis=0)
        dpe = _rms_grad(dye * lay.ge, c["pe"], c["inv_e"], W)
        grads[f"layers.{i}.P"] = dpe.T @ c["E"]
        grads[f"layers.{i}.Q"] = dpe.T @ Ns
        grads[f"layers.{i}.R"] = dpe.T @ Nd
        grads[f"layers.{i}.be"] = dpe.sum(axis=0)
        grads[f"layers.{i}.T"] = np.outer(dpe.sum(axis=0), cache["emb"])
        dE = dE1 + dpe @ lay.P

        dNs_total = dNs_total + dpe @ lay.Q
        dNd_total = dpe @ lay.R
        kernels.scatter_add_rows(dN_next, fs.src, dNs_total)
        kernels.scatter_add_rows(dN_next, fs.dst, dNd_total)
        dN = dN_next

    grads["node_in_w"] = dN.T @ cache["Xn"]
    grads["node_in_b"] = dN.sum(axis=0)
    grads["edge_in_w"] = dE.T @ cache["Xe"]
    grads["edge_in_b"] = dE.sum(axis=0)
    return grads


def _check_dims(params: NetParams, fs: FeatStruct) -> None:
    if params.d_node != fs.node_static.shape[1] or (
        params.d_edge != fs.edge_static.shape[1]
    ):
        raise ShapeError(
            f"params built for feature dims ({params.d_node}, {params.d_edge}), "
            f"instance provides ({fs.node_static.shape[1]}, {fs.edge_static.shape[1]})"
        )


def gnn_forward(params: NetParams, inst, state: DiffusionState) -> DenoiserOutput:
    """Predict (x_res, eps) for the given noisy state."""
    fs = build_feats(inst)
    return forward_on_feats(params, fs, inst, state)


def forward_on_feats(
    params: NetParams, fs: FeatStruct, inst, state: DiffusionState
) -> DenoiserOutput:
    """gnn_forward with a precomputed FeatStruct (hot loop entry point)."""
    if state.x.shape[0] != inst.num_variables:
        raise ShapeError(
            f"state has {state.x.shape[0]} variables, instance {inst.num_variables}"
        )
    _check_dims(params, fs)
    res, eps, _ = _forward(params, fs, state.x, state.t)
    return DenoiserOutput(x_res_hat=res, eps_hat=eps)


def oracle_denoiser(state: DiffusionState, truth) -> DenoiserOutput:
    """Ground-truth predictor: returns (X_d - x0, eps) exactly as given."""
    x0, X_d, eps = truth
    return DenoiserOutput(x_res_hat=X_d.values - x0.values, eps_hat=eps)


def make_oracle(x0: SolutionVector, X_d: SolutionVector, eps: np.ndarray):
    """Adapt oracle_denoiser to the sampling interface (inst, state)."""

    def denoiser(inst, state: DiffusionState) -> DenoiserOutput:
        return oracle_denoiser(state, (x0, X_d, eps))

    return denoiser


MAGIC = b"RDNP"
VERSION = 1


def save_params(path, params: NetParams) -> None:
    """Binary checkpoint: magic, version, (L, W, d_node, d_edge) as
    little-endian int32, then each tensor's float64 bytes in tensors() order."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<B", VERSION))
        f.write(
            struct.pack("<4i", params.L, params.W, params.d_node, params.d_edge)
        )
        for _, a in params.tensors():
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path) -> NetParams:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError("not a parameter checkpoint (bad magic)")
    (version,) = struct.unpack_from("<B", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    L, W, d_node, d_edge = struct.unpack_from("<4i", blob, 5)
    params = init_params(np.random.default_rng(0), d_node, d_edge, L=L, W=W)
    off = 5 + 16
    for _, a in params.tensors():
        nbytes = a.size * 8
        if off + nbytes > len(blob):
            raise ValueError("checkpoint truncated")
        flat = np.frombuffer(blob, dtype="<f8", count=a.size, offset=off)
        a[...] = flat.reshape(a.shape)
        off += nbytes
    if off != len(blob):
        raise ValueError("checkpoint has trailing bytes")
    return params
