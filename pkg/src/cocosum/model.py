"""GRU encoders, the multi-relational graph encoder and the attention decoder.

All computations are batched: a :class:`Batch` holds padded id matrices with
boolean masks, plus one disjoint union of the class subgraphs its instances
reside in. Masked positions never receive attention mass.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import tensor as T
from .preprocess import BOS, EOS, PAD, SummarizationInstance, Vocab
from .tensor import Tensor
from .uml import RELATIONS, UmlGraph, subgraph_for_method

GATES = ("r", "z", "n")


@dataclass
class Config:
    code_vocab: int = 10_000
    sbt_vocab: int = 10_000
    summary_vocab: int = 10_000
    embed_dim: int = 128
    hidden_dim: int = 256
    class_dim: int = 512
    gnn_dim: int = 256
    gnn_layers: int = 2
    dropout: float = 0.5
    max_code_len: int = 150
    max_sbt_len: int = 500
    max_summary_len: int = 30
    leaky_slope: float = 0.2
    radius: int = 2
    precision: str = "single"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            if f.type in ("int", int) and getattr(self, f.name) <= 0 and f.name != "radius":
                raise ValueError(f"config {f.name} must be positive, got {getattr(self, f.name)}")
        if self.radius < 0:
            raise ValueError("config radius must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.precision not in T.DTYPES:
            raise ValueError(f"precision must be one of {sorted(T.DTYPES)}")

    @property
    def dtype(self):
        return T.DTYPES[self.precision]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Vocabs:
    code: Vocab
    sbt: Vocab
    summary: Vocab


@dataclass
class GruParams:
    W_r: Tensor
    W_hr: Tensor
    W_z: Tensor
    W_hz: Tensor
    W_n: Tensor
    W_hn: Tensor
    b_r: Tensor
    b_hr: Tensor
    b_z: Tensor
    b_hz: Tensor
    b_n: Tensor
    b_hn: Tensor

    @classmethod
    def view(cls, params: dict[str, Tensor], prefix: str) -> "GruParams":
        return cls(**{f.name: params[f"{prefix}.{f.name}"] for f in fields(cls)})


@dataclass
class MrgnnLayerParams:
    W_a: list[Tensor]
    gamma: list[Tensor]
    gamma_b: list[Tensor]
    W_h: list[Tensor]
    W_c: list[Tensor]
    W_d: list[Tensor]
    W_b: Tensor

    @classmethod
    def view(cls, params: dict[str, Tensor], layer: int) -> "MrgnnLayerParams":
        per = {k: [params[f"mrgnn.{layer}.{r.value}.{k}"] for r in RELATIONS]
               for k in ("W_a", "gamma", "gamma_b", "W_h", "W_c", "W_d")}
        return cls(W_b=params[f"mrgnn.{layer}.W_b"], **per)


@dataclass
class EncodedContext:
    H_code: Tensor  # (B, T_c, H)
    code_mask: np.ndarray
    H_sbt: Tensor  # (B, T_a, H)
    sbt_mask: np.ndarray
    h_class: Tensor  # h^(l), (B, d_l)
    h_graph: Tensor  # h^(g), (B, gnn)
    h_init: Tensor  # decoder start state, (B, H)
    _cache: dict = field(default_factory=dict, repr=False)


def parameter_shapes(cfg: Config) -> dict[str, tuple[int, ...]]:
    E, H, L, G = cfg.embed_dim, cfg.hidden_dim, cfg.class_dim, cfg.gnn_dim
    shapes: dict[str, tuple[int, ...]] = {}

    def gru(prefix: str, n_in: int) -> None:
        for g in GATES:
            shapes[f"{prefix}.W_{g}"] = (n_in, H)
            shapes[f"{prefix}.W_h{g}"] = (H, H)
            shapes[f"{prefix}.b_{g}"] = (H,)
            shapes[f"{prefix}.b_h{g}"] = (H,)

    shapes["code.embed"] = (cfg.code_vocab, E)
    gru("code.gru", E)
    shapes["sbt.embed"] = (cfg.sbt_vocab, E)
    gru("sbt.gru", E)
    shapes["class.embed"] = (cfg.code_vocab, E)
    shapes["class.proj"] = (E, L)
    for layer in range(cfg.gnn_layers):
        d_in = L if layer == 0 else G
        for r in RELATIONS:
            pre = f"mrgnn.{layer}.{r.value}"
            shapes[f"{pre}.W_a"] = (d_in, G)
            shapes[f"{pre}.gamma"] = (2 * G, 1)
            shapes[f"{pre}.gamma_b"] = (1,)
            shapes[f"{pre}.W_h"] = (d_in, G)
            shapes[f"{pre}.W_c"] = (G, G)
            shapes[f"{pre}.W_d"] = (G, G)
        shapes[f"mrgnn.{layer}.W_b"] = (d_in, G)
    shapes["dec.embed"] = (cfg.summary_vocab, E)
    gru("dec.gru", E)
    # q_t projections and the alignment maps of the multi-modal attention
    shapes["dec.V_c"] = (H, H)
    shapes["dec.V_a"] = (H, H)
    shapes["dec.V_l"] = (L, H)
    shapes["dec.V_g"] = (G, H)
    shapes["dec.A_c"] = (H, H)
    shapes["dec.A_a"] = (H, H)
    shapes["dec.A_l"] = (L, H)
    shapes["dec.A_g"] = (G, H)
    shapes["dec.A_s"] = (H, H)
    shapes["dec.f.W"] = (2 * H, cfg.summary_vocab)
    shapes["dec.f.b"] = (cfg.summary_vocab,)
    return shapes


def _is_bias(name: str) -> bool:
    leaf = name.rsplit(".", 1)[-1]
    return leaf.startswith("b_") or leaf in ("b", "gamma_b")


def init_params(cfg: Config, rng: np.random.Generator) -> dict[str, Tensor]:
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        if _is_bias(name):
            data = np.zeros(shape, dtype=cfg.dtype)
        else:
            limit = math.sqrt(6.0 / (shape[0] + shape[-1]))
            data = rng.uniform(-limit, limit, size=shape).astype(cfg.dtype)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


# ---------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    ids: list[str]
    code_ids: np.ndarray
    code_mask: np.ndarray
    sbt_ids: np.ndarray
    sbt_mask: np.ndarray
    dec_in: np.ndarray
    dec_out: np.ndarray
    dec_mask: np.ndarray
    node_tokens: np.ndarray
    node_mask: np.ndarray
    node_names: list[str]
    adjacency: np.ndarray  # (R, N, N) bool, symmetrized with self-loops
    enclosing: np.ndarray  # (B,) index into the node axis

    def __len__(self) -> int:
        return len(self.ids)


def _pad(seqs: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(1, max(len(s) for s in seqs))
    ids = np.full((len(seqs), width), PAD, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask


def relation_adjacency(graph: UmlGraph) -> np.ndarray:
    """Per-relation symmetric adjacency with self-loops, shape (R, N, N)."""
    n = len(graph)
    adj = np.zeros((len(RELATIONS), n, n), dtype=bool)
    rel_pos = {r: k for k, r in enumerate(RELATIONS)}
    for s, d, r in graph.edges:
        i, j = graph.position(s), graph.position(d)
        adj[rel_pos[r], i, j] = adj[rel_pos[r], j, i] = True
    idx = np.arange(n)
    adj[:, idx, idx] = True
    return adj


def make_batch(
    instances: list[SummarizationInstance],
    graphs: dict[str, UmlGraph],
    vocabs: Vocabs,
    cfg: Config,
    with_targets: bool = True,
) -> Batch:
    if not instances:
        raise ValueError("empty batch")
    code = [vocabs.code.encode(x.code_tokens, cfg.max_code_len) for x in instances]
    sbt = [vocabs.sbt.encode(x.sbt_tokens, cfg.max_sbt_len) for x in instances]
    if any(not s for s in code) or any(not s for s in sbt):
        raise ValueError("code and SBT sequences must be non-empty")
    code_ids, code_mask = _pad(code)
    sbt_ids, sbt_mask = _pad(sbt)
    if with_targets:
        summ = [vocabs.summary.encode(x.summary_tokens, cfg.max_summary_len) for x in instances]
        dec_in, dec_mask = _pad([[BOS] + s for s in summ])
        dec_out, _ = _pad([s + [EOS] for s in summ])
    else:
        dec_in = dec_out = np.full((len(instances), 1), BOS, dtype=np.int64)
        dec_mask = np.ones((len(instances), 1), dtype=bool)

    # one disjoint copy per distinct (graph, enclosing class) subgraph
    blocks: dict[tuple[str, int], tuple[int, UmlGraph]] = {}
    offset = 0
    enclosing = []
    for x in instances:
        key = (x.uml_graph_id, x.enclosing_class_node_id)
        if key not in blocks:
            if x.uml_graph_id not in graphs:
                raise KeyError(f"instance {x.id}: unknown UML graph {x.uml_graph_id!r}")
            sub = subgraph_for_method(graphs[x.uml_graph_id], x.enclosing_class_node_id, cfg.radius)
            blocks[key] = (offset, sub)
            offset += len(sub)
        start, sub = blocks[key]
        enclosing.append(start + sub.position(x.enclosing_class_node_id))
    n = offset
    adjacency = np.zeros((len(RELATIONS), n, n), dtype=bool)
    names: list[str] = []
    toks: list[list[int]] = []
    for start, sub in blocks.values():
        k = len(sub)
        adjacency[:, start : start + k, start : start + k] = relation_adjacency(sub)
        names.extend(sub.names)
        for nt in sub.name_tokens:
            ids = vocabs.code.encode(nt)
            toks.append(ids or [vocabs.code.stoi.get("<unk>", 1)])
    node_tokens, node_mask = _pad(toks)
    return Batch(
        ids=[x.id for x in instances],
        code_ids=code_ids,
        code_mask=code_mask,
        sbt_ids=sbt_ids,
        sbt_mask=sbt_mask,
        dec_in=dec_in,
        dec_out=dec_out,
        dec_mask=dec_mask,
        node_tokens=node_tokens,
        node_mask=node_mask,
        node_names=names,
        adjacency=adjacency,
        enclosing=np.asarray(enclosing, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# building blocks


def _stack_time(states: list[Tensor]) -> Tensor:
    b, h = states[0].shape
    return T.concat([s.reshape(b, 1, h) for s in states], axis=1)


def gru_cell(x: Tensor, h: Tensor, p: GruParams) -> Tensor:
    r = T.sigmoid(x @ p.W_r + p.b_r + h @ p.W_hr + p.b_hr)
    z = T.sigmoid(x @ p.W_z + p.b_z + h @ p.W_hz + p.b_hz)
    n = T.tanh(x @ p.W_n + p.b_n + r * (h @ p.W_hn + p.b_hn))
    return (1.0 - z) * n + z * h


def gru_sequence(x: Tensor, mask: np.ndarray, p: GruParams, h0: Tensor) -> list[Tensor]:
    """Run a GRU over ``x`` (B, T, E); padded steps carry the previous state."""
    steps = x.shape[1]
    # input projections for all steps at once; b_hr/b_hz fold in here too
    xr = x @ p.W_r + (p.b_r + p.b_hr)
    xz = x @ p.W_z + (p.b_z + p.b_hz)
    xn = x @ p.W_n + p.b_n
    h = h0
    out = []
    dtype = x.dtype
    for t in range(steps):
        r = T.sigmoid(xr[:, t] + h @ p.W_hr)
        z = T.sigmoid(xz[:, t] + h @ p.W_hz)
        n = T.tanh(xn[:, t] + r * (h @ p.W_hn + p.b_hn))
        new = (1.0 - z) * n + z * h
        m = mask[:, t]
        if not m.all():
            keep = m[:, None].astype(dtype)
            new = new * keep + h * (1.0 - keep)
        h = new
        out.append(h)
    return out


def gru_forward(ids, embed: Tensor, params: GruParams, h0: Tensor | None = None) -> list[Tensor]:
    """Hidden states h_1..h_T for one token id sequence."""
    ids = np.asarray(ids, dtype=np.int64).reshape(1, -1)
    if ids.size == 0:
        raise ValueError("GRU input must contain at least one token")
    hidden = params.W_hr.shape[0]
    if h0 is None:
        h0 = Tensor(np.zeros((1, hidden), dtype=embed.dtype))
    elif h0.ndim == 1:
        h0 = h0.reshape(1, hidden)
    x = T.take_rows(embed, ids)
    states = gru_sequence(x, np.ones(ids.shape, dtype=bool), params, h0)
    return [s.reshape(hidden) for s in states]


def class_semantic_embed_batch(
    token_ids: np.ndarray,
    mask: np.ndarray,
    embed: Tensor,
    proj: Tensor,
    precomputed: list[np.ndarray | None] | None = None,
) -> Tensor:
    emb = T.take_rows(embed, token_ids)  # (N, L, E)
    counts = mask.sum(axis=1, keepdims=True)
    if (counts == 0).any():
        raise ValueError("class name with no tokens")
    weights = (mask / counts).astype(embed.dtype)[:, :, None]
    out = (emb * weights).sum(axis=1) @ proj
    if precomputed is not None and any(v is not None for v in precomputed):
        keep = np.array([[v is None] for v in precomputed], dtype=embed.dtype)
        fixed = np.stack([
            np.zeros(out.shape[1], dtype=embed.dtype) if v is None else np.asarray(v, dtype=embed.dtype)
            for v in precomputed
        ])
        out = out * keep + Tensor(fixed)
    return out


def class_semantic_embed(
    token_ids, embed: Tensor, proj: Tensor, precomputed: np.ndarray | None = None
) -> Tensor:
    """h^(l) for one class name: projected mean of its subtoken embeddings."""
    if precomputed is not None:
        return Tensor(np.asarray(precomputed, dtype=embed.dtype))
    ids = np.asarray(token_ids, dtype=np.int64).reshape(1, -1)
    if ids.size == 0:
        raise ValueError("class name with no tokens")
    out = class_semantic_embed_batch(ids, np.ones(ids.shape, dtype=bool), embed, proj)
    return out.reshape(proj.shape[1])


def mrgnn_layer(
    H_g: Tensor,
    H_r: list[Tensor],
    adjacency: np.ndarray,
    params: MrgnnLayerParams,
    slope: float = 0.2,
    trace: dict | None = None,
) -> tuple[Tensor, list[Tensor]]:
    """One layer of inner (per relation) and outer (across relations) attention.

    ``adjacency`` is (R, N, N) boolean and must include self-loops. Returns
    the updated general embeddings and the relation-specific embeddings that
    feed the next layer.
    """
    n = H_g.shape[0]
    if adjacency.shape != (len(RELATIONS), n, n):
        raise ValueError(f"adjacency shape {adjacency.shape} does not match {n} nodes")
    if not adjacency[:, np.arange(n), np.arange(n)].all():
        raise ValueError("adjacency must contain a self-loop for every node and relation")
    new_r = []
    alphas = []
    for k in range(len(RELATIONS)):
        proj = H_r[k] @ params.W_a[k]  # W_a h, (N, G)
        dim = proj.shape[1]
        gamma = params.gamma[k]
        # Γ(W_a h_i ⊕ W_a h_j) = γ_left·W_a h_i + γ_right·W_a h_j + b
        left = proj @ gamma[:dim]
        right = proj @ gamma[dim:]
        logits = T.leaky_relu(left + T.transpose(right) + params.gamma_b[k], slope)
        alpha = T.softmax(logits, axis=1, mask=adjacency[k])
        alphas.append(alpha)
        new_r.append(T.leaky_relu(alpha @ (H_r[k] @ params.W_h[k]), slope))
    u = H_g @ params.W_b
    scores = [(u * (h @ params.W_c[k])).sum(axis=1, keepdims=True) for k, h in enumerate(new_r)]
    beta = T.softmax(T.concat(scores, axis=1), axis=1)
    mixed = None
    for k, h in enumerate(new_r):
        term = beta[:, k : k + 1] * (h @ params.W_d[k])
        mixed = term if mixed is None else mixed + term
    if trace is not None:
        trace.setdefault("alpha", []).append(np.stack([a.data for a in alphas]))
        trace.setdefault("beta", []).append(beta.data)
    return T.leaky_relu(mixed, slope), new_r


def mrgnn(
    H0: Tensor,
    adjacency: np.ndarray,
    layers: list[MrgnnLayerParams],
    slope: float = 0.2,
    trace: dict | None = None,
) -> Tensor:
    """Stacked layers; relation-specific inputs of the first layer copy H0."""
    H_g = H0
    H_r = [H0] * len(RELATIONS)
    for p in layers:
        H_g, H_r = mrgnn_layer(H_g, H_r, adjacency, p, slope, trace)
    return H_g


def sequence_loss(step_probs: list[Tensor], targets, mask=None, floor: float = 1e-12) -> Tensor:
    """Mean over steps of -log p(target), averaged over the batch.

    ``step_probs`` holds one (B, V) or (V,) probability tensor per step;
    ``targets`` is (B, T) or (T,). Masked-out steps are ignored and each
    sequence is averaged over its own length.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if targets.ndim == 1:
        targets = targets[None, :]
        step_probs = [p.reshape(1, -1) if p.ndim == 1 else p for p in step_probs]
    b, steps = targets.shape
    if len(step_probs) != steps:
        raise ValueError(f"{len(step_probs)} probability vectors for {steps} targets")
    mask = np.ones((b, steps), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    lengths = mask.sum(axis=1)
    if (lengths == 0).any():
        raise ValueError("a sequence with no target steps")
    dtype = step_probs[0].dtype
    rows = np.arange(b)
    total = None
    for t, y in enumerate(step_probs):
        if not mask[:, t].any():
            continue
        picked = y[rows, targets[:, t]]
        w = (mask[:, t] / (lengths * b)).astype(dtype)
        term = (T.log(picked, floor=floor) * (-w)).sum()
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------


class CoCoSum:
    """Parameters plus the forward computations over a :class:`Batch`."""

    def __init__(self, cfg: Config, seed: int = 0, params: dict[str, Tensor] | None = None):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, np.random.default_rng(seed))
        self.precomputed: dict[str, np.ndarray] = {}

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def set_precomputed_class_vectors(self, vectors: dict[str, np.ndarray]) -> None:
        for name, v in vectors.items():
            v = np.asarray(v, dtype=self.cfg.dtype)
            if v.shape != (self.cfg.class_dim,):
                raise ValueError(f"class vector for {name} has shape {v.shape}, expected ({self.cfg.class_dim},)")
            self.precomputed[name] = v

    def gru(self, prefix: str) -> GruParams:
        return GruParams.view(self.params, prefix)

    def mrgnn_layers(self) -> list[MrgnnLayerParams]:
        return [MrgnnLayerParams.view(self.params, k) for k in range(self.cfg.gnn_layers)]

    def _drop(self, x: Tensor, rng, training: bool) -> Tensor:
        return T.dropout(x, self.cfg.dropout, rng, training)

    def encode(self, batch: Batch, training: bool = False, rng=None, trace: dict | None = None) -> EncodedContext:
        p, cfg = self.params, self.cfg
        b = len(batch)
        zeros = Tensor(np.zeros((b, cfg.hidden_dim), dtype=cfg.dtype))

        code_x = self._drop(T.take_rows(p["code.embed"], batch.code_ids), rng, training)
        code_h = gru_sequence(code_x, batch.code_mask, self.gru("code.gru"), zeros)
        sbt_x = self._drop(T.take_rows(p["sbt.embed"], batch.sbt_ids), rng, training)
        sbt_h = gru_sequence(sbt_x, batch.sbt_mask, self.gru("sbt.gru"), zeros)

        pre = None
        if self.precomputed:
            pre = [self.precomputed.get(nm) for nm in batch.node_names]
        H_class = class_semantic_embed_batch(
            batch.node_tokens, batch.node_mask, p["class.embed"], p["class.proj"], pre
        )
        H_graph = mrgnn(H_class, batch.adjacency, self.mrgnn_layers(), cfg.leaky_slope, trace)

        return EncodedContext(
            H_code=self._drop(_stack_time(code_h), rng, training),
            code_mask=batch.code_mask,
            H_sbt=self._drop(_stack_time(sbt_h), rng, training),
            sbt_mask=batch.sbt_mask,
            h_class=H_class[batch.enclosing],
            h_graph=H_graph[batch.enclosing],
            h_init=code_h[-1],
        )

    def decoder_step(
        self,
        prev_ids,
        h: Tensor,
        ctx: EncodedContext,
        training: bool = False,
        rng=None,
        trace: dict | None = None,
    ) -> tuple[Tensor, Tensor]:
        """One decoding step: returns (probabilities over summary vocab, new state)."""
        p = self.params
        if ctx.H_code.shape[1] == 0 or ctx.H_sbt.shape[1] == 0:
            raise ValueError("empty encoder context")
        b, hid = h.shape
        x = self._drop(T.take_rows(p["dec.embed"], np.asarray(prev_ids, dtype=np.int64)), rng, training)
        h = gru_cell(x, h, self.gru("dec.gru"))

        query = h.reshape(b, hid, 1)
        gamma = T.softmax((ctx.H_code @ query).reshape(b, -1), axis=1, mask=ctx.code_mask)
        s_code = (gamma.reshape(b, 1, -1) @ ctx.H_code).reshape(b, hid)
        delta = T.softmax((ctx.H_sbt @ query).reshape(b, -1), axis=1, mask=ctx.sbt_mask)
        s_sbt = (delta.reshape(b, 1, -1) @ ctx.H_sbt).reshape(b, hid)

        cache = ctx._cache
        if "l" not in cache:
            cache["l"] = (ctx.h_class @ p["dec.A_l"], ctx.h_class @ p["dec.V_l"])
            cache["g"] = (ctx.h_graph @ p["dec.A_g"], ctx.h_graph @ p["dec.V_g"])
        aligned_s = h @ p["dec.A_s"]
        channels = [
            (s_code @ p["dec.A_c"], s_code @ p["dec.V_c"]),
            (s_sbt @ p["dec.A_a"], s_sbt @ p["dec.V_a"]),
            cache["l"],
            cache["g"],
        ]
        logits = T.concat([(a * aligned_s).sum(axis=1, keepdims=True) for a, _ in channels], axis=1)
        lam = T.softmax(logits, axis=1)
        mixed = None
        for k, (_, v) in enumerate(channels):
            term = lam[:, k : k + 1] * v
            mixed = term if mixed is None else mixed + term
        q = T.sigmoid(mixed)
        y = T.softmax(T.concat([h, q], axis=1) @ p["dec.f.W"] + p["dec.f.b"], axis=1)
        if trace is not None:
            trace.setdefault("gamma", []).append(gamma.data)
            trace.setdefault("delta", []).append(delta.data)
            trace.setdefault("lambda", []).append(lam.data)
        return y, h

    def loss(
        self,
        batch: Batch,
        training: bool = False,
        rng: np.random.Generator | None = None,
        teacher_forcing: float = 1.0,
        trace: dict | None = None,
    ) -> Tensor:
        ctx = self.encode(batch, training, rng, trace)
        h = ctx.h_init
        probs = []
        prev = batch.dec_in[:, 0]
        for t in range(batch.dec_in.shape[1]):
            y, h = self.decoder_step(prev, h, ctx, training, rng, trace)
            probs.append(y)
            if t + 1 < batch.dec_in.shape[1]:
                prev = batch.dec_in[:, t + 1]
                if teacher_forcing < 1.0 and rng is not None and rng.random() >= teacher_forcing:
                    prev = np.argmax(y.data, axis=1)
        return sequence_loss(probs, batch.dec_out, batch.dec_mask)
