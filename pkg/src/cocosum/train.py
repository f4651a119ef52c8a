"""Teacher-forced training with AdamW, checkpoints and greedy decoding."""

from __future__ import annotations

import json
import logging
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import tensor as T
from .model import CoCoSum, Config, Vocabs, make_batch, parameter_shapes
from .preprocess import BOS, EOS, PAD, SummarizationInstance, Vocab
from .tensor import Tensor
from .uml import UmlGraph

log = logging.getLogger(__name__)

MAGIC = b"COCOSUM\x00"
FORMAT_VERSION = 1
BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.001
    weight_decay: float = 0.3
    batch_size: int = 256
    epochs: int = 40
    seed: int = 0
    teacher_forcing: float = 1.0
    clip_norm: float = 5.0
    stop_loss: float | None = None  # stop once the epoch training loss drops below

    def __post_init__(self):
        # lr == 0 is allowed: it freezes parameters, which tests rely on
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= self.teacher_forcing <= 1.0:
            raise ValueError("teacher forcing ratio must lie in [0, 1]")
        if self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("batch size must be positive and epochs non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float,
) -> None:
    """One in-place AdamW update with decoupled weight decay and bias correction."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    state.step += 1
    t = state.step
    c1 = 1.0 - BETA1**t
    c2 = 1.0 - BETA2**t
    for name, p in params.items():
        g = grads[name]
        if p.shape != g.shape:
            raise T.ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        p -= lr * weight_decay * p
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global norm is at most ``max_norm``."""
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    config: Config
    train_config: TrainConfig
    vocabs: Vocabs
    params: dict[str, np.ndarray]
    adam: AdamState
    epoch: int = 0
    rng_state: dict | None = None

    def arrays(self) -> dict[str, np.ndarray]:
        out = {f"param/{k}": v for k, v in self.params.items()}
        for k in self.adam.m:
            out[f"adam.m/{k}"] = self.adam.m[k]
            out[f"adam.v/{k}"] = self.adam.v[k]
        return out


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    arrays = ckpt.arrays()
    entries = []
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        raw = arr.tobytes(order="C")
        entries.append({
            "name": name,
            "dtype": arr.dtype.str,
            "shape": list(arr.shape),
            "offset": len(payload),
            "nbytes": len(raw),
        })
        payload += raw
    header = {
        "config": ckpt.config.to_dict(),
        "train_config": ckpt.train_config.to_dict(),
        "vocabs": {
            "code": ckpt.vocabs.code.itos,
            "sbt": ckpt.vocabs.sbt.itos,
            "summary": ckpt.vocabs.summary.itos,
        },
        "epoch": ckpt.epoch,
        "adam_step": ckpt.adam.step,
        "rng_state": ckpt.rng_state,
        "arrays": entries,
        "payload_crc32": zlib.crc32(bytes(payload)),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path: str | Path, expect: Config | None = None) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    off = len(MAGIC)
    try:
        version, hlen = struct.unpack_from("<IQ", data, off)
    except struct.error:
        raise CheckpointError(f"{path}: truncated header") from None
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    off += struct.calcsize("<IQ")
    try:
        header = json.loads(data[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"{path}: corrupted header") from None
    payload = data[off + hlen :]
    if zlib.crc32(payload) != header.get("payload_crc32"):
        raise CheckpointError(f"{path}: payload checksum mismatch (corrupted file)")
    arrays = {}
    for e in header["arrays"]:
        raw = payload[e["offset"] : e["offset"] + e["nbytes"]]
        if len(raw) != e["nbytes"]:
            raise CheckpointError(f"{path}: array {e['name']} is truncated")
        arrays[e["name"]] = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    cfg = Config.from_dict(header["config"])
    params = {k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")}
    adam = AdamState(
        m={k[len("adam.m/"):]: v for k, v in arrays.items() if k.startswith("adam.m/")},
        v={k[len("adam.v/"):]: v for k, v in arrays.items() if k.startswith("adam.v/")},
        step=int(header["adam_step"]),
    )
    _check_shapes(params, expect or cfg)
    voc = header["vocabs"]
    return Checkpoint(
        config=cfg,
        train_config=TrainConfig.from_dict(header["train_config"]),
        vocabs=Vocabs(Vocab(voc["code"]), Vocab(voc["sbt"]), Vocab(voc["summary"])),
        params=params,
        adam=adam,
        epoch=int(header["epoch"]),
        rng_state=header.get("rng_state"),
    )


def _check_shapes(params: dict[str, np.ndarray], cfg: Config) -> None:
    expected = parameter_shapes(cfg)
    for name, shape in expected.items():
        if name not in params:
            raise CheckpointError(f"checkpoint lacks parameter {name}")
        if tuple(params[name].shape) != tuple(shape):
            raise T.ShapeError(
                f"parameter {name} has shape {tuple(params[name].shape)}, config expects {tuple(shape)}"
            )
    extra = set(params) - set(expected)
    if extra:
        raise CheckpointError(f"checkpoint has unknown parameters: {sorted(extra)}")


def model_from_checkpoint(ckpt: Checkpoint) -> CoCoSum:
    params = {
        k: Tensor(np.array(v, dtype=ckpt.config.dtype), requires_grad=True, name=k)
        for k, v in ckpt.params.items()
    }
    return CoCoSum(ckpt.config, params=params)


# ---------------------------------------------------------------------------
# training


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float | None

    def line(self) -> str:
        valid = "nan" if self.valid_loss is None else repr(self.valid_loss)
        return f"{self.epoch}, {self.train_loss!r}, {valid}"


def _check_graphs(instances, graphs) -> None:
    for x in instances:
        if x.uml_graph_id not in graphs:
            raise KeyError(f"instance {x.id} references unknown UML graph {x.uml_graph_id!r}")
        graphs[x.uml_graph_id].position(x.enclosing_class_node_id)


def evaluate_loss(model: CoCoSum, instances, graphs, vocabs, batch_size: int) -> float:
    total = 0.0
    for start in range(0, len(instances), batch_size):
        chunk = instances[start : start + batch_size]
        batch = make_batch(chunk, graphs, vocabs, model.cfg)
        total += model.loss(batch).item() * len(chunk)
    return total / len(instances)


def train(
    instances: list[SummarizationInstance],
    graphs: dict[str, UmlGraph],
    vocabs: Vocabs,
    cfg: Config,
    tcfg: TrainConfig,
    valid: list[SummarizationInstance] | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> tuple[Checkpoint, list[EpochRecord]]:
    """Train from scratch; returns the best checkpoint and the per-epoch log.

    "Best" is lowest validation loss when ``valid`` is given, otherwise lowest
    training loss.
    """
    if not instances:
        raise ValueError("empty training set")
    _check_graphs(instances, graphs)
    if valid:
        _check_graphs(valid, graphs)
    for kind, v, n in (("code", vocabs.code, cfg.code_vocab), ("sbt", vocabs.sbt, cfg.sbt_vocab),
                       ("summary", vocabs.summary, cfg.summary_vocab)):
        if len(v) != n:
            raise ValueError(f"{kind} vocabulary has {len(v)} entries, config says {n}")
    rng = np.random.default_rng(tcfg.seed)
    model = CoCoSum(cfg, seed=tcfg.seed)
    state = AdamState()
    history: list[EpochRecord] = []
    best: Checkpoint | None = None
    best_score = math.inf
    # batch composition is fixed when one batch covers the set; cache it
    cached = None
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(len(instances))
        running = 0.0
        for start in range(0, len(order), tcfg.batch_size):
            idx = order[start : start + tcfg.batch_size]
            if len(idx) == len(instances):
                if cached is None:
                    cached = make_batch(instances, graphs, vocabs, cfg)
                batch = cached
            else:
                batch = make_batch([instances[i] for i in idx], graphs, vocabs, cfg)
            loss = model.loss(batch, training=True, rng=rng, teacher_forcing=tcfg.teacher_forcing)
            value = loss.item()
            if not math.isfinite(value):
                raise FloatingPointError(f"loss became {value} at epoch {epoch}")
            running += value * len(idx)
            grads = T.backward(loss, wrt=model.parameters())
            named = {k: grads[p] for k, p in model.params.items()}
            clip_grad_norm(named, tcfg.clip_norm)
            adamw_step({k: p.data for k, p in model.params.items()}, named, state,
                       tcfg.lr, tcfg.weight_decay)
        train_loss = running / len(instances)
        valid_loss = evaluate_loss(model, valid, graphs, vocabs, tcfg.batch_size) if valid else None
        rec = EpochRecord(epoch, train_loss, valid_loss)
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
        log.info("epoch %d train %.6f valid %s", epoch, train_loss, valid_loss)
        score = valid_loss if valid_loss is not None else train_loss
        if score < best_score:
            best_score = score
            best = _snapshot(model, state, cfg, tcfg, vocabs, epoch, rng)
        if tcfg.stop_loss is not None and train_loss < tcfg.stop_loss:
            break
    if best is None:
        best = _snapshot(model, state, cfg, tcfg, vocabs, 0, rng)
    return best, history


def _snapshot(model, state, cfg, tcfg, vocabs, epoch, rng) -> Checkpoint:
    return Checkpoint(
        config=cfg,
        train_config=tcfg,
        vocabs=vocabs,
        params={k: p.data.copy() for k, p in model.params.items()},
        adam=AdamState(
            m={k: v.copy() for k, v in state.m.items()},
            v={k: v.copy() for k, v in state.v.items()},
            step=state.step,
        ),
        epoch=epoch,
        rng_state=_jsonable(rng.bit_generator.state),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_loss_log(history: list[EpochRecord], path: str | Path) -> None:
    Path(path).write_text("".join(r.line() + "\n" for r in history), encoding="utf-8")


def read_loss_log(path: str | Path) -> list[EpochRecord]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        e, tr, va = (s.strip() for s in line.split(","))
        out.append(EpochRecord(int(e), float(tr), None if va == "nan" else float(va)))
    return out


# ---------------------------------------------------------------------------
# inference


def greedy_decode_batch(model: CoCoSum, batch, max_len: int = 30) -> list[list[int]]:
    """Argmax decoding from BOS until EOS or ``max_len`` tokens; PAD/BOS never emitted."""
    b = len(batch)
    out: list[list[int]] = [[] for _ in range(b)]
    if max_len <= 0:
        return out
    ctx = model.encode(batch)
    h = ctx.h_init
    prev = np.full(b, BOS, dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    for _ in range(max_len):
        y, h = model.decoder_step(prev, h, ctx)
        probs = y.data.copy()
        probs[:, [PAD, BOS]] = -np.inf
        prev = np.argmax(probs, axis=1)  # first maximum: lowest id wins ties
        for i in range(b):
            if done[i]:
                continue
            if prev[i] == EOS:
                done[i] = True
            else:
                out[i].append(int(prev[i]))
        if done.all():
            break
    return out


def greedy_decode(
    instances: list[SummarizationInstance] | SummarizationInstance,
    graphs: dict[str, UmlGraph] | UmlGraph,
    checkpoint: Checkpoint | CoCoSum,
    max_len: int = 30,
    vocabs: Vocabs | None = None,
    batch_size: int = 64,
) -> list[list[str]] | list[str]:
    """Summary tokens for one instance (or a list of them)."""
    single = isinstance(instances, SummarizationInstance)
    items = [instances] if single else list(instances)
    if isinstance(graphs, UmlGraph):
        graphs = {x.uml_graph_id: graphs for x in items}
    if isinstance(checkpoint, Checkpoint):
        model, vocabs = model_from_checkpoint(checkpoint), checkpoint.vocabs
    else:
        model = checkpoint
        if vocabs is None:
            raise ValueError("vocabularies are required when decoding with a bare model")
    _check_graphs(items, graphs)
    results: list[list[str]] = []
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        batch = make_batch(chunk, graphs, vocabs, model.cfg, with_targets=False)
        for ids in greedy_decode_batch(model, batch, max_len):
            results.append(vocabs.summary.decode(ids))
    return results[0] if single else results
