"""Training loop wiring smoothing, the siamese pair, losses, and checkpoints.

One epoch: forward the online encoder + predictor on the local view to get
the anchor, forward the frozen target encoder on the global view to get the
structural positive, build the neighbor positive and shuffled negatives from
the anchor, take one Adam step on the combined objective, then EMA-update the
target.  Smoothing runs exactly once before the loop.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CheckpointCorruptionError,
    CheckpointFormatError,
    CheckpointVersionError,
    InputError,
    TrainingDivergedError,
)
from .graph import Graph, RANDOM_WALK, SYMMETRIC, smooth_features
from .losses import (
    EmbeddingBatch,
    LossConfig,
    LossOutput,
    l2_normalize_backward,
    l2_normalize_rows,
    neighbor_mean,
    neighbor_mean_backward,
    sample_neighbor_indices,
    total_loss,
)
from .nn import (
    AdamState,
    Mlp,
    ModelState,
    adam_step,
    init_adam,
    init_mlp,
    mlp_backward,
    mlp_forward,
    momentum_update,
)
from .rng import stream_rng

VIEW_BOTH = "both"
VIEW_GLOBAL_ONLY = "global-only"
VIEW_LOCAL_ONLY = "local-only"
VIEW_MODES = (VIEW_BOTH, VIEW_GLOBAL_ONLY, VIEW_LOCAL_ONLY)

ANCHOR_PREDICTOR = "predictor"
ANCHOR_ENCODER = "encoder"
ANCHOR_MODES = (ANCHOR_PREDICTOR, ANCHOR_ENCODER)

EMBED_ONLINE_LOCAL = "online-local"
EMBED_CONCAT_BOTH = "concat-both"
EMBED_MODES = (EMBED_ONLINE_LOCAL, EMBED_CONCAT_BOTH)

DEFAULT_HIDDEN = 512
DEFAULT_EMBED = 256


@dataclass
class TrainConfig:
    """All hyperparameters of a training run."""

    t: int = 3
    epochs: int = 500
    lr: float = 1e-3
    momentum: float = 0.8
    loss: LossConfig = field(default_factory=LossConfig)
    encoder_dims: list[int] | None = None  # None -> [n_features, 512, 256]
    predictor_dims: list[int] | None = None  # None -> [d, 512, d]
    seed: int = 0
    view_mode: str = VIEW_BOTH
    normalize_embeddings: bool = False
    anchor_mode: str = ANCHOR_PREDICTOR

    def resolved(self, n_features: int) -> "TrainConfig":
        """Copy with encoder/predictor widths filled in from the data."""
        enc = list(self.encoder_dims) if self.encoder_dims else [
            n_features, DEFAULT_HIDDEN, DEFAULT_EMBED,
        ]
        d = enc[-1]
        pred = list(self.predictor_dims) if self.predictor_dims else [
            d, DEFAULT_HIDDEN, d,
        ]
        return replace(self, encoder_dims=enc, predictor_dims=pred)

    def validate(self, n_features: int) -> None:
        if self.t < 0:
            raise InputError(f"t must be >= 0, got {self.t}")
        if self.epochs < 1:
            raise InputError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 <= self.momentum <= 1.0:
            raise InputError(f"momentum must lie in [0, 1], got {self.momentum}")
        if self.view_mode not in VIEW_MODES:
            raise InputError(f"unknown view mode {self.view_mode!r}; known: {VIEW_MODES}")
        if self.anchor_mode not in ANCHOR_MODES:
            raise InputError(
                f"unknown anchor mode {self.anchor_mode!r}; known: {ANCHOR_MODES}"
            )
        if self.encoder_dims is None or self.predictor_dims is None:
            raise InputError("dims must be resolved before validation")
        if self.encoder_dims[0] != n_features:
            raise InputError(
                f"encoder input dim {self.encoder_dims[0]} != feature width {n_features}"
            )
        if self.predictor_dims[0] != self.encoder_dims[-1]:
            raise InputError(
                f"predictor input dim {self.predictor_dims[0]} != encoder output "
                f"dim {self.encoder_dims[-1]}"
            )
        if self.predictor_dims[-1] != self.encoder_dims[-1]:
            raise InputError(
                "predictor output dim must equal encoder output dim "
                f"({self.predictor_dims[-1]} vs {self.encoder_dims[-1]})"
            )


@dataclass
class TrainedModel:
    """Model state plus the resolved config and per-epoch loss history.

    ``history`` has one row per completed epoch:
    (epoch, total, l_struct, l_neighbor, l_upper).
    """

    model: ModelState
    config: TrainConfig
    history: np.ndarray


def resolve_view_inputs(
    graph: Graph, t: int, view_mode: str
) -> tuple[np.ndarray, np.ndarray]:
    """(online input, target input) for a view mode; single-view ablations
    feed the same smoothed matrix to both networks."""
    if view_mode == VIEW_BOTH:
        return (
            smooth_features(graph, t, SYMMETRIC),
            smooth_features(graph, t, RANDOM_WALK),
        )
    if view_mode == VIEW_GLOBAL_ONLY:
        x = smooth_features(graph, t, RANDOM_WALK)
        return x, x
    if view_mode == VIEW_LOCAL_ONLY:
        x = smooth_features(graph, t, SYMMETRIC)
        return x, x
    raise InputError(f"unknown view mode {view_mode!r}")


@dataclass
class EpochPlan:
    """Frozen stochastic choices for one epoch: sampled neighbor indices and
    the row permutations generating the negatives."""

    neighbor_idx: np.ndarray
    permutations: list[np.ndarray]


@dataclass
class _EpochForward:
    cache_enc: object
    cache_pred: object | None
    anchor: np.ndarray
    anchor_norms: np.ndarray | None
    batch: EmbeddingBatch


def _epoch_forward(
    online: Mlp,
    predictor: Mlp,
    target: Mlp,
    online_input: np.ndarray,
    target_input: np.ndarray,
    plan: EpochPlan,
    config: TrainConfig,
    negatives: list[np.ndarray] | None = None,
) -> _EpochForward:
    """One epoch's forward map.

    When ``negatives`` is None they are derived from the current anchor via
    ``plan.permutations``; passing them explicitly freezes them, which is how
    the finite-difference suite evaluates the map the analytic gradient
    differentiates (negatives are constants by design).
    """
    z1, cache_enc = mlp_forward(online, online_input)
    cache_pred = None
    if config.anchor_mode == ANCHOR_PREDICTOR:
        anchor_raw, cache_pred = mlp_forward(predictor, z1)
    else:
        anchor_raw = z1
    z2, _ = mlp_forward(target, target_input)

    anchor_norms = None
    if config.normalize_embeddings:
        anchor, anchor_norms = l2_normalize_rows(anchor_raw)
        positive_struct, _ = l2_normalize_rows(z2)
    else:
        anchor = anchor_raw
        positive_struct = z2

    if negatives is None:
        negatives = [anchor[p] for p in plan.permutations]
    batch = EmbeddingBatch(
        anchor=anchor,
        positive_struct=positive_struct,
        positive_neighbor=neighbor_mean(anchor, plan.neighbor_idx),
        negatives=negatives,
    )
    return _EpochForward(
        cache_enc=cache_enc,
        cache_pred=cache_pred,
        anchor=anchor,
        anchor_norms=anchor_norms,
        batch=batch,
    )


def _epoch_backward(
    fwd: _EpochForward,
    out: LossOutput,
    online: Mlp,
    predictor: Mlp,
    plan: EpochPlan,
    config: TrainConfig,
) -> tuple[Mlp, Mlp]:
    """Gradients for the online encoder and predictor.

    The neighbor positive is a (sampled) linear function of the anchor, so
    its gradient is scattered back onto the anchor rows; the structural
    positive belongs to the frozen target and receives nothing.
    """
    n = fwd.anchor.shape[0]
    d_anchor = out.grad_anchor + neighbor_mean_backward(
        out.grad_positive_neighbor, plan.neighbor_idx, n
    )
    if config.normalize_embeddings:
        d_anchor = l2_normalize_backward(fwd.anchor, fwd.anchor_norms, d_anchor)
    if config.anchor_mode == ANCHOR_PREDICTOR:
        pred_grads, dz1 = mlp_backward(predictor, fwd.cache_pred, d_anchor)
        enc_grads, _ = mlp_backward(online, fwd.cache_enc, dz1, need_input_grad=False)
    else:
        enc_grads, _ = mlp_backward(online, fwd.cache_enc, d_anchor, need_input_grad=False)
        pred_grads = Mlp(
            weights=[np.zeros_like(w) for w in predictor.weights],
            biases=[np.zeros_like(b) for b in predictor.biases],
        )
    return enc_grads, pred_grads


def train(graph: Graph, config: TrainConfig, epoch_callback=None) -> TrainedModel:
    """Run the full training loop.

    ``epoch_callback(epoch, state)``, when given, is invoked after each
    epoch's momentum update; useful for instrumentation and invariants.
    """
    config = config.resolved(graph.n_features)
    config.validate(graph.n_features)
    loss_cfg = config.loss

    online_input, target_input = resolve_view_inputs(graph, config.t, config.view_mode)

    rng_init = stream_rng(config.seed, "init")
    rng_shuffle = stream_rng(config.seed, "shuffle")
    rng_neighbor = stream_rng(config.seed, "neighbor")

    online = init_mlp(config.encoder_dims, rng_init)
    predictor = init_mlp(config.predictor_dims, rng_init)
    target = online.copy()
    optimizer = init_adam(online.params() + predictor.params())
    state = ModelState(
        online_encoder=online,
        predictor=predictor,
        target_encoder=target,
        optimizer=optimizer,
    )

    n = graph.n_nodes
    history = np.empty((config.epochs, 5))
    for epoch in range(1, config.epochs + 1):
        plan = EpochPlan(
            neighbor_idx=sample_neighbor_indices(graph, loss_cfg.n_neighbors, rng_neighbor),
            permutations=[rng_shuffle.permutation(n) for _ in range(loss_cfg.k)],
        )
        fwd = _epoch_forward(
            online, predictor, target, online_input, target_input, plan, config
        )
        out = total_loss(fwd.batch, loss_cfg)
        if not np.isfinite(out.total):
            raise TrainingDivergedError(
                f"non-finite loss {out.total} at epoch {epoch}"
            )
        enc_grads, pred_grads = _epoch_backward(fwd, out, online, predictor, plan, config)
        adam_step(
            optimizer,
            state.trainable_params(),
            enc_grads.params() + pred_grads.params(),
            config.lr,
        )
        state.target_encoder = momentum_update(target, online, config.momentum)
        target = state.target_encoder
        history[epoch - 1] = (epoch, out.total, out.l_struct, out.l_neighbor, out.l_upper)
        if epoch_callback is not None:
            epoch_callback(epoch, state)
    return TrainedModel(model=state, config=config, history=history)


def encode(model: TrainedModel, graph: Graph, output: str = EMBED_ONLINE_LOCAL) -> np.ndarray:
    """Frozen embeddings for downstream evaluation.

    ``online-local`` is the online encoder applied to its training-time
    input; ``concat-both`` appends the target encoder's view of the other
    input, doubling the width.
    """
    if output not in EMBED_MODES:
        raise InputError(f"unknown embedding output {output!r}; known: {EMBED_MODES}")
    cfg = model.config
    if graph.n_features != cfg.encoder_dims[0]:
        raise InputError(
            f"graph feature width {graph.n_features} != training width "
            f"{cfg.encoder_dims[0]}"
        )
    online_input, target_input = resolve_view_inputs(graph, cfg.t, cfg.view_mode)
    z_online, _ = mlp_forward(model.model.online_encoder, online_input)
    if output == EMBED_ONLINE_LOCAL:
        return z_online
    z_target, _ = mlp_forward(model.model.target_encoder, target_input)
    return np.hstack([z_online, z_target])


# --- checkpoint format -----------------------------------------------------
#
# magic "SNGCL" + version byte, then a u64-length-prefixed UTF-8 metadata
# block of key=value lines (the config snapshot), then tensor records until
# EOF: u64 name length, name bytes, u64 rank, u64 dims, float64 LE values.

CHECKPOINT_MAGIC = b"SNGCL"
CHECKPOINT_VERSION = 1
_MAX_NAME = 1 << 16
_MAX_RANK = 8


def _config_to_lines(config: TrainConfig, optimizer: AdamState) -> str:
    loss = config.loss
    items = [
        ("t", config.t),
        ("epochs", config.epochs),
        ("lr", repr(config.lr)),
        ("momentum", repr(config.momentum)),
        ("seed", config.seed),
        ("view_mode", config.view_mode),
        ("normalize_embeddings", int(config.normalize_embeddings)),
        ("anchor_mode", config.anchor_mode),
        ("encoder_dims", ",".join(str(d) for d in config.encoder_dims)),
        ("predictor_dims", ",".join(str(d) for d in config.predictor_dims)),
        ("alpha", repr(loss.alpha)),
        ("beta", repr(loss.beta)),
        ("k", loss.k),
        ("n_neighbors", loss.n_neighbors),
        ("omega1", repr(loss.omega1)),
        ("omega2", repr(loss.omega2)),
        ("adam_beta1", repr(optimizer.beta1)),
        ("adam_beta2", repr(optimizer.beta2)),
        ("adam_eps", repr(optimizer.eps)),
    ]
    return "".join(f"{key}={value}\n" for key, value in items)


def _config_from_lines(text: str) -> tuple[TrainConfig, dict]:
    kv = {}
    for line in text.splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        kv[key] = value
    try:
        config = TrainConfig(
            t=int(kv["t"]),
            epochs=int(kv["epochs"]),
            lr=float(kv["lr"]),
            momentum=float(kv["momentum"]),
            loss=LossConfig(
                alpha=float(kv["alpha"]),
                beta=float(kv["beta"]),
                k=int(kv["k"]),
                n_neighbors=int(kv["n_neighbors"]),
                omega1=float(kv["omega1"]),
                omega2=float(kv["omega2"]),
            ),
            encoder_dims=[int(d) for d in kv["encoder_dims"].split(",")],
            predictor_dims=[int(d) for d in kv["predictor_dims"].split(",")],
            seed=int(kv["seed"]),
            view_mode=kv["view_mode"],
            normalize_embeddings=bool(int(kv["normalize_embeddings"])),
            anchor_mode=kv["anchor_mode"],
        )
    except KeyError as exc:
        raise CheckpointCorruptionError(f"metadata missing key {exc}") from exc
    adam_kv = {
        "beta1": float(kv.get("adam_beta1", 0.9)),
        "beta2": float(kv.get("adam_beta2", 0.999)),
        "eps": float(kv.get("adam_eps", 1e-8)),
    }
    return config, adam_kv


def _tensor_items(model: TrainedModel):
    state = model.model
    for prefix, mlp in (
        ("online_encoder", state.online_encoder),
        ("predictor", state.predictor),
        ("target_encoder", state.target_encoder),
    ):
        for l in range(mlp.n_layers):
            yield f"{prefix}/w{l}", mlp.weights[l]
            yield f"{prefix}/b{l}", mlp.biases[l]
    opt = state.optimizer
    for i, arr in enumerate(opt.m1):
        yield f"optimizer/m1/{i}", arr
    for i, arr in enumerate(opt.m2):
        yield f"optimizer/m2/{i}", arr
    yield "optimizer/step", np.array([float(opt.step)])
    yield "history", model.history


def _write_tensor(f, name: str, arr: np.ndarray) -> None:
    data = np.ascontiguousarray(arr, dtype="<f8")
    name_bytes = name.encode("utf-8")
    f.write(struct.pack("<Q", len(name_bytes)))
    f.write(name_bytes)
    f.write(struct.pack("<Q", data.ndim))
    f.write(struct.pack(f"<{data.ndim}Q", *data.shape))
    f.write(data.tobytes())


def save_checkpoint(model: TrainedModel, path) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC + bytes([CHECKPOINT_VERSION]))
        meta = _config_to_lines(model.config, model.model.optimizer).encode("utf-8")
        f.write(struct.pack("<Q", len(meta)))
        f.write(meta)
        for name, arr in _tensor_items(model):
            _write_tensor(f, name, arr)


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointCorruptionError(
            f"truncated checkpoint: wanted {n} bytes, got {len(data)}"
        )
    return data


def _read_tensors(f) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    while True:
        head = f.read(8)
        if not head:
            return tensors
        if len(head) != 8:
            raise CheckpointCorruptionError("truncated checkpoint: partial record header")
        (name_len,) = struct.unpack("<Q", head)
        if name_len == 0 or name_len > _MAX_NAME:
            raise CheckpointCorruptionError(f"implausible tensor name length {name_len}")
        name = _read_exact(f, name_len).decode("utf-8")
        (rank,) = struct.unpack("<Q", _read_exact(f, 8))
        if rank > _MAX_RANK:
            raise CheckpointCorruptionError(f"implausible tensor rank {rank}")
        dims = struct.unpack(f"<{rank}Q", _read_exact(f, 8 * rank)) if rank else ()
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = _read_exact(f, 8 * count)
        tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
    return tensors


def _take(tensors: dict, name: str) -> np.ndarray:
    try:
        return tensors[name]
    except KeyError:
        raise CheckpointCorruptionError(f"checkpoint missing tensor {name!r}") from None


def _mlp_from_tensors(tensors: dict, prefix: str, dims: list[int]) -> Mlp:
    n_layers = len(dims) - 1
    return Mlp(
        weights=[_take(tensors, f"{prefix}/w{l}").copy() for l in range(n_layers)],
        biases=[_take(tensors, f"{prefix}/b{l}").copy() for l in range(n_layers)],
    )


def load_checkpoint(path) -> TrainedModel:
    with open(path, "rb") as f:
        head = f.read(6)
        if len(head) < 6 or head[:5] != CHECKPOINT_MAGIC:
            raise CheckpointFormatError(
                f"not a checkpoint file (bad magic bytes {head[:5]!r})"
            )
        version = head[5]
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"checkpoint format version {version} not supported "
                f"(this build reads version {CHECKPOINT_VERSION})"
            )
        (meta_len,) = struct.unpack("<Q", _read_exact(f, 8))
        if meta_len > (1 << 24):
            raise CheckpointCorruptionError(f"implausible metadata length {meta_len}")
        config, adam_kv = _config_from_lines(_read_exact(f, meta_len).decode("utf-8"))
        tensors = _read_tensors(f)

    online = _mlp_from_tensors(tensors, "online_encoder", config.encoder_dims)
    predictor = _mlp_from_tensors(tensors, "predictor", config.predictor_dims)
    target = _mlp_from_tensors(tensors, "target_encoder", config.encoder_dims)
    n_params = len(online.params() + predictor.params())
    optimizer = AdamState(
        step=int(_take(tensors, "optimizer/step")[0]),
        m1=[_take(tensors, f"optimizer/m1/{i}").copy() for i in range(n_params)],
        m2=[_take(tensors, f"optimizer/m2/{i}").copy() for i in range(n_params)],
        beta1=adam_kv["beta1"],
        beta2=adam_kv["beta2"],
        eps=adam_kv["eps"],
    )
    history = _take(tensors, "history").copy()
    state = ModelState(
        online_encoder=online,
        predictor=predictor,
        target_encoder=target,
        optimizer=optimizer,
    )
    return TrainedModel(model=state, config=config, history=history)


HISTORY_HEADER = "epoch\tloss\tl_struct\tl_neighbor\tl_upper"


def write_history(path, history: np.ndarray) -> None:
    """Loss history as TSV with lossless float formatting."""
    lines = [HISTORY_HEADER]
    for row in history:
        lines.append(
            "\t".join([str(int(row[0]))] + [f"{v:.17g}" for v in row[1:]])
        )
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
