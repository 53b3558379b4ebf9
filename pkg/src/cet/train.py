"""Minibatch training: neighbor sampling, epoch loop, periodic validation.

Training iterates over entities that have at least one training label and at
least one neighbor. In the default mode each entity is scored from a fixed
number of neighbors drawn uniformly with replacement; the alternative mask
mode scores from all neighbors and blanks self-revealing candidates instead.
One Adam step is taken per batch on the batch-summed gradients.

Sampled batches are uniform in shape, so their forward/backward runs through
a vectorized path; a per-entity reference path covers mask mode and serves
as the correctness anchor for the vectorized one.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .data import TypingDataset
from .ranking import evaluate
from .graph import AugmentedGraph, Neighbor, Vocab
from .loss import GradientSet, _loss_terms, backward
from .optim import AdamState, NumericError, adam_step, init_params
from .scoring import ParameterSet, score_all_neighbors

log = logging.getLogger(__name__)

__all__ = ["TrainConfig", "FitResult", "sample_neighbors", "train_epoch", "fit", "format_log"]


@dataclass
class TrainConfig:
    """Hyperparameters and architecture toggles for one training run."""

    dim: int = 100
    alpha: float = 0.5
    beta: float = 4.0
    lr: float = 0.001
    batch_size: int = 128
    sample_size: int = 10
    max_epochs: int = 1000
    eval_every: int = 25
    loss_kind: str = "fna"
    use_agg2t: bool = True
    use_tan: bool = True
    mask_mode: bool = False
    use_activation: bool = True
    separate_heads: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim <= 0 or self.alpha <= 0 or self.lr <= 0:
            raise ValueError("dim, alpha and lr must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.batch_size < 1 or self.sample_size < 1 or self.eval_every < 1:
            raise ValueError("batch_size, sample_size and eval_every must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.loss_kind not in ("bce", "fna"):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def sample_neighbors(
    graph: AugmentedGraph, entity: int, sample_size: int, rng: np.random.Generator
) -> list[Neighbor]:
    """Draw ``sample_size`` neighbors i.i.d. uniformly with replacement."""
    degree = graph.degree(entity)
    if degree == 0:
        raise ValueError(f"entity {entity} is isolated; cannot sample neighbors")
    idx = rng.integers(0, degree, size=sample_size)
    rel, inv, is_type, tgt = graph.neighbor_arrays(entity)
    return [
        Neighbor(int(rel[i]), bool(inv[i]), int(tgt[i]), bool(is_type[i])) for i in idx
    ]


def _positives_matrix(
    entities: list[int], dataset: TypingDataset, num_types: int
) -> np.ndarray:
    mat = np.zeros((len(entities), num_types), dtype=bool)
    for row, entity in enumerate(entities):
        mat[row, dataset.positives(entity)] = True
    return mat


def _batch_forward_backward(
    params: ParameterSet,
    rel: np.ndarray,
    inv: np.ndarray,
    is_type: np.ndarray,
    tgt: np.ndarray,
    pos_mat: np.ndarray,
    alpha: float,
    loss_kind: str,
    beta: float,
    use_agg2t: bool,
    use_activation: bool,
) -> tuple[np.ndarray, GradientSet]:
    """Vectorized loss + gradients for a uniform sampled batch.

    Array arguments have shape (batch, sample_size); ``pos_mat`` is
    (batch, num_types). Mirrors the per-entity backward exactly, up to
    float summation order.
    """
    batch, m = rel.shape
    num_types = params.num_types
    rel_vec = params.relation_emb[rel]  # (B, m, k)
    ent = params.entity_emb[np.where(is_type, 0, tgt)]
    typ = params.type_emb[np.where(is_type, tgt, 0)]
    tgt_vec = np.where(is_type[..., None], typ, ent)
    reps = np.where(inv[..., None], tgt_vec + rel_vec, tgt_vec - rel_vec)
    activated = np.maximum(reps, 0) if use_activation else reps

    flat_z = activated.reshape(batch * m, -1)
    n2t = (flat_z @ params.W.T + params.b).reshape(batch, m, num_types)
    if use_agg2t:
        h = reps.mean(axis=1)  # (B, k)
        h_act = np.maximum(h, 0) if use_activation else h
        agg_w, agg_b = params.agg_head()
        agg_row = h_act @ agg_w.T + agg_b  # (B, L)
        cand = np.concatenate([agg_row[:, None, :], n2t], axis=1)
    else:
        cand = n2t

    scaled = alpha * cand
    expw = np.exp(scaled - scaled.max(axis=1, keepdims=True))
    weights = expw / expw.sum(axis=1, keepdims=True)
    pooled = (weights * cand).sum(axis=1)  # (B, L)

    # Loss terms (no masking in sampling mode, every pooled entry is finite).
    losses = np.empty(batch, dtype=float)
    dpooled = np.empty_like(pooled, dtype=float)
    for row in range(batch):
        losses[row], dpooled[row] = _loss_terms(pooled[row], pos_mat[row], loss_kind, beta)

    dcand = (
        dpooled[:, None, :] * weights * (1.0 + alpha * (cand - pooled[:, None, :]))
    ).astype(cand.dtype, copy=False)

    grads = GradientSet.zeros_like(params)
    offset = 1 if use_agg2t else 0
    dn2t = dcand[:, offset:, :]
    flat_dn2t = dn2t.reshape(batch * m, num_types)
    grads.W += flat_dn2t.T @ flat_z
    grads.b += flat_dn2t.sum(axis=0)
    dreps = (flat_dn2t @ params.W).reshape(batch, m, -1)
    if use_activation:
        dreps = dreps * (reps > 0)

    if use_agg2t:
        dagg = dcand[:, 0, :]  # (B, L)
        if params.separate_heads:
            grads.agg_W += dagg.T @ h_act
            grads.agg_b += dagg.sum(axis=0)
        else:
            grads.W += dagg.T @ h_act
            grads.b += dagg.sum(axis=0)
        agg_w, _ = params.agg_head()
        dh = dagg @ agg_w
        if use_activation:
            dh = dh * (h > 0)
        dreps = dreps + dh[:, None, :] / m

    sign = np.where(inv, 1.0, -1.0).astype(dreps.dtype)
    drel = dreps * sign[..., None]

    def scatter(rows: dict[int, np.ndarray], idx: np.ndarray, grad: np.ndarray) -> None:
        if idx.size == 0:
            return
        uniq, inverse = np.unique(idx, return_inverse=True)
        acc = np.zeros((len(uniq), grad.shape[-1]), dtype=grad.dtype)
        np.add.at(acc, inverse, grad)
        for pos, row in enumerate(uniq.tolist()):
            if row in rows:
                rows[row] = rows[row] + acc[pos]
            else:
                rows[row] = acc[pos]

    flat_is_type = is_type.ravel()
    flat_tgt = tgt.ravel()
    flat_dreps = dreps.reshape(batch * m, -1)
    scatter(grads.entity_rows, flat_tgt[~flat_is_type], flat_dreps[~flat_is_type])
    scatter(grads.type_rows, flat_tgt[flat_is_type], flat_dreps[flat_is_type])
    scatter(grads.relation_rows, rel.ravel(), drel.reshape(batch * m, -1))
    return losses, grads


def _trainable_entities(graph: AugmentedGraph, dataset: TypingDataset) -> tuple[list[int], int]:
    trainable = []
    skipped = 0
    for entity in sorted(dataset.train_types):
        if graph.degree(entity) > 0:
            trainable.append(entity)
        else:
            skipped += 1
    return trainable, skipped


def train_epoch(
    params: ParameterSet,
    state: AdamState,
    graph: AugmentedGraph,
    dataset: TypingDataset,
    config: TrainConfig,
    rng: np.random.Generator,
) -> float:
    """One shuffled pass over all trainable entities; returns the mean loss."""
    trainable, _ = _trainable_entities(graph, dataset)
    if not trainable:
        raise ValueError("no trainable entities: every labeled entity is isolated")
    order = rng.permutation(len(trainable))
    total_loss = 0.0
    count = 0

    for start in range(0, len(order), config.batch_size):
        batch = [trainable[i] for i in order[start : start + config.batch_size]]
        if config.mask_mode:
            losses, grads = _masked_batch(params, graph, dataset, batch, config)
        else:
            losses, grads = _sampled_batch(params, graph, dataset, batch, config, rng)
        if not np.isfinite(losses).all():
            bad = batch[int(np.nonzero(~np.isfinite(losses))[0][0])]
            raise NumericError(f"non-finite loss for entity {bad}")
        adam_step(params, state, grads)
        total_loss += float(losses.sum())
        count += len(batch)
    return total_loss / count


def _sampled_batch(params, graph, dataset, batch, config, rng):
    m = config.sample_size
    rel = np.empty((len(batch), m), dtype=np.int32)
    inv = np.empty((len(batch), m), dtype=bool)
    is_type = np.empty((len(batch), m), dtype=bool)
    tgt = np.empty((len(batch), m), dtype=np.int32)
    for row, entity in enumerate(batch):
        degree = graph.degree(entity)
        idx = rng.integers(0, degree, size=m)
        e_rel, e_inv, e_is_type, e_tgt = graph.neighbor_arrays(entity)
        rel[row] = e_rel[idx]
        inv[row] = e_inv[idx]
        is_type[row] = e_is_type[idx]
        tgt[row] = e_tgt[idx]
    pos_mat = _positives_matrix(batch, dataset, params.num_types)
    return _batch_forward_backward(
        params,
        rel,
        inv,
        is_type,
        tgt,
        pos_mat,
        config.alpha,
        config.loss_kind,
        config.beta,
        config.use_agg2t,
        config.use_activation,
    )


def _masked_batch(params, graph, dataset, batch, config):
    losses = np.empty(len(batch), dtype=float)
    grads = GradientSet.zeros_like(params)
    for row, entity in enumerate(batch):
        labels = dataset.positives(entity)
        bundle = score_all_neighbors(
            params,
            graph,
            entity,
            config.alpha,
            mask_labels=labels,
            use_agg2t=config.use_agg2t,
            use_activation=config.use_activation,
        )
        loss, entity_grads = backward(bundle, labels, config.loss_kind, config.beta)
        losses[row] = loss
        grads.accumulate(entity_grads)
    return losses, grads


@dataclass
class FitResult:
    """Outcome of a training run: chosen parameters plus the epoch log."""

    params: ParameterSet
    log: list[tuple[int, float, float | None]]
    best_epoch: int | None
    best_valid_mrr: float | None
    skipped_isolated: int = 0


def format_log(records: list[tuple[int, float, float | None]]) -> str:
    """Render epoch records as `epoch<TAB>loss<TAB>valid_mrr` lines."""
    lines = []
    for epoch, loss, mrr in records:
        mrr_text = "" if mrr is None else f"{mrr:.6f}"
        lines.append(f"{epoch}\t{loss:.6f}\t{mrr_text}")
    return "\n".join(lines) + ("\n" if lines else "")


def fit(
    vocab: Vocab,
    graph: AugmentedGraph,
    dataset: TypingDataset,
    config: TrainConfig,
    *,
    eval_threads: int = 1,
) -> FitResult:
    """Train for up to ``max_epochs`` epochs, validating every ``eval_every``.

    The returned parameters are the snapshot with the best validation MRR;
    if validation never ran (short budgets), the final parameters are
    returned instead. `max_epochs=0` returns the freshly initialized model.
    """
    params = init_params(
        vocab, config.dim, config.seed, separate_heads=config.separate_heads
    )
    state = AdamState(params, config.lr)
    rng = np.random.default_rng(config.seed)
    _, skipped = _trainable_entities(graph, dataset)
    if skipped:
        log.info("skipping %d labeled entities with no neighbors", skipped)

    records: list[tuple[int, float, float | None]] = []
    best_mrr = -np.inf
    best_epoch: int | None = None
    best_params: ParameterSet | None = None

    for epoch in range(1, config.max_epochs + 1):
        loss = train_epoch(params, state, graph, dataset, config, rng)
        mrr: float | None = None
        if epoch % config.eval_every == 0:
            report = evaluate(
                params,
                graph,
                dataset,
                "valid",
                config.alpha,
                use_agg2t=config.use_agg2t,
                use_activation=config.use_activation,
                threads=eval_threads,
                keep_ranks=False,
            )
            mrr = report.mrr
            if mrr > best_mrr:
                best_mrr = mrr
                best_epoch = epoch
                best_params = params.copy()
        records.append((epoch, loss, mrr))
        log.info(
            "epoch %d: loss %.6f%s",
            epoch,
            loss,
            "" if mrr is None else f", valid MRR {mrr:.6f}",
        )

    if best_params is None:
        best_params = params
        best_mrr_out = None
    else:
        best_mrr_out = float(best_mrr)
    return FitResult(
        params=best_params,
        log=records,
        best_epoch=best_epoch,
        best_valid_mrr=best_mrr_out,
        skipped_isolated=skipped,
    )
