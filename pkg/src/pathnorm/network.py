"""Forward evaluation and loss gradients for RELU networks over DAGs.

Hidden nodes apply RELU to the weighted sum of their incoming values; output
nodes emit the raw weighted sum (pre-softmax scores).  The training loss is
mean softmax cross-entropy.  Everything runs in float64, level by level, on
dense per-level weight blocks so layered networks reduce to plain matrix
multiplies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .graph import NetworkGraph
from .norms import _check_weights


@dataclass(frozen=True)
class Batch:
    """A minibatch: inputs of shape (B, D) and integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or len(x) == 0:
            raise ConfigError("batch inputs must be a nonempty (B, D) matrix")
        if y.shape != (len(x),):
            raise ConfigError("labels must be one integer per batch row")
        if not np.isfinite(x).all():
            raise ConfigError("batch inputs contain non-finite values")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.inputs)


@dataclass(frozen=True)
class LossReport:
    loss: float            # mean cross-entropy
    zero_one_error: float  # fraction misclassified


def _node_multipliers(g: NetworkGraph, mask, retain_prob: float) -> np.ndarray | None:
    """Per-node output multiplier: dropout mask bits or test-time scaling."""
    if mask is None and retain_prob == 1.0:
        return None
    m = np.ones(g.n_nodes)
    if mask is not None:
        m[g.hidden_nodes] = mask.retained.astype(np.float64)
    else:
        m[g.hidden_nodes] = retain_prob
    return m


def _forward_values(g: NetworkGraph, w: np.ndarray, x: np.ndarray,
                    multipliers: np.ndarray | None, keep_pre: bool,
                    mats=None):
    """Node values for a batch, in topological level order.

    Returns (values: (B, n_nodes), pre_acts: list of per-level (B, L) arrays
    or None).  Output nodes keep their raw pre-activation as value.
    """
    n_in = g.n_inputs
    if x.ndim != 2 or x.shape[1] != n_in:
        raise ConfigError(f"input has shape {x.shape}, expected (B, {n_in})")
    if mats is None:
        mats = [block.matrix(w) for block in g.in_blocks]
    vals = np.zeros((len(x), g.n_nodes))
    vals[:, g.input_nodes] = x
    pres = [] if keep_pre else None
    is_output = np.zeros(g.n_nodes, dtype=bool)
    is_output[g.output_nodes] = True
    for block, mat in zip(g.in_blocks, mats):
        pre = vals[:, block.src_nodes] @ mat
        bad = ~np.isfinite(pre)
        if bad.any():
            node = int(block.nodes[np.argmax(bad.any(axis=0))])
            raise NumericError(f"non-finite activation at node {node}", node=node)
        if keep_pre:
            pres.append(pre)
        out_here = is_output[block.nodes]
        act = np.maximum(pre, 0.0)
        if multipliers is not None:
            act = act * multipliers[block.nodes]
        vals[:, block.nodes] = np.where(out_here, pre, act)
    return vals, pres


def forward(g: NetworkGraph, w: np.ndarray, x) -> np.ndarray:
    """Network outputs for a single input row (C raw scores)."""
    return forward_batch(g, w, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def forward_batch(g: NetworkGraph, w: np.ndarray, x: np.ndarray,
                  mask=None, retain_prob: float = 1.0) -> np.ndarray:
    """Network outputs for a batch of inputs, shape (B, C)."""
    w = _check_weights(g, w)
    x = np.asarray(x, dtype=np.float64)
    mult = _node_multipliers(g, mask, retain_prob)
    vals, _ = _forward_values(g, w, x, mult, keep_pre=False)
    return vals[:, g.output_nodes]


def _softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean CE of softmax(logits) at the labels, plus dLoss/dlogits."""
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    log_probs = z - np.log(denom)
    n = len(labels)
    loss = -float(log_probs[np.arange(n), labels].mean())
    dlogits = ez / denom
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def loss_and_grad(g: NetworkGraph, w: np.ndarray, batch: Batch, mask=None):
    """Mean cross-entropy, 0/1 error and the loss gradient per edge weight.

    The gradient is reverse accumulation over the level schedule; the RELU
    subgradient at exactly zero is taken to be 0.
    """
    w = _check_weights(g, w)
    if g.n_outputs < 2:
        raise ConfigError("classification needs at least 2 output nodes")
    x, y = batch.inputs, batch.labels
    if y.min() < 0 or y.max() >= g.n_outputs:
        raise ConfigError("label outside [0, n_classes)")
    mult = _node_multipliers(g, mask, 1.0)
    mats = [block.matrix(w) for block in g.in_blocks]
    vals, pres = _forward_values(g, w, x, mult, keep_pre=True, mats=mats)
    logits = vals[:, g.output_nodes]

    loss, dlogits = _softmax_cross_entropy(logits, y)
    err = float(np.mean(np.argmax(logits, axis=1) != y))

    d_vals = np.zeros_like(vals)
    d_vals[:, g.output_nodes] = dlogits
    is_output = np.zeros(g.n_nodes, dtype=bool)
    is_output[g.output_nodes] = True
    grad = np.zeros(g.n_edges)
    for block, mat, pre in zip(reversed(g.in_blocks), reversed(mats), reversed(pres)):
        gate = np.where(is_output[block.nodes], 1.0, (pre > 0).astype(np.float64))
        if mult is not None:
            gate = gate * np.where(is_output[block.nodes], 1.0, mult[block.nodes])
        d_pre = d_vals[:, block.nodes] * gate
        g_block = vals[:, block.src_nodes].T @ d_pre
        grad[block.eids] = g_block[block.rows, block.cols]
        d_vals[:, block.src_nodes] += d_pre @ mat.T
    bad = ~np.isfinite(grad)
    if bad.any():
        edge = int(np.argmax(bad))
        raise NumericError(f"non-finite gradient at edge {edge}", edge=edge)
    return LossReport(loss=loss, zero_one_error=err), grad


def evaluate(g: NetworkGraph, w: np.ndarray, inputs: np.ndarray, labels: np.ndarray,
             batch_size: int = 1000, retain_prob: float = 1.0) -> LossReport:
    """Mean loss and 0/1 error over a dataset, streamed in batches.

    retain_prob < 1 applies the standard inference-time dropout scaling to
    hidden activations (no units are dropped).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(inputs)
    if n == 0:
        raise ConfigError("cannot evaluate an empty dataset")
    w = _check_weights(g, w)
    loss_sum = 0.0
    err_sum = 0.0
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        logits = forward_batch(g, w, inputs[start:stop], retain_prob=retain_prob)
        loss, _ = _softmax_cross_entropy(logits, labels[start:stop])
        err = float(np.mean(np.argmax(logits, axis=1) != labels[start:stop]))
        loss_sum += loss * (stop - start)
        err_sum += err * (stop - start)
    return LossReport(loss=loss_sum / n, zero_one_error=err_sum / n)
