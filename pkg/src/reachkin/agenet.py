"""Temporal convolutional age regressor over 200-frame wrist windows.

Everything is hand-rolled numpy: batched forward/backward passes through
1-D convolutions, max pooling, ReLU and linear layers, SGD with momentum,
early stopping, a finite-difference gradient check, and participant-level
stochastic cross-validation with binned confusion reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DivergedLoss, SequenceTooShort
from .model_io import Cohort

CONFUSION_BINS = ((6, 8), (9, 10), (11, 13), (14, 17))


@dataclass(frozen=True)
class MotionWindow:
    values: np.ndarray        # (4, 200) channels x frames, each in [-1, 1]
    label: float              # age in years
    participant_id: str


@dataclass(frozen=True)
class ArchDescriptor:
    input_channels: int = 4
    input_len: int = 200
    conv_channels: tuple = (16, 32, 64)
    kernel: int = 5
    pool: int = 3
    linear: tuple = (64, 32)

    def layer_plan(self):
        """Resolve per-layer shapes; the final linear layer emits one value."""
        plan = []
        c, t = self.input_channels, self.input_len
        for out_c in self.conv_channels:
            plan.append(("conv", (out_c, c, self.kernel)))
            t = t - self.kernel + 1
            plan.append(("pool", self.pool))
            t = t // self.pool
            c = out_c
        plan.append(("flatten", c * t))
        width = c * t
        for out_w in self.linear:
            plan.append(("linear", (out_w, width)))
            width = out_w
        plan.append(("linear_out", (1, width)))
        return plan


def normalize_window(raw):
    """Per-channel affine min-max normalization to [-1, 1]; constant -> 0."""
    raw = np.asarray(raw, dtype=float)
    lo = raw.min(axis=1, keepdims=True)
    hi = raw.max(axis=1, keepdims=True)
    span = hi - lo
    out = np.zeros_like(raw)
    nz = span[:, 0] > 0
    out[nz] = 2.0 * (raw[nz] - lo[nz]) / span[nz] - 1.0
    return out


def window_dataset(sequences, window: int = 200, stride: int = 100):
    """Slice per-participant channel arrays into normalized windows.

    ``sequences`` is an iterable of (participant_id, age, values) where
    values is (4, n_frames) wrist coordinates at the working frame rate.
    Windows never cross participants. Participants shorter than one window
    are skipped (with the skip recorded in the returned list of warnings).
    """
    windows, skipped = [], []
    for pid, age, values in sequences:
        values = np.asarray(values, dtype=float)
        n = values.shape[1]
        if n < window:
            skipped.append(pid)
            continue
        for start in range(0, n - window + 1, stride):
            windows.append(MotionWindow(
                values=normalize_window(values[:, start:start + window]),
                label=float(age), participant_id=pid))
    if not windows:
        raise SequenceTooShort("no participant has enough frames for a window")
    return windows, skipped


def wrist_channels(session, decimation: int = 2, confidence_threshold: float = 0.75):
    """Extract (4, n_frames) wrist x/y channels from a session's 2D skeleton,
    confidence-gated and decimated to the model's working rate."""
    from .preprocess import downsample, reject_low_confidence

    seq, _ = reject_low_confidence(session.skeleton(), confidence_threshold)
    seq = downsample(seq, decimation)
    _, _, left, _ = seq.joint_arrays("left_wrist")
    _, _, right, _ = seq.joint_arrays("right_wrist")
    n = min(len(left), len(right))
    return np.stack([left[:n, 0], left[:n, 1], right[:n, 0], right[:n, 1]])


def windows_from_cohort(cohort: Cohort, window: int = 200, stride: int = 100,
                        decimation: int = 2):
    seqs = [(s.participant_id, s.age, wrist_channels(s, decimation))
            for s in cohort.sessions]
    return window_dataset(seqs, window, stride)


# --- model -----------------------------------------------------------------

class AgeNet:
    """Three ReLU conv+pool blocks followed by three linear layers."""

    def __init__(self, arch: ArchDescriptor = ArchDescriptor(), seed: int = 0):
        self.arch = arch
        self.seed = seed
        self.plan = arch.layer_plan()
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for kind, shape in self.plan:
            if kind == "conv":
                out_c, in_c, k = shape
                fan_in = in_c * k
                self.weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in),
                                               (out_c, in_c, k)))
                self.biases.append(np.zeros(out_c))
            elif kind in ("linear", "linear_out"):
                out_w, in_w = shape
                self.weights.append(rng.normal(0.0, np.sqrt(2.0 / in_w),
                                               (out_w, in_w)))
                self.biases.append(np.zeros(out_w))

    # -- parameter vector ---------------------------------------------------

    def get_flat(self):
        return np.concatenate([w.ravel() for w in self.weights]
                              + [b.ravel() for b in self.biases])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=float)
        i = 0
        for w in self.weights:
            w[...] = flat[i:i + w.size].reshape(w.shape)
            i += w.size
        for b in self.biases:
            b[...] = flat[i:i + b.size].reshape(b.shape)
            i += b.size
        if i != flat.size:
            raise ValueError("parameter vector size mismatch")

    @property
    def n_params(self):
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    # -- forward / backward -------------------------------------------------

    def forward(self, x, cache=None):
        """Predict ages for a batch; x is (B, C, T) or a single (C, T)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 2
        if single:
            x = x[None]
        layer_idx = 0
        a = x
        for kind, shape in self.plan:
            if kind == "conv":
                W, b = self.weights[layer_idx], self.biases[layer_idx]
                win = sliding_window_view(a, W.shape[2], axis=2)  # (B,C,To,K)
                z = np.einsum("ock,bctk->bot", W, win,
                              optimize=True) + b[None, :, None]
                if cache is not None:
                    cache.append(("conv", a, win, z))
                a = np.maximum(z, 0.0)
                layer_idx += 1
            elif kind == "pool":
                p = shape
                To = a.shape[2] // p
                blocks = a[:, :, :To * p].reshape(a.shape[0], a.shape[1], To, p)
                idx = blocks.argmax(axis=3)
                if cache is not None:
                    cache.append(("pool", a.shape, blocks, idx, p))
                a = np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]
            elif kind == "flatten":
                if cache is not None:
                    cache.append(("flatten", a.shape))
                a = a.reshape(a.shape[0], -1)
            else:
                W, b = self.weights[layer_idx], self.biases[layer_idx]
                z = a @ W.T + b
                if cache is not None:
                    cache.append((kind, a, z))
                a = np.maximum(z, 0.0) if kind == "linear" else z
                layer_idx += 1
        out = a[:, 0]
        return float(out[0]) if single else out

    def backward(self, cache, dout):
        """Gradients of a scalar loss; dout is d(loss)/d(prediction), (B,).

        Returns (dweights, dbiases) lists parallel to the parameter lists.
        """
        dW = [np.zeros_like(w) for w in self.weights]
        db = [np.zeros_like(b) for b in self.biases]
        layer_idx = len(self.weights) - 1
        grad = np.asarray(dout, dtype=float)[:, None]   # (B, 1)

        for entry in reversed(cache):
            kind = entry[0]
            if kind in ("linear", "linear_out"):
                _, a, z = entry
                if kind == "linear":
                    grad = grad * (z > 0.0)
                W = self.weights[layer_idx]
                dW[layer_idx] = grad.T @ a
                db[layer_idx] = grad.sum(axis=0)
                grad = grad @ W
                layer_idx -= 1
            elif kind == "flatten":
                _, shape = entry
                grad = grad.reshape(shape)
            elif kind == "pool":
                _, in_shape, blocks, idx, p = entry
                dblocks = np.zeros_like(blocks)
                np.put_along_axis(dblocks, idx[..., None],
                                  grad[..., None], axis=3)
                din = np.zeros(in_shape)
                To = blocks.shape[2]
                din[:, :, :To * p] = dblocks.reshape(in_shape[0], in_shape[1],
                                                     To * p)
                grad = din
            else:  # conv
                _, a, win, z = entry
                grad = grad * (z > 0.0)
                W = self.weights[layer_idx]
                dW[layer_idx] = np.einsum("bot,bctk->ock", grad, win,
                                          optimize=True)
                db[layer_idx] = grad.sum(axis=(0, 2))
                K = W.shape[2]
                din = np.zeros_like(a)
                To = grad.shape[2]
                for k in range(K):
                    din[:, :, k:k + To] += np.einsum(
                        "oc,bot->bct", W[:, :, k], grad, optimize=True)
                grad = din
                layer_idx -= 1
        return dW, db

    def clone(self):
        other = AgeNet(self.arch, self.seed)
        other.set_flat(self.get_flat())
        return other


# --- gradient check --------------------------------------------------------

def _activation_pattern(cache):
    """Sign/argmax pattern of every nonlinearity, for kink-crossing detection."""
    pattern = []
    for entry in cache:
        if entry[0] == "conv":
            pattern.append(entry[3] > 0.0)
        elif entry[0] == "linear":
            pattern.append(entry[2] > 0.0)
        elif entry[0] == "pool":
            pattern.append(entry[3])
    return pattern


def _at_kink(cache, margin):
    """True when the forward pass sits exactly on a ReLU kink (pre-activation
    within ``margin`` of zero). Pool ties are handled per parameter instead:
    exact ties from constant input stretches move together under a
    finite-difference step, and any tie that does break shows up as an
    argmax pattern flip and excludes that parameter."""
    for entry in cache:
        if entry[0] in ("conv", "linear"):
            z = entry[3] if entry[0] == "conv" else entry[2]
            if np.any((np.abs(z) < margin) & (z != 0.0)):
                return True
    return False


def grad_check(model: AgeNet, window, n_params: int = 200, step: float = 1e-5,
               seed: int = 0, tie_margin: float = 1e-9):
    """Compare analytic gradients to central finite differences.

    Returns (max_relative_error, n_checked). ``n_checked`` is 0 (and the
    error nan) when the forward pass sits on a ReLU kink, where the analytic
    subgradient is not finite-difference-verifiable. Parameters whose
    finite-difference step flips a ReLU sign or a pool argmax are excluded
    and do not count toward ``n_checked``.
    """
    x = np.asarray(window, dtype=float)[None]
    cache = []
    model.forward(x, cache=cache)
    if _at_kink(cache, tie_margin):
        return float("nan"), 0
    base_pattern = _activation_pattern(cache)
    dW, db = model.backward(cache, np.ones(1))
    analytic = np.concatenate([g.ravel() for g in dW] + [g.ravel() for g in db])

    def probed(flat):
        model.set_flat(flat)
        c = []
        val = model.forward(x, cache=c)[0]
        same = all(np.array_equal(p, q)
                   for p, q in zip(base_pattern, _activation_pattern(c)))
        return val, same

    flat = model.get_flat()
    rng = np.random.default_rng(seed)
    idx = rng.choice(flat.size, size=min(n_params, flat.size), replace=False)
    max_err = 0.0
    checked = 0
    for i in idx:
        saved = flat[i]
        flat[i] = saved + step
        hi, ok_hi = probed(flat)
        flat[i] = saved - step
        lo, ok_lo = probed(flat)
        flat[i] = saved
        if not (ok_hi and ok_lo):
            continue   # step crossed a kink; not finite-difference-verifiable
        numeric = (hi - lo) / (2.0 * step)
        denom = max(abs(analytic[i]), abs(numeric), 1e-8)
        max_err = max(max_err, abs(analytic[i] - numeric) / denom)
        checked += 1
    model.set_flat(flat)
    if checked == 0:
        return float("nan"), 0
    return float(max_err), checked


# --- training --------------------------------------------------------------

@dataclass
class TrainResult:
    model: AgeNet
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1


def _batch_arrays(windows):
    x = np.stack([w.values for w in windows])
    y = np.array([w.label for w in windows])
    return x, y


def evaluate_mse(model, windows, batch: int = 64):
    x, y = _batch_arrays(windows)
    preds = np.concatenate([model.forward(x[i:i + batch])
                            for i in range(0, len(x), batch)])
    return float(np.mean((preds - y) ** 2)), preds


def train(model: AgeNet, train_windows, val_windows, epochs: int = 15,
          lr: float = 1e-3, momentum: float = 0.9, batch_size: int = 16,
          seed: int = 0) -> TrainResult:
    """SGD with momentum on MSE loss; returns the snapshot with the lowest
    validation loss (early stopping)."""
    train_ids = {w.participant_id for w in train_windows}
    val_ids = {w.participant_id for w in val_windows}
    if train_ids & val_ids:
        raise ValueError(f"participants in both splits: {train_ids & val_ids}")

    x, y = _batch_arrays(train_windows)
    rng = np.random.default_rng(seed)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]

    result = TrainResult(model=model.clone())
    best_val = float("inf")
    for epoch in range(epochs):
        order = rng.permutation(len(x))
        epoch_loss = 0.0
        for start in range(0, len(x), batch_size):
            sel = order[start:start + batch_size]
            xb, yb = x[sel], y[sel]
            cache = []
            preds = model.forward(xb, cache=cache)
            err = preds - yb
            loss = float(np.mean(err ** 2))
            if not np.isfinite(loss):
                raise DivergedLoss(
                    f"non-finite loss at epoch {epoch}; trace: {result.train_loss}")
            epoch_loss += loss * len(sel)
            dout = 2.0 * err / len(sel)
            dW, db = model.backward(cache, dout)
            if lr != 0.0:
                for i in range(len(model.weights)):
                    vel_w[i] = momentum * vel_w[i] - lr * dW[i]
                    vel_b[i] = momentum * vel_b[i] - lr * db[i]
                    model.weights[i] += vel_w[i]
                    model.biases[i] += vel_b[i]
        result.train_loss.append(epoch_loss / len(x))
        val_mse, _ = evaluate_mse(model, val_windows)
        result.val_loss.append(val_mse)
        if val_mse < best_val:
            best_val = val_mse
            result.model = model.clone()
            result.best_epoch = epoch
    return result


# --- cross-validation ------------------------------------------------------

@dataclass(frozen=True)
class CrossValReport:
    fold_rmse: tuple
    pooled_rmse: float
    predictions: tuple        # of (fold, participant_id, label, prediction)
    confusion: np.ndarray     # 4x4 counts, true bin x predicted bin
    bins: tuple = CONFUSION_BINS
    warnings: tuple = ()


def _bin_index(age, bins):
    for i, (lo, hi) in enumerate(bins):
        if lo <= age <= hi:
            return i
    return len(bins) - 1 if age > bins[-1][1] else 0


def cross_validate(windows, folds: int = 5, split: float = 0.7,
                   epochs: int = 15, seed: int = 0,
                   arch: ArchDescriptor = ArchDescriptor(),
                   lr: float = 1e-3, predictor=None) -> CrossValReport:
    """Stochastic k-way cross-validation: k independent random participant
    splits (not a partition), each trained with early stopping.

    ``predictor`` optionally replaces the trained model (callable window ->
    age) for baseline and oracle checks.
    """
    by_pid = {}
    for w in windows:
        by_pid.setdefault(w.participant_id, []).append(w)
    pids = sorted(by_pid)
    if len(pids) < 10:
        raise ValueError(f"need >= 10 participants, got {len(pids)}")

    rng = np.random.default_rng(seed)
    fold_rmse = []
    predictions = []
    warnings = []
    confusion = np.zeros((len(CONFUSION_BINS), len(CONFUSION_BINS)), dtype=int)

    for fold in range(folds):
        order = rng.permutation(len(pids))
        n_train = int(round(split * len(pids)))
        train_pids = {pids[i] for i in order[:n_train]}
        val_pids = {pids[i] for i in order[n_train:]}
        train_w = [w for p in sorted(train_pids) for w in by_pid[p]]
        val_w = [w for p in sorted(val_pids) for w in by_pid[p]]

        if predictor is not None:
            preds = np.array([predictor(w) for w in val_w])
        else:
            model = AgeNet(arch, seed=seed * 1000 + fold)
            result = train(model, train_w, val_w, epochs=epochs, lr=lr,
                           seed=seed * 1000 + fold)
            _, preds = evaluate_mse(result.model, val_w)

        labels = np.array([w.label for w in val_w])
        fold_rmse.append(float(np.sqrt(np.mean((preds - labels) ** 2))))
        seen_bins = set()
        for w, p in zip(val_w, preds):
            predictions.append((fold, w.participant_id, w.label, float(p)))
            ti = _bin_index(w.label, CONFUSION_BINS)
            pi = _bin_index(p, CONFUSION_BINS)
            confusion[ti, pi] += 1
            seen_bins.add(ti)
        for i in range(len(CONFUSION_BINS)):
            if i not in seen_bins:
                warnings.append(f"fold {fold}: validation lacks bin {CONFUSION_BINS[i]}")

    all_pred = np.array([p for *_, p in predictions])
    all_lab = np.array([lab for _, _, lab, _ in predictions])
    pooled = float(np.sqrt(np.mean((all_pred - all_lab) ** 2)))
    return CrossValReport(tuple(fold_rmse), pooled, tuple(predictions),
                          confusion, warnings=tuple(warnings))
