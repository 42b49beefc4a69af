import numpy as np
import pytest

from reachkin import agenet
from reachkin.agenet import (
    AgeNet,
    ArchDescriptor,
    MotionWindow,
    cross_validate,
    evaluate_mse,
    grad_check,
    normalize_window,
    train,
    window_dataset,
)
from reachkin.errors import DivergedLoss, SequenceTooShort


# --- normalization -----------------------------------------------------------

def test_normalize_window_bounds():
    rng = np.random.default_rng(0)
    out = normalize_window(rng.normal(3.0, 10.0, (4, 200)))
    assert out.min() == -1.0 and out.max() == 1.0
    assert np.all(out.min(axis=1) == -1.0)
    assert np.all(out.max(axis=1) == 1.0)


def test_normalize_window_constant_channel_is_zero():
    raw = np.vstack([np.full(200, 7.0), np.linspace(0, 1, 200),
                     np.zeros(200), np.linspace(-3, 4, 200)])
    out = normalize_window(raw)
    assert np.all(out[0] == 0.0)
    assert np.all(out[2] == 0.0)


def test_normalize_window_affine_invariant():
    rng = np.random.default_rng(1)
    raw = rng.normal(size=(4, 200))
    assert np.allclose(normalize_window(3.0 * raw + 250.0),
                       normalize_window(raw), atol=1e-12)


# --- window slicing ----------------------------------------------------------

def test_window_dataset_counts():
    rng = np.random.default_rng(2)
    seqs = [("a", 8, rng.normal(size=(4, 750))),
            ("b", 12, rng.normal(size=(4, 200))),
            ("c", 15, rng.normal(size=(4, 199)))]
    windows, skipped = window_dataset(seqs)
    per_pid = {}
    for w in windows:
        per_pid[w.participant_id] = per_pid.get(w.participant_id, 0) + 1
    assert per_pid == {"a": 6, "b": 1}
    assert skipped == ["c"]
    assert all(w.values.shape == (4, 200) for w in windows)
    labels = {w.participant_id: w.label for w in windows}
    assert labels == {"a": 8.0, "b": 12.0}


def test_window_dataset_all_too_short():
    with pytest.raises(SequenceTooShort):
        window_dataset([("a", 8, np.zeros((4, 50)))])


# --- forward pass ------------------------------------------------------------

def test_forward_zero_parameters_predicts_zero():
    model = AgeNet(seed=0)
    model.set_flat(np.zeros(model.n_params))
    x = np.random.default_rng(3).normal(size=(4, 200))
    assert model.forward(x) == 0.0


def test_forward_single_vs_batch():
    model = AgeNet(seed=1)
    rng = np.random.default_rng(4)
    xs = rng.normal(size=(3, 4, 200))
    batch = model.forward(xs)
    assert batch.shape == (3,)
    for i in range(3):
        one = model.forward(xs[i])
        assert isinstance(one, float)
        # einsum batching reorders the reductions; agreement is to rounding
        assert one == pytest.approx(batch[i], rel=1e-12)


def test_forward_deterministic():
    x = np.random.default_rng(5).normal(size=(4, 200))
    assert AgeNet(seed=7).forward(x) == AgeNet(seed=7).forward(x)


def test_flat_parameter_round_trip():
    model = AgeNet(seed=2)
    flat = model.get_flat()
    other = AgeNet(seed=3)
    other.set_flat(flat)
    assert np.array_equal(other.get_flat(), flat)
    with pytest.raises(ValueError):
        other.set_flat(flat[:-1])


# --- gradient check ----------------------------------------------------------

def test_grad_check_linear_only_model():
    arch = ArchDescriptor(conv_channels=(), linear=())
    model = AgeNet(arch, seed=0)
    x = normalize_window(np.random.default_rng(6).normal(size=(4, 200)))
    err, checked = grad_check(model, x, n_params=300, seed=1)
    assert checked >= 200
    assert err < 1e-8


def test_grad_check_reports_kink():
    model = AgeNet(seed=0)
    model.set_flat(np.zeros(model.n_params))
    model.biases[0][0] = 1e-12   # first conv pre-activation sits on the kink
    err, checked = grad_check(model, np.zeros((4, 200)), n_params=20)
    assert checked == 0
    assert np.isnan(err)


# --- training ----------------------------------------------------------------

def _window(pid, label, seed):
    rng = np.random.default_rng(seed)
    return MotionWindow(normalize_window(rng.normal(size=(4, 200))),
                        float(label), pid)


def test_train_zero_learning_rate_leaves_model_unchanged():
    model = AgeNet(seed=4)
    before = model.get_flat().copy()
    train(model, [_window("a", 8, 0)], [_window("b", 12, 1)],
          epochs=3, lr=0.0)
    assert np.array_equal(model.get_flat(), before)


def test_train_rejects_overlapping_splits():
    w = _window("a", 8, 0)
    with pytest.raises(ValueError):
        train(AgeNet(seed=0), [w], [w], epochs=1)


def test_train_overfits_single_sample():
    model = AgeNet(seed=5)
    result = train(model, [_window("a", 9, 2)], [_window("b", 9, 3)],
                   epochs=300, lr=1e-3)
    assert result.train_loss[-1] < 1e-3
    assert result.train_loss[-1] < result.train_loss[0]


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_train_raises_on_non_finite_loss():
    bad = MotionWindow(_window("a", 0, 4).values, 1e200, "a")
    with pytest.raises(DivergedLoss):
        train(AgeNet(seed=0), [bad], [_window("b", 9, 5)], epochs=1)


def _synthetic_pids(n_pids=20, per_pid=5, seed=0):
    rng = np.random.default_rng(seed)
    ages = np.array(list(range(6, 18)) + list(range(6, 14)))
    rng.shuffle(ages)
    windows = []
    for i in range(n_pids):
        pid = f"s{i:02d}"
        for j in range(per_pid):
            windows.append(MotionWindow(
                normalize_window(rng.normal(size=(4, 200))),
                float(ages[i]), pid))
    return windows


def _split(windows, n_train_pids):
    pids = sorted({w.participant_id for w in windows})
    train_p = set(pids[:n_train_pids])
    tr = [w for w in windows if w.participant_id in train_p]
    va = [w for w in windows if w.participant_id not in train_p]
    return tr, va


def test_training_on_label_noise_matches_constant_baseline():
    # labels carry no signal: best validation rMSE stays near the rMSE of
    # always predicting the training mean
    windows = _synthetic_pids()
    tr, va = _split(windows, 14)
    result = train(AgeNet(seed=1), tr, va, epochs=15, seed=1)
    best = float(np.sqrt(min(result.val_loss)))
    const = float(np.mean([w.label for w in tr]))
    baseline = float(np.sqrt(np.mean([(w.label - const) ** 2 for w in va])))
    assert 0.85 * baseline <= best <= 1.15 * baseline


def test_training_learns_planted_linear_signal():
    windows = [MotionWindow(w.values, 10.0 + 5.0 * float(w.values[0].mean()),
                            w.participant_id)
               for w in _synthetic_pids()]
    tr, va = _split(windows, 14)
    result = train(AgeNet(seed=1), tr, va, epochs=15, seed=1)
    first = float(np.sqrt(result.val_loss[0]))
    best = float(np.sqrt(min(result.val_loss)))
    assert best * 10.0 <= first


def test_evaluate_mse_matches_manual_computation():
    model = AgeNet(seed=6)
    windows = [_window("a", 8, i) for i in range(3)]
    mse, preds = evaluate_mse(model, windows)
    manual = [model.forward(w.values) for w in windows]
    assert np.allclose(preds, manual)
    assert mse == pytest.approx(np.mean((np.asarray(manual) - 8.0) ** 2))


# --- cross-validation --------------------------------------------------------

def _cv_windows():
    rng = np.random.default_rng(7)
    ages = [6, 7, 9, 10, 11, 12, 13, 14, 15, 16, 17, 8]
    windows = []
    for i, age in enumerate(ages):
        for j in range(2):
            windows.append(MotionWindow(
                normalize_window(rng.normal(size=(4, 200))),
                float(age), f"c{i:02d}"))
    return windows


def test_cross_validate_requires_ten_participants():
    windows = [w for w in _cv_windows() if w.participant_id < "c09"]
    with pytest.raises(ValueError):
        cross_validate(windows, predictor=lambda w: 10.0)


def test_cross_validate_constant_predictor_identity():
    windows = _cv_windows()
    report = cross_validate(windows, folds=3, seed=0,
                            predictor=lambda w: 11.0)
    labs = np.array([lab for _, _, lab, _ in report.predictions])
    assert report.pooled_rmse == pytest.approx(
        float(np.sqrt(np.mean((11.0 - labs) ** 2))))
    assert all(p == 11.0 for *_, p in report.predictions)
    assert report.confusion.sum() == len(report.predictions)


def test_cross_validate_perfect_predictor():
    report = cross_validate(_cv_windows(), folds=3, seed=0,
                            predictor=lambda w: w.label)
    assert report.pooled_rmse == 0.0
    assert report.fold_rmse == (0.0, 0.0, 0.0)
    conf = report.confusion
    off_diag = conf.sum() - np.trace(conf)
    assert off_diag == 0


def test_cross_validate_deterministic_for_fixed_seed():
    windows = _cv_windows()
    a = cross_validate(windows, folds=2, seed=3, predictor=lambda w: w.label + 1)
    b = cross_validate(windows, folds=2, seed=3, predictor=lambda w: w.label + 1)
    assert a.predictions == b.predictions
    assert np.array_equal(a.confusion, b.confusion)
