import json

import numpy as np
import pytest

from conftest import TINY_MODEL, make_toy_rows, write_jsonl
from model_server.data import load_dataset, split_dataset
from model_server.labels import LABELS
from model_server.metrics import majority_weighted_f1, report_from_predictions
from model_server.modeling import TinyClassifier
from model_server.tokenizer import Tokenizer
from model_server.training import (
    BATCH_LADDER,
    GRID_LEARNING_RATES,
    GRID_WEIGHT_DECAYS,
    BatchTooLarge,
    LoraConfig,
    TrainRun,
    _AdamW,
    build_run,
    finetune,
    grid,
    next_batch_size,
    pick_batch_size,
    train_model,
)
from model_server.registry import get_spec

MISTRAL = "mistralai/Mistral-7B-v0.3"


# ---------------------------------------------------------------- TrainRun


def test_grid_sets_match_protocol():
    assert GRID_LEARNING_RATES == (1e-5, 5e-5, 1e-4)
    assert GRID_WEIGHT_DECAYS == (0.0, 0.01, 0.1)
    assert BATCH_LADDER == (256, 128, 64, 32, 16, 8)


def test_build_run_fills_size_class_fields():
    small = build_run(TINY_MODEL)
    assert small.epochs == 10
    assert small.lora is None
    assert small.max_length == 128

    big = build_run(MISTRAL)
    assert big.epochs == 3
    assert big.lora == LoraConfig(r=16, alpha=16.0, dropout=0.1)


def test_lora_required_iff_seven_b():
    with pytest.raises(ValueError, match="requires lora"):
        TrainRun(MISTRAL, 5e-5, 0.01, 8, epochs=3, lora=None)
    with pytest.raises(ValueError, match="lora not allowed"):
        TrainRun(TINY_MODEL, 5e-5, 0.01, 8, epochs=10, lora=LoraConfig())


def test_run_rejects_off_grid_values():
    with pytest.raises(ValueError, match="learning rate"):
        build_run(TINY_MODEL, learning_rate=3e-4)
    with pytest.raises(ValueError, match="weight decay"):
        build_run(TINY_MODEL, weight_decay=0.5)
    with pytest.raises(ValueError, match="ladder"):
        build_run(TINY_MODEL, batch_size=100)
    with pytest.raises(ValueError, match="epochs"):
        TrainRun(TINY_MODEL, 5e-5, 0.01, 8, epochs=4)
    with pytest.raises(ValueError, match="max_length"):
        TrainRun(TINY_MODEL, 5e-5, 0.01, 8, epochs=10, max_length=64)
    with pytest.raises(KeyError):
        build_run("unknown/model")


def test_lora_config_validation():
    with pytest.raises(ValueError):
        LoraConfig(r=0)
    with pytest.raises(ValueError):
        LoraConfig(dropout=1.0)


# ------------------------------------------------------------ batch ladder


def test_next_batch_size_walks_the_ladder():
    sizes = [256]
    while sizes[-1] is not None:
        sizes.append(next_batch_size(sizes[-1]))
    assert sizes == [256, 128, 64, 32, 16, 8, None]
    with pytest.raises(ValueError, match="not on the ladder"):
        next_batch_size(100)


def test_pick_batch_size_respects_budget():
    spec = get_spec(TINY_MODEL)
    assert pick_batch_size(spec) == 256
    top = pick_batch_size(spec, budget_mb=1e9)
    assert top == 256
    smallest = pick_batch_size(spec, budget_mb=10.0)
    assert smallest in BATCH_LADDER
    assert smallest < 256
    with pytest.raises(BatchTooLarge) as exc:
        pick_batch_size(spec, budget_mb=0.001)
    assert exc.value.suggested is None
    assert "smallest" in str(exc.value)


def test_train_rejects_batch_over_budget(toy_dataset):
    run = build_run(TINY_MODEL, batch_size=256)
    with pytest.raises(BatchTooLarge) as exc:
        finetune(toy_dataset, run, "unused", budget_mb=10.0)
    assert exc.value.batch_size == 256
    assert exc.value.suggested == 128
    assert "retry with batch size 128" in str(exc.value)


# -------------------------------------------------------------- optimizer


def test_warmup_schedule_shape():
    params = {"w": np.zeros(3)}
    opt = _AdamW(params, lr=1e-4, weight_decay=0.0, total_steps=100)
    assert opt.warmup_steps == 10
    lrs = []
    for _ in range(100):
        opt.t += 1
        lrs.append(opt.step_lr())
    # rises linearly to the peak, then decays linearly to zero
    assert lrs[9] == pytest.approx(1e-4)
    assert lrs[4] == pytest.approx(1e-4 * 5 / 10)
    assert lrs[-1] == pytest.approx(0.0)
    assert all(a <= b + 1e-18 for a, b in zip(lrs[:9], lrs[1:10]))
    assert all(a >= b for a, b in zip(lrs[9:], lrs[10:]))


def test_adamw_decay_is_decoupled_and_skips_bias():
    params = {"head_w": np.ones((2, 2)), "head_b": np.ones(2)}
    opt = _AdamW(params, lr=1e-4, weight_decay=0.1, total_steps=1)
    zero = {"head_w": np.zeros((2, 2)), "head_b": np.zeros(2)}
    opt.step(zero)
    # zero gradient: the only movement is the decay term, bias untouched
    lr_t = 1e-4  # single step == warmup peak
    assert params["head_w"] == pytest.approx(np.full((2, 2), 1.0 - lr_t * 0.1))
    assert np.array_equal(params["head_b"], np.ones(2))


# ----------------------------------------------------------- fine-tuning


def test_finetune_beats_majority_on_toy_dataset(trained, toy_dataset):
    report = trained.report
    examples = load_dataset(toy_dataset)
    _, _, test = split_dataset(examples, seed=trained.run.seed)
    majority = majority_weighted_f1([ex.label for ex in test])
    assert report["weighted_f1"] > majority
    assert report["weighted_f1"] > 0.8
    assert trained.epochs_run <= trained.run.epochs


def test_report_follows_shared_schema(trained):
    report = trained.report
    assert set(report) == {"per_label", "macro_f1", "weighted_f1"}
    assert set(report["per_label"]) == set(LABELS)
    for stats in report["per_label"].values():
        assert set(stats) == {"precision", "recall", "f1", "support"}
    # the copy written next to the artifact matches
    on_disk = json.loads((trained.artifact_dir / "report.json").read_text())
    assert on_disk == report


def test_early_stopping_on_non_improving_validation(toy_dataset):
    examples = load_dataset(toy_dataset)
    train, val, _ = split_dataset(examples, seed=0)
    # relabel validation with rotated labels: fitting the training data
    # makes validation loss rise, so patience must trigger
    from model_server.data import Example

    bad_val = [Example(e.project, e.text, (e.label + 1) % 6) for e in val]
    run = build_run(TINY_MODEL, learning_rate=1e-4, weight_decay=0.0, batch_size=8)
    result = train_model(train, bad_val, run)
    assert result.stopped_early
    assert result.epochs_run < run.epochs
    # the kept weights correspond to the best epoch, not the last one
    assert result.best_val_loss == min(result.val_losses)


def test_patience_is_two_epochs(toy_dataset):
    examples = load_dataset(toy_dataset)
    train, val, _ = split_dataset(examples, seed=0)
    from model_server.data import Example

    bad_val = [Example(e.project, e.text, (e.label + 1) % 6) for e in val]
    run = build_run(TINY_MODEL, learning_rate=1e-4, weight_decay=0.0, batch_size=8)
    result = train_model(train, bad_val, run)
    best_epoch = result.val_losses.index(min(result.val_losses)) + 1
    assert result.epochs_run == best_epoch + 2


def test_lora_trains_adapters_and_freezes_backbone(toy_dataset):
    examples = load_dataset(toy_dataset)
    train, val, _ = split_dataset(examples, seed=0)
    run = build_run(MISTRAL, learning_rate=1e-4, weight_decay=0.0, batch_size=8, seed=3)
    result = train_model(train, val, run)
    model = result.model
    assert model.uses_lora
    # backbone frozen: embedding identical to its seeded init, base head at zero
    fresh = TinyClassifier(
        result.tokenizer.vocab_size, seed=3, lora_r=16, lora_alpha=16.0, lora_dropout=0.1
    )
    assert np.array_equal(model.embedding, fresh.embedding)
    assert np.array_equal(model.head_w, np.zeros_like(model.head_w))
    # adapters moved (lora_b starts at zero)
    assert np.any(model.lora_b != 0.0)
    assert result.epochs_run <= 3


def test_full_finetune_updates_backbone(toy_dataset):
    examples = load_dataset(toy_dataset)
    train, val, _ = split_dataset(examples, seed=0)
    run = build_run(TINY_MODEL, learning_rate=1e-4, weight_decay=0.0, batch_size=8, seed=3)
    result = train_model(train, val, run)
    fresh = TinyClassifier(result.tokenizer.vocab_size, seed=3)
    assert not np.array_equal(result.model.embedding, fresh.embedding)
    assert np.any(result.model.head_w != 0.0)


def test_same_seed_gives_identical_predictions(toy_dataset, tmp_path):
    run = build_run(TINY_MODEL, learning_rate=1e-4, weight_decay=0.0, batch_size=8, seed=7)
    a = finetune(toy_dataset, run, tmp_path / "a")
    b = finetune(toy_dataset, run, tmp_path / "b")
    examples = load_dataset(toy_dataset)
    texts = [ex.text for ex in examples[:50]]

    from model_server.artifact import load_artifact

    art_a = load_artifact(a.artifact_dir)
    art_b = load_artifact(b.artifact_dir)
    pred_a = art_a.model.scores(art_a.tokenizer.encode_batch(texts)).argmax(axis=1)
    pred_b = art_b.model.scores(art_b.tokenizer.encode_batch(texts)).argmax(axis=1)
    assert np.array_equal(pred_a, pred_b)
    assert a.report == b.report


def test_int8_flag_is_recorded_metadata(toy_dataset, tmp_path):
    run = build_run(MISTRAL, learning_rate=1e-4, weight_decay=0.0, batch_size=8, int8=True)
    result = finetune(toy_dataset, run, tmp_path / "q")
    manifest = json.loads((result.artifact_dir / "manifest.json").read_text())
    assert manifest["int8"] is True
    assert manifest["lora"] == {"r": 16, "alpha": 16.0, "dropout": 0.1}


def test_empty_split_rejected():
    run = build_run(TINY_MODEL)
    with pytest.raises(ValueError, match="non-empty"):
        train_model([], [], run)


# ------------------------------------------------------------------ grid


def test_grid_trains_exactly_nine_cells(tmp_path):
    rows = make_toy_rows(per_label=20, seed=9)  # small corpus keeps this quick
    dataset = write_jsonl(rows, tmp_path / "toy.jsonl")
    results, best = grid(dataset, TINY_MODEL, tmp_path / "grid", batch_size=8, seed=0)
    assert len(results) == 9
    cells = [(r.run.learning_rate, r.run.weight_decay) for r in results]
    assert cells == [(lr, wd) for lr in GRID_LEARNING_RATES for wd in GRID_WEIGHT_DECAYS]
    assert len(set(cells)) == 9
    assert best in results
    assert best.report["weighted_f1"] == max(r.report["weighted_f1"] for r in results)
    # every cell left an artifact directory behind
    dirs = sorted(p.name for p in (tmp_path / "grid").iterdir())
    assert dirs == [f"run-{i:02d}" for i in range(9)]


# --------------------------------------------------------------- metrics


def test_report_hand_worked_case():
    # two classes used out of six: 8/10 of label 0 right, 2 leak to label 3
    y_true = [0] * 10 + [3] * 10
    y_pred = [0] * 8 + [3] * 2 + [3] * 10
    report = report_from_predictions(y_true, y_pred)
    non_satd = report["per_label"]["non-satd"]
    test_lbl = report["per_label"]["test"]
    assert non_satd["precision"] == pytest.approx(1.0)
    assert non_satd["recall"] == pytest.approx(0.8)
    assert non_satd["f1"] == pytest.approx(2 * 0.8 / 1.8)
    assert test_lbl["support"] == 10
    assert test_lbl["f1"] == pytest.approx(2 * (10 / 12) / (10 / 12 + 1))
    unused = report["per_label"]["scientific"]
    assert unused == {"precision": 0.0, "recall": 0.0, "f1": 0.0, "support": 0}
    assert report["macro_f1"] == pytest.approx((non_satd["f1"] + test_lbl["f1"]) / 6)
    assert report["weighted_f1"] == pytest.approx(
        (10 * non_satd["f1"] + 10 * test_lbl["f1"]) / 20
    )


def test_majority_baseline():
    y_true = [0, 0, 0, 1, 2]
    expected = report_from_predictions(y_true, [0] * 5)["weighted_f1"]
    assert majority_weighted_f1(y_true) == pytest.approx(expected)


def test_report_validation():
    with pytest.raises(ValueError):
        report_from_predictions([0, 1], [0])
    with pytest.raises(ValueError):
        report_from_predictions([], [])
