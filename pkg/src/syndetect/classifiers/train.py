"""Classifier training and checkpoint IO.

Checkpoints are single-file archives with an embedded architecture tag and
class count, so a loaded model can be validated before use.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import torch
import torch.nn.functional as F

from ..core.data import DatasetHandle, load_split_arrays
from ..core.errors import ConfigurationError, DataError, NumericError
from ..core.seeding import Seed, as_seed, make_generator, spawn
from .models import ARCHITECTURES, Classifier, build_classifier

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "syndetect-classifier-v1"


def train_classifier(
    handle: DatasetHandle,
    architecture: str,
    epochs: int,
    seed: "Seed | int" = 0,
    batch_size: int = 128,
    lr: float = 0.1,
    width: int | None = None,
    out: "Path | str | None" = None,
    eval_test: bool = True,
    limit: int | None = None,
) -> Classifier:
    """Momentum SGD with cosine decay; persists a checkpoint when ``out`` is set."""
    seed = as_seed(seed)
    torch.manual_seed(spawn(seed, "classifier-init"))
    clf = build_classifier(architecture, handle.info.num_classes, dataset=handle.name, width=width)

    x, y = load_split_arrays(DatasetHandle(handle.name, "train", handle.root), seed=seed, limit=limit)
    opt = torch.optim.SGD(clf.parameters(), lr=lr, momentum=0.9)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(1, epochs))
    g = make_generator(seed, "classifier-shuffle")

    clf.train()
    for epoch in range(epochs):
        perm = torch.randperm(len(x), generator=g)
        running = 0.0
        for start in range(0, len(x), batch_size):
            idx = perm[start : start + batch_size]
            opt.zero_grad()
            loss = F.cross_entropy(clf(x[idx]), y[idx])
            if not torch.isfinite(loss):
                raise NumericError(
                    f"classifier training diverged: non-finite loss at epoch {epoch}, step {start // batch_size}"
                )
            loss.backward()
            opt.step()
            running += loss.item() * len(idx)
        sched.step()
        log.info("classifier %s epoch %d: train loss %.4f", architecture, epoch, running / len(x))

    clf.eval()
    train_acc = accuracy(clf, x, y)
    test_acc = math.nan
    if eval_test:
        try:
            xt, yt = load_split_arrays(DatasetHandle(handle.name, "test", handle.root), seed=seed)
            test_acc = accuracy(clf, xt, yt)
        except DataError:
            pass
    log.info("classifier %s: train acc %.4f, test acc %.4f", architecture, train_acc, test_acc)

    if out is not None:
        save_classifier(clf, out)
    return clf


@torch.no_grad()
def accuracy(clf: Classifier, x: torch.Tensor, y: torch.Tensor, batch_size: int = 512) -> float:
    clf.eval()
    correct = 0
    for start in range(0, len(x), batch_size):
        logits = clf(x[start : start + batch_size])
        correct += (logits.argmax(1) == y[start : start + batch_size]).sum().item()
    return correct / len(x)


def save_classifier(clf: Classifier, path: "Path | str") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "kind": CHECKPOINT_KIND,
            "architecture": clf.architecture,
            "num_classes": clf.num_classes,
            "dataset": clf.dataset,
            "width": clf.width,
            "state_dict": clf.net.state_dict(),
        },
        path,
    )
    return path


def _load_payload(path: "Path | str") -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"classifier checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu")
    except Exception as exc:  # noqa: BLE001 - any unpickling failure is a load failure
        raise DataError(f"failed to read classifier checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("kind") != CHECKPOINT_KIND:
        raise DataError(f"{path} is not a classifier checkpoint")
    return payload


def load_classifier(path: "Path | str") -> Classifier:
    payload = _load_payload(path)
    arch = payload["architecture"]
    if arch not in ARCHITECTURES or arch == "external_robust":
        raise ConfigurationError(f"checkpoint declares unknown architecture {arch!r}")
    clf = build_classifier(arch, payload["num_classes"], dataset=payload.get("dataset", ""), width=payload.get("width"))
    try:
        clf.net.load_state_dict(payload["state_dict"])
    except Exception as exc:  # noqa: BLE001
        raise DataError(f"checkpoint weights do not fit architecture {arch!r}: {exc}") from exc
    clf.eval()
    return clf


def load_external_robust(path: "Path | str", num_classes: int | None = None) -> Classifier:
    """Load a pre-trained (e.g. adversarially trained) classifier checkpoint.

    The forward contract is identical to locally trained classifiers; only the
    provenance differs. ``num_classes`` cross-checks the declared head size.
    """
    payload = _load_payload(path)
    if num_classes is not None and payload["num_classes"] != num_classes:
        raise ConfigurationError(
            f"external checkpoint declares num_classes={payload['num_classes']}, expected {num_classes}"
        )
    clf = load_classifier(path)
    return clf
