"""The staged training procedure.

Stage 1 trains the encoder/generator against the image discriminator, then the
auxiliary discriminator on difference images with the generator frozen, then
fine-tunes the generator against the frozen auxiliary discriminator. Stage 2
trains the synthesis-quality rejector and stage 3 the deep-metric rejector,
both with the generator frozen. Stages run strictly in order; each consumes
its predecessor's checkpoint and every stage writes a manifest sufficient to
re-run it identically.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F

from ..classifiers.models import Classifier
from ..core.errors import DataError, NumericError, StageDependencyError
from ..core.images import to_synthesis_space
from ..core.seeding import Seed, as_seed, make_generator, spawn
from ..similarity.metric import DISSIMILAR, SIMILAR, FeatureExtractorPair, MetricHead, triplet_loss
from ..similarity.quality import QualityDiscriminator, quality_hinge_loss
from ..synthesis.discriminators import AuxDiscriminator, ProjectionDiscriminator
from ..synthesis.encoder import Encoder, encode
from ..synthesis.generator import Generator
from ..synthesis.losses import (
    aux_hinge_loss,
    build_aux_pairs,
    disc_hinge_loss,
    generator_adversarial,
    generator_loss,
    kl_divergence,
    reconstruction_l2,
    ssim_term,
)
from .augment import add_uniform_noise, diff_augment
from .config import PREDECESSOR, STAGES, TrainHyperparams, linear_lr_factor
from .ema import Ema

log = logging.getLogger(__name__)

GEN_KIND = "syndetect-genstack-v1"
QUALITY_KIND = "syndetect-quality-v1"
METRIC_KIND = "syndetect-metric-v1"


# ---------------------------------------------------------------------------
# Run layout, manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunPaths:
    root: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))

    def stage_dir(self, stage: str) -> Path:
        return self.root / "stages" / stage

    def checkpoint(self, stage: str) -> Path:
        return self.stage_dir(stage) / "checkpoint.pt"

    def manifest(self, stage: str) -> Path:
        return self.stage_dir(stage) / "manifest.json"

    @property
    def classifier_path(self) -> Path:
        return self.root / "classifier.pt"

    def thresholds_path(self, target_fpr: float) -> Path:
        return self.root / f"thresholds_fpr{round(target_fpr * 100, 2):g}.json"


def code_hash() -> str:
    """Content hash of the installed package sources."""
    pkg_root = Path(__file__).resolve().parent.parent
    digest = hashlib.sha256()
    for path in sorted(pkg_root.rglob("*.py")):
        digest.update(str(path.relative_to(pkg_root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def write_manifest(run: RunPaths, stage: str, hp: TrainHyperparams, seed: Seed, dataset: str, extra: dict | None = None) -> Path:
    payload = {
        "stage": stage,
        "dataset": dataset,
        "seed": seed.value,
        "code_hash": code_hash(),
        "hyperparams": hp.to_dict(),
    }
    payload.update(extra or {})
    path = run.manifest(stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _require_predecessor(run: RunPaths, stage: str) -> Path:
    pred = PREDECESSOR[stage]
    if pred is None:
        return run.checkpoint(stage)
    path = run.checkpoint(pred)
    if not path.is_file():
        raise StageDependencyError(f"stage {stage!r} requires a {pred!r} checkpoint at {path}")
    return path


# ---------------------------------------------------------------------------
# Generator-stack checkpoint bundle
# ---------------------------------------------------------------------------


class GeneratorBundle:
    """Encoder, generator, both training discriminators and the EMA generator."""

    def __init__(self, hp: TrainHyperparams, num_classes: int, dataset: str):
        self.num_classes = num_classes
        self.dataset = dataset
        self.config = {
            "generator_channels": hp.generator_channels,
            "embed_dim": hp.embed_dim,
            "disc_width": hp.disc_width,
        }
        self.encoder = Encoder()
        self.generator = Generator(num_classes, hp.generator_channels, hp.embed_dim)
        self.d_phi = ProjectionDiscriminator(num_classes, hp.disc_width)
        self.d_aux = AuxDiscriminator(num_classes, hp.disc_width)
        self.ema = Ema(self.generator, hp.ema_decay)

    def save(self, path: Path, stage: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "kind": GEN_KIND,
                "stage": stage,
                "dataset": self.dataset,
                "num_classes": self.num_classes,
                "config": self.config,
                "encoder": self.encoder.state_dict(),
                "generator": self.generator.state_dict(),
                "g_ema": self.ema.state_dict(),
                "d_phi": self.d_phi.state_dict(),
                "d_aux": self.d_aux.state_dict(),
            },
            path,
        )
        return path

    @staticmethod
    def load(path: "Path | str", hp: TrainHyperparams | None = None) -> "tuple[GeneratorBundle, str]":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"generator checkpoint not found: {path}")
        payload = torch.load(path, map_location="cpu")
        if not isinstance(payload, dict) or payload.get("kind") != GEN_KIND:
            raise DataError(f"{path} is not a generator-stack checkpoint")
        hp = hp or TrainHyperparams()
        hp = TrainHyperparams.from_dict({**hp.to_dict(), **payload["config"]})
        bundle = GeneratorBundle(hp, payload["num_classes"], payload["dataset"])
        bundle.encoder.load_state_dict(payload["encoder"])
        bundle.generator.load_state_dict(payload["generator"])
        bundle.ema.load_state_dict(payload["g_ema"])
        bundle.d_phi.load_state_dict(payload["d_phi"])
        bundle.d_aux.load_state_dict(payload["d_aux"])
        return bundle, payload["stage"]


def init_bundle(hp: TrainHyperparams, num_classes: int, dataset: str, seed: "Seed | int") -> GeneratorBundle:
    torch.manual_seed(spawn(seed, "bundle-init"))
    return GeneratorBundle(hp, num_classes, dataset)


def _freeze(*modules) -> None:
    for m in modules:
        m.eval()
        for p in m.parameters():
            p.requires_grad_(False)


def _unfreeze(*modules) -> None:
    for m in modules:
        m.train()
        for p in m.parameters():
            p.requires_grad_(True)


def _check_finite(loss: torch.Tensor, stage: str, step: int, checkpoint: Path) -> None:
    if not torch.isfinite(loss):
        raise NumericError(
            f"{stage}: non-finite loss at step {step}; last good checkpoint kept at {checkpoint}"
        )


def _wrong_labels(y: torch.Tensor, num_classes: int, generator: torch.Generator) -> torch.Tensor:
    """Uniform draw over the num_classes - 1 labels different from y."""
    offset = torch.randint(1, num_classes, y.shape, generator=generator)
    return (y + offset) % num_classes


def _batches(n: int, batch_size: int, generator: torch.Generator):
    perm = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


# ---------------------------------------------------------------------------
# Stage 1
# ---------------------------------------------------------------------------


def _run_egd_like(
    bundle: GeneratorBundle,
    x: torch.Tensor,
    y: torch.Tensor,
    hp: TrainHyperparams,
    run: RunPaths,
    seed: Seed,
    stage: str,
    epochs: int,
    aux_weight: float,
) -> Path:
    """Shared loop for stage1_egd (aux_weight 0) and stage1_finetune.

    Per batch: one image-discriminator step, then one encoder+generator step,
    then an EMA update. With aux_weight == 0 the auxiliary term (and its label
    draws) is skipped entirely so both stages consume identical random streams.
    """
    ckpt = run.checkpoint(stage)
    ckpt.parent.mkdir(parents=True, exist_ok=True)

    eg_params = list(bundle.encoder.parameters()) + list(bundle.generator.parameters())
    opt_eg = torch.optim.Adam(eg_params, lr=hp.initial_lr, betas=(hp.beta1, hp.beta2))
    opt_d = torch.optim.Adam(bundle.d_phi.parameters(), lr=hp.initial_lr, betas=(hp.beta1, hp.beta2))
    steps_per_epoch = max(1, (len(x) + hp.batch_size - 1) // hp.batch_size)
    total_steps = max(1, epochs * steps_per_epoch)
    sched_eg = torch.optim.lr_scheduler.LambdaLR(opt_eg, lambda s: linear_lr_factor(s, total_steps))
    sched_d = torch.optim.lr_scheduler.LambdaLR(opt_d, lambda s: linear_lr_factor(s, total_steps))

    g_shuffle = make_generator(seed, f"{stage}:shuffle")
    g_enc = make_generator(seed, f"{stage}:encoder")
    g_aug = make_generator(seed, f"{stage}:augment")
    g_neg = make_generator(seed, f"{stage}:neglabel")

    _unfreeze(bundle.encoder, bundle.generator, bundle.d_phi)
    if aux_weight != 0.0:
        _freeze(bundle.d_aux)

    bundle.save(ckpt, stage)  # zero-iteration runs leave the initialization
    step = 0
    for epoch in range(epochs):
        for idx in _batches(len(x), hp.batch_size, g_shuffle):
            xb = to_synthesis_space(x[idx])
            yb = y[idx]
            code = encode(bundle.encoder, xb, training=True, generator=g_enc)
            x_syn = bundle.generator(code.sample, yb)

            def disc_view(t):
                t = add_uniform_noise(t, hp.noise_amplitude, g_aug)
                return diff_augment(t, g_aug) if hp.diffaugment else t

            # discriminator step first, then the encoder+generator step
            opt_d.zero_grad()
            loss_d = disc_hinge_loss(bundle.d_phi, disc_view(xb), disc_view(x_syn.detach()), yb)
            _check_finite(loss_d, stage, step, ckpt)
            loss_d.backward()
            opt_d.step()

            opt_eg.zero_grad()
            gen_score = bundle.d_phi(disc_view(x_syn), yb)
            loss_eg = generator_loss(xb, x_syn, code, gen_score)
            if aux_weight != 0.0:
                y_wrong = _wrong_labels(yb, bundle.num_classes, g_neg)
                x_syn_wrong = bundle.generator(code.sample, y_wrong)
                x_pos, x_neg = build_aux_pairs(xb, x_syn, x_syn_wrong)
                x_pos = add_uniform_noise(x_pos, hp.noise_amplitude, g_aug)
                x_neg = add_uniform_noise(x_neg, hp.noise_amplitude, g_aug)
                loss_eg = loss_eg + aux_weight * aux_hinge_loss(bundle.d_aux, x_pos, x_neg, yb)
            _check_finite(loss_eg, stage, step, ckpt)
            loss_eg.backward()
            opt_eg.step()
            bundle.ema.update(bundle.generator)

            sched_d.step()
            sched_eg.step()
            step += 1
        bundle.save(ckpt, stage)
        log.info("%s epoch %d/%d: loss_d %.3f loss_eg %.3f", stage, epoch + 1, epochs, loss_d.item(), loss_eg.item())
    bundle.save(ckpt, stage)
    return ckpt


def run_stage1_egd(
    x: torch.Tensor,
    y: torch.Tensor,
    hp: TrainHyperparams,
    run: RunPaths,
    seed: "Seed | int",
    dataset: str,
    num_classes: int,
    epochs: int | None = None,
) -> Path:
    seed = as_seed(seed)
    epochs = hp.epochs_for("stage1_egd") if epochs is None else epochs
    bundle = init_bundle(hp, num_classes, dataset, seed)
    path = _run_egd_like(bundle, x, y, hp, run, seed, "stage1_egd", epochs, aux_weight=0.0)
    write_manifest(run, "stage1_egd", hp, seed, dataset, {"epochs": epochs, "n_train": len(x)})
    return path


def run_stage1_aux(
    x: torch.Tensor,
    y: torch.Tensor,
    hp: TrainHyperparams,
    run: RunPaths,
    seed: "Seed | int",
    epochs: int | None = None,
) -> Path:
    """Train the auxiliary discriminator with the encoder/generator fixed."""
    seed = as_seed(seed)
    stage = "stage1_aux"
    epochs = hp.epochs_for(stage) if epochs is None else epochs
    bundle, _ = GeneratorBundle.load(_require_predecessor(run, stage), hp)
    ckpt = run.checkpoint(stage)

    _freeze(bundle.encoder, bundle.generator, bundle.d_phi)
    _unfreeze(bundle.d_aux)
    opt = torch.optim.Adam(bundle.d_aux.parameters(), lr=hp.initial_lr, betas=(hp.beta1, hp.beta2))
    steps_per_epoch = max(1, (len(x) + hp.batch_size - 1) // hp.batch_size)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: linear_lr_factor(s, max(1, epochs * steps_per_epoch)))

    g_shuffle = make_generator(seed, f"{stage}:shuffle")
    g_aug = make_generator(seed, f"{stage}:augment")
    g_neg = make_generator(seed, f"{stage}:neglabel")

    bundle.save(ckpt, stage)
    step = 0
    for epoch in range(epochs):
        for idx in _batches(len(x), hp.batch_size, g_shuffle):
            xb = to_synthesis_space(x[idx])
            yb = y[idx]
            with torch.no_grad():
                code = encode(bundle.encoder, xb, training=False)
                x_syn_true = bundle.generator(code.sample, yb)
                y_wrong = _wrong_labels(yb, bundle.num_classes, g_neg)
                x_syn_wrong = bundle.generator(code.sample, y_wrong)
            x_pos, x_neg = build_aux_pairs(xb, x_syn_true, x_syn_wrong)
            opt.zero_grad()
            loss = aux_hinge_loss(
                bundle.d_aux,
                add_uniform_noise(x_pos, hp.noise_amplitude, g_aug),
                add_uniform_noise(x_neg, hp.noise_amplitude, g_aug),
                yb,
            )
            _check_finite(loss, stage, step, ckpt)
            loss.backward()
            opt.step()
            sched.step()
            step += 1
        bundle.save(ckpt, stage)
        log.info("%s epoch %d/%d: loss %.3f", stage, epoch + 1, epochs, loss.item())
    bundle.save(ckpt, stage)
    write_manifest(run, stage, hp, seed, bundle.dataset, {"epochs": epochs, "n_train": len(x)})
    return ckpt


def run_stage1_finetune(
    x: torch.Tensor,
    y: torch.Tensor,
    hp: TrainHyperparams,
    run: RunPaths,
    seed: "Seed | int",
    epochs: int | None = None,
    aux_weight: float | None = None,
) -> Path:
    """Fine-tune encoder/generator/image-discriminator against the frozen D_aux."""
    seed = as_seed(seed)
    stage = "stage1_finetune"
    epochs = hp.epochs_for(stage) if epochs is None else epochs
    aux_weight = hp.finetune_aux_weight if aux_weight is None else aux_weight
    bundle, _ = GeneratorBundle.load(_require_predecessor(run, stage), hp)
    path = _run_egd_like(bundle, x, y, hp, run, seed, stage, epochs, aux_weight=aux_weight)
    write_manifest(run, stage, hp, seed, bundle.dataset, {"epochs": epochs, "n_train": len(x), "aux_weight": aux_weight})
    return path


# ---------------------------------------------------------------------------
# Stage 2: synthesis-quality rejector
# ---------------------------------------------------------------------------


def save_quality(quality: QualityDiscriminator, path: Path, dataset: str, width: int) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "kind": QUALITY_KIND,
            "dataset": dataset,
            "num_classes": quality.num_classes,
            "width": width,
            "state_dict": quality.state_dict(),
        },
        path,
    )
    return path


def load_quality(path: "Path | str") -> tuple[QualityDiscriminator, str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"quality checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu")
    if not isinstance(payload, dict) or payload.get("kind") != QUALITY_KIND:
        raise DataError(f"{path} is not a quality-rejector checkpoint")
    quality = QualityDiscriminator(payload["num_classes"], payload["width"])
    quality.load_state_dict(payload["state_dict"])
    quality.eval()
    return quality, payload["dataset"]


def run_stage2_dis(
    x: torch.Tensor,
    y: torch.Tensor,
    hp: TrainHyperparams,
    run: RunPaths,
    seed: "Seed | int",
    epochs: int | None = None,
) -> Path:
    seed = as_seed(seed)
    stage = "stage2_dis"
    epochs = hp.epochs_for(stage) if epochs is None else epochs
    bundle, _ = GeneratorBundle.load(_require_predecessor(run, stage), hp)
    _freeze(bundle.encoder, bundle.generator, bundle.d_phi, bundle.d_aux)

    torch.manual_seed(spawn(seed, f"{stage}:init"))
    quality = QualityDiscriminator(bundle.num_classes, hp.disc_width)
    opt = torch.optim.Adam(quality.parameters(), lr=hp.initial_lr, betas=(hp.beta1, hp.beta2))
    steps_per_epoch = max(1, (len(x) + hp.batch_size - 1) // hp.batch_size)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: linear_lr_factor(s, max(1, epochs * steps_per_epoch)))

    g_shuffle = make_generator(seed, f"{stage}:shuffle")
    g_aug = make_generator(seed, f"{stage}:augment")
    g_neg = make_generator(seed, f"{stage}:neglabel")

    ckpt = run.checkpoint(stage)
    save_quality(quality, ckpt, bundle.dataset, hp.disc_width)
    step = 0
    quality.train()
    for epoch in range(epochs):
        for idx in _batches(len(x), hp.batch_size, g_shuffle):
            xb = to_synthesis_space(x[idx])
            yb = y[idx]
            with torch.no_grad():
                code = encode(bundle.encoder, xb, training=False)
                x_syn_true = bundle.generator(code.sample, yb)
                y_wrong = _wrong_labels(yb, bundle.num_classes, g_neg)
                x_syn_wrong = bundle.generator(code.sample, y_wrong)
            opt.zero_grad()
            loss = quality_hinge_loss(
                quality,
                add_uniform_noise(x_syn_true, hp.noise_amplitude, g_aug),
                add_uniform_noise(x_syn_wrong, hp.noise_amplitude, g_aug),
                yb,
            )
            _check_finite(loss, stage, step, ckpt)
            loss.backward()
            opt.step()
            sched.step()
            step += 1
        save_quality(quality, ckpt, bundle.dataset, hp.disc_width)
        log.info("%s epoch %d/%d: loss %.3f", stage, epoch + 1, epochs, loss.item())
    save_quality(quality, ckpt, bundle.dataset, hp.disc_width)
    write_manifest(run, stage, hp, seed, bundle.dataset, {"epochs": epochs, "n_train": len(x)})
    return ckpt


# ---------------------------------------------------------------------------
# Stage 3: deep-metric rejector
# ---------------------------------------------------------------------------


def save_metric(pair: FeatureExtractorPair, head: MetricHead, path: Path, dataset: str, width: int) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "kind": METRIC_KIND,
            "dataset": dataset,
            "width": width,
            "pair": pair.state_dict(),
            "head": head.state_dict(),
        },
        path,
    )
    return path


def load_metric(path: "Path | str") -> tuple[FeatureExtractorPair, MetricHead, str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"metric checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu")
    if not isinstance(payload, dict) or payload.get("kind") != METRIC_KIND:
        raise DataError(f"{path} is not a deep-metric checkpoint")
    pair = FeatureExtractorPair(payload["width"])
    head = MetricHead()
    pair.load_state_dict(payload["pair"])
    head.load_state_dict(payload["head"])
    pair.eval()
    head.eval()
    return pair, head, payload["dataset"]


def _triplet_indices(y: torch.Tensor, generator: torch.Generator) -> tuple[torch.Tensor, torch.Tensor]:
    """Random positive (same class) and negative (other class) indices per anchor."""
    n = len(y)
    pos = torch.empty(n, dtype=torch.long)
    neg = torch.empty(n, dtype=torch.long)
    same = y.view(-1, 1) == y.view(1, -1)
    for i in range(n):
        candidates = torch.nonzero(same[i]).flatten()
        pos[i] = candidates[torch.randint(len(candidates), (1,), generator=generator)]
        others = torch.nonzero(~same[i]).flatten()
        if len(others) == 0:
            neg[i] = i
        else:
            neg[i] = others[torch.randint(len(others), (1,), generator=generator)]
    return pos, neg


def run_stage3_dmm(
    x: torch.Tensor,
    y: torch.Tensor,
    hp: TrainHyperparams,
    run: RunPaths,
    seed: "Seed | int",
    classifier: Classifier,
    epochs: int | None = None,
) -> Path:
    """Pretrain both feature extractors with triplets, then jointly optimize
    the extractors and the decision head with cross-entropy on balanced
    similar/dissimilar pairs, half of each batch built from PGD examples."""
    from ..attacks.gradient import AttackConfig, pgd

    seed = as_seed(seed)
    stage = "stage3_dmm"
    epochs = hp.epochs_for(stage) if epochs is None else epochs
    bundle, _ = GeneratorBundle.load(_require_predecessor(run, stage), hp)
    _freeze(bundle.encoder, bundle.generator, bundle.d_phi, bundle.d_aux)
    classifier.eval()

    torch.manual_seed(spawn(seed, f"{stage}:init"))
    pair = FeatureExtractorPair(hp.metric_width)
    head = MetricHead()
    ckpt = run.checkpoint(stage)
    save_metric(pair, head, ckpt, bundle.dataset, hp.metric_width)

    g_shuffle = make_generator(seed, f"{stage}:shuffle")
    g_neg = make_generator(seed, f"{stage}:neglabel")
    g_trip = make_generator(seed, f"{stage}:triplet")
    attack_seed = spawn(seed, f"{stage}:attack")
    attack_cfg = AttackConfig(steps=hp.dmm_attack_steps, random_start=True)

    @torch.no_grad()
    def synth(xb32: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        code = encode(bundle.encoder, xb32, training=False)
        return bundle.generator(code.sample, labels)

    # triplet pretraining of both trunks
    for name, net in (("real", pair.f_real), ("syn", pair.f_syn)):
        opt = torch.optim.Adam(net.parameters(), lr=hp.initial_lr, betas=(hp.beta1, hp.beta2))
        net.train()
        for epoch in range(hp.triplet_epochs):
            for idx in _batches(len(x), hp.batch_size, g_shuffle):
                xb = to_synthesis_space(x[idx])
                yb = y[idx]
                if name == "syn":
                    cond = yb.clone()
                    flip = torch.rand(len(yb), generator=g_trip) < 0.5
                    cond[flip] = _wrong_labels(yb[flip], bundle.num_classes, g_trip)
                    xb, yb = synth(xb, cond), cond
                pos, neg = _triplet_indices(yb, g_trip)
                emb = net(xb)
                loss = triplet_loss(emb, emb[pos], emb[neg], hp.triplet_margin)
                _check_finite(loss, stage, epoch, ckpt)
                opt.zero_grad()
                loss.backward()
                opt.step()
            log.info("%s triplet(%s) epoch %d/%d: loss %.3f", stage, name, epoch + 1, hp.triplet_epochs, loss.item())

    # joint cross-entropy training of extractors + head
    params = list(pair.parameters()) + list(head.parameters())
    opt = torch.optim.Adam(params, lr=hp.initial_lr, betas=(hp.beta1, hp.beta2))
    steps_per_epoch = max(1, (len(x) + hp.batch_size - 1) // hp.batch_size)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda s: linear_lr_factor(s, max(1, epochs * steps_per_epoch)))
    pair.train()
    head.train()
    step = 0
    for epoch in range(epochs):
        for idx in _batches(len(x), hp.batch_size, g_shuffle):
            xb_native = x[idx]
            yb = y[idx]
            half = len(yb) // 2

            # adversarial half: perturb in native classifier space
            x_adv = pgd(classifier, xb_native[:half], yb[:half], attack_cfg, seed=attack_seed + step)
            with torch.no_grad():
                y_pred = classifier(x_adv).argmax(1)
            fooled = y_pred != yb[:half]
            neg_labels_adv = torch.where(fooled, y_pred, _wrong_labels(yb[:half], bundle.num_classes, g_neg))

            x_all = torch.cat([x_adv, xb_native[half:]])
            y_all = torch.cat([yb[:half], yb[half:]])
            neg_labels = torch.cat([neg_labels_adv, _wrong_labels(yb[half:], bundle.num_classes, g_neg)])

            x32 = to_synthesis_space(x_all)
            syn_pos = synth(x32, y_all)
            syn_neg = synth(x32, neg_labels)

            inputs = torch.cat([x32, x32])
            synths = torch.cat([syn_pos, syn_neg])
            targets = torch.cat(
                [
                    torch.full((len(x32),), SIMILAR, dtype=torch.long),
                    torch.full((len(x32),), DISSIMILAR, dtype=torch.long),
                ]
            )
            opt.zero_grad()
            logits = head(pair.embed(inputs, synths))
            loss = F.cross_entropy(logits, targets)
            _check_finite(loss, stage, step, ckpt)
            loss.backward()
            opt.step()
            sched.step()
            step += 1
        save_metric(pair, head, ckpt, bundle.dataset, hp.metric_width)
        log.info("%s epoch %d/%d: loss %.3f", stage, epoch + 1, epochs, loss.item())
    save_metric(pair, head, ckpt, bundle.dataset, hp.metric_width)
    write_manifest(run, stage, hp, seed, bundle.dataset, {"epochs": epochs, "n_train": len(x)})
    return ckpt


# ---------------------------------------------------------------------------
# Pipeline assembly from a run directory
# ---------------------------------------------------------------------------


def assemble_pipeline(run: "RunPaths | Path | str", classifier: Classifier | None = None, target_fpr: float | None = None):
    from ..classifiers.train import load_classifier
    from ..similarity.pipeline import DetectionPipeline
    from ..similarity.verdict import ThresholdSet

    run = run if isinstance(run, RunPaths) else RunPaths(Path(run))
    bundle, stage = GeneratorBundle.load(run.checkpoint("stage1_finetune"))
    pair, head, metric_dataset = load_metric(run.checkpoint("stage3_dmm"))
    quality, quality_dataset = load_quality(run.checkpoint("stage2_dis"))
    if classifier is None:
        classifier = load_classifier(run.classifier_path)
    thresholds = None
    if target_fpr is not None:
        thresholds, _ = ThresholdSet.load(run.thresholds_path(target_fpr))
    return DetectionPipeline(
        classifier=classifier,
        encoder=bundle.encoder,
        generator=bundle.ema.module,
        pair=pair,
        head=head,
        quality=quality,
        thresholds=thresholds,
        dataset=bundle.dataset,
        tags={"metric": metric_dataset, "quality": quality_dataset},
    )
