"""Parameter sampling, gamma encoding, batch synthesis and the joint
training loop of the weight generator plus base network.

Training is single-writer over the fc parameters and fully deterministic
for a given config: one seeded generator drives operator choice, parameter
sampling, image/patch selection and noise seeds in a fixed order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis
from .basenet import BaseNetConfig, backward, forward
from .checkpoint import Checkpoint, OptimizerState, save_checkpoint
from .hypernet import (
    HyperParams,
    flatten_weight_grads,
    generate_weights,
    hyper_backward,
    init_hyperparams,
)
from .operators import OperatorSpec, build_operator_specs, make_pair
from .synth import generate_corpus, streamed_image
from .tensor import Tensor, mse_loss

log = logging.getLogger("opnet.training")


class TrainingError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    operators: list[str] = field(default_factory=lambda: ["gaussian"])
    bounds_override: dict = field(default_factory=dict)
    patch_size: int = 32
    iterations: int = 2000
    batch_size: int = 1
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    optimizer: str = "adam"  # or "sgd"
    seed: int = 0
    precision: str = "single"
    checkpoint_interval: int = 0
    checkpoint_path: str | None = None
    channels: int = 24
    corpus_images: int = 64
    image_size: int = 64
    corpus_seed: int | None = None
    flat_fraction: float = 0.05
    image_dir: str | None = None
    augment_flips: bool = False
    log_interval: int = 200

    def __post_init__(self):
        if self.patch_size % 4:
            raise ConfigError(f"patch_size must be divisible by 4, got {self.patch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.precision not in ("single", "double"):
            raise ConfigError(f"precision must be single or double, got {self.precision!r}")

    @property
    def m(self) -> int:
        return 2 if len(self.operators) > 1 else 1

    def operator_specs(self) -> list[OperatorSpec]:
        return build_operator_specs(self.operators, self.bounds_override)


_LIST_KEYS = {"operators"}
_BOOL_KEYS = {"augment_flips"}


def parse_config_text(text: str) -> TrainConfig:
    """Parse the key-value config format: `key = value`, '#' comments.

    Unknown keys are rejected.  Operator bounds overrides use
    `bounds.<operator> = lo,hi`.
    """
    known = {f.name: f.type for f in fields(TrainConfig)}
    kwargs: dict = {}
    overrides: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("bounds."):
            op = key.split(".", 1)[1]
            parts = [float(v) for v in value.split(",")]
            if len(parts) != 2:
                raise ConfigError(f"line {lineno}: bounds need 'lo,hi'")
            overrides[op] = ((parts[0], parts[1]),)
            continue
        if key not in known or key == "bounds_override":
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in _LIST_KEYS:
            kwargs[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in _BOOL_KEYS:
            kwargs[key] = value.lower() in ("1", "true", "yes")
        elif key in ("optimizer", "precision", "image_dir", "checkpoint_path"):
            kwargs[key] = value
        elif key in ("learning_rate", "beta1", "beta2", "adam_eps", "flat_fraction"):
            kwargs[key] = float(value)
        else:
            kwargs[key] = int(value)
    if overrides:
        kwargs["bounds_override"] = overrides
    return TrainConfig(**kwargs)


def load_config(path) -> TrainConfig:
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# sampling and encoding


def sample_parameter(spec: OperatorSpec, rng: np.random.Generator) -> float:
    """Draw one raw parameter from [l, u]: uniform in log space when the
    operator's range spans a decade or more, uniform otherwise."""
    lo, hi = spec.bounds[0]
    if lo == hi:
        return lo
    if spec.sampling == "log":
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    return float(rng.uniform(lo, hi))


def rescale_parameter(spec: OperatorSpec, raw: float) -> float:
    """Map a raw value onto [0,1]: log-scale rescale for log-sampled ranges."""
    lo, hi = spec.bounds[0]
    if not (lo <= raw <= hi):
        raise ConfigError(f"{spec.name}: raw parameter {raw} outside bounds [{lo}, {hi}]")
    if lo == hi:
        return 0.0
    if spec.sampling == "log":
        return float((np.log(raw) - np.log(lo)) / (np.log(hi) - np.log(lo)))
    return float((raw - lo) / (hi - lo))


def encode_gamma(spec: OperatorSpec, raw: float, joint: bool) -> np.ndarray:
    """Build the conditioning vector.

    Single-operator mode: [rescaled].  Joint mode: [id_code, rescaled],
    except that restoration operators get a zero parameter slot (the
    corruption degree is not specified at inference time).
    """
    if not joint:
        return np.array([rescale_parameter(spec, raw)])
    p = 0.0 if spec.kind == "restoration" else rescale_parameter(spec, raw)
    return np.array([spec.id_code, p])


# ---------------------------------------------------------------------------
# batches


@dataclass
class SampleRecord:
    operator: str
    raw_gamma: float
    encoded_gamma: np.ndarray
    image_ids: list[int]
    patch_offsets: list[tuple[int, int]]
    noise_seed: int


class ListImageSource:
    """Draws uniformly from a fixed list of images."""

    def __init__(self, images):
        self.images = images

    def draw(self, rng):
        idx = int(rng.integers(len(self.images)))
        return idx, self.images[idx]

    def get(self, image_id):
        return self.images[image_id]


class StreamImageSource:
    """Generates a fresh deterministic synthetic image per draw.

    With an unbounded corpus the model cannot memorize training images,
    which matters for the small full-image training runs.
    """

    def __init__(self, size, seed, flat_fraction):
        self.size = size
        self.seed = seed
        self.flat_fraction = flat_fraction

    def draw(self, rng):
        idx = int(rng.integers(2**31 - 1))
        return idx, self.get(idx)

    def get(self, image_id):
        return streamed_image(self.size, self.seed, image_id, self.flat_fraction)


def _training_images(config: TrainConfig):
    if config.image_dir:
        from .imageio import load_image

        paths = sorted(Path(config.image_dir).glob("*"))
        images = [load_image(p) for p in paths if p.suffix.lower() in (".png", ".ppm")]
        if not images:
            raise ConfigError(f"no .png/.ppm images found in {config.image_dir}")
        return ListImageSource(images)
    seed = config.corpus_seed if config.corpus_seed is not None else config.seed
    if config.corpus_images == 0:
        return StreamImageSource(config.image_size, seed, config.flat_fraction)
    return ListImageSource(
        generate_corpus(config.corpus_images, config.image_size, seed, config.flat_fraction)
    )


def next_batch(config: TrainConfig, specs, source, rng: np.random.Generator):
    """One (inputs, targets, record) batch: one gamma, batch_size patches."""
    spec = specs[int(rng.integers(len(specs)))]
    raw = sample_parameter(spec, rng)
    encoded = encode_gamma(spec, raw, joint=config.m == 2)
    noise_seed = int(rng.integers(2**31 - 1))
    p = config.patch_size
    xs, ys, ids, offsets = [], [], [], []
    for k in range(config.batch_size):
        idx, img = source.draw(rng)
        _, h, w = img.shape
        if h < p or w < p:
            raise ConfigError(f"corpus image {idx} smaller than patch_size {p}")
        oy = int(rng.integers(h - p + 1)) if h > p else 0
        ox = int(rng.integers(w - p + 1)) if w > p else 0
        patch = img[:, oy : oy + p, ox : ox + p]
        if config.augment_flips:
            if rng.uniform() < 0.5:
                patch = patch[:, :, ::-1]
            if rng.uniform() < 0.5:
                patch = patch[:, ::-1, :]
        x, target = make_pair(spec, raw, np.ascontiguousarray(patch), seed=noise_seed + k)
        xs.append(x)
        ys.append(target)
        ids.append(idx)
        offsets.append((oy, ox))
    record = SampleRecord(spec.name, raw, encoded, ids, offsets, noise_seed)
    return xs, ys, record


# ---------------------------------------------------------------------------
# optimizer and the training step


def _init_optimizer(config: TrainConfig, hp: HyperParams) -> OptimizerState:
    state = OptimizerState(
        name=config.optimizer,
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
    )
    if config.optimizer == "adam":
        state.m_a = [np.zeros_like(a) for a in hp.a]
        state.v_a = [np.zeros_like(a) for a in hp.a]
        state.m_b = [np.zeros_like(b) for b in hp.b]
        state.v_b = [np.zeros_like(b) for b in hp.b]
    return state


def _apply_update(hp: HyperParams, opt: OptimizerState, grads_a, grads_b):
    if opt.name == "sgd":
        for i in range(len(hp.a)):
            hp.a[i] -= opt.lr * grads_a[i].astype(hp.a[i].dtype)
            hp.b[i] -= opt.lr * grads_b[i].astype(hp.b[i].dtype)
        return
    opt.t += 1
    b1, b2, eps = opt.beta1, opt.beta2, opt.eps
    c1 = 1.0 - b1**opt.t
    c2 = 1.0 - b2**opt.t
    for i in range(len(hp.a)):
        for param, grad, mm, vv in (
            (hp.a[i], grads_a[i].astype(hp.a[i].dtype), opt.m_a[i], opt.v_a[i]),
            (hp.b[i], grads_b[i].astype(hp.b[i].dtype), opt.m_b[i], opt.v_b[i]),
        ):
            mm *= b1
            mm += (1 - b1) * grad
            vv *= b2
            vv += (1 - b2) * grad * grad
            param -= opt.lr * (mm / c1) / (np.sqrt(vv / c2) + eps)


def train_step(hp: HyperParams, opt: OptimizerState, batch, config: BaseNetConfig, iteration: int = 0):
    """generate weights -> base forward -> mse -> base backward -> fc chain
    rule -> optimizer update.  Returns (loss, hp); hp is updated in place."""
    xs, ys, record = batch
    dt = hp.a[0].dtype
    gamma = record.encoded_gamma.astype(dt)
    weights = generate_weights(hp, gamma, config)
    total_loss = 0.0
    sum_a = None
    sum_b = None
    for x, target in zip(xs, ys):
        xt = Tensor(x[None].astype(dt))
        tt = Tensor(target[None].astype(dt))
        out, cache = forward(xt, weights, config)
        loss, grad_pred = mse_loss(out, tt)
        total_loss += loss
        gk, gb, _ = backward(cache, weights, config, grad_pred)
        flats = flatten_weight_grads(gk, gb)
        ga, gbb = hyper_backward(gamma, flats)
        if sum_a is None:
            sum_a, sum_b = ga, gbb
        else:
            sum_a = [s + g for s, g in zip(sum_a, ga)]
            sum_b = [s + g for s, g in zip(sum_b, gbb)]
    n = len(xs)
    total_loss /= n
    if not np.isfinite(total_loss):
        grad_norms = [float(np.linalg.norm(g)) for g in sum_b[:3]]
        raise TrainingError(
            f"non-finite loss {total_loss} at iteration {iteration}, "
            f"gamma={record.encoded_gamma.tolist()}, first grad norms={grad_norms}"
        )
    grads_a = [g / n for g in sum_a]
    grads_b = [g / n for g in sum_b]
    _apply_update(hp, opt, grads_a, grads_b)
    return total_loss, hp


def train(config: TrainConfig, loss_callback=None) -> Checkpoint:
    """Run the full loop and return the final checkpoint."""
    specs = config.operator_specs()
    net_config = BaseNetConfig.standard(channels=config.channels)
    hp = init_hyperparams(net_config, config.m, config.seed, config.precision)
    opt = _init_optimizer(config, hp)
    source = _training_images(config)
    rng = np.random.default_rng(config.seed)

    ckpt = Checkpoint(
        basenet={"channels": config.channels},
        operators=specs,
        hp=hp,
        optimizer=opt,
        iteration=0,
        train_meta={
            "seed": config.seed,
            "precision": config.precision,
            "patch_size": config.patch_size,
            "operators": list(config.operators),
            "iterations": config.iterations,
        },
    )
    for it in range(1, config.iterations + 1):
        batch = next_batch(config, specs, source, rng)
        loss, _ = train_step(hp, opt, batch, net_config, iteration=it)
        if loss_callback is not None:
            loss_callback(it, loss)
        if config.log_interval and it % config.log_interval == 0:
            log.info("iteration %d: loss %.6f (%s)", it, loss, batch[2].operator)
        ckpt.iteration = it
        if (
            config.checkpoint_interval
            and config.checkpoint_path
            and it % config.checkpoint_interval == 0
        ):
            save_checkpoint(ckpt, config.checkpoint_path)
    if config.checkpoint_path:
        save_checkpoint(ckpt, config.checkpoint_path)
    return ckpt


# ---------------------------------------------------------------------------
# evaluation


def evaluate(ckpt: Checkpoint, images, gammas, operator: str | None = None, seed: int = 0):
    """Score a checkpoint on a test set over a gamma grid.

    Returns a list of rows {"gamma", "psnr", "ssim"}; the degradation seed
    for restoration operators is derived deterministically from `seed` and
    the image index, so repeated evaluation is bit-identical.
    """
    from .inference import infer_array

    if operator is None:
        if len(ckpt.operators) != 1:
            raise ConfigError("multi-operator checkpoint: pass operator=")
        spec = ckpt.operators[0]
    else:
        spec = ckpt.operator_by_name(operator)
    rows = []
    for gamma in gammas:
        psnrs, ssims = [], []
        for i, img in enumerate(images):
            pair_seed = seed * 100003 + i
            x, target = make_pair(spec, gamma, img, seed=pair_seed)
            pred = infer_array(ckpt, x[:3], spec.name, gamma, net_input=x)
            psnrs.append(analysis.psnr(pred, target))
            ssims.append(analysis.ssim(pred, target))
        rows.append(
            {
                "gamma": float(gamma),
                "psnr": float(np.mean(psnrs)),
                "ssim": float(np.mean(ssims)),
            }
        )
    return rows


def comparison_table(rows_single, rows_numerous):
    """Merge two per-gamma evaluations into (gamma, psnr_single,
    psnr_numerous, diff) rows."""
    table = []
    for a, b in zip(rows_single, rows_numerous):
        if abs(a["gamma"] - b["gamma"]) > 1e-12:
            raise ConfigError("gamma grids of the two evaluations differ")
        table.append(
            {
                "gamma": a["gamma"],
                "psnr_single": a["psnr"],
                "psnr_numerous": b["psnr"],
                "diff": abs(a["psnr"] - b["psnr"]),
            }
        )
    return table


def write_eval_csv(path, table):
    import csv as _csv

    with open(path, "w", newline="") as f:
        writer = _csv.writer(f)
        if table and "psnr_single" in table[0]:
            writer.writerow(["gamma", "psnr_single", "psnr_numerous", "diff"])
            for r in table:
                writer.writerow([r["gamma"], r["psnr_single"], r["psnr_numerous"], r["diff"]])
        else:
            writer.writerow(["gamma", "psnr", "ssim"])
            for r in table:
                writer.writerow([r["gamma"], r["psnr"], r["ssim"]])
