"""Equal-budget comparison of the three diffusion targets on oracle data."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..metrics import ang_e, psnr, ssim
from ..stokes import synthesize_stack
from .data import OraclePatches, TargetRepresentation, condition_input, decode_representation
from .model import ConditionalNoisePredictor, build_model
from .schedule import NoiseSchedule
from .train import TrainingConfig, sample, train

log = logging.getLogger(__name__)

WRAP_BOUNDARY = math.radians(80)
BASELINE = "encoded_untrained"
COLUMNS = ("representation", "psnr", "ssim", "mange", "mange_wrap", "mabse", "pixel_count", "final_loss", "train_seconds")


@dataclass
class AblationRow:
    representation: str
    psnr: float
    ssim: float
    mange: float
    mange_wrap: float
    mabse: float
    pixel_count: int
    final_loss: float = float("nan")
    train_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in COLUMNS}


@dataclass
class AblationTable:
    rows: list[AblationRow]
    config: TrainingConfig
    n_train: int
    n_test: int
    losses: dict[str, list[float]] = field(default_factory=dict)

    def row(self, representation: str) -> AblationRow:
        for r in self.rows:
            if r.representation == representation:
                return r
        raise KeyError(representation)

    def to_csv(self) -> str:
        """One row per representation; every row repeats the full training config."""
        echo = self.config.as_dict()
        echo.update(n_train=self.n_train, n_test=self.n_test)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(COLUMNS) + list(echo))
        for r in self.rows:
            values = [_fmt(v) for v in r.as_dict().values()]
            writer.writerow(values + [echo[k] for k in echo])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return v


def split_dataset(patches: OraclePatches, n_test: int, seed: int) -> tuple[OraclePatches, OraclePatches]:
    if not 0 < n_test < len(patches):
        raise ValueError("n_test must leave a non-empty training split")
    perm = np.random.default_rng(seed).permutation(len(patches))
    return patches.subset(perm[n_test:]), patches.subset(perm[:n_test])


def evaluate_model(
    model: ConditionalNoisePredictor,
    rep: TargetRepresentation,
    test: OraclePatches,
    schedule: NoiseSchedule,
    seed: int,
) -> AblationRow:
    """Sample every test patch, decode, and score against the oracle ground truth.

    AoLP error is pooled over pixels valid in both maps; DoLP error over the
    foreground; PSNR/SSIM average the four re-synthesized analyzer images.
    """
    rep = TargetRepresentation(rep)
    conds = np.stack([condition_input(test.s0[i], rep) for i in range(len(test))])
    out = sample(model, conds, schedule, seed=seed)
    errs, wrap_errs, dolp_errs, psnrs, ssims = [], [], [], [], []
    for i in range(len(test)):
        gt = test.state(i)
        est, est_stack = decode_representation(out[i], rep, gt.s0)
        gt_stack = synthesize_stack(gt)
        both = gt.valid & est.valid
        e = ang_e(gt.aolp[both], est.aolp[both])
        errs.append(e)
        wrap_errs.append(e[np.abs(gt.aolp[both]) > WRAP_BOUNDARY])
        dolp_errs.append(np.abs(est.dolp - gt.dolp)[test.mask[i]])
        for a, b in zip(est_stack.as_list(), gt_stack.as_list()):
            psnrs.append(psnr(a, b))
            ssims.append(ssim(a, b))
    errs = np.concatenate(errs)
    wrap = np.concatenate(wrap_errs)
    return AblationRow(
        representation=rep.value,
        psnr=float(np.mean(psnrs)),
        ssim=float(np.mean(ssims)),
        mange=math.degrees(math.fsum(errs) / len(errs)),
        mange_wrap=math.degrees(math.fsum(wrap) / len(wrap)) if len(wrap) else float("nan"),
        mabse=math.fsum(np.concatenate(dolp_errs)) / sum(len(d) for d in dolp_errs),
        pixel_count=int(len(errs)),
    )


def ablation_harness(
    patches: OraclePatches,
    config: TrainingConfig,
    n_test: int = 64,
    representations=tuple(TargetRepresentation),
    baseline: bool = True,
) -> AblationTable:
    """Train one model per representation with identical config and score each.

    With ``baseline`` an extra row scores the freshly initialized Encoded model.
    """
    train_set, test_set = split_dataset(patches, n_test, config.seed)
    schedule = config.schedule()
    table = AblationTable([], config, len(train_set), len(test_set))
    if baseline:
        rep = TargetRepresentation.ENCODED_AOLP_DOLP
        model = build_model(config.architecture(rep), seed=config.seed)
        row = evaluate_model(model, rep, test_set, schedule, config.seed)
        row.representation = BASELINE
        table.rows.append(row)
    for rep in representations:
        rep = TargetRepresentation(rep)
        t0 = time.perf_counter()
        result = train(train_set, config, rep)
        elapsed = time.perf_counter() - t0
        row = evaluate_model(result.model, rep, test_set, schedule, config.seed)
        tail = max(1, len(result.losses) // 10)
        row.final_loss = float(np.mean(result.losses[-tail:]))
        row.train_seconds = elapsed
        table.rows.append(row)
        table.losses[rep.value] = result.losses
        log.info("%s: mange %.2f (wrap %.2f) mabse %.4f", rep.value, row.mange, row.mange_wrap, row.mabse)
    return table
