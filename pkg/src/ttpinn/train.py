"""Experiment configuration and the training loop.

One ExperimentConfig fully describes a benchmark run: architecture (dense or
TT hidden layers with either explicit ranks or a target compression ratio),
optimizer schedule, sampling, seed, evaluation cadence and output directory.
Training is full batch over a fixed set of collocation points: every
iteration tapes the composite loss, reverse-sweeps for parameter gradients
and applies one Adam step.
"""

from __future__ import annotations

import ctypes
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .network import Mlp, MlpSpec, TTHidden, init, spec_param_count
from .optim import Adam, LrSchedule, lr_at
from .problem import (
    HelmholtzProblem,
    Metrics,
    Samples,
    SamplingConfig,
    evaluate,
    loss,
    loss_node,
    sample_collocation,
)
from .tape import Tape
from .ttlinear import plan_ranks


class TrainingDiverged(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    width: int = 256
    hidden_layers: int = 3
    kind: str = "dense"  # "dense" | "tt"
    row_factors: tuple[int, ...] | None = None
    col_factors: tuple[int, ...] | None = None
    target_compression: float | None = None
    ranks: tuple[int, ...] | None = None  # explicit ranks override the target


@dataclass(frozen=True)
class TrainingConfig:
    iterations: int = 40000
    n_residual: int = 1200
    seed: int = 0


@dataclass(frozen=True)
class ScheduleConfig:
    lr0: float = 1e-3
    decay: float = 0.9
    period: int = 1000


@dataclass(frozen=True)
class EvalConfig:
    grid_resolution: int = 256
    report_interval: int = 500


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "run"
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    out_dir: str = "runs/run"

    def validate(self) -> None:
        m, t, s, e = self.model, self.training, self.schedule, self.evaluation
        if m.width < 1 or m.hidden_layers < 0:
            raise ConfigError(f"bad architecture: width={m.width}, layers={m.hidden_layers}")
        if m.kind not in ("dense", "tt"):
            raise ConfigError(f"unknown hidden kind {m.kind!r}")
        if m.kind == "tt":
            if m.row_factors is None or m.col_factors is None:
                raise ConfigError("tt model needs row_factors and col_factors")
            if m.ranks is None and m.target_compression is None:
                raise ConfigError("tt model needs explicit ranks or a target compression")
        if t.iterations < 0 or t.n_residual < 1:
            raise ConfigError(f"bad training counts: {t}")
        if s.lr0 <= 0 or not (0 < s.decay <= 1) or s.period < 1:
            raise ConfigError(f"bad schedule: {s}")
        if e.grid_resolution < 2 or e.report_interval < 1:
            raise ConfigError(f"bad evaluation settings: {e}")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        def sub(cls, key):
            raw = dict(data.get(key) or {})
            known = cls.__dataclass_fields__
            bad = set(raw) - set(known)
            if bad:
                raise ConfigError(f"unknown {key} fields: {sorted(bad)}")
            for name in ("row_factors", "col_factors", "ranks"):
                if raw.get(name) is not None and name in known:
                    raw[name] = tuple(int(v) for v in raw[name])
            return cls(**raw)

        cfg = ExperimentConfig(
            name=str(data.get("name", "run")),
            model=sub(ModelConfig, "model"),
            training=sub(TrainingConfig, "training"),
            schedule=sub(ScheduleConfig, "schedule"),
            evaluation=sub(EvalConfig, "evaluation"),
            out_dir=str(data.get("out_dir", "runs/run")),
        )
        cfg.validate()
        return cfg


def resolve_spec(model: ModelConfig) -> tuple[MlpSpec, float]:
    """Turn a model config into an MlpSpec; returns (spec, hidden compression)."""
    if model.kind == "dense":
        spec = MlpSpec(
            hidden_width=model.width, hidden_layers=model.hidden_layers, hidden_kind="dense"
        )
        return spec, 1.0
    w = model.width
    if model.ranks is not None:
        ranks = tuple(model.ranks)
    else:
        plan = plan_ranks(w, w, model.row_factors, model.col_factors, model.target_compression)
        ranks = plan.chosen_ranks
    tt = TTHidden(tuple(model.row_factors), tuple(model.col_factors), ranks)
    spec = MlpSpec(
        hidden_width=w,
        hidden_layers=model.hidden_layers,
        hidden_kind="tt",
        tt=tt,
    )
    factors = tt.row_factors + tt.col_factors
    count = sum(ranks[k] * factors[k] * ranks[k + 1] for k in range(len(factors)))
    return spec, (w * w) / count


@dataclass
class MetricsRow:
    iteration: int
    lr: float
    loss_r: float
    mse: float
    rel_l2: float
    seconds: float  # wall time since training start; logged to the sidecar


@dataclass
class RunRecord:
    config: dict
    n_theta: int
    compression: float
    rows: list[MetricsRow]
    final: Metrics
    wall_seconds: float
    diverged: bool = False


def tune_allocator() -> None:
    """Keep large freed buffers on the heap instead of unmapping them.

    The training loop churns through ~10 MB scratch arrays every iteration;
    with glibc defaults those round-trip through mmap/munmap and the page
    faults dominate the step time. Best effort, silently skipped off glibc.
    """
    try:
        libc = ctypes.CDLL("libc.so.6", use_errno=True)
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except Exception:
        pass


def build_network(config: ExperimentConfig) -> tuple[Mlp, float]:
    spec, compression = resolve_spec(config.model)
    net = init(spec, config.training.seed)
    assert net.store.total_count == spec_param_count(spec)
    return net, compression


def run_training(config: ExperimentConfig, echo=print) -> RunRecord:
    """Train one configuration end to end and write its artifacts.

    Writes metrics.csv (deterministic), timings.csv (wall clock sidecar),
    run.json, the three field grids and a checkpoint into config.out_dir.
    """
    config.validate()
    tune_allocator()
    problem = HelmholtzProblem()
    net, compression = build_network(config)
    n_theta = net.store.total_count
    echo(f"[{config.name}] n_theta={n_theta} hidden_compression={compression:.2f}x")

    sampling = SamplingConfig(
        n_residual=config.training.n_residual, seed=config.training.seed
    )
    samples = Samples(residual_points=sample_collocation(sampling))
    schedule = LrSchedule(config.schedule.lr0, config.schedule.decay, config.schedule.period)
    opt = Adam(net.store, schedule)

    rows: list[MetricsRow] = []
    t0 = time.perf_counter()
    diverged = False

    def record_row(iteration: int) -> MetricsRow:
        terms = loss(problem, net, samples)
        metrics, _ = evaluate(problem, net, config.evaluation.grid_resolution)
        row = MetricsRow(
            iteration=iteration,
            lr=lr_at(schedule, iteration),
            loss_r=terms.residual,
            mse=metrics.mse,
            rel_l2=metrics.rel_l2,
            seconds=time.perf_counter() - t0,
        )
        rows.append(row)
        echo(
            f"[{config.name}] it {row.iteration:6d} lr {row.lr:.3e} "
            f"loss_r {row.loss_r:.6e} mse {row.mse:.3e} rel_l2 {row.rel_l2:.3e}"
        )
        return row

    record_row(0)
    total = config.training.iterations
    for it in range(total):
        tp = Tape(net.store)
        loss_nid, *_ = loss_node(problem, net, samples, tp)
        if not math.isfinite(tp.value(loss_nid)):
            diverged = True
            echo(f"[{config.name}] non-finite loss at iteration {it}; aborting")
            break
        grads = tp.backward(loss_nid)
        opt.step(grads)
        done = it + 1
        if done % config.evaluation.report_interval == 0 or done == total:
            if not rows or rows[-1].iteration != done:
                record_row(done)

    final_metrics, fields = evaluate(problem, net, config.evaluation.grid_resolution)
    record = RunRecord(
        config=config.to_dict(),
        n_theta=n_theta,
        compression=compression,
        rows=rows,
        final=final_metrics,
        wall_seconds=time.perf_counter() - t0,
        diverged=diverged,
    )
    _write_artifacts(config, net, opt, record, fields)
    if diverged:
        raise TrainingDiverged(f"run {config.name!r} hit a non-finite loss")
    return record


def _write_artifacts(config, net, opt, record: RunRecord, fields) -> None:
    from .checkpoint import save_checkpoint
    from .export import write_grid_csv

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w") as fh:
        fh.write("iteration,lr,loss_r,mse,rel_l2\n")
        for r in record.rows:
            fh.write(f"{r.iteration},{r.lr!r},{r.loss_r!r},{r.mse!r},{r.rel_l2!r}\n")
    with open(out / "timings.csv", "w") as fh:
        fh.write("iteration,seconds\n")
        for r in record.rows:
            fh.write(f"{r.iteration},{r.seconds:.3f}\n")
    with open(out / "run.json", "w") as fh:
        json.dump(
            {
                "config": record.config,
                "n_theta": record.n_theta,
                "hidden_compression": record.compression,
                "final_mse": record.final.mse,
                "final_rel_l2": record.final.rel_l2,
                "wall_seconds": record.wall_seconds,
                "diverged": record.diverged,
                "rows": [asdict(r) for r in record.rows],
            },
            fh,
            indent=2,
        )
    for name in ("pred", "truth", "abserr"):
        write_grid_csv(out / f"{name}.csv", fields[name])
    save_checkpoint(out / "model.ckpt", config, net, opt)
