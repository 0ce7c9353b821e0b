"""Simulation campaigns.

A campaign is a declarative config (JSON or YAML) naming a study design;
running it produces a table of aggregates plus a manifest.  Campaigns:

* ``mse-sweep``: MSE / variance / squared bias of the empirical tail
  copula at fixed angles, swept over k;
* ``cov-table``: finite-sample covariance of the scaled estimator over
  replications, and average / MSE of bootstrap covariance estimates;
* ``equality-test``: rejection rates of the two-sample equality test;
* ``ci-coverage``: coverage of bootstrap confidence intervals for the
  minimum-distance parameter;
* ``gof-test``: rejection rates of the goodness-of-fit test.

Determinism: every replication derives its own random streams from
``(seed, campaign, replication, role)``, so results are bit-identical
for equal configs and seeds regardless of the worker count.  Replication
counts scale by the ``scale`` factor (minimum one replication).
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import _kernels, __version__
from .bootstrap import KINDS, TWO_POINT, build_ensemble
from .estimators import BivariateSample, EmpiricalTailCopula
from .inference import (
    AngularGrid,
    empirical_quantile,
    gof_test,
    md_bootstrap,
    md_confidence_interval,
    md_estimate,
    true_cov_Gtilde,
    true_cov_matrix,
    two_sample_test,
)
from .models import FAMILIES, model_from_config
from .rng import stream

__all__ = [
    "CAMPAIGNS",
    "ConfigError",
    "CampaignConfig",
    "CampaignResult",
    "load_config",
    "resolve_angles",
    "run_campaign",
]

CAMPAIGNS = (
    "mse-sweep",
    "cov-table",
    "equality-test",
    "ci-coverage",
    "gof-test",
)
_CODE = {name: i + 1 for i, name in enumerate(CAMPAIGNS)}

# rng roles within a replication
_DATA_X = 0
_DATA_Y = 1
_BOOT_BASE = 10  # + kind index

ANGLE_PRESETS = {
    # three angles: the diagonal and its two pi/8-symmetric neighbours
    "lpi8": (math.pi / 8, math.pi / 4, 3 * math.pi / 8),
    "diag": (math.pi / 4,),
}


class ConfigError(ValueError):
    """Campaign configuration invalid."""


def resolve_angles(spec) -> np.ndarray:
    if isinstance(spec, str):
        if spec not in ANGLE_PRESETS:
            raise ConfigError(
                f"unknown angle preset {spec!r}; have {sorted(ANGLE_PRESETS)}"
            )
        return np.asarray(ANGLE_PRESETS[spec], dtype=float)
    angles = np.asarray(spec, dtype=float)
    if angles.ndim != 1 or angles.size == 0:
        raise ConfigError("angles must be a nonempty list")
    if np.any(angles < 0) or np.any(angles > math.pi / 2):
        raise ConfigError("angles must lie in [0, pi/2]")
    return angles


@dataclasses.dataclass
class CampaignConfig:
    campaign: str
    reps: int
    seed: int = 0
    scale: float = 1.0
    n: int = 1000
    B: int = 500
    k: int | None = None
    k2: int | None = None
    k_boot: int | None = None
    k_list: tuple[int, ...] | None = None
    alphas: tuple[float, ...] = (0.05,)
    kinds: tuple[str, ...] = ("pdm",)
    grid_size: int = 100
    angles: tuple[float, ...] | str = "lpi8"
    model: dict | None = None
    model_x: dict | None = None
    model_y: dict | None = None
    family: str | None = None
    alpha_reps: int = 0
    tail: str = "lower"
    out: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "CampaignConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in raw:
            raise ConfigError("config must carry an explicit seed")
        try:
            cfg = cls(**{k: _freeze(v) for k, v in raw.items()})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def effective_reps(self) -> int:
        return max(1, int(round(self.reps * self.scale)))

    @property
    def effective_alpha_reps(self) -> int:
        if self.alpha_reps <= 0:
            return 0
        return max(1, int(round(self.alpha_reps * self.scale)))

    def validate(self):
        if self.campaign not in CAMPAIGNS:
            raise ConfigError(
                f"unknown campaign {self.campaign!r}; have {CAMPAIGNS}"
            )
        if not isinstance(self.reps, int) or self.reps < 1:
            raise ConfigError("reps must be a positive integer")
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.B < 1:
            raise ConfigError("B must be positive")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha {a} outside (0, 1)")
        for kind in self.kinds:
            if kind not in KINDS:
                raise ConfigError(f"unknown bootstrap kind {kind!r}")
        if self.tail not in ("lower", "upper"):
            raise ConfigError("tail must be 'lower' or 'upper'")
        if self.grid_size < 1:
            raise ConfigError("grid_size must be positive")
        resolve_angles(self.angles)
        need_k = self.campaign in (
            "cov-table", "equality-test", "ci-coverage", "gof-test"
        )
        if need_k and not self.k:
            raise ConfigError(f"{self.campaign} requires k")
        if self.campaign == "mse-sweep":
            if not self.k_list:
                raise ConfigError("mse-sweep requires k_list")
            if any(k < 1 or k > self.n for k in self.k_list):
                raise ConfigError("k_list entries must lie in [1, n]")
        if self.campaign == "equality-test":
            if self.model_x is None or self.model_y is None:
                raise ConfigError("equality-test requires model_x and model_y")
            for kind in self.kinds:
                if kind not in ("pdm", "dm"):
                    raise ConfigError(
                        "equality-test supports kinds 'pdm' and 'dm'"
                    )
            _checked_model(self.model_x)
            _checked_model(self.model_y)
        elif self.model is None:
            raise ConfigError(f"{self.campaign} requires a model")
        else:
            _checked_model(self.model)
        if self.campaign == "gof-test":
            if self.family not in FAMILIES:
                raise ConfigError("gof-test requires a known fit family")
        if self.campaign == "ci-coverage":
            family = self.family or self.model.get("family")
            if family not in FAMILIES:
                raise ConfigError("ci-coverage requires a known fit family")


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _checked_model(cfg):
    try:
        return model_from_config(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> CampaignConfig:
    """Read a campaign config from a JSON or YAML file."""
    path = str(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if path.endswith((".yaml", ".yml")):
        try:
            import yaml
        except ImportError as exc:
            raise ConfigError("yaml config needs the pyyaml package") from exc
        raw = yaml.safe_load(text)
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return CampaignConfig.from_dict(raw)


@dataclasses.dataclass
class CampaignResult:
    """Campaign output: a deterministic table plus run metadata.

    ``columns``/``rows`` (and ``extras``) are a pure function of the
    config; ``meta`` holds timing and environment details.
    """

    campaign: str
    columns: list
    rows: list
    extras: dict
    config: dict
    meta: dict

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, outdir) -> dict:
        import os

        os.makedirs(outdir, exist_ok=True)
        csv_path = os.path.join(outdir, "results.csv")
        with open(csv_path, "w") as fh:
            fh.write(self.to_csv_text())
        manifest = {
            "format_version": 1,
            "campaign": self.campaign,
            "config": self.config,
            "config_sha256": _config_hash(self.config),
            "extras": self.extras,
            "meta": self.meta,
        }
        manifest_path = os.path.join(outdir, "manifest.json")
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2, default=_json_default)
        return {"results": csv_path, "manifest": manifest_path}


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


def _config_hash(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()


def _map_reps(fn, reps: int, workers: int):
    if workers <= 1:
        return [fn(r) for r in range(reps)]
    chunk = max(1, reps // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(reps), chunksize=chunk))


# ---------------------------------------------------------------------------
# mse-sweep


def _rep_mse(cfg, model, angles, rep: int):
    gen = stream(cfg.seed, _CODE[cfg.campaign], rep, _DATA_X)
    sample = BivariateSample(model.sample(cfg.n, gen))
    out = np.empty((len(cfg.k_list), angles.shape[0]))
    for i, k in enumerate(cfg.k_list):
        est = EmpiricalTailCopula(sample, k, tail=cfg.tail)
        out[i] = est.angular(angles)
    return out


def _run_mse_sweep(cfg: CampaignConfig, workers: int, estimator_hook=None):
    model = model_from_config(cfg.model)
    angles = resolve_angles(cfg.angles)
    truth = model.angular(angles)
    reps = cfg.effective_reps
    if estimator_hook is not None:
        values = [estimator_hook(model, cfg, angles, rep)
                  for rep in range(reps)]
    else:
        fn = functools.partial(_rep_mse, cfg, model, angles)
        values = _map_reps(fn, reps, workers)
    arr = np.stack(values)  # (reps, K, A)
    mean = arr.mean(axis=0)
    var = ((arr - mean) ** 2).mean(axis=0)
    bias2 = (mean - truth[None, :]) ** 2
    mse = var + bias2  # exact decomposition with the population variance
    rows = []
    for i, k in enumerate(cfg.k_list):
        rows.append((
            int(k),
            float(mse[i].mean()),
            float(var[i].mean()),
            float(bias2[i].mean()),
        ))
    best_k = int(cfg.k_list[int(np.argmin([r[1] for r in rows]))])
    return CampaignResult(
        campaign=cfg.campaign,
        columns=["k", "mse", "var", "bias2"],
        rows=rows,
        extras={"argmin_k": best_k, "angles": list(map(float, angles))},
        config=cfg.to_dict(),
        meta={},
    )


# ---------------------------------------------------------------------------
# cov-table


def _rep_cov_alpha(cfg, model, angles, rep: int):
    gen = stream(cfg.seed, _CODE[cfg.campaign], rep, _DATA_X)
    sample = BivariateSample(model.sample(cfg.n, gen))
    est = EmpiricalTailCopula(sample, cfg.k, tail=cfg.tail)
    return est.angular(angles)


def _rep_cov_boot(cfg, model, points, rep: int):
    gen = stream(cfg.seed, _CODE[cfg.campaign], rep, _DATA_X)
    sample = BivariateSample(model.sample(cfg.n, gen))
    est = EmpiricalTailCopula(sample, cfg.k, tail=cfg.tail)
    out = np.empty((len(cfg.kinds), points.shape[0], points.shape[0]))
    for j, kind in enumerate(cfg.kinds):
        rng = stream(cfg.seed, _CODE[cfg.campaign], rep, _BOOT_BASE + j)
        ens = build_ensemble(kind, est, cfg.k, cfg.B, points, rng=rng,
                             tail=cfg.tail)
        out[j] = np.cov(ens.draws.T, ddof=1)
    return out


def _true_matrix(kind, model, points):
    if kind in ("beta", "known_margins"):
        P = len(points)
        return np.array([
            [true_cov_Gtilde(model, points[i], points[j]) for j in range(P)]
            for i in range(P)
        ])
    return true_cov_matrix(model, points)


def _run_cov_table(cfg: CampaignConfig, workers: int):
    model = model_from_config(cfg.model)
    angles = resolve_angles(cfg.angles)
    points = np.column_stack((np.cos(angles), np.sin(angles)))
    rows = []
    extras = {}
    A = angles.shape[0]
    alpha_reps = cfg.effective_alpha_reps
    if alpha_reps:
        fn = functools.partial(_rep_cov_alpha, cfg, model, angles)
        values = np.stack(_map_reps(fn, alpha_reps, workers))
        scaled = math.sqrt(cfg.k) * values
        cov = np.cov(scaled.T, ddof=1).reshape(A, A)
        truth = true_cov_matrix(model, points)
        extras["alpha_cov"] = cov.tolist()
        for i in range(A):
            for j in range(i, A):
                rows.append((
                    "alpha-cov", "", i, j,
                    float(cov[i, j]), float(truth[i, j]), "",
                ))
    if cfg.effective_reps and cfg.kinds:
        fn = functools.partial(_rep_cov_boot, cfg, model, points)
        stacks = np.stack(_map_reps(fn, cfg.effective_reps, workers))
        avg = stacks.mean(axis=0)  # (kinds, A, A)
        for j, kind in enumerate(cfg.kinds):
            truth = _true_matrix(kind, model, points)
            mse = ((stacks[:, j] - truth[None]) ** 2).mean(axis=0)
            extras[f"avg_cov_{kind}"] = avg[j].tolist()
            extras[f"mse_{kind}"] = mse.tolist()
            for a in range(A):
                for b in range(a, A):
                    rows.append((
                        "boot-cov", kind, a, b,
                        float(avg[j, a, b]), float(truth[a, b]),
                        float(mse[a, b]),
                    ))
    return CampaignResult(
        campaign=cfg.campaign,
        columns=["section", "kind", "i", "j", "value", "truth", "mse"],
        rows=rows,
        extras=extras,
        config=cfg.to_dict(),
        meta={},
    )


# ---------------------------------------------------------------------------
# equality-test


def _rep_equal(cfg, mx, my, grid, rep: int):
    code = _CODE[cfg.campaign]
    sx = BivariateSample(mx.sample(cfg.n, stream(cfg.seed, code, rep, _DATA_X)))
    sy = BivariateSample(my.sample(cfg.n, stream(cfg.seed, code, rep, _DATA_Y)))
    k1 = cfg.k
    k2 = cfg.k2 or cfg.k
    out = np.zeros((len(cfg.kinds), len(cfg.alphas)), dtype=bool)
    for j, kind in enumerate(cfg.kinds):
        rng = stream(cfg.seed, code, rep, _BOOT_BASE + j)
        report = two_sample_test(
            sx, sy, k1, k2, B=cfg.B, alpha=cfg.alphas[0], kind=kind,
            grid=grid, rng=rng, tail=cfg.tail,
        )
        for a, alpha in enumerate(cfg.alphas):
            q = empirical_quantile(report.bootstrap, 1.0 - alpha)
            out[j, a] = report.statistic > q
    return out


def _run_equality_test(cfg: CampaignConfig, workers: int):
    mx = model_from_config(cfg.model_x)
    my = model_from_config(cfg.model_y)
    grid = AngularGrid.midpoint(cfg.grid_size)
    fn = functools.partial(_rep_equal, cfg, mx, my, grid)
    rejections = np.stack(_map_reps(fn, cfg.effective_reps, workers))
    rates = rejections.mean(axis=0)
    rows = [
        (kind, float(alpha), float(rates[j, a]))
        for j, kind in enumerate(cfg.kinds)
        for a, alpha in enumerate(cfg.alphas)
    ]
    return CampaignResult(
        campaign=cfg.campaign,
        columns=["kind", "alpha", "reject_rate"],
        rows=rows,
        extras={"reps": cfg.effective_reps},
        config=cfg.to_dict(),
        meta={},
    )


# ---------------------------------------------------------------------------
# ci-coverage


def _rep_ci(cfg, model, family, theta0, grid, rep: int):
    code = _CODE[cfg.campaign]
    sample = BivariateSample(model.sample(cfg.n, stream(cfg.seed, code, rep,
                                                        _DATA_X)))
    est = EmpiricalTailCopula(sample, cfg.k, tail=cfg.tail)
    fit = md_estimate(est, cfg.k, family, grid=grid, tail=cfg.tail)
    k_boot = cfg.k_boot or cfg.k
    est_b = est if k_boot == cfg.k else EmpiricalTailCopula(
        sample, k_boot, tail=cfg.tail
    )
    kind = cfg.kinds[0]
    rng = stream(cfg.seed, code, rep, _BOOT_BASE)
    ens = build_ensemble(kind, est_b, k_boot, cfg.B, grid.points(), rng=rng,
                         tail=cfg.tail)
    boot = md_bootstrap(est_b, k_boot, family, fit.theta, ens, grid=grid,
                        tail=cfg.tail)
    out = np.zeros(len(cfg.alphas), dtype=bool)
    lengths = np.zeros(len(cfg.alphas))
    for a, alpha in enumerate(cfg.alphas):
        lo, hi = md_confidence_interval(fit.theta, boot, cfg.k, alpha)
        out[a] = lo <= theta0 <= hi
        lengths[a] = hi - lo
    return out, lengths


def _run_ci_coverage(cfg: CampaignConfig, workers: int):
    model = model_from_config(cfg.model)
    family = cfg.family or model.family
    theta0 = model.theta if family == model.family else None
    if theta0 is None:
        raise ConfigError("ci-coverage needs the data model in the fit family")
    grid = AngularGrid.midpoint(cfg.grid_size)
    fn = functools.partial(_rep_ci, cfg, model, family, theta0, grid)
    results = _map_reps(fn, cfg.effective_reps, workers)
    covered = np.stack([r[0] for r in results])
    lengths = np.stack([r[1] for r in results])
    rows = [
        (float(alpha), 1.0 - float(alpha), float(covered[:, a].mean()),
         float(lengths[:, a].mean()))
        for a, alpha in enumerate(cfg.alphas)
    ]
    return CampaignResult(
        campaign=cfg.campaign,
        columns=["alpha", "level", "coverage", "avg_length"],
        rows=rows,
        extras={"theta0": float(theta0), "reps": cfg.effective_reps},
        config=cfg.to_dict(),
        meta={},
    )


# ---------------------------------------------------------------------------
# gof-test


def _rep_gof(cfg, model, grid, rep: int):
    code = _CODE[cfg.campaign]
    sample = BivariateSample(model.sample(cfg.n, stream(cfg.seed, code, rep,
                                                        _DATA_X)))
    kind = cfg.kinds[0]
    rng = stream(cfg.seed, code, rep, _BOOT_BASE)
    report = gof_test(sample, cfg.k, cfg.family, B=cfg.B,
                      alpha=cfg.alphas[0], kind=kind, grid=grid, rng=rng,
                      tail=cfg.tail)
    out = np.zeros(len(cfg.alphas), dtype=bool)
    for a, alpha in enumerate(cfg.alphas):
        q = empirical_quantile(report.bootstrap, 1.0 - alpha)
        out[a] = report.statistic > q
    return out


def _run_gof_test(cfg: CampaignConfig, workers: int):
    model = model_from_config(cfg.model)
    grid = AngularGrid.midpoint(cfg.grid_size)
    fn = functools.partial(_rep_gof, cfg, model, grid)
    rejections = np.stack(_map_reps(fn, cfg.effective_reps, workers))
    rates = rejections.mean(axis=0)
    rows = [
        (float(alpha), float(rates[a]))
        for a, alpha in enumerate(cfg.alphas)
    ]
    return CampaignResult(
        campaign=cfg.campaign,
        columns=["alpha", "reject_rate"],
        rows=rows,
        extras={"reps": cfg.effective_reps},
        config=cfg.to_dict(),
        meta={},
    )


# ---------------------------------------------------------------------------


_RUNNERS = {
    "mse-sweep": _run_mse_sweep,
    "cov-table": _run_cov_table,
    "equality-test": _run_equality_test,
    "ci-coverage": _run_ci_coverage,
    "gof-test": _run_gof_test,
}


def run_campaign(cfg: CampaignConfig, workers: int = 1,
                 estimator_hook=None) -> CampaignResult:
    """Run a campaign and return its result table.

    ``estimator_hook`` (mse-sweep only) replaces the per-replication
    estimator, which makes the aggregation itself testable.
    """
    cfg.validate()
    start = time.perf_counter()
    if cfg.campaign == "mse-sweep":
        result = _run_mse_sweep(cfg, workers, estimator_hook=estimator_hook)
    else:
        if estimator_hook is not None:
            raise ConfigError(
                "estimator_hook only applies to the mse-sweep campaign"
            )
        result = _RUNNERS[cfg.campaign](cfg, workers)
    result.meta = {
        "wall_time_s": time.perf_counter() - start,
        "workers": workers,
        "kernel_backend": _kernels.backend(),
        "effective_reps": cfg.effective_reps,
        "version": __version__,
    }
    return result
