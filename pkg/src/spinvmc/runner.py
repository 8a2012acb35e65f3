"""Experiment runner: declarative configs, optimization loops, metric streams.

A run is described by a flat key-value config (see parse_config_text for the
grammar), executes sampling -> estimation -> (clipping) -> optimizer step ->
record for a fixed number of iterations, and leaves behind a self-describing
directory:

    records.csv           one row per recorded iteration, fixed versioned header
    config.resolved.json  the fully resolved configuration that actually ran
    checkpoint.rbm        final parameters in canonical packing order
    failure.json          only on mid-run numerical failure (partial records kept)

Identical seeds reproduce the records bit for bit (wall_ms excluded, being
wall-clock measurement).  The module also hosts the post-processing used by
the sampling-floor analysis: sliding-window smoothing, running-minimum
gradient curves, the sqrt(b/N_s + c/N_s^2) floor fit and relative energy
error series.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimator import (
    build_batch,
    full_batch_gradient,
    full_batch_quantities,
    gradient_estimate,
)
from .hamiltonian import LatticeModel, exact_ground_state
from .optimizer import (
    OptimizerState,
    apply_update,
    full_spring_direction,
    minsr_direction,
    sgd_direction,
    spring_direction,
    sr_direction,
    step_size,
)
from .prime import PrimeState, prime_step
from .sampler import MetropolisWalkers, SamplerConfig, direct_sample
from .wavefunction import RBMAnsatz, save_checkpoint

RECORDS_SCHEMA = "records-v1"
RECORD_COLUMNS = [
    "k",
    "energy",
    "energy_variance",
    "grad_norm",
    "full_grad_norm",
    "mu_k",
    "alpha_k",
    "beta_k",
    "rank_k",
    "delta_norm",
    "eta_k",
    "wall_ms",
]
OPTIMIZER_KINDS = ("sgd", "sr", "minsr", "spring", "fspring", "prime")
OUTPUT_ROOT_ENV = "SPINVMC_OUTPUT_ROOT"
FULL_GRAD_MAX_SITES = 12


@dataclass
class RunConfig:
    """A fully resolved experiment description."""

    model: LatticeModel
    density: int = 5
    init_scale: float = 0.01
    init_seed: int = 0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    optimizer_kind: str = "spring"
    lambda_: float = 1e-3
    mu: float = 0.99
    eta0: float = 0.02
    c: float = 1e-4
    norm_constraint: float = 1e-3
    clip_std: float | None = 5.0
    iterations: int = 10000
    record_every: int = 1
    output: str | None = None
    full_grad_norm: bool = False

    def __post_init__(self):
        if self.optimizer_kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer {self.optimizer_kind!r}")
        if self.iterations < 1 or self.record_every < 1:
            raise ValueError("iterations and record_every must be positive")
        if self.full_grad_norm and self.model.n_sites > FULL_GRAD_MAX_SITES:
            raise ValueError(
                f"full_grad_norm costs 2^N per evaluation; limited to "
                f"N <= {FULL_GRAD_MAX_SITES}"
            )
        if self.optimizer_kind == "fspring" and self.model.n_sites > FULL_GRAD_MAX_SITES:
            raise ValueError("fspring requires full-batch quantities (N <= 12)")

    def resolved_dict(self) -> dict:
        m = self.model
        return {
            "schema": RECORDS_SCHEMA,
            "model": {
                "kind": m.kind,
                "geometry": m.geometry,
                "extent": m.extent,
                "n_sites": m.n_sites,
                "periodic": m.periodic,
                "h": m.field_h,
                "marshall_sign": m.marshall_sign,
            },
            "ansatz": {
                "family": "rbm",
                "density": self.density,
                "n_hidden": self.density * m.n_sites,
                "n_params": RBMAnsatz(m.n_sites, self.density).n_params,
                "init_scale": self.init_scale,
                "init_seed": self.init_seed,
                "init_rule": "iid normal, mean 0, std init_scale",
            },
            "sampler": {
                "mode": self.sampler.mode,
                "n_samples": self.sampler.n_samples,
                "burn_in": self.sampler.burn_in,
                "steps_between": self.sampler.steps_between,
                "seed": self.sampler.rng_seed,
                "rng": "numpy PCG64",
            },
            "optimizer": {
                "kind": self.optimizer_kind,
                "lambda": self.lambda_,
                "mu": self.mu,
                "eta0": self.eta0,
                "c": self.c,
                "norm_constraint": self.norm_constraint,
                "clip_std": self.clip_std,
                "clip_std_convention": "sample std, 1/(N_s-1)",
                "iterations": self.iterations,
                "rank_tolerance": "N_s * eps relative to the largest eigenvalue",
            },
            "run": {
                "record_every": self.record_every,
                "full_grad_norm": self.full_grad_norm,
                "energy_column": "pre-clipping batch mean",
            },
        }


def _parse_scalar(text: str):
    s = text.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", "auto"):
        return None
    if low in ("inf", "+inf"):
        return float("inf")
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    return s


def parse_config_text(text: str) -> dict:
    """Parse the flat key-value config grammar.

    One `key = value` pair per line; `#` starts a comment; keys are
    dot-namespaced (model.kind, optimizer.mu, ...).  Values are parsed as
    bool/int/float/none when possible, anything else stays a string.  A
    braced list `key = {v1, v2, v3}` declares a sweep axis and is only legal
    for the sweep command.
    """
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        if value.startswith("{") and value.endswith("}"):
            items = [v for v in (p.strip() for p in value[1:-1].split(",")) if v]
            if not items:
                raise ValueError(f"config line {lineno}: empty sweep list")
            out[key] = [_parse_scalar(v) for v in items]
        else:
            out[key] = _parse_scalar(value)
    return out


_KNOWN_KEYS = {
    "model.kind", "model.geometry", "model.length", "model.width",
    "model.periodic", "model.h", "model.marshall_sign",
    "ansatz.density", "ansatz.init_scale", "ansatz.seed",
    "sampler.mode", "sampler.n_samples", "sampler.burn_in",
    "sampler.steps_between", "sampler.seed",
    "optimizer.kind", "optimizer.lambda", "optimizer.mu", "optimizer.eta0",
    "optimizer.c", "optimizer.norm_constraint", "optimizer.clip_std",
    "optimizer.iterations",
    "run.record_every", "run.output", "run.full_grad_norm",
}


def resolve_config(raw: dict) -> RunConfig:
    """Validate a flat config dict and fill in defaults."""
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key, value in raw.items():
        if isinstance(value, list):
            raise ValueError(f"sweep list on {key!r} is only valid for the sweep command")

    geometry = raw.get("model.geometry")
    if geometry is None:
        geometry = "square" if "model.width" in raw else "chain"
    extent = raw.get("model.width", raw.get("model.length", 4))
    model = LatticeModel(
        kind=raw.get("model.kind", "tfi"),
        geometry=geometry,
        extent=extent,
        periodic=bool(raw.get("model.periodic", True)),
        field_h=float(raw.get("model.h", 1.0)),
        marshall_sign=raw.get("model.marshall_sign"),
    )
    sampler = SamplerConfig(
        mode=raw.get("sampler.mode", "direct"),
        n_samples=int(raw.get("sampler.n_samples", 1000)),
        burn_in=int(raw.get("sampler.burn_in", 3000)),
        steps_between=int(raw.get("sampler.steps_between", 10)),
        rng_seed=int(raw.get("sampler.seed", 0)),
    )
    clip = raw.get("optimizer.clip_std", 5.0)
    return RunConfig(
        model=model,
        density=int(raw.get("ansatz.density", 5)),
        init_scale=float(raw.get("ansatz.init_scale", 0.01)),
        init_seed=int(raw.get("ansatz.seed", 0)),
        sampler=sampler,
        optimizer_kind=raw.get("optimizer.kind", "spring"),
        lambda_=float(raw.get("optimizer.lambda", 1e-3)),
        mu=float(raw.get("optimizer.mu", 0.99)),
        eta0=float(raw.get("optimizer.eta0", 0.02)),
        c=float(raw.get("optimizer.c", 1e-4)),
        norm_constraint=float(raw.get("optimizer.norm_constraint", 1e-3)),
        clip_std=None if clip in (None, 0, 0.0) else float(clip),
        iterations=int(raw.get("optimizer.iterations", 10000)),
        record_every=int(raw.get("run.record_every", 1)),
        output=raw.get("run.output"),
        full_grad_norm=bool(raw.get("run.full_grad_norm", False)),
    )


def _fmt(value) -> str:
    """CSV cell formatting: shortest round-trip float repr, empty for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolve_output_dir(config: RunConfig, output_dir=None) -> Path:
    """Pick the run directory; SPINVMC_OUTPUT_ROOT overrides the root for
    relative paths."""
    out = Path(output_dir) if output_dir is not None else None
    if out is None:
        out = Path(config.output) if config.output else Path("runs") / "run"
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def run_experiment(config: RunConfig | dict, output_dir=None) -> Path:
    """Execute one optimization run and write its directory.

    Deterministic given the config seeds.  On a mid-run numerical failure the
    partially written records are preserved and failure.json records the
    failing iteration and message.
    """
    if isinstance(config, dict):
        config = resolve_config(config)
    out = resolve_output_dir(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(
        json.dumps(config.resolved_dict(), indent=2) + "\n"
    )

    model = config.model
    ansatz = RBMAnsatz(model.n_sites, config.density)
    theta = ansatz.init_parameters(config.init_seed, config.init_scale)
    rng = np.random.default_rng(config.sampler.rng_seed)
    kind = config.optimizer_kind

    opt = OptimizerState(
        n_params=ansatz.n_params,
        lambda_=config.lambda_,
        mu=config.mu,
        eta0=config.eta0,
        c=config.c,
        norm_constraint=config.norm_constraint,
    )
    pstate = PrimeState(opt=opt) if kind == "prime" else None

    walkers = None
    if kind != "fspring" and config.sampler.mode == "metropolis":
        walkers = MetropolisWalkers(ansatz, theta, config.sampler.n_samples, rng)
        walkers.advance(config.sampler.burn_in)

    failure = None
    with open(out / "records.csv", "w", newline="") as fh:
        fh.write(f"# schema={RECORDS_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        try:
            for k in range(config.iterations):
                t0 = time.perf_counter()
                psi = ansatz.bind(theta)
                row: dict = {"k": k, "mu_k": None, "alpha_k": None,
                             "beta_k": None, "rank_k": None}

                if kind == "fspring":
                    fbq = full_batch_quantities(model, psi)
                    delta = full_spring_direction(fbq, opt, config.mu)
                    row["energy"] = fbq.energy
                    row["energy_variance"] = fbq.energy_variance
                    row["grad_norm"] = None
                    row["full_grad_norm"] = float(np.linalg.norm(fbq.gradient))
                    row["mu_k"] = config.mu
                else:
                    if config.sampler.mode == "direct":
                        samples = direct_sample(psi, model.n_sites,
                                                config.sampler.n_samples, rng)
                    else:
                        walkers.set_theta(theta)
                        samples = walkers.advance(config.sampler.steps_between)
                    batch = build_batch(model, psi, None, samples, config.clip_std)
                    row["energy"] = batch.raw_energy_mean
                    row["energy_variance"] = batch.raw_energy_variance
                    row["grad_norm"] = float(np.linalg.norm(gradient_estimate(batch)))
                    if config.full_grad_norm:
                        _, g_full = full_batch_gradient(model, psi)
                        row["full_grad_norm"] = float(np.linalg.norm(g_full))
                    else:
                        row["full_grad_norm"] = None

                    if kind == "sgd":
                        delta = sgd_direction(batch)
                    elif kind == "sr":
                        delta = sr_direction(batch, config.lambda_)
                    elif kind == "minsr":
                        delta = minsr_direction(batch, config.lambda_)
                    elif kind == "spring":
                        delta = spring_direction(batch, opt, config.mu)
                        row["mu_k"] = config.mu
                    else:  # prime
                        res = prime_step(batch, pstate)
                        delta = res.delta
                        row["mu_k"] = res.mu
                        row["alpha_k"] = res.alpha
                        row["beta_k"] = res.beta
                        row["rank_k"] = res.rank

                eta = step_size(opt)
                theta = apply_update(theta, delta, eta, config.norm_constraint)
                opt.advance(delta)
                row["delta_norm"] = float(np.linalg.norm(delta))
                row["eta_k"] = eta
                row["wall_ms"] = (time.perf_counter() - t0) * 1e3
                if (k + 1) % config.record_every == 0:
                    writer.writerow([_fmt(row.get(c)) for c in RECORD_COLUMNS])
        except (FloatingPointError, ValueError, ArithmeticError) as exc:
            failure = {"iteration": k, "error": f"{type(exc).__name__}: {exc}"}

    if failure is not None:
        (out / "failure.json").write_text(json.dumps(failure, indent=2) + "\n")
    save_checkpoint(out / "checkpoint.rbm", ansatz, theta)
    return out


def sweep_experiment(raw: dict, output_root) -> list[Path]:
    """Expand braced sweep axes into the cartesian product of runs.

    Each combination runs in its own subdirectory named by the varied keys.
    """
    axes = {k: v for k, v in raw.items() if isinstance(v, list)}
    if not axes:
        raise ValueError("sweep config has no braced {a, b, ...} axes")
    fixed = {k: v for k, v in raw.items() if k not in axes}
    fixed.pop("run.output", None)
    keys = sorted(axes)
    combos: list[dict] = [{}]
    for key in keys:
        combos = [dict(c, **{key: v}) for c in combos for v in axes[key]]
    out_root = Path(output_root)
    dirs = []
    for combo in combos:
        name = "__".join(f"{k.split('.')[-1]}={combo[k]}" for k in keys)
        cfg = resolve_config({**fixed, **combo})
        dirs.append(run_experiment(cfg, out_root / name))
    return dirs


def read_records(run_dir) -> dict[str, np.ndarray]:
    """Load records.csv into column arrays; empty cells become NaN."""
    path = Path(run_dir) / "records.csv"
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    cols: dict[str, list] = {c: [] for c in reader.fieldnames}
    for row in reader:
        for c, v in row.items():
            cols[c].append(float(v) if v not in ("", None) else np.nan)
    return {c: np.asarray(v) for c, v in cols.items()}


def read_resolved_config(run_dir) -> dict:
    return json.loads((Path(run_dir) / "config.resolved.json").read_text())


def sliding_window(series: np.ndarray, w: int) -> np.ndarray:
    """Trailing mean with a truncated start: out[i] = mean(series[max(0, i-w+1)..i])."""
    if w < 1:
        raise ValueError("window must be a positive integer")
    series = np.asarray(series, dtype=np.float64)
    if w == 1:
        return series.copy()
    cs = np.concatenate([[0.0], np.cumsum(series)])
    i = np.arange(len(series))
    lo = np.maximum(i - w + 1, 0)
    return (cs[i + 1] - cs[lo]) / (i + 1 - lo)


def min_grad_curve(run_dir) -> np.ndarray:
    """Running minimum of the recorded full-batch gradient norms."""
    records = read_records(run_dir)
    series = records["full_grad_norm"]
    if np.all(np.isnan(series)):
        raise ValueError(f"{run_dir} has no full_grad_norm data")
    return np.minimum.accumulate(series)


def fit_sampling_floor(points) -> tuple[float, float, float]:
    """Least-squares fit of squared floors against (1/N_s, 1/N_s^2).

    points is a sequence of (N_s, min_grad) pairs with at least 3 distinct
    N_s values and positive floors.  Fitting happens in squared space,
    matching the additive 1/N_s + 1/N_s^2 structure of the sampling-noise
    bound; a negative coefficient triggers a refit with that basis column
    dropped (clamped to zero).  Returns (b, c, relative residual).
    """
    pts = [(float(n), float(g)) for n, g in points]
    if len({n for n, _ in pts}) < 3:
        raise ValueError("need at least 3 distinct N_s values")
    if any(g <= 0 for _, g in pts):
        raise ValueError("floors must be positive")
    ns = np.array([n for n, _ in pts])
    y = np.array([g for _, g in pts]) ** 2
    X = np.column_stack([1.0 / ns, 1.0 / ns**2])

    def lstsq(cols):
        sol, *_ = np.linalg.lstsq(X[:, cols], y, rcond=None)
        if np.linalg.matrix_rank(X[:, cols]) < len(cols):
            raise ValueError("degenerate design matrix")
        return sol

    coef = lstsq([0, 1])
    b, c = coef
    if b < 0 and c < 0:
        b, c = 0.0, 0.0
    elif c < 0:
        b, c = float(lstsq([0])[0]), 0.0
        if b < 0:
            b = 0.0
    elif b < 0:
        b, c = 0.0, float(lstsq([1])[0])
        if c < 0:
            c = 0.0
    fit = X @ np.array([b, c])
    residual = float(np.linalg.norm(y - fit) / np.linalg.norm(y))
    return float(b), float(c), residual


def relative_energy_error(run_dir, e_exact: float, window: int = 100) -> np.ndarray:
    """Smoothed |energy_k - E_exact| / |E_exact| over the recorded iterations."""
    if e_exact == 0:
        raise ValueError("exact energy must be nonzero")
    records = read_records(run_dir)
    err = np.abs(records["energy"] - e_exact) / abs(e_exact)
    return sliding_window(err, window)


def run_report(run_dir, window: int = 100) -> dict:
    """Summary of one run directory; adds the exact-diagonalization energy
    and relative error whenever the model is small enough (N <= 16)."""
    records = read_records(run_dir)
    resolved = read_resolved_config(run_dir)
    energy = records["energy"]
    smoothed = sliding_window(energy, window)
    report = {
        "run_dir": str(run_dir),
        "rows": len(energy),
        "iterations": int(records["k"][-1]) + 1,
        "final_energy": float(energy[-1]),
        "final_smoothed_energy": float(smoothed[-1]),
        "min_energy": float(np.min(energy)),
        "window": window,
    }
    m = resolved["model"]
    if m["n_sites"] <= 12:
        model = LatticeModel(
            kind=m["kind"], geometry=m["geometry"], extent=m["extent"],
            periodic=m["periodic"], field_h=m["h"], marshall_sign=m["marshall_sign"],
        )
        e0, _ = exact_ground_state(model)
        report["exact_energy"] = e0
        report["final_smoothed_relative_error"] = float(
            abs(smoothed[-1] - e0) / abs(e0)
        )
    mu = records["mu_k"]
    if not np.all(np.isnan(mu)):
        report["mu_mean"] = float(np.nanmean(mu))
        report["mu_min"] = float(np.nanmin(mu))
        report["mu_max"] = float(np.nanmax(mu))
    return report
