"""Experiment orchestration: reproducible sweeps over the link model.

Each experiment produces a deterministic table (list of row tuples plus
column names) that the CLI writes as CSV with the resolved configuration
embedded in a comment header.  Sampling seeds are derived per sweep point
from the master seed and the constellation order only, so points that
differ in OMA or metric kind share their random streams (common random
numbers); this makes monotonicity comparisons across a sweep meaningful
at moderate sample counts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constellation import db_to_linear, dbm_to_watts, draw_symbols
from .filters import DEFAULT_SPAN, overlap_kernel
from .gmi import MetricSpec, estimate_gmi, optimize_s, sample_channel
from .rin_variance import (
    DEFAULT_MEMORY,
    genie_variance,
    legacy_model,
    polynomial_coeffs,
    variance_vs_memory,
)
from .waveform import LinkConfig, NoiseSwitches, simulate_link

EXPERIMENT_NAMES = ("histogram", "variance-vs-ell", "gmi-vs-oma", "gmi-vs-m", "beta")

_DEFAULT_M_LIST = (2, 4, 8, 16, 32)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters, link fields in human units."""

    oma_dbm: float = 0.0
    er_db: float = 4.5
    rs_baud: float = 225e9
    rolloff: float = 0.1
    sps: int = 4
    n0_rin_db_hz: float = -140.0
    sqrt_n0_th_pa: float = 22.0
    l_km: float = 1.0
    alpha_db_km: float = 0.35
    responsivity: float = 0.5
    v_pi: float = 2.0
    pcw_headroom: float = 1.5
    m: int = 4
    span: int = DEFAULT_SPAN
    n_symbols: int = 200_000
    seed: int = 1234
    mode: str = "waveform"
    ell: int = DEFAULT_MEMORY
    ell_max: int = 40
    sweep: tuple = ()
    m_list: tuple = _DEFAULT_M_LIST
    bins: int = 0
    workers: int = 1
    out: str = ""

    def __post_init__(self):
        if self.mode not in ("waveform", "surrogate"):
            raise ConfigError(f"mode must be waveform or surrogate, got {self.mode!r}")
        for name in ("n_symbols", "seed", "sps", "span", "m", "ell", "ell_max"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.bins < 0:
            raise ConfigError("bins must be >= 0")

    def link_config(self, m: int | None = None, oma_dbm: float | None = None) -> LinkConfig:
        """Convert to SI-unit link parameters, optionally overriding M/OMA."""
        try:
            return LinkConfig(
                rs_baud=self.rs_baud,
                sps=self.sps,
                rolloff=self.rolloff,
                span=self.span,
                m_order=self.m if m is None else m,
                oma_w=dbm_to_watts(self.oma_dbm if oma_dbm is None else oma_dbm),
                er_lin=db_to_linear(self.er_db),
                n0_rin=db_to_linear(self.n0_rin_db_hz),
                n0_th=(self.sqrt_n0_th_pa * 1e-12) ** 2,
                alpha_db_per_km=self.alpha_db_km,
                l_km=self.l_km,
                responsivity=self.responsivity,
                v_pi=self.v_pi,
                pcw_headroom=self.pcw_headroom,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def as_dict(self) -> dict:
        """Resolved parameters that determine the result.

        The output path and worker count are dropped: they steer where and
        how fast the run happens, never what it computes, and the CSV
        header must compare byte-identical across reruns.
        """
        d = dataclasses.asdict(self)
        d["sweep"] = list(self.sweep)
        d["m_list"] = list(self.m_list)
        del d["out"], d["workers"]
        return d


#: Field fallbacks applied per experiment when the user left them unset.
_EXPERIMENT_DEFAULTS = {
    "beta": {"m": 32, "sweep": (0.0, 2.0, 4.0)},
    "gmi-vs-m": {"oma_dbm": 25.0, "sweep": _DEFAULT_M_LIST},
    "gmi-vs-oma": {"sweep": tuple(float(x) for x in range(-10, 26))},
}

_INT_FIELDS = {"sps", "m", "span", "n_symbols", "seed", "ell", "ell_max", "bins", "workers"}


def resolve_config(experiment: str, raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Merge config-file values, CLI overrides, and experiment defaults.

    raw comes from the JSON config file, overrides from CLI flags; both
    may be partial.  Unknown keys are rejected rather than ignored so a
    typo cannot silently fall back to a default.
    """
    if experiment not in EXPERIMENT_NAMES:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENT_NAMES}")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    for key, value in _EXPERIMENT_DEFAULTS.get(experiment, {}).items():
        merged.setdefault(key, value)

    valid = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(merged) - valid
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    coerced = {}
    for key, value in merged.items():
        try:
            if key in ("sweep", "m_list"):
                coerced[key] = tuple(int(v) if key == "m_list" else float(v) for v in value)
            elif key in _INT_FIELDS:
                coerced[key] = int(value)
            elif key in ("mode", "out"):
                coerced[key] = str(value)
            else:
                coerced[key] = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    try:
        cfg = ExperimentConfig(**coerced)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    # Validate every constellation the experiment will ask for up front,
    # so bad values fail as configuration errors instead of mid-sweep.
    if experiment == "gmi-vs-m":
        orders = [int(m) for m in cfg.sweep] or [cfg.m]
    elif experiment == "gmi-vs-oma":
        orders = list(cfg.m_list)
    else:
        orders = [cfg.m]
    try:
        for m in orders:
            cfg.link_config(m=m).constellation()
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return raw


def derive_seed(master: int, *tags) -> np.random.SeedSequence:
    """Stable, platform-independent seed for one labeled sweep point."""
    digest = hashlib.sha256(repr((int(master),) + tags).encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence(words)


@dataclass(frozen=True)
class ExperimentResult:
    """One experiment's table plus everything needed to reproduce it."""

    experiment: str
    columns: tuple
    rows: list
    config: dict
    comments: tuple = ()


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, result: ExperimentResult) -> None:
    """Write the result table with a config header, byte-deterministic."""
    lines = [
        "# experiment = " + result.experiment,
        "# config = " + json.dumps(result.config, sort_keys=True, separators=(",", ":")),
    ]
    lines.extend("# " + c for c in result.comments)
    lines.append(",".join(result.columns))
    lines.extend(",".join(_format_cell(v) for v in row) for row in result.rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# histogram


_HISTOGRAM_RUNS = (
    ("both", NoiseSwitches(rin_on=True, thermal_on=True)),
    ("rin_only", NoiseSwitches(rin_on=True, thermal_on=False)),
    ("thermal_only", NoiseSwitches(rin_on=False, thermal_on=True)),
)


def run_histogram(cfg: ExperimentConfig) -> ExperimentResult:
    """Received-sample distributions with each noise source isolated.

    All three runs share one symbol stream and one master noise seed; the
    per-process streams are derived independently, so the noise samples a
    run keeps are identical to those in the combined run.
    """
    link = cfg.link_config()
    const = link.constellation()
    seq = derive_seed(cfg.seed, "histogram")
    sym_seq, link_seq = seq.spawn(2)
    symbols = draw_symbols(const, cfg.n_symbols + 2 * cfg.span, seed=sym_seq)
    blocks = [
        (label, simulate_link(link, symbols, switches, seed=link_seq))
        for label, switches in _HISTOGRAM_RUNS
    ]
    rows = []
    if cfg.bins:
        lo = min(float(b.y.min()) for _, b in blocks)
        hi = max(float(b.y.max()) for _, b in blocks)
        edges = np.linspace(lo, hi, cfg.bins + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        for label, block in blocks:
            for level_index in range(const.order):
                counts, _ = np.histogram(block.y[block.indices == level_index], bins=edges)
                rows.extend(
                    (label, level_index, float(c), int(n))
                    for c, n in zip(centers, counts)
                )
        columns = ("run_label", "level_index", "bin_center", "count")
    else:
        for label, block in blocks:
            rows.extend(
                (label, int(i), float(y)) for i, y in zip(block.indices, block.y)
            )
        columns = ("run_label", "level_index", "y_sample")
    return ExperimentResult("histogram", columns, rows, cfg.as_dict())


# --------------------------------------------------------------------------
# variance vs memory


def run_variance_vs_ell(cfg: ExperimentConfig) -> ExperimentResult:
    """Analytic variance as a function of neighbor memory, with references.

    The genie column is the empirical per-level variance from the full
    chain (thermal off); it does not depend on the memory, so it is
    computed once and repeated on every row for plotting convenience.
    """
    link = cfg.link_config()
    const = link.constellation()
    pair = link.pulse_pair()
    kernel = overlap_kernel(pair, cfg.ell_max)
    sweep = variance_vs_memory(const, kernel, link.n0_rin)
    legacy = legacy_model(link.n0_rin, pair.h_norm_sq).evaluate(const.levels)
    genie = genie_variance(link, cfg.n_symbols, seed=derive_seed(cfg.seed, "variance"))
    rows = []
    for ell_i, ell in enumerate(sweep.memories):
        for level_index in range(const.order):
            rows.append(
                (
                    int(ell),
                    level_index,
                    float(sweep.variances[ell_i, level_index]),
                    float(legacy[level_index]),
                    float(genie.variances[level_index]),
                    float(genie.stderrs[level_index]),
                )
            )
    columns = ("ell", "level_index", "sigma2_theorem2", "sigma2_legacy", "sigma2_genie", "genie_stderr")
    comments = (f"converged_ell = {sweep.converged_memory}",)
    return ExperimentResult("variance-vs-ell", columns, rows, cfg.as_dict(), comments)


# --------------------------------------------------------------------------
# GMI sweeps


def _gmi_point(args) -> list:
    """One (M, OMA) sweep point: sample once, score both metric variants."""
    cfg_dict, m, oma_dbm, seed_tags = args
    cfg = ExperimentConfig(**cfg_dict)
    link = cfg.link_config(m=m, oma_dbm=oma_dbm)
    const = link.constellation()
    pair = link.pulse_pair()
    kernel = overlap_kernel(pair, cfg.ell)
    channel_model = polynomial_coeffs(const, kernel, link.n0_rin)
    samples = sample_channel(
        link,
        cfg.mode,
        cfg.n_symbols,
        seed=derive_seed(cfg.seed, *seed_tags),
        variance_model=channel_model,
    )
    sigma_q_sq = link.sigma_q_sq(pair)
    rows = []
    for kind, model in (
        ("theorem2", channel_model),
        ("legacy", legacy_model(link.n0_rin, pair.h_norm_sq)),
    ):
        report = optimize_s(samples, MetricSpec(const, sigma_q_sq, model, 1.0))
        rows.append(
            (m, float(oma_dbm), float(report.gmi), float(report.s_opt), float(report.stderr), kind)
        )
    return rows


def _run_points(cfg: ExperimentConfig, points: list) -> list:
    args = [
        (cfg.as_dict(), m, oma, ("gmi", m))
        for m, oma in points
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_gmi_point, args))
    else:
        chunks = [_gmi_point(a) for a in args]
    return [row for chunk in chunks for row in chunk]


_GMI_COLUMNS = ("M", "oma_dbm", "gmi_bits", "s_opt", "stderr", "metric_variance_kind")


def run_gmi_vs_oma(cfg: ExperimentConfig) -> ExperimentResult:
    """Rate vs. OMA, one curve per constellation order in m_list."""
    if not cfg.sweep:
        raise ConfigError("gmi-vs-oma needs a nonempty sweep of OMA values (dBm)")
    points = [(int(m), float(oma)) for m in cfg.m_list for oma in cfg.sweep]
    rows = sorted(_run_points(cfg, points), key=lambda r: (r[0], r[1], r[5]))
    return ExperimentResult("gmi-vs-oma", _GMI_COLUMNS, rows, cfg.as_dict())


def run_gmi_vs_m(cfg: ExperimentConfig) -> ExperimentResult:
    """Rate vs. constellation order at the configured OMA."""
    if not cfg.sweep:
        raise ConfigError("gmi-vs-m needs a nonempty sweep of constellation orders")
    points = [(int(m), float(cfg.oma_dbm)) for m in cfg.sweep]
    rows = sorted(_run_points(cfg, points), key=lambda r: (r[0], r[1], r[5]))
    return ExperimentResult("gmi-vs-m", _GMI_COLUMNS, rows, cfg.as_dict())


# --------------------------------------------------------------------------
# per-level rate contributions


def run_beta(cfg: ExperimentConfig) -> ExperimentResult:
    """Per-level rate contributions at fixed metric exponent 1.

    For each OMA in the sweep the channel is run once with intensity noise
    and once without; the no-noise runs also drop the signal-dependent
    term from the metric.  Symbol and thermal streams are shared across
    all points of the sweep.
    """
    if not cfg.sweep:
        raise ConfigError("beta needs a nonempty sweep of OMA values (dBm)")
    rows = []
    comments = []
    for oma_dbm in cfg.sweep:
        link = cfg.link_config(oma_dbm=float(oma_dbm))
        const = link.constellation()
        pair = link.pulse_pair()
        kernel = overlap_kernel(pair, cfg.ell)
        channel_model = polynomial_coeffs(const, kernel, link.n0_rin)
        sigma_q_sq = link.sigma_q_sq(pair)
        for flag, rin_on in (("on", True), ("off", False)):
            samples = sample_channel(
                link,
                cfg.mode,
                cfg.n_symbols,
                seed=derive_seed(cfg.seed, "beta", cfg.m),
                variance_model=channel_model,
                rin_on=rin_on,
            )
            metric_model = channel_model if rin_on else None
            est = estimate_gmi(samples, MetricSpec(const, sigma_q_sq, metric_model, 1.0))
            comments.append(f"gmi oma_dbm={float(oma_dbm)!r} rin={flag} = {est.gmi!r}")
            rows.extend(
                (float(oma_dbm), flag, i, float(est.beta[i]), float(est.beta_stderr[i]))
                for i in range(const.order)
            )
    columns = ("oma_dbm", "rin_flag", "i", "beta_i", "stderr")
    return ExperimentResult("beta", columns, rows, cfg.as_dict(), tuple(comments))


EXPERIMENTS = {
    "histogram": run_histogram,
    "variance-vs-ell": run_variance_vs_ell,
    "gmi-vs-oma": run_gmi_vs_oma,
    "gmi-vs-m": run_gmi_vs_m,
    "beta": run_beta,
}
