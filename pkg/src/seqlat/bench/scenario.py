"""Perturbation experiments on random geometric graphs over a hollow rectangle."""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy import stats

from ..errors import DegenerateStepError, InvalidInputError, NotLaterableError, ScenarioInfeasibleError
from ..geometry import embedding_error
from ..graph import DomainSpec, NoiseSpec, apply_noise, find_laterative_ordering, geometric_graph, sample_domain
from ..sequential import sequential_laterate_best, sequential_laterate_first
from ..stress import OptimizerConfig, minimize_gd, minimize_smacof, s_stress

__all__ = [
    "METHODS",
    "ScenarioConfig",
    "ResultRow",
    "run_scenario",
    "run_scenarios",
    "loglog_slope",
    "level_medians",
    "timing_study",
    "PRESETS",
    "preset",
    "load_config",
]

logger = logging.getLogger(__name__)

METHODS = ("seq-lateration-first", "seq-lateration-best", "gd", "smacof")
RESAMPLE = "resample"
DEFAULT_SIGMA2 = (1e-5, 1e-4, 1e-3, 1e-2)


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment cell grid: a domain, a radius and a list of noise levels.

    Every ``(sigma2, trial)`` cell draws a latent configuration on
    ``DomainSpec(h, kappa)``; trial ``t`` uses the same latent at every
    noise level so that levels are compared on common instances.
    """

    name: str = "scenario"
    n: int = 500
    p: int = 2
    h: float = 0.2
    kappa: float = 1.0
    radius: float = 0.3
    sigma2: tuple = DEFAULT_SIGMA2
    trials: int = 20
    methods: tuple = ("seq-lateration-first",)
    seed: int = 0
    noise_model: str = "additive-gaussian"
    best_budget: int = 200
    gd_max_iters: int = 5000
    smacof_max_iters: int = 1000
    rel_tol: float = 1e-10
    max_resample: int = 50
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sigma2", tuple(float(s) for s in self.sigma2))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.p != 2:
            raise InvalidInputError("domain sampling supports p = 2 only")
        if not self.sigma2:
            raise InvalidInputError("sigma2 grid must be non-empty")
        if any(s < 0 or not np.isfinite(s) for s in self.sigma2):
            raise InvalidInputError("noise variances must be finite and >= 0")
        if int(self.trials) < 1 or int(self.n) < self.p + 1:
            raise InvalidInputError("need trials >= 1 and n >= p + 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InvalidInputError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.radius > 0:
            raise InvalidInputError("radius must be > 0")
        DomainSpec(self.h, self.kappa)
        NoiseSpec(self.noise_model, 0.0, 0)

    @property
    def domain(self):
        return DomainSpec(self.h, self.kappa)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown scenario fields {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        d = asdict(self)
        d["sigma2"] = list(self.sigma2)
        d["methods"] = list(self.methods)
        return d


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    trial: int
    seed: int
    method: str
    n: int
    p: int
    r: float
    h: float
    kappa: float
    sigma2: float
    mean_perturbation: float
    embedding_error: float
    s_stress: float
    wall_time_ms: float
    laterable: bool

    def sort_key(self):
        return (self.scenario, self.sigma2, self.trial, self.method)


COLUMNS = tuple(f.name for f in fields(ResultRow))


def _trial_seed(cfg, trial):
    ss = np.random.SeedSequence(int(cfg.seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_method(method, cfg, graph, first):
    """Return (config or None, seconds)."""
    p = cfg.p
    if method == "seq-lateration-first":
        return (first[0].config if first[0] is not None else None), first[1]
    if method == "seq-lateration-best":
        t0 = time.perf_counter()
        try:
            res = sequential_laterate_best(graph, p, budget=cfg.best_budget, seed=cfg.seed)
        except (NotLaterableError, DegenerateStepError):
            return None, time.perf_counter() - t0
        return res.config, time.perf_counter() - t0
    # stress minimizers start from the 'first' embedding; its cost is charged to them
    init = first[0].config if first[0] is not None else "random"
    opt = OptimizerConfig(
        max_iters=cfg.gd_max_iters if method == "gd" else cfg.smacof_max_iters,
        rel_tol=cfg.rel_tol, seed=cfg.seed,
    )
    fn = minimize_gd if method == "gd" else minimize_smacof
    t0 = time.perf_counter()
    fit = fn(graph, p, init, opt)
    return fit.config, time.perf_counter() - t0 + first[1]


def _run_trial(args):
    cfg, trial = args
    seed = _trial_seed(cfg, trial)
    rows = []
    failures = 0
    while True:
        latent = sample_domain(cfg.domain, cfg.n, [seed, failures])
        exact = geometric_graph(latent, cfg.radius)
        if find_laterative_ordering(exact, cfg.p) is not None:
            break
        failures += 1
        for s2 in cfg.sigma2:
            rows.append(ResultRow(
                cfg.name, trial, seed, RESAMPLE, cfg.n, cfg.p, cfg.radius, cfg.h, cfg.kappa,
                s2, np.nan, np.nan, np.nan, 0.0, False,
            ))
        if failures > cfg.max_resample:
            raise ScenarioInfeasibleError(
                f"{cfg.name}: {failures} consecutive non-laterable draws (trial {trial})"
            )
    for level, s2 in enumerate(cfg.sigma2):
        noise = NoiseSpec(cfg.noise_model, s2, [seed, 1_000 + level])
        graph, eps = apply_noise(exact, noise)
        mean_pert = float(eps @ eps) / max(graph.n_edges, 1)
        t0 = time.perf_counter()
        try:
            first = (sequential_laterate_first(graph, cfg.p), time.perf_counter() - t0)
        except (NotLaterableError, DegenerateStepError):
            first = (None, time.perf_counter() - t0)
        for method in cfg.methods:
            config, secs = _run_method(method, cfg, graph, first)
            ok = config is not None
            rows.append(ResultRow(
                cfg.name, trial, seed, method, cfg.n, cfg.p, cfg.radius, cfg.h, cfg.kappa, s2,
                mean_pert,
                embedding_error(config, latent) if ok else np.nan,
                s_stress(config, graph) if ok else np.nan,
                secs * 1e3, ok,
            ))
    return rows


def run_scenario(cfg):
    """Run every ``(sigma2, trial)`` cell of ``cfg`` and return sorted rows.

    Draws that admit no laterative ordering are re-sampled and recorded as
    rows with ``method == "resample"`` and ``laterable == False``.

    Raises
    ------
    ScenarioInfeasibleError
        More than ``cfg.max_resample`` consecutive non-laterable draws.
    """
    jobs = [(cfg, t) for t in range(int(cfg.trials))]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            chunks = list(pool.map(_run_trial, jobs))
    else:
        chunks = [_run_trial(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    n_resampled = sum(r.method == RESAMPLE for r in rows) // max(len(cfg.sigma2), 1)
    if n_resampled:
        logger.info("%s: %d non-laterable draws re-sampled", cfg.name, n_resampled)
    return sorted(rows, key=ResultRow.sort_key)


def run_scenarios(configs):
    rows = []
    for cfg in configs:
        rows.extend(run_scenario(cfg))
    return sorted(rows, key=ResultRow.sort_key)


def _method_rows(rows, method):
    return [
        r for r in rows
        if r.method == method and r.laterable and np.isfinite(r.embedding_error)
    ]


def level_medians(rows, method):
    """Per noise level: ``(sigma2, median s(eps)^2, median embedding error)``."""
    by_level = {}
    for r in _method_rows(rows, method):
        by_level.setdefault(r.sigma2, []).append(r)
    out = []
    for s2 in sorted(by_level):
        rs = by_level[s2]
        out.append((
            s2,
            float(np.median([r.mean_perturbation for r in rs])),
            float(np.median([r.embedding_error for r in rs])),
        ))
    return out


def loglog_slope(rows, method):
    """OLS fit of log median error against log median ``s(eps)^2`` across levels.

    Returns
    -------
    slope, intercept, r2 : float
    """
    pts = [(s, e) for _, s, e in level_medians(rows, method) if s > 0 and e > 0]
    if len(pts) < 3:
        raise InvalidInputError(
            f"need >= 3 noise levels with positive errors for {method!r}, got {len(pts)}"
        )
    x = np.log([s for s, _ in pts])
    y = np.log([e for _, e in pts])
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)


def timing_study(cfg, n_grid):
    """Median wall time (ms) per ``(n, method)``, same instances across methods.

    Returns
    -------
    summary : list of dict
        Keys ``n``, ``method``, ``median_wall_time_ms``, ``trials``.
    rows : list of ResultRow
    """
    n_grid = list(n_grid)
    if not n_grid:
        raise InvalidInputError("n grid must be non-empty")
    all_rows = []
    summary = []
    for n in n_grid:
        sub = replace(cfg, name=f"{cfg.name}-n{n}", n=int(n))
        rows = run_scenario(sub)
        all_rows.extend(rows)
        for method in cfg.methods:
            times = [r.wall_time_ms for r in _method_rows(rows, method)]
            summary.append({
                "n": int(n),
                "method": method,
                "median_wall_time_ms": float(np.median(times)) if times else np.nan,
                "trials": len(times),
            })
    return summary, all_rows


def _fig2a():
    base = dict(n=500, h=0.2, kappa=1.0)
    literal = [ScenarioConfig(name=f"fig2a-literal-r{r}", radius=r, **base) for r in (2.25, 2.5, 2.75)]
    rescaled = [ScenarioConfig(name=f"fig2a-rescaled-r{r}", radius=r, **base) for r in (0.225, 0.25, 0.275)]
    return literal + rescaled


PRESETS = {
    "fig2a": _fig2a,
    "fig2b": lambda: [
        ScenarioConfig(name=f"fig2b-kappa{k}", n=500, h=0.2, kappa=float(k), radius=0.3)
        for k in (2, 3, 4)
    ],
    "fig2c": lambda: [
        ScenarioConfig(name=f"fig2c-h{h}", n=500, h=h, kappa=1.0, radius=0.3)
        for h in (0.25, 0.5, 0.75)
    ],
    "fig3a": lambda: [
        ScenarioConfig(
            name="fig3a", n=500, h=0.2, kappa=1.0, radius=0.3,
            methods=("seq-lateration-first", "gd", "smacof"),
        )
    ],
    "fig3b": lambda: [
        ScenarioConfig(
            name=f"fig3b-n{n}", n=n, h=0.2, kappa=1.0, radius=0.3, sigma2=(1e-4,), trials=5,
            methods=("seq-lateration-first", "gd", "smacof"),
        )
        for n in (250, 500, 1000, 2000)
    ],
}


def preset(name, **overrides):
    """Scenario list for a named figure, with field overrides applied to each."""
    if name not in PRESETS:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return [replace(cfg, **overrides) for cfg in PRESETS[name]()]


def load_config(path):
    """Read a JSON scenario (object) or scenario list (array)."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        return [ScenarioConfig.from_dict(data)]
    return [ScenarioConfig.from_dict(d) for d in data]
