"""Monte Carlo studies.

Study 1 measures estimator bias, MSE and coverage, residual behavior and
how often AIC, BIC and AICc pick the generating family. Study 2 measures
the size and power of the Wald, score, likelihood ratio and gradient
tests. Each replication draws from its own generator keyed by the
replication coordinates, so serial and parallel runs give identical
reports.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
from pathlib import Path
from typing import Any
from typing import Literal
from typing import NamedTuple
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import Field
from pydantic import field_validator
from scipy.stats import chi2

from qlsreg.diagnostics import ResidualSummary
from qlsreg.diagnostics import gcs_residuals
from qlsreg.diagnostics import rq_residuals
from qlsreg.exceptions import ExcessiveNonConvergence
from qlsreg.exceptions import QlsRegError
from qlsreg.inference import Hypothesis
from qlsreg.inference import confidence_intervals
from qlsreg.inference import information_criteria
from qlsreg.inference import run_battery
from qlsreg.kernels import DEFAULT_EXTRA
from qlsreg.kernels import STRATEGIES
from qlsreg.kernels import KernelFamily
from qlsreg.kernels import make_kernel
from qlsreg.parsl import ComputeConfigs
from qlsreg.parsl import map_ordered
from qlsreg.regress import RegressionModel
from qlsreg.regress import fit
from qlsreg.timer import Timer
from qlsreg.utils import BaseConfig
from qlsreg.utils import FLOAT_DIGITS
from qlsreg.utils import PathLike
from qlsreg.utils import spawn_generator

logger = logging.getLogger(__name__)

CRITERIA = ('AIC', 'BIC', 'AICc')
STATISTICS = ('Wald', 'Score', 'ScoreObserved', 'LR', 'Gradient')
SUMMARY_FIELDS = ResidualSummary._fields


def _key(value: float) -> int:
    """Map a real grid value to a non-negative integer stream key."""
    scaled = round(abs(value) * 1_000_000)
    return 2 * scaled + (value < 0)


class StudyConfig(BaseConfig):
    """Settings shared by both studies."""

    # Generating family tag
    family: str = 'log-no'
    # Extra parameters, the family default when omitted
    extra: Optional[tuple[float, ...]] = None  # noqa: UP007
    # Quantile levels
    q: list[float] = Field(default_factory=lambda: [0.5])
    # Sample sizes
    n: list[int] = Field(default_factory=lambda: [200])
    # Replications per (n, q) cell
    replications: int = Field(default=1000, ge=1)
    seed: int = 0
    # Redraw covariates in every replication (else one design per n)
    redraw_covariates: bool = True
    # Largest tolerated share of dropped replications
    max_drop_share: float = Field(default=0.05, ge=0.0, le=1.0)
    # Parsl backend, None runs serially
    compute_config: Optional[ComputeConfigs] = None  # noqa: UP007
    # Directory for parsl logs
    run_dir: Path = Path('parsl')

    @field_validator('family')
    @classmethod
    def known_family(cls, value: str) -> str:
        """Reject unknown family tags."""
        if value not in STRATEGIES:
            raise ValueError(
                f'Unknown kernel family: {value}.'
                f' Available: {set(STRATEGIES.keys())}',
            )
        return value

    @field_validator('q')
    @classmethod
    def valid_levels(cls, value: list[float]) -> list[float]:
        """Require quantile levels in (0, 1)."""
        if not value or not all(0 < q < 1 for q in value):
            raise ValueError(f'q values must lie in (0, 1), got {value}')
        return value

    @field_validator('n')
    @classmethod
    def valid_sizes(cls, value: list[int]) -> list[int]:
        """Require a few observations per parameter."""
        if not value or min(value) < 10:
            raise ValueError(f'sample sizes must be at least 10, got {value}')
        return value

    def kernel_family(self) -> KernelFamily:
        """Generating family with defaults filled in."""
        extra = self.extra
        if extra is None:
            extra = DEFAULT_EXTRA[self.family]
        return KernelFamily(name=self.family, extra=tuple(extra))


class Study1Config(StudyConfig):
    """Estimation, residual and criteria study."""

    name: Literal['study1'] = 'study1'  # type: ignore[assignment]
    # True (beta0, beta1)
    beta: tuple[float, float] = (1.5, 0.5)
    # True (tau0, tau1)
    tau: tuple[float, float] = (1.0, 0.5)
    # Nominal level of the coverage intervals
    level: float = Field(default=0.95, gt=0.0, lt=1.0)
    # Families competing in the criteria step, all when None
    candidates: Optional[list[str]] = None  # noqa: UP007

    def candidate_families(self) -> list[KernelFamily]:
        """Competing families; the generating one keeps its parameters."""
        tags = list(STRATEGIES) if self.candidates is None else self.candidates
        generating = self.kernel_family()
        return [
            generating
            if tag == self.family
            else KernelFamily(name=tag, extra=DEFAULT_EXTRA[tag])
            for tag in tags
        ]


class Study2Config(StudyConfig):
    """Test size and power study."""

    name: Literal['study2'] = 'study2'  # type: ignore[assignment]
    # Numbers of coefficients under test
    r: list[int] = Field(default_factory=lambda: [1, 3])
    # Nominal levels
    alpha: list[float] = Field(default_factory=lambda: [0.01, 0.05, 0.1])
    # Values of the tested coefficients, 0 gives the size
    delta: list[float] = Field(
        default_factory=lambda: [0.0, 1.0, 2.0, 3.0, 4.0],
    )
    # Constant dispersion
    phi: float = Field(default=3.0, gt=0.0)
    # Value of the coefficients not under test
    coefficient: float = 1.0

    @field_validator('r')
    @classmethod
    def valid_r(cls, value: list[int]) -> list[int]:
        """Three covariates can be tested."""
        if not value or not all(1 <= r <= 3 for r in value):
            raise ValueError(f'r must lie in 1..3, got {value}')
        return value

    @field_validator('alpha')
    @classmethod
    def valid_alpha(cls, value: list[float]) -> list[float]:
        """Nominal levels lie in (0, 1]."""
        if not value or not all(0 < a <= 1 for a in value):
            raise ValueError(f'alpha values must lie in (0, 1], got {value}')
        return value


class Aggregate(NamedTuple):
    """Per-parameter bias, MSE and coverage."""

    bias: np.ndarray
    mse: np.ndarray
    cp: np.ndarray


def aggregate(
    estimates: np.ndarray,
    truths: np.ndarray,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
) -> Aggregate:
    """Average bias, MSE and interval coverage over replications.

    Parameters
    ----------
    estimates : np.ndarray
        One row per replication, one column per parameter.
    truths : np.ndarray
        True parameter values.
    lower, upper : np.ndarray, optional
        Interval bounds shaped like ``estimates``; ``cp`` is NaN without
        them.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    if estimates.shape[0] < 1:
        raise ValueError('aggregate needs at least one replication')
    error = estimates - np.asarray(truths, dtype=float)[None, :]
    bias = error.mean(axis=0)
    mse = (error**2).mean(axis=0)
    if lower is None or upper is None:
        cp = np.full(estimates.shape[1], np.nan)
    else:
        covered = (np.asarray(lower) <= truths) & (truths <= np.asarray(upper))
        cp = covered.mean(axis=0)
    return Aggregate(bias=bias, mse=mse, cp=cp)


@dataclasses.dataclass
class StudyReport:
    """Tables produced by a study.

    Every table is long format keyed by ``family, q, n`` (plus ``r``,
    ``alpha`` and ``delta`` for the test tables).
    """

    estimation: pd.DataFrame = dataclasses.field(default_factory=pd.DataFrame)
    residuals: pd.DataFrame = dataclasses.field(default_factory=pd.DataFrame)
    criteria: pd.DataFrame = dataclasses.field(default_factory=pd.DataFrame)
    size: pd.DataFrame = dataclasses.field(default_factory=pd.DataFrame)
    power: pd.DataFrame = dataclasses.field(default_factory=pd.DataFrame)
    drops: pd.DataFrame = dataclasses.field(default_factory=pd.DataFrame)

    def tables(self) -> dict[str, pd.DataFrame]:
        """Non-empty tables by name."""
        return {
            field.name: getattr(self, field.name)
            for field in dataclasses.fields(self)
            if not getattr(self, field.name).empty
        }

    def write_csv(self, out_dir: PathLike) -> list[Path]:
        """Write one ``<table>.csv`` per non-empty table."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, table in self.tables().items():
            path = out_dir / f'{name}.csv'
            table.to_csv(path, index=False, float_format=f'%.{FLOAT_DIGITS}g')
            paths.append(path)
        return paths

    def to_dict(self) -> dict[str, Any]:
        """Tables as lists of records."""
        return {
            name: table.to_dict(orient='records')
            for name, table in self.tables().items()
        }


class Study1Job(NamedTuple):
    """Coordinates of a Study-1 replication."""

    n: int
    q: float
    rep: int


@dataclasses.dataclass
class Study1Replication:
    """Outcome of one Study-1 replication."""

    job: Study1Job
    estimates: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    summaries: dict[str, ResidualSummary] = dataclasses.field(
        default_factory=dict,
    )
    selected: dict[str, str | None] = dataclasses.field(default_factory=dict)
    reason: str = ''

    @property
    def dropped(self) -> bool:
        """Whether the replication failed."""
        return self.estimates is None


def study1_design(
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Bernoulli(0.5) quantile covariate and Uniform(0, 1) dispersion one."""
    x = rng.binomial(1, 0.5, size=n).astype(float)
    w = rng.uniform(size=n)
    ones = np.ones(n)
    return np.column_stack([ones, x]), np.column_stack([ones, w])


def study2_design(n: int, rng: np.random.Generator) -> np.ndarray:
    """Intercept plus three Bernoulli(0.5) covariates."""
    x = rng.binomial(1, 0.5, size=(n, 3)).astype(float)
    return np.column_stack([np.ones(n), x])


def _design_generator(
    cfg: StudyConfig,
    n: int,
    rng: np.random.Generator,
) -> np.random.Generator:
    # A fixed design shares one covariate stream per sample size
    return rng if cfg.redraw_covariates else spawn_generator(cfg.seed, n)


def draw_response(
    family: KernelFamily,
    q: float,
    log_quantile: np.ndarray,
    log_phi: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``Y_i = Q_i eps_i^{sqrt(phi_i)}`` with ``eps_i ~ QLS(1, 1, g)``."""
    kernel = make_kernel(family)
    z_q = float(kernel.quantile(q))
    z = kernel.sample(log_quantile.size, rng)
    return np.exp(log_quantile + np.exp(0.5 * log_phi) * (z - z_q))


def _criteria_selection(
    model: RegressionModel,
    candidates: list[KernelFamily],
) -> dict[str, str | None]:
    scores: dict[str, list[float]] = {name: [] for name in CRITERIA}
    for family in candidates:
        candidate = dataclasses.replace(model, family=family)
        try:
            result = fit(candidate).require_converged()
            values = tuple(information_criteria(result, model.n))
        except QlsRegError as exc:
            logger.debug('Candidate %s failed: %s', family.label(), exc)
            values = (np.inf, np.inf, np.inf)
        for name, value in zip(CRITERIA, values):
            scores[name].append(value)

    # Ties go to the earliest candidate
    selected: dict[str, str | None] = {}
    for name in CRITERIA:
        best = int(np.argmin(scores[name]))
        finite = np.isfinite(scores[name][best])
        selected[name] = candidates[best].name if finite else None
    return selected


def study1_replication(
    job: Study1Job,
    config: dict[str, Any],
) -> Study1Replication:
    """Run one Study-1 replication."""
    cfg = Study1Config(**config)
    family = cfg.kernel_family()
    rng = spawn_generator(cfg.seed, job.n, _key(job.q), job.rep)
    design_rng = _design_generator(cfg, job.n, rng)
    X, W = study1_design(job.n, design_rng)
    beta, tau = np.array(cfg.beta), np.array(cfg.tau)
    outcome = Study1Replication(job=job)
    try:
        y = draw_response(family, job.q, X @ beta, W @ tau, rng)
        model = RegressionModel(y=y, X=X, W=W, q=job.q, family=family)
        result = fit(model).require_converged()
        intervals = confidence_intervals(result, cfg.level)
        summaries = {
            'GCS': gcs_residuals(model, result).summary,
            'RQ': rq_residuals(model, result).summary,
        }
    except QlsRegError as exc:
        outcome.reason = f'{type(exc).__name__}: {exc}'
        return outcome

    outcome.estimates = result.theta
    outcome.lower = intervals[:, 0]
    outcome.upper = intervals[:, 1]
    outcome.summaries = summaries
    candidates = cfg.candidate_families()
    if candidates:
        outcome.selected = _criteria_selection(model, candidates)
    return outcome


def _check_drops(
    label: str,
    dropped: int,
    total: int,
    max_share: float,
) -> None:
    if dropped:
        logger.warning(
            '%s: dropped %d of %d replications',
            label,
            dropped,
            total,
        )
    if dropped > max_share * total:
        raise ExcessiveNonConvergence(
            f'{label}: {dropped} of {total} replications failed',
        )


def run_study1(cfg: Study1Config) -> StudyReport:
    """Estimation, residual and criteria study over the (n, q) grid.

    Raises
    ------
    ExcessiveNonConvergence
        If a cell drops more than ``max_drop_share`` of its replications.
    """
    family = cfg.kernel_family()
    jobs = [
        Study1Job(n=n, q=q, rep=rep)
        for n in cfg.n
        for q in cfg.q
        for rep in range(cfg.replications)
    ]
    worker = functools.partial(
        study1_replication,
        config=cfg.model_dump(exclude={'compute_config'}),
    )
    with Timer('study1', family.label()):
        outcomes = map_ordered(worker, jobs, cfg.compute_config, cfg.run_dir)

    truths = np.array([*cfg.beta, *cfg.tau])
    names = ['beta0', 'beta1', 'tau0', 'tau1']
    estimation, residuals, criteria, drops = [], [], [], []
    for n in cfg.n:
        for q in cfg.q:
            cell = [o for o in outcomes if o.job.n == n and o.job.q == q]
            kept = [o for o in cell if not o.dropped]
            key = {'family': family.label(), 'q': q, 'n': n}
            drops.append({**key, 'dropped': len(cell) - len(kept),
                          'replications': len(cell)})
            _check_drops(
                f'{family.label()} n={n} q={q}',
                len(cell) - len(kept),
                len(cell),
                cfg.max_drop_share,
            )
            if not kept:
                continue

            stats = aggregate(
                np.vstack([o.estimates for o in kept]),
                truths,
                np.vstack([o.lower for o in kept]),
                np.vstack([o.upper for o in kept]),
            )
            for j, parameter in enumerate(names):
                estimation.append({
                    **key,
                    'parameter': parameter,
                    'bias': stats.bias[j],
                    'mse': stats.mse[j],
                    'cp': stats.cp[j],
                })

            for kind in ('GCS', 'RQ'):
                table = np.array([o.summaries[kind] for o in kept])
                for j, statistic in enumerate(SUMMARY_FIELDS):
                    residuals.append({
                        **key,
                        'kind': kind,
                        'statistic': statistic,
                        'value': float(np.mean(table[:, j])),
                    })

            if kept[0].selected:
                for criterion in CRITERIA:
                    hits = [o.selected[criterion] == cfg.family for o in kept]
                    criteria.append({
                        **key,
                        'criterion': criterion,
                        'success_rate': float(np.mean(hits)),
                    })

    return StudyReport(
        estimation=pd.DataFrame(estimation),
        residuals=pd.DataFrame(residuals),
        criteria=pd.DataFrame(criteria),
        drops=pd.DataFrame(drops),
    )


class Study2Job(NamedTuple):
    """Coordinates of a Study-2 replication."""

    n: int
    q: float
    r: int
    delta: float
    rep: int


@dataclasses.dataclass
class Study2Replication:
    """Test statistics of one Study-2 replication."""

    job: Study2Job
    statistics: dict[str, float] = dataclasses.field(default_factory=dict)
    reason: str = ''

    @property
    def dropped(self) -> bool:
        """Whether the replication failed."""
        return not self.statistics


def study2_replication(
    job: Study2Job,
    config: dict[str, Any],
) -> Study2Replication:
    """Run one Study-2 replication."""
    cfg = Study2Config(**config)
    family = cfg.kernel_family()
    rng = spawn_generator(
        cfg.seed, job.n, _key(job.q), job.r, _key(job.delta), job.rep,
    )
    design_rng = _design_generator(cfg, job.n, rng)
    X = study2_design(job.n, design_rng)
    W = np.ones((job.n, 1))
    beta = np.full(4, cfg.coefficient)
    beta[1 : job.r + 1] = job.delta
    log_phi = np.full(job.n, np.log(cfg.phi))
    outcome = Study2Replication(job=job)
    try:
        y = draw_response(family, job.q, X @ beta, log_phi, rng)
        model = RegressionModel(y=y, X=X, W=W, q=job.q, family=family)
        h = Hypothesis(indices=tuple(range(1, job.r + 1)))
        results = run_battery(model, h, fit(model))
    except QlsRegError as exc:
        outcome.reason = f'{type(exc).__name__}: {exc}'
        return outcome
    outcome.statistics = {res.kind: res.statistic for res in results}
    return outcome


def run_study2(cfg: Study2Config) -> StudyReport:
    """Size and power study over the (n, q, r, delta) grid.

    Raises
    ------
    ExcessiveNonConvergence
        If a cell drops more than ``max_drop_share`` of its replications.
    """
    family = cfg.kernel_family()
    jobs = [
        Study2Job(n=n, q=q, r=r, delta=delta, rep=rep)
        for n in cfg.n
        for q in cfg.q
        for r in cfg.r
        for delta in cfg.delta
        for rep in range(cfg.replications)
    ]
    worker = functools.partial(
        study2_replication,
        config=cfg.model_dump(exclude={'compute_config'}),
    )
    with Timer('study2', family.label()):
        outcomes = map_ordered(worker, jobs, cfg.compute_config, cfg.run_dir)

    cells: dict[tuple[int, float, int, float], list[Study2Replication]] = {}
    for outcome in outcomes:
        job = outcome.job
        cells.setdefault((job.n, job.q, job.r, job.delta), []).append(outcome)

    size, power, drops = [], [], []
    for (n, q, r, delta), cell in cells.items():
        kept = [o for o in cell if not o.dropped]
        key = {'family': family.label(), 'q': q, 'n': n, 'r': r}
        drops.append({**key, 'delta': delta,
                      'dropped': len(cell) - len(kept),
                      'replications': len(cell)})
        _check_drops(
            f'{family.label()} n={n} q={q} r={r} delta={delta}',
            len(cell) - len(kept),
            len(cell),
            cfg.max_drop_share,
        )
        if not kept:
            continue
        for statistic in STATISTICS:
            # A statistic is missing where its information was not PD
            values = np.array([
                o.statistics[statistic]
                for o in kept
                if statistic in o.statistics
            ])
            if len(values) < len(kept):
                logger.warning(
                    '%s n=%d q=%g r=%d delta=%g: %s unavailable in %d of %d',
                    family.label(),
                    n,
                    q,
                    r,
                    delta,
                    statistic,
                    len(kept) - len(values),
                    len(kept),
                )
            if not len(values):
                continue
            for alpha in cfg.alpha:
                rate = float(np.mean(values >= chi2.isf(alpha, r)))
                row = {**key, 'statistic': statistic, 'alpha': alpha}
                tally = {'rate': rate, 'used': len(values)}
                power.append({**row, 'delta': delta, **tally})
                if delta == 0:
                    size.append({**row, **tally})

    return StudyReport(
        size=pd.DataFrame(size),
        power=pd.DataFrame(power),
        drops=pd.DataFrame(drops),
    )
