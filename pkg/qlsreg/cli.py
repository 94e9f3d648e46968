"""CLI for qlsreg."""

from __future__ import annotations

import contextlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any
from typing import Iterator
from typing import Literal
from typing import Optional

import numpy as np
import pandas as pd
import typer
from pydantic import ValidationError
from pydantic import field_validator

from qlsreg.exceptions import ConfigError
from qlsreg.exceptions import ParseError
from qlsreg.exceptions import QlsRegError
from qlsreg.settings import configure_logging
from qlsreg.settings import get_settings
from qlsreg.utils import BaseConfig
from qlsreg.utils import parse_floats

logger = logging.getLogger(__name__)

app = typer.Typer(add_completion=False, pretty_exceptions_show_locals=False)

FAILURE_COLUMNS = ('q', 'family', 'error_type', 'message')


class OutputFormat(str, Enum):
    """Output formats of the commands."""

    csv = 'csv'
    json = 'json'


class RunConfig(BaseConfig):
    """Selections shared by the dataset commands."""

    name: Literal['run'] = 'run'  # type: ignore[assignment]
    # Kernel family tag
    family: str = 'log-no'
    # Fixed extra parameters; profiling over the grid when omitted
    theta: Optional[tuple[float, ...]] = None  # noqa: UP007
    # Candidate extra parameters, the family default grid when omitted
    theta_grid: Optional[tuple[tuple[float, ...], ...]] = None  # noqa: UP007
    # Quantile levels
    q: list[float] = [0.5]
    # Response column
    response: str = 'y'
    # Covariates of log Q
    quantile_covars: list[str] = []
    # Covariates of log phi
    dispersion_covars: list[str] = []
    # Output format
    format: OutputFormat = OutputFormat.csv
    seed: int = 0
    # Envelope simulations and band
    sims: int = 100
    band: float = 0.95

    @field_validator('q')
    @classmethod
    def valid_levels(cls, value: list[float]) -> list[float]:
        """Require quantile levels in (0, 1)."""
        if not value or not all(0 < q < 1 for q in value):
            raise ValueError(f'q values must lie in (0, 1), got {value}')
        return value

    @field_validator('sims')
    @classmethod
    def enough_sims(cls, value: int) -> int:
        """Envelopes need at least 19 simulations."""
        if value < 19:  # noqa: PLR2004
            raise ValueError(f'--sims must be at least 19, got {value}')
        return value

    @field_validator('band')
    @classmethod
    def valid_band(cls, value: float) -> float:
        """Bands lie in [0, 1)."""
        if not 0 <= value < 1:
            raise ValueError(f'--band must lie in [0, 1), got {value}')
        return value


def _names(text: str) -> list[str]:
    return [item.strip() for item in text.split(',') if item.strip()]


def _levels(q: float, q_grid: str) -> list[float]:
    return list(parse_floats(q_grid)) if q_grid.strip() else [q]


def _counts(text: str) -> list[int]:
    """Parse comma-separated positive integers.

    Raises
    ------
    typer.BadParameter
        If an item is not a positive integer, e.g. ``200.5``.
    """
    try:
        values = [int(item) for item in _names(text)]
    except ValueError as exc:
        raise typer.BadParameter(f'expected integers, got {text!r}') from exc
    if not values or min(values) < 1:
        raise typer.BadParameter(f'expected positive integers, got {text!r}')
    return values


def _check_counts(text: str) -> str:
    _counts(text)
    return text


def parse_grid(text: str, n_extra: int) -> tuple[tuple[float, ...], ...]:
    """Parse a grid of extra parameters.

    One-parameter families take ``1,2,3``; two-parameter families take
    semicolon-separated pairs such as ``0.1,0.2;0.3,0.4``.

    Raises
    ------
    ParseError
        If a point has the wrong number of values.
    """
    if ';' in text:
        points = tuple(parse_floats(part) for part in text.split(';'))
    elif n_extra == 1:
        points = tuple((value,) for value in parse_floats(text))
    else:
        points = (parse_floats(text),)
    points = tuple(point for point in points if point)
    if not points or any(len(point) != n_extra for point in points):
        raise ParseError(
            f'grid {text!r} needs {n_extra} value(s) per point',
        )
    return points


@contextlib.contextmanager
def _reporting_errors() -> Iterator[None]:
    """Turn domain and validation errors into exit status 1."""
    try:
        yield
    except (QlsRegError, ValidationError) as exc:
        if isinstance(exc, ValidationError):
            exc = ConfigError(str(exc))
        logger.debug('Command failed', exc_info=True)
        typer.echo(f'error [{exc.error_type}]: {exc}', err=True)
        raise typer.Exit(code=1) from exc


def _records(frame: pd.DataFrame) -> list[dict[str, Any]]:
    return frame.astype(object).where(frame.notna(), None).to_dict('records')


def _emit(
    tables: dict[str, pd.DataFrame],
    output_format: OutputFormat,
    out: Path | None,
    primary: str,
) -> None:
    """Write tables as one JSON document or as CSV files.

    CSV output puts the primary table at ``out`` and every other table
    next to it as ``<stem>_<name>.csv``; without ``out`` only the primary
    table is printed.
    """
    from qlsreg.dataset import write_frame

    if output_format is OutputFormat.json:
        text = json.dumps(
            {name: _records(table) for name, table in tables.items()},
            indent=2,
        )
        if out is None:
            typer.echo(text)
        else:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text + '\n')
        return

    if out is None:
        typer.echo(write_frame(tables[primary], None), nl=False)
        return
    for name, table in tables.items():
        path = (
            out
            if name == primary
            else out.with_name(f'{out.stem}_{name}{out.suffix or ".csv"}')
        )
        write_frame(table, path)


def _extra_label(extra: tuple[float, ...]) -> str:
    return ';'.join(repr(float(x)) for x in extra)


def _fit_level(  # noqa: PLR0913
    dataset: Any,
    config: RunConfig,
    tag: str,
    q: float,
    with_tests: bool,
    tables: dict[str, list[dict[str, Any]]],
) -> None:
    """Fit one family at one quantile level and append its rows."""
    from qlsreg.diagnostics import gcs_residuals
    from qlsreg.diagnostics import rq_residuals
    from qlsreg.inference import coefficient_hypotheses
    from qlsreg.inference import confidence_intervals
    from qlsreg.inference import information_criteria
    from qlsreg.inference import run_battery
    from qlsreg.kernels import KernelFamily
    from qlsreg.kernels import parse_family
    from qlsreg.regress import fit
    from qlsreg.regress import fitted_quantiles
    from qlsreg.regress import profile_extra_parameter

    terms = dataset.terms()
    if tag == config.family and config.theta is not None:
        model = dataset.model(q, KernelFamily(name=tag, extra=config.theta))
        result = fit(model)
    else:
        grid = config.theta_grid if tag == config.family else None
        model = dataset.model(q, parse_family(tag), grid)
        result = profile_extra_parameter(model)
    extra = result.vartheta_hat
    key = {'q': q, 'family': tag, 'theta': _extra_label(extra)}
    if not result.converged:
        logger.warning('%s at q=%g did not converge', tag, q)

    fitted_model = model.with_extra(extra)
    quantiles, _ = fitted_quantiles(fitted_model, result)
    values = information_criteria(result, fitted_model.n)
    reports = (
        gcs_residuals(fitted_model, result),
        rq_residuals(fitted_model, result),
    )

    for point, value in result.profile:
        tables['profile'].append(
            {**key, 'theta': _extra_label(point), 'loglik': value},
        )
    try:
        intervals = confidence_intervals(result, 0.95)
        se = result.std_errors()
    except QlsRegError:
        intervals = np.full((result.n_params, 2), np.nan)
        se = np.full(result.n_params, np.nan)
    for j, name in enumerate(result.names):
        tables['fits'].append({
            **key,
            'parameter': name,
            'term': terms[j],
            'estimate': result.theta[j],
            'std_error': se[j],
            'ci_lower': intervals[j, 0],
            'ci_upper': intervals[j, 1],
            'converged': result.converged,
        })
    tables['criteria'].append({
        **key,
        'loglik': result.loglik,
        'aic': values.aic,
        'bic': values.bic,
        'aicc': values.aicc,
        'rmse': float(np.sqrt(np.mean((fitted_model.y - quantiles) ** 2))),
    })
    for report in reports:
        tables['residuals'].append({
            **key,
            'kind': report.kind,
            **report.summary._asdict(),
        })

    if not with_tests:
        return
    for h in coefficient_hypotheses(result.names):
        j = h.indices[0]
        try:
            battery = run_battery(fitted_model, h, result)
        except QlsRegError as exc:
            logger.warning(
                'Tests of %s at q=%g skipped: %s',
                result.names[j],
                q,
                exc,
            )
            continue
        for outcome in battery:
            tables['tests'].append({
                **key,
                'parameter': result.names[j],
                'term': terms[j],
                **outcome.to_record(),
            })


def _fit_tables(
    dataset: Any,
    config: RunConfig,
    compare: list[str],
) -> dict[str, pd.DataFrame]:
    """Fit every family at every level; a failed level is recorded.

    Raises
    ------
    QlsRegError
        The first failure when no level could be fitted.
    """
    names = ('fits', 'tests', 'criteria', 'residuals', 'profile')
    rows: dict[str, list[dict[str, Any]]] = {name: [] for name in names}
    failures: list[dict[str, Any]] = []
    first_error: QlsRegError | None = None

    for tag in compare or [config.family]:
        for q in config.q:
            try:
                _fit_level(dataset, config, tag, q, not compare, rows)
            except QlsRegError as exc:
                logger.warning('%s at q=%g failed: %s', tag, q, exc)
                failures.append({
                    'q': q,
                    'family': tag,
                    'error_type': exc.error_type,
                    'message': str(exc),
                })
                first_error = first_error or exc
    if first_error is not None and not rows['criteria']:
        raise first_error

    tables = {name: pd.DataFrame(rows[name]) for name in names}
    tables['failures'] = pd.DataFrame(failures, columns=FAILURE_COLUMNS)
    if compare:
        tables['compare'] = compare_families(tables['criteria'])
    return tables


def compare_families(criteria: pd.DataFrame) -> pd.DataFrame:
    """Mean criteria and RMSE over the quantile grid, ranked per column."""
    summary = (
        criteria.groupby('family', sort=False)[['aic', 'bic', 'aicc', 'rmse']]
        .mean()
        .add_prefix('mean_')
        .reset_index()
    )
    for column in ('aic', 'bic', 'aicc', 'rmse'):
        summary[f'rank_{column}'] = (
            summary[f'mean_{column}'].rank(method='min').astype(int)
        )
    return summary


@app.callback()
def _configure(
    log_level: Optional[str] = typer.Option(  # noqa: UP007
        None,
        '--log-level',
        help='Log level, defaults to QLSREG_LOG_LEVEL or INFO.',
    ),
) -> None:
    """Quantile log-symmetric regression models."""
    configure_logging(log_level)


@app.command()
def fit(  # noqa: PLR0913
    data: Path = typer.Option(  # noqa: B008
        ...,
        '--data',
        '-d',
        help='CSV file with a header row.',
    ),
    response: str = typer.Option(
        'y',
        '--response',
        '-y',
        help='Name of the positive response column.',
    ),
    quantile_covars: str = typer.Option(
        '',
        '--quantile-covars',
        help='Comma-separated covariates of log Q (intercept implied).',
    ),
    dispersion_covars: str = typer.Option(
        '',
        '--dispersion-covars',
        help='Comma-separated covariates of log phi (intercept implied).',
    ),
    family: str = typer.Option(
        'log-no',
        '--family',
        '-f',
        help='Kernel family [log-no, log-t, log-pe, log-hp, log-sl, '
        'log-cn, ebs, ebs-t].',
    ),
    theta: str = typer.Option(
        '',
        '--theta',
        help='Fixed extra parameter(s), comma-separated.',
    ),
    theta_grid: str = typer.Option(
        '',
        '--theta-grid',
        help='Extra-parameter grid to profile over, e.g. 1,2,3 or '
        '0.1,0.2;0.3,0.4 for two-parameter families.',
    ),
    q: float = typer.Option(0.5, '--q', help='Quantile level.'),
    q_grid: str = typer.Option(
        '',
        '--q-grid',
        help='Comma-separated quantile levels, overrides --q.',
    ),
    compare: str = typer.Option(
        '',
        '--compare',
        help='Comma-separated families to compare (or "all").',
    ),
    seed: int = typer.Option(0, '--seed', help='Random seed.'),
    output_format: OutputFormat = typer.Option(
        OutputFormat.csv,
        '--format',
        help='Output format.',
    ),
    out: Optional[Path] = typer.Option(  # noqa: B008, UP007
        None,
        '--out',
        '-o',
        help='Output file, stdout when omitted.',
    ),
) -> None:
    """Fit quantile regressions, tests, criteria and residual summaries."""
    from qlsreg.dataset import read_dataset
    from qlsreg.kernels import STRATEGIES
    from qlsreg.kernels import parse_family

    with _reporting_errors():
        chosen = parse_family(family, theta)
        n_extra = STRATEGIES[chosen.name].n_extra
        config = RunConfig(
            family=chosen.name,
            theta=chosen.extra if theta.strip() else None,
            theta_grid=(
                parse_grid(theta_grid, n_extra) if theta_grid.strip() else None
            ),
            q=_levels(q, q_grid),
            response=response,
            quantile_covars=_names(quantile_covars),
            dispersion_covars=_names(dispersion_covars),
            format=output_format,
            seed=seed,
        )
        families = (
            list(STRATEGIES)
            if compare.strip().lower() == 'all'
            else [parse_family(tag).name for tag in _names(compare)]
        )
        dataset = read_dataset(
            data,
            config.response,
            config.quantile_covars,
            config.dispersion_covars,
        )
        tables = _fit_tables(dataset, config, families)
        primary = 'compare' if families else 'fits'
        _emit(tables, config.format, out, primary)


@app.command()
def envelope(  # noqa: PLR0913
    data: Path = typer.Option(  # noqa: B008
        ...,
        '--data',
        '-d',
        help='CSV file with a header row.',
    ),
    response: str = typer.Option(
        'y',
        '--response',
        '-y',
        help='Name of the positive response column.',
    ),
    quantile_covars: str = typer.Option(
        '',
        '--quantile-covars',
        help='Comma-separated covariates of log Q.',
    ),
    dispersion_covars: str = typer.Option(
        '',
        '--dispersion-covars',
        help='Comma-separated covariates of log phi.',
    ),
    family: str = typer.Option('log-no', '--family', '-f', help='Family.'),
    theta: str = typer.Option('', '--theta', help='Fixed extra parameters.'),
    theta_grid: str = typer.Option(
        '',
        '--theta-grid',
        help='Extra-parameter grid to profile over.',
    ),
    q: float = typer.Option(0.5, '--q', help='Quantile level.'),
    q_grid: str = typer.Option('', '--q-grid', help='Quantile levels.'),
    sims: int = typer.Option(100, '--sims', help='Simulated datasets.'),
    band: float = typer.Option(0.95, '--band', help='Pointwise band level.'),
    seed: int = typer.Option(0, '--seed', help='Random seed.'),
    output_format: OutputFormat = typer.Option(
        OutputFormat.csv,
        '--format',
        help='Output format.',
    ),
    out: Optional[Path] = typer.Option(  # noqa: B008, UP007
        None,
        '--out',
        '-o',
        help='Output file, stdout when omitted.',
    ),
) -> None:
    """Emit simulated QQ envelopes of GCS and RQ residuals."""
    from qlsreg.dataset import read_dataset
    from qlsreg.diagnostics import qq_envelope
    from qlsreg.kernels import STRATEGIES
    from qlsreg.kernels import KernelFamily
    from qlsreg.kernels import parse_family
    from qlsreg.regress import fit as fit_model
    from qlsreg.regress import profile_extra_parameter

    with _reporting_errors():
        chosen = parse_family(family, theta)
        n_extra = STRATEGIES[chosen.name].n_extra
        config = RunConfig(
            family=chosen.name,
            theta=chosen.extra if theta.strip() else None,
            theta_grid=(
                parse_grid(theta_grid, n_extra) if theta_grid.strip() else None
            ),
            q=_levels(q, q_grid),
            response=response,
            quantile_covars=_names(quantile_covars),
            dispersion_covars=_names(dispersion_covars),
            format=output_format,
            seed=seed,
            sims=sims,
            band=band,
        )
        dataset = read_dataset(
            data,
            config.response,
            config.quantile_covars,
            config.dispersion_covars,
        )
        rows = []
        for level in config.q:
            if config.theta is not None:
                kernel_family = KernelFamily(
                    name=config.family,
                    extra=config.theta,
                )
                model = dataset.model(level, kernel_family)
                result = fit_model(model)
            else:
                model = dataset.model(level, chosen, config.theta_grid)
                result = profile_extra_parameter(model)
            result.require_converged()
            for kind in ('GCS', 'RQ'):
                data_env = qq_envelope(
                    model.with_extra(result.vartheta_hat),
                    result,
                    kind,
                    sims=config.sims,
                    band=config.band,
                    seed=config.seed,
                )
                for index in range(model.n):
                    rows.append({
                        'q': level,
                        'kind': kind,
                        'index': index + 1,
                        'residual': data_env.residuals[index],
                        'theoretical': data_env.theoretical[index],
                        'lower': data_env.lower[index],
                        'upper': data_env.upper[index],
                    })
        _emit({'envelope': pd.DataFrame(rows)}, config.format, out, 'envelope')


@app.command('sim-estimation')
def sim_estimation(  # noqa: PLR0913
    family: str = typer.Option('log-no', '--family', '-f', help='Family.'),
    theta: str = typer.Option(
        '',
        '--theta',
        help='Extra parameters, the family default when omitted.',
    ),
    q: float = typer.Option(0.5, '--q', help='Quantile level.'),
    q_grid: str = typer.Option('', '--q-grid', help='Quantile levels.'),
    n: str = typer.Option(
        '200',
        '--n',
        callback=_check_counts,
        help='Comma-separated sizes.',
    ),
    reps: int = typer.Option(1000, '--reps', help='Replications per cell.'),
    seed: int = typer.Option(0, '--seed', help='Random seed.'),
    candidates: str = typer.Option(
        'all',
        '--candidates',
        help='Families competing in the criteria step, "all" or "none".',
    ),
    fixed_design: bool = typer.Option(
        False,
        '--fixed-design',
        help='Draw covariates once per sample size.',
    ),
    workers: Optional[int] = typer.Option(  # noqa: UP007
        None,
        '--workers',
        help='Worker threads, defaults to QLSREG_NUM_WORKERS.',
    ),
    config_path: Optional[Path] = typer.Option(  # noqa: B008, UP007
        None,
        '--config',
        help='YAML study configuration, overrides the other flags.',
    ),
    output_format: OutputFormat = typer.Option(
        OutputFormat.csv,
        '--format',
        help='Output format.',
    ),
    out: Path = typer.Option(  # noqa: B008
        Path('study1'),
        '--out',
        '-o',
        help='Output directory (csv) or file (json).',
    ),
) -> None:
    """Estimation study: bias, MSE, coverage, residuals and criteria."""
    from qlsreg.kernels import parse_family
    from qlsreg.montecarlo import Study1Config
    from qlsreg.montecarlo import run_study1
    from qlsreg.parsl import compute_config_for

    with _reporting_errors():
        if config_path is not None:
            cfg = Study1Config.from_yaml(config_path)
        else:
            chosen = parse_family(family, theta)
            choice = candidates.strip().lower()
            cfg = Study1Config(
                family=chosen.name,
                extra=chosen.extra,
                q=_levels(q, q_grid),
                n=_counts(n),
                replications=reps,
                seed=seed,
                redraw_covariates=not fixed_design,
                candidates=(
                    None
                    if choice == 'all'
                    else []
                    if choice == 'none'
                    else [parse_family(tag).name for tag in _names(choice)]
                ),
                compute_config=compute_config_for(
                    workers or get_settings().num_workers,
                ),
                run_dir=out.parent / 'parsl',
            )
        report = run_study1(cfg)
        _write_report(report, output_format, out)


@app.command('sim-tests')
def sim_tests(  # noqa: PLR0913
    family: str = typer.Option('log-no', '--family', '-f', help='Family.'),
    theta: str = typer.Option(
        '',
        '--theta',
        help='Extra parameters, the family default when omitted.',
    ),
    q: float = typer.Option(0.5, '--q', help='Quantile level.'),
    q_grid: str = typer.Option('', '--q-grid', help='Quantile levels.'),
    n: str = typer.Option(
        '200',
        '--n',
        callback=_check_counts,
        help='Comma-separated sizes.',
    ),
    reps: int = typer.Option(1000, '--reps', help='Replications per cell.'),
    r: str = typer.Option(
        '1,3',
        '--r',
        callback=_check_counts,
        help='Numbers of tested slopes.',
    ),
    alpha: str = typer.Option(
        '0.01,0.05,0.1',
        '--alpha',
        help='Nominal levels.',
    ),
    delta: str = typer.Option(
        '0,1,2,3,4',
        '--delta',
        help='Values of the tested slopes, 0 gives the size.',
    ),
    phi: float = typer.Option(3.0, '--phi', help='Constant dispersion.'),
    seed: int = typer.Option(0, '--seed', help='Random seed.'),
    fixed_design: bool = typer.Option(
        False,
        '--fixed-design',
        help='Draw covariates once per sample size.',
    ),
    workers: Optional[int] = typer.Option(  # noqa: UP007
        None,
        '--workers',
        help='Worker threads, defaults to QLSREG_NUM_WORKERS.',
    ),
    config_path: Optional[Path] = typer.Option(  # noqa: B008, UP007
        None,
        '--config',
        help='YAML study configuration, overrides the other flags.',
    ),
    output_format: OutputFormat = typer.Option(
        OutputFormat.csv,
        '--format',
        help='Output format.',
    ),
    out: Path = typer.Option(  # noqa: B008
        Path('study2'),
        '--out',
        '-o',
        help='Output directory (csv) or file (json).',
    ),
) -> None:
    """Test study: size and power of the four statistics."""
    from qlsreg.kernels import parse_family
    from qlsreg.montecarlo import Study2Config
    from qlsreg.montecarlo import run_study2
    from qlsreg.parsl import compute_config_for

    with _reporting_errors():
        if config_path is not None:
            cfg = Study2Config.from_yaml(config_path)
        else:
            chosen = parse_family(family, theta)
            cfg = Study2Config(
                family=chosen.name,
                extra=chosen.extra,
                q=_levels(q, q_grid),
                n=_counts(n),
                replications=reps,
                r=_counts(r),
                alpha=list(parse_floats(alpha)),
                delta=list(parse_floats(delta)),
                phi=phi,
                seed=seed,
                redraw_covariates=not fixed_design,
                compute_config=compute_config_for(
                    workers or get_settings().num_workers,
                ),
                run_dir=out.parent / 'parsl',
            )
        report = run_study2(cfg)
        _write_report(report, output_format, out)


def _write_report(
    report: Any,
    output_format: OutputFormat,
    out: Path,
) -> None:
    if output_format is OutputFormat.json:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=2) + '\n')
    else:
        for path in report.write_csv(out):
            logger.info('Wrote %s', path)


@app.command()
def simulate(
    family: str = typer.Option('log-no', '--family', '-f', help='Family.'),
    theta: str = typer.Option(
        '',
        '--theta',
        help='Extra parameters, the family default when omitted.',
    ),
    q: float = typer.Option(0.5, '--q', help='Quantile level.'),
    n: int = typer.Option(200, '--n', help='Number of rows.'),
    seed: int = typer.Option(0, '--seed', help='Random seed.'),
    out: Optional[Path] = typer.Option(  # noqa: B008, UP007
        None,
        '--out',
        '-o',
        help='Output CSV, stdout when omitted.',
    ),
) -> None:
    """Write a dataset drawn from the estimation-study design."""
    from qlsreg.dataset import simulate_dataset
    from qlsreg.dataset import write_frame
    from qlsreg.exceptions import QuantileOutOfRange
    from qlsreg.kernels import parse_family

    with _reporting_errors():
        if not 0 < q < 1:
            raise QuantileOutOfRange(f'--q must lie in (0, 1), got {q}')
        if n < 10:  # noqa: PLR2004
            raise ConfigError(f'--n must be at least 10, got {n}')
        frame = simulate_dataset(parse_family(family, theta), q, n, seed=seed)
        text = write_frame(frame, out)
        if out is None:
            typer.echo(text, nl=False)


def main() -> None:
    """Entry point for CLI."""
    app()


if __name__ == '__main__':
    main()
