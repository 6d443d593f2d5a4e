"""Walk-forward evaluation: train on the trailing 52 weeks, hold for a quarter.

Per window a fresh autoencoder is trained on the training span, every
entity's most recent ``seq_len`` weeks are embedded, the RBF kernel and
13-week momentum feed both allocators, and the resulting weights are held
fixed over the test quarter. Only training-span rows reach the weight
computation.
"""

from __future__ import annotations

import datetime as dt
import logging
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import allocation, manifold
from ._io import write_rows
from .data import ReturnsTable, to_date
from .exceptions import ConfigError, DataError, InvalidReturnError, QlstmRbfError
from .recurrent import MODES, QLSTMAutoencoder

logger = logging.getLogger(__name__)

WEEKS_PER_YEAR = 52
STRATEGIES = ("divmom", "graph", "benchmark")
DEFAULT_LAMBDA_GRID = (0.0, 0.15, 0.30, 0.45, 0.60, 0.75, 0.90, 1.0)
_QUARTER = re.compile(r"^(\d{4})Q([1-4])$")


# --------------------------------------------------------------------------
# configuration


@dataclass
class BacktestConfig:
    mode: str = "quantum"
    hidden_width: int = 16
    qubits: int = 4
    epochs: int = 600
    learning_rate: float = 0.01
    teacher_forcing_prob: float = 0.5
    entangler: str = "ring"
    encoding: str = "atan"
    seed: int = 0
    lam: float = 0.15
    k: int = 30
    gamma: float = 1.0
    graph_step_size: float = 0.05
    graph_tolerance: float = 1e-8
    graph_max_iters: int = 5000
    benchmark: Optional[str] = None
    seq_len: int = 13
    momentum_weeks: int = 13
    train_weeks: int = 52

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("seq_len", "momentum_weeks", "train_weeks"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise ConfigError(f"{name} must be an integer >= 2, got {value}")
        if self.seq_len > self.train_weeks or self.momentum_weeks > self.train_weeks:
            raise ConfigError("seq_len and momentum_weeks cannot exceed train_weeks")
        self.estimator().train_config()
        allocation.DivMomConfig(self.lam, self.k).validate()
        self.graph_config().validate()
        return self

    def estimator(self) -> QLSTMAutoencoder:
        return QLSTMAutoencoder(
            mode=self.mode,
            hidden_width=self.hidden_width,
            qubits=self.qubits,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            teacher_forcing_prob=self.teacher_forcing_prob,
            entangler=self.entangler,
            encoding=self.encoding,
            random_state=self.seed,
        )

    def graph_config(self):
        return allocation.GraphConfig(self.gamma, self.graph_max_iters, self.graph_step_size, self.graph_tolerance)

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class RollingWindow:
    label: str
    train_start: np.datetime64
    train_end: np.datetime64
    test_start: np.datetime64
    test_end: np.datetime64


def parse_quarter(label):
    m = _QUARTER.match(str(label).strip())
    if not m:
        raise ConfigError(f"malformed quarter label {label!r}; expected e.g. 2022Q2")
    return int(m.group(1)), int(m.group(2))


def quarter_bounds(year, quarter):
    start = dt.date(year, 3 * quarter - 2, 1)
    end = dt.date(year + (quarter == 4), 1 if quarter == 4 else 3 * quarter + 1, 1) - dt.timedelta(days=1)
    return to_date(start), to_date(end)


def make_rolling_windows(first, last, train_weeks=52) -> List[RollingWindow]:
    """One window per calendar quarter from ``first`` to ``last`` inclusive.

    Training covers the ``train_weeks`` weeks (``7 * train_weeks`` days)
    ending the day before the test quarter opens.
    """
    y0, q0 = parse_quarter(first)
    y1, q1 = parse_quarter(last)
    if (y1, q1) < (y0, q0):
        raise ConfigError(f"window range {first}..{last} runs backwards")
    windows = []
    y, q = y0, q0
    while (y, q) <= (y1, q1):
        start, end = quarter_bounds(y, q)
        windows.append(
            RollingWindow(
                label=f"{y}Q{q}",
                train_start=start - np.timedelta64(7 * train_weeks, "D"),
                train_end=start - np.timedelta64(1, "D"),
                test_start=start,
                test_end=end,
            )
        )
        y, q = (y + 1, 1) if q == 4 else (y, q + 1)
    return windows


# --------------------------------------------------------------------------
# per-window model state


@dataclass
class WindowModel:
    """Everything derived from a window's training span."""

    label: str
    entity_ids: List[str]
    momentum: allocation.MomentumSignal
    embeddings: Optional[manifold.EmbeddingSet] = None
    kernel: Optional[manifold.KernelMatrix] = None
    estimator: Optional[QLSTMAutoencoder] = None


def training_matrix(block, seq_len):
    """Cut a ``(T, N)`` block into non-overlapping ``seq_len`` chunks aligned
    to its last row; returns ``(n_chunks * N, seq_len)``, oldest chunk first."""
    n_chunks = block.shape[0] // seq_len
    if n_chunks == 0:
        raise DataError(f"training span has {block.shape[0]} weeks, fewer than seq_len={seq_len}")
    tail = block[block.shape[0] - n_chunks * seq_len:]
    return np.concatenate([tail[i * seq_len:(i + 1) * seq_len].T for i in range(n_chunks)])


def _universe(table: ReturnsTable, cfg: BacktestConfig):
    entities = [e for e in table.entities if e != cfg.benchmark]
    return table.select(entities) if len(entities) != len(table.entities) else table


def _context(label, fn, *args):
    try:
        return fn(*args)
    except QlstmRbfError as exc:
        if str(exc).startswith(f"window {label}"):
            raise
        raise type(exc)(f"window {label}: {exc}") from exc


def fit_window(window: RollingWindow, table: ReturnsTable, cfg: BacktestConfig) -> WindowModel:
    return _context(window.label, _fit_window, window, table, cfg)


def _fit_window(window, table, cfg):
    train = _universe(table, cfg).complete_between(window.train_start, window.train_end)
    if len(train.entities) == 0:
        raise DataError(f"no entity has complete data between {window.train_start} and {window.train_end}")
    if train.num_weeks < max(cfg.seq_len, cfg.momentum_weeks):
        raise DataError(
            f"training span {window.train_start}..{window.train_end} holds {train.num_weeks} weeks; "
            f"need at least {max(cfg.seq_len, cfg.momentum_weeks)}"
        )
    momentum = allocation.momentum_scores(train.returns, train.entities, cfg.momentum_weeks)
    state = WindowModel(window.label, train.entities, momentum)
    if len(train.entities) == 1:
        return state
    est = cfg.estimator().fit(training_matrix(train.returns, cfg.seq_len))
    recent = train.returns[-cfg.seq_len:].T
    state.estimator = est
    state.embeddings = manifold.EmbeddingSet(window.label, train.entities, est.transform(recent))
    state.kernel = manifold.rbf_kernel(state.embeddings)
    return state


def allocate(state: WindowModel, cfg: BacktestConfig, lam=None):
    """``(divmom, graph)`` weights; ``k`` is clamped to the universe size."""
    n = len(state.entity_ids)
    if n == 1:
        one = allocation.PortfolioWeights(state.entity_ids, [1.0], {"trivial": True})
        return one, allocation.PortfolioWeights(state.entity_ids, [1.0], {"trivial": True})
    k = min(cfg.k, n)
    if k < cfg.k:
        logger.info("window %s: k=%d clamped to universe size %d", state.label, cfg.k, n)
    lam = cfg.lam if lam is None else lam
    divmom = allocation.divmom_select(state.momentum, state.kernel, allocation.DivMomConfig(lam, k))
    graph = allocation.graph_allocate(state.momentum, state.kernel, cfg.graph_config())
    return divmom, graph


# --------------------------------------------------------------------------
# out-of-sample returns


@dataclass
class PeriodResult:
    label: str
    dates: np.ndarray
    returns: Dict[str, np.ndarray]
    weights: Dict[str, allocation.PortfolioWeights]


def _test_block(window, table, entity_ids):
    mask = table.span_mask(window.test_start, window.test_end)
    if not mask.any():
        raise DataError(f"no weeks between {window.test_start} and {window.test_end}")
    dates = table.dates[mask]
    block = table.select(entity_ids).returns[mask]
    missing = np.argwhere(np.isnan(block))
    if missing.size:
        cells = ", ".join(f"{entity_ids[j]}@{dates[i]}" for i, j in missing[:10])
        raise DataError(f"held entities lack test-span returns: {cells}")
    return dates, block


def benchmark_returns(window, table: ReturnsTable, cfg: BacktestConfig, universe_ids):
    """Configured ticker, or the equal-weight portfolio of the window universe."""
    if cfg.benchmark is not None:
        if cfg.benchmark not in table.entities:
            raise DataError(f"benchmark {cfg.benchmark!r} not in returns table")
        return _test_block(window, table, [cfg.benchmark])[1][:, 0]
    return _test_block(window, table, universe_ids)[1].mean(axis=1)


def evaluate_period(window, table, cfg, state: WindowModel, lam=None) -> PeriodResult:
    def run():
        divmom, graph = allocate(state, cfg, lam)
        dates, block = _test_block(window, table, state.entity_ids)
        returns = {
            "divmom": block @ divmom.weights,
            "graph": block @ graph.weights,
            "benchmark": benchmark_returns(window, table, cfg, state.entity_ids),
        }
        return PeriodResult(window.label, dates, returns, {"divmom": divmom, "graph": graph})

    return _context(window.label, run)


def run_period(window: RollingWindow, table: ReturnsTable, cfg: BacktestConfig) -> PeriodResult:
    return evaluate_period(window, table, cfg, fit_window(window, table, cfg))


# --------------------------------------------------------------------------
# equity and metrics


@dataclass
class EquityCurve:
    """Index level after each week; the implicit starting level is 1.0."""

    dates: np.ndarray
    values: np.ndarray

    @property
    def final(self):
        return float(self.values[-1]) if self.values.size else 1.0


def chain_equity(period_returns: Sequence, dates=None) -> EquityCurve:
    """Compound weekly returns; each period opens at the previous close."""
    flat = np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in period_returns]) if len(period_returns) else np.zeros(0)
    if np.any(flat <= -1.0) or not np.all(np.isfinite(flat)):
        raise InvalidReturnError("weekly returns must be finite and above -1")
    values = []
    level = 1.0
    for period in period_returns:
        path = level * np.cumprod(1.0 + np.atleast_1d(np.asarray(period, dtype=float)))
        values.append(path)
        if path.size:
            level = path[-1]
    values = np.concatenate(values) if values else np.zeros(0)
    if dates is None:
        dates = np.arange(values.size)
    return EquityCurve(np.asarray(dates), values)


@dataclass
class MetricsRow:
    cagr: float
    vol: float
    sharpe: float
    max_dd: float
    degenerate: bool = False


def max_drawdown(equity):
    """Worst peak-to-trough move, with the 1.0 starting level counted as a peak."""
    path = np.concatenate([[1.0], np.asarray(equity, dtype=float)])
    return float(min(0.0, np.min(path / np.maximum.accumulate(path) - 1.0)))


def compute_metrics(weekly_returns, benchmark_weekly_returns=None) -> MetricsRow:
    """Annualised statistics of the excess series ``r - b``.

    ``b`` defaults to zero. When the excess series is constant its
    volatility is exactly 0 and Sharpe is reported as 0 with
    ``degenerate=True``.
    """
    r = np.asarray(weekly_returns, dtype=float)
    b = np.zeros_like(r) if benchmark_weekly_returns is None else np.asarray(benchmark_weekly_returns, dtype=float)
    if r.ndim != 1 or r.shape != b.shape:
        raise DataError(f"return series must be aligned 1-D vectors, got {r.shape} and {b.shape}")
    if r.size < 2:
        raise DataError("metrics need at least 2 weeks")
    e = r - b
    if np.any(e <= -1.0):
        raise InvalidReturnError("excess return at or below -100%")
    T = e.size
    equity = np.cumprod(1.0 + e)
    cagr = float(equity[-1] ** (WEEKS_PER_YEAR / T) - 1.0)
    vol = 0.0 if np.ptp(e) == 0 else float(np.std(e, ddof=1) * np.sqrt(WEEKS_PER_YEAR))
    degenerate = vol == 0.0
    sharpe = 0.0 if degenerate else float(np.mean(e) * WEEKS_PER_YEAR / vol)
    return MetricsRow(cagr, vol, sharpe, max_drawdown(equity), degenerate)


# --------------------------------------------------------------------------
# full runs


@dataclass
class BacktestResult:
    periods: List[PeriodResult]
    equity: Dict[str, EquityCurve]
    metrics: Dict[str, List[MetricsRow]]

    @property
    def labels(self):
        return [p.label for p in self.periods]

    def mean_sharpe(self, strategy):
        return float(np.mean([m.sharpe for m in self.metrics[strategy]]))

    def final_value(self, strategy):
        return self.equity[strategy].final


def fit_windows(windows, table, cfg, cache=None) -> List[WindowModel]:
    """Train (or fetch from ``cache``, keyed by label) each window's model."""
    states = []
    for w in windows:
        if cache is not None and w.label in cache:
            states.append(cache[w.label])
            continue
        logger.info("window %s: training %s autoencoder", w.label, cfg.mode)
        state = fit_window(w, table, cfg)
        if cache is not None:
            cache[w.label] = state
        states.append(state)
    return states


def run_backtest(table: ReturnsTable, windows, cfg: BacktestConfig, cache=None, lam=None) -> BacktestResult:
    cfg.validate()
    if not windows:
        raise ConfigError("no windows to run")
    states = fit_windows(windows, table, cfg, cache)
    periods = [evaluate_period(w, table, cfg, s, lam) for w, s in zip(windows, states)]
    return summarize(periods)


def summarize(periods: List[PeriodResult]) -> BacktestResult:
    dates = np.concatenate([p.dates for p in periods])
    equity = {s: chain_equity([p.returns[s] for p in periods], dates) for s in STRATEGIES}
    metrics = {}
    for s in STRATEGIES:
        # the benchmark row is measured against a zero baseline; against itself it is identically 0
        metrics[s] = [
            compute_metrics(p.returns[s], None if s == "benchmark" else p.returns["benchmark"]) for p in periods
        ]
    return BacktestResult(periods, equity, metrics)


@dataclass
class GridSearchRow:
    lam: float
    mean_sharpe: float
    gap_to_graph: float
    final_net_value: float


@dataclass
class GridSearchResult:
    rows: List[GridSearchRow]
    graph_mean_sharpe: float
    graph_final_net_value: float


def grid_search_lambda(lambda_grid, table, windows, cfg: BacktestConfig, cache=None) -> GridSearchResult:
    """DivMom backtest per penalty; models are trained once per window and reused."""
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ConfigError("lambda grid is empty")
    for v in grid:
        allocation.DivMomConfig(v, cfg.k).validate()
    cache = {} if cache is None else cache
    rows, graph = [], None
    for v in grid:
        result = run_backtest(table, windows, cfg, cache, lam=v)
        graph = graph or result
        dm = result.mean_sharpe("divmom")
        rows.append(GridSearchRow(v, dm, graph.mean_sharpe("graph") - dm, result.final_value("divmom")))
    return GridSearchResult(rows, graph.mean_sharpe("graph"), graph.final_value("graph"))


# --------------------------------------------------------------------------
# exports

METRICS_HEADER = ["period", "strategy", "cagr", "vol", "sharpe", "max_dd", "degenerate", "net_value"]


def metrics_rows(result: BacktestResult):
    """Per-quarter rows, then one ``mean`` row per strategy.

    ``net_value`` is the chained raw-return equity level at the end of the
    quarter; on the ``mean`` row it is the final compounded level.
    """
    rows = []
    ends = np.cumsum([p.dates.size for p in result.periods]) - 1
    for i, p in enumerate(result.periods):
        for s in STRATEGIES:
            m = result.metrics[s][i]
            level = float(result.equity[s].values[ends[i]])
            rows.append([p.label, s, m.cagr, m.vol, m.sharpe, m.max_dd, int(m.degenerate), level])
    for s in STRATEGIES:
        ms = result.metrics[s]
        rows.append(
            [
                "mean",
                s,
                float(np.mean([m.cagr for m in ms])),
                float(np.mean([m.vol for m in ms])),
                float(np.mean([m.sharpe for m in ms])),
                float(np.mean([m.max_dd for m in ms])),
                sum(m.degenerate for m in ms),
                result.final_value(s),
            ]
        )
    return rows


def write_metrics_csv(path, result: BacktestResult):
    write_rows(path, METRICS_HEADER, metrics_rows(result))


def write_equity_csv(path, result: BacktestResult):
    eq = result.equity
    rows = [
        [str(d)] + [float(eq[s].values[i]) for s in STRATEGIES] for i, d in enumerate(eq["divmom"].dates)
    ]
    write_rows(path, ["date"] + list(STRATEGIES), rows)


def write_weights_csvs(directory, result: BacktestResult):
    paths = {}
    for s in ("divmom", "graph"):
        paths[s] = Path(directory) / f"weights_{s}.csv"
        allocation.write_weights_csv(paths[s], [(p.label, p.weights[s]) for p in result.periods])
    return paths


GRID_HEADER = ["lambda", "mean_sharpe", "gap_to_graph", "final_net_value"]


def grid_rows(result: GridSearchResult):
    rows = [[f"{r.lam:.2f}", r.mean_sharpe, r.gap_to_graph, r.final_net_value] for r in result.rows]
    rows.append(["RBF-Graph", result.graph_mean_sharpe, "", result.graph_final_net_value])
    return rows


def write_grid_csv(path, result: GridSearchResult):
    write_rows(path, GRID_HEADER, grid_rows(result))
