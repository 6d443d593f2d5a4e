"""Weekly return panels: CSV ingestion, sequence slicing, synthetic universes."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

from ._io import read_rows, write_rows
from .exceptions import ConfigError, DataError, InvalidReturnError
from .recurrent import ReturnSequence

logger = logging.getLogger(__name__)

MIN_SPACING_DAYS = 6
MAX_SPACING_DAYS = 8

SectorMap = Dict[str, str]


def to_date(value) -> np.datetime64:
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]")
    if isinstance(value, (dt.date, dt.datetime)):
        return np.datetime64(value.isoformat()[:10], "D")
    try:
        return np.datetime64(str(value).strip(), "D")
    except ValueError as exc:
        raise DataError(f"not an ISO-8601 date: {value!r}") from exc


@dataclass
class ReturnsTable:
    """Wide ``(weeks, entities)`` panel of simple weekly returns.

    Cells may be NaN only in a raw table loaded with
    ``drop_incomplete=False``; :meth:`complete_between` is the per-window
    cleaning step.
    """

    dates: np.ndarray
    entities: List[str]
    returns: np.ndarray

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.entities = [str(e) for e in self.entities]
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.shape != (self.dates.size, len(self.entities)):
            raise DataError(
                f"returns shape {self.returns.shape} does not match "
                f"{self.dates.size} dates x {len(self.entities)} entities"
            )
        if len(set(self.entities)) != len(self.entities):
            raise DataError("duplicate entity ids")
        if self.dates.size > 1:
            gaps = np.diff(self.dates).astype(int)
            if np.any(gaps <= 0):
                raise DataError("dates must be strictly increasing")
            bad = np.nonzero((gaps < MIN_SPACING_DAYS) | (gaps > MAX_SPACING_DAYS))[0]
            if bad.size:
                i = bad[0]
                raise DataError(
                    f"non-weekly spacing of {gaps[i]} days between {self.dates[i]} and {self.dates[i + 1]}"
                )
        if np.any(self.returns[~np.isnan(self.returns)] <= -1.0):
            raise InvalidReturnError("returns must exceed -1")
        if np.any(np.isinf(self.returns)):
            raise DataError("returns must be finite")

    @property
    def num_weeks(self):
        return self.dates.size

    def span_mask(self, start, end):
        """Rows with ``start <= date <= end``; either bound may be None."""
        mask = np.ones(self.dates.size, dtype=bool)
        if start is not None:
            mask &= self.dates >= to_date(start)
        if end is not None:
            mask &= self.dates <= to_date(end)
        return mask

    def complete_between(self, start=None, end=None) -> "ReturnsTable":
        """Sub-table over the span, dropping entities with any missing week there."""
        mask = self.span_mask(start, end)
        block = self.returns[mask]
        keep = ~np.any(np.isnan(block), axis=0)
        dropped = [e for e, k in zip(self.entities, keep) if not k]
        if dropped:
            logger.warning("dropping %d entities with missing weeks: %s", len(dropped), ", ".join(dropped))
        return ReturnsTable(self.dates[mask], [e for e, k in zip(self.entities, keep) if k], block[:, keep])

    def select(self, entities) -> "ReturnsTable":
        idx = [self.entities.index(e) for e in entities]
        return ReturnsTable(self.dates, list(entities), self.returns[:, idx])

    def column(self, entity) -> np.ndarray:
        try:
            return self.returns[:, self.entities.index(entity)]
        except ValueError:
            raise DataError(f"entity {entity!r} not in table") from None


def load_returns_csv(path, start=None, end=None, drop_incomplete=True) -> ReturnsTable:
    """Read a long ``date,ticker,return`` file into a wide table.

    With ``drop_incomplete`` (the default) entities missing any week in
    ``[start, end]`` are dropped with a logged warning. Values are never
    imputed.
    """
    path = Path(path)
    cells = {}
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "ticker", "return"]:
            raise DataError(f"{path}: header must be 'date,ticker,return', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                date = to_date(row[0])
                value = float(row[2])
            except (DataError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if not np.isfinite(value):
                raise DataError(f"{path}:{lineno}: non-finite return {row[2]!r}")
            if value <= -1.0:
                raise InvalidReturnError(f"{path}:{lineno}: return {row[2]} is at or below -100%")
            key = (date, row[1].strip())
            if key in cells:
                raise DataError(f"{path}:{lineno}: duplicate row for {key[1]} on {key[0]}")
            cells[key] = value

    dates = np.array(sorted({d for d, _ in cells}), dtype="datetime64[D]")
    entities = sorted({t for _, t in cells})
    index = {d: i for i, d in enumerate(dates)}
    col = {t: j for j, t in enumerate(entities)}
    returns = np.full((dates.size, len(entities)), np.nan)
    for (d, t), v in cells.items():
        returns[index[d], col[t]] = v
    table = ReturnsTable(dates, entities, returns)
    if drop_incomplete:
        table = table.complete_between(start, end)
    elif start is not None or end is not None:
        mask = table.span_mask(start, end)
        table = ReturnsTable(table.dates[mask], table.entities, table.returns[mask])
    return table


def write_returns_csv(path, table: ReturnsTable):
    rows = []
    for i, d in enumerate(table.dates):
        for j, t in enumerate(table.entities):
            v = table.returns[i, j]
            if not np.isnan(v):
                rows.append((str(d), t, float(v)))
    write_rows(path, ["date", "ticker", "return"], rows)


def load_sectors_csv(path) -> SectorMap:
    header, rows = read_rows(path)
    if [h.strip() for h in header] != ["ticker", "sector"]:
        raise DataError(f"{path}: header must be 'ticker,sector', got {header}")
    return {r[0].strip(): r[1].strip() for r in rows if r}


def write_sectors_csv(path, sectors: SectorMap):
    write_rows(path, ["ticker", "sector"], sorted(sectors.items()))


def build_sequences(table: ReturnsTable, start, end) -> List[ReturnSequence]:
    """One sequence per entity complete over ``[start, end]``."""
    sub = table.complete_between(start, end)
    if sub.num_weeks == 0:
        raise DataError(f"no weeks between {start} and {end}")
    if sub.num_weeks < 2:
        raise DataError(f"span {start}..{end} holds a single week; sequences need at least 2")
    return [ReturnSequence(e, sub.returns[:, j]) for j, e in enumerate(sub.entities)]


# --------------------------------------------------------------------------
# synthetic universe


@dataclass
class SyntheticConfig:
    """Sector-factor generator. Defaults start on 2021-04-02 (a Friday) so
    that 65 weeks cover the 52-week training span and test quarter of
    2022Q2."""

    num_sectors: int = 2
    entities_per_sector: int = 20
    num_weeks: int = 65
    factor_vol: float = 0.02
    idio_vol: float = 0.005
    momentum_drift: float = 0.003
    seed: int = 0
    start_date: str = "2021-04-02"
    beta_min: float = 0.8
    beta_max: float = 1.2

    def validate(self):
        for name in ("num_sectors", "entities_per_sector", "num_weeks"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value}")
        if not self.factor_vol > 0:
            raise ConfigError(f"factor_vol must be > 0, got {self.factor_vol}")
        if not self.idio_vol >= 0:
            raise ConfigError(f"idio_vol must be >= 0, got {self.idio_vol}")
        if not np.isfinite(self.momentum_drift):
            raise ConfigError("momentum_drift must be finite")
        if not 0 < self.beta_min <= self.beta_max:
            raise ConfigError("need 0 < beta_min <= beta_max")
        to_date(self.start_date)
        return self

    def sector_drifts(self):
        """Linearly spaced from +drift (sector 0) to -drift (last sector)."""
        if self.num_sectors == 1:
            return np.array([self.momentum_drift])
        return self.momentum_drift * np.linspace(1.0, -1.0, self.num_sectors)


def generate_synthetic_universe(cfg: SyntheticConfig = SyntheticConfig()):
    """``r_it = beta_i * f_{s(i),t} + eps_it + drift_{s(i)}``. Returns ``(table, sectors)``."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.num_sectors * cfg.entities_per_sector
    sector_of = np.repeat(np.arange(cfg.num_sectors), cfg.entities_per_sector)
    factors = rng.normal(0.0, cfg.factor_vol, size=(cfg.num_weeks, cfg.num_sectors))
    betas = rng.uniform(cfg.beta_min, cfg.beta_max, size=n)
    noise = rng.normal(0.0, cfg.idio_vol, size=(cfg.num_weeks, n))
    returns = betas * factors[:, sector_of] + noise + cfg.sector_drifts()[sector_of]
    # keep simple returns strictly above -100% whatever the volatility setting
    returns = np.maximum(returns, -0.99)
    dates = to_date(cfg.start_date) + 7 * np.arange(cfg.num_weeks)
    width = len(str(cfg.entities_per_sector - 1))
    tickers = [f"S{s}E{e:0{width}d}" for s in range(cfg.num_sectors) for e in range(cfg.entities_per_sector)]
    sectors = {t: f"sector{s}" for t, s in zip(tickers, sector_of)}
    return ReturnsTable(dates, tickers, returns), sectors


def weeks_through(start_date, last_date) -> int:
    """Weekly rows from ``start_date`` up to and including ``last_date``."""
    days = int((to_date(last_date) - to_date(start_date)).astype(int))
    if days < 0:
        raise ConfigError(f"{last_date} precedes {start_date}")
    return days // 7 + 1
