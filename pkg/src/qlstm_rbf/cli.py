"""Command-line pipeline: ``qlstm-rbf {synth,train,embed,kernel,backtest,gridsearch}``.

Settings come from an optional JSON config file; command-line flags
override it. Exit status is 0 on success, 1 for data errors, 2 for
configuration errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional

from . import backtest as bt
from . import manifold
from ._io import write_rows
from .data import (
    SyntheticConfig,
    generate_synthetic_universe,
    load_returns_csv,
    weeks_through,
    write_returns_csv,
    write_sectors_csv,
)
from .exceptions import ConfigError, DataError, QlstmRbfError
from .recurrent import QLSTMAutoencoder

logger = logging.getLogger("qlstm_rbf")

COMMANDS = ("synth", "train", "embed", "kernel", "backtest", "gridsearch")


@dataclass
class PipelineConfig:
    """Everything a command needs. ``returns=None`` means the synthetic universe."""

    returns: Optional[str] = None
    first_quarter: str = "2022Q2"
    last_quarter: str = "2025Q2"
    out: str = "out"
    seed: int = 0
    mode: str = "quantum"
    lambda_grid: List[float] = field(default_factory=lambda: list(bt.DEFAULT_LAMBDA_GRID))
    model: bt.BacktestConfig = field(default_factory=bt.BacktestConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    synthetic_weeks: Optional[int] = None

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw)
        nested = {"model": bt.BacktestConfig, "synthetic": SyntheticConfig}
        kwargs = {}
        for name, kind in nested.items():
            section = raw.pop(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"config section {name!r} must be an object")
            _check_keys(kind, section, name)
            kwargs[name] = kind(**section)
        _check_keys(cls, raw, "config")
        return cls(**raw, **kwargs)

    def to_dict(self):
        return asdict(self)

    def windows(self):
        return bt.make_rolling_windows(self.first_quarter, self.last_quarter, self.model.train_weeks)

    def resolved(self):
        """Propagate the top-level seed and mode and size the synthetic panel."""
        model = replace(self.model, seed=self.seed, mode=self.mode)
        weeks = self.synthetic_weeks
        if weeks is None:
            weeks = weeks_through(self.synthetic.start_date, self.windows()[-1].test_end)
        synthetic = replace(self.synthetic, seed=self.seed, num_weeks=weeks)
        return replace(self, model=model, synthetic=synthetic)

    def validate(self, modes=("quantum", "classical")):
        if self.mode not in modes:
            raise ConfigError(f"mode must be one of {modes}, got {self.mode!r}")
        if int(self.seed) != self.seed:
            raise ConfigError(f"seed must be an integer, got {self.seed}")
        self.windows()
        cfg = self.resolved()
        for mode in ("quantum", "classical") if self.mode == "both" else (self.mode,):
            replace(cfg.model, mode=mode).validate()
        cfg.synthetic.validate()
        if not self.lambda_grid:
            raise ConfigError("lambda_grid is empty")
        for lam in self.lambda_grid:
            if not lam >= 0:
                raise ConfigError(f"lambda values must be >= 0, got {lam}")
        return self


def _check_keys(kind, raw, where):
    known = {f.name for f in fields(kind)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    try:
        return PipelineConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    updates = {}
    for flag, name in (("seed", "seed"), ("mode", "mode"), ("first", "first_quarter"), ("last", "last_quarter"), ("out", "out"), ("returns", "returns")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[name] = value
    cfg = replace(cfg, **updates)
    lam = getattr(args, "lam", None)
    if lam is not None:
        cfg = replace(cfg, model=replace(cfg.model, lam=lam), lambda_grid=[lam])
    return cfg


# --------------------------------------------------------------------------
# commands


def _table(cfg: PipelineConfig):
    if cfg.returns is not None:
        return load_returns_csv(cfg.returns, drop_incomplete=False)
    return generate_synthetic_universe(cfg.synthetic)[0]


def _window(cfg, label):
    if label is None:
        raise ConfigError("--window is required for this command")
    bt.parse_quarter(label)
    return bt.make_rolling_windows(label, label, cfg.model.train_weeks)[0]


def _out(cfg, *parts):
    path = Path(cfg.out).joinpath(*parts)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_synth(cfg: PipelineConfig, args):
    table, sectors = generate_synthetic_universe(cfg.synthetic)
    write_returns_csv(_out(cfg, "returns.csv"), table)
    write_sectors_csv(_out(cfg, "sectors.csv"), sectors)
    logger.info("wrote %d weeks x %d entities to %s", table.num_weeks, len(table.entities), cfg.out)


def cmd_train(cfg: PipelineConfig, args):
    window = _window(cfg, args.window)
    state = bt.fit_window(window, _table(cfg), cfg.model)
    if state.estimator is None:
        raise DataError(f"window {window.label}: a single entity needs no model")
    path = Path(args.checkpoint) if args.checkpoint else _out(cfg, f"checkpoint_{window.label}.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    state.estimator.save(path, {"window": window.label, "entity_ids": state.entity_ids})
    write_rows(
        _out(cfg, f"loss_{window.label}.csv"),
        ["epoch", "loss"],
        [(e, float(v)) for e, v in enumerate(state.estimator.loss_history_)],
    )


def _embeddings_from_checkpoint(cfg, args):
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required for this command")
    est = QLSTMAutoencoder.load(args.checkpoint)
    extra = est.checkpoint_extra_
    window = _window(cfg, args.window or extra.get("window"))
    train = _table(cfg).complete_between(window.train_start, window.train_end)
    ids = [e for e in extra.get("entity_ids", train.entities) if e in train.entities]
    missing = sorted(set(extra.get("entity_ids", [])) - set(ids))
    if missing:
        raise DataError(f"window {window.label}: no complete training data for {', '.join(missing)}")
    if train.num_weeks < est.seq_len_:
        raise DataError(f"window {window.label}: fewer than {est.seq_len_} training weeks")
    recent = train.select(ids).returns[-est.seq_len_:].T
    return window, manifold.EmbeddingSet(window.label, ids, est.transform(recent))


def cmd_embed(cfg: PipelineConfig, args):
    window, emb = _embeddings_from_checkpoint(cfg, args)
    manifold.write_embeddings_csv(_out(cfg, f"embeddings_{window.label}.csv"), emb)


def cmd_kernel(cfg: PipelineConfig, args):
    window, emb = _embeddings_from_checkpoint(cfg, args)
    kernel = manifold.rbf_kernel(emb)
    manifold.write_embeddings_csv(_out(cfg, f"embeddings_{window.label}.csv"), emb)
    manifold.write_kernel_csv(_out(cfg, f"kernel_{window.label}.csv"), kernel)
    manifold.write_density_csv(_out(cfg, f"density_{window.label}.csv"), kernel)


def _run_backtest(cfg, table, out):
    windows = cfg.windows()
    cache = {}
    result = bt.run_backtest(table, windows, cfg.model, cache)
    out.mkdir(parents=True, exist_ok=True)
    bt.write_metrics_csv(out / "metrics.csv", result)
    bt.write_equity_csv(out / "equity.csv", result)
    bt.write_weights_csvs(out, result)
    for w in windows:
        if cache[w.label].embeddings is not None:
            manifold.write_embeddings_csv(out / "embeddings" / f"embeddings_{w.label}.csv", cache[w.label].embeddings)
    return result


def cmd_backtest(cfg: PipelineConfig, args):
    table = _table(cfg)
    if cfg.mode != "both":
        _run_backtest(cfg, table, Path(cfg.out))
        return
    for mode in ("quantum", "classical"):
        _run_backtest(replace(cfg, model=replace(cfg.model, mode=mode)), table, Path(cfg.out) / mode)


def cmd_gridsearch(cfg: PipelineConfig, args):
    result = bt.grid_search_lambda(cfg.lambda_grid, _table(cfg), cfg.windows(), cfg.model)
    bt.write_grid_csv(_out(cfg, "gridsearch.csv"), result)


HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "embed": cmd_embed,
    "kernel": cmd_kernel,
    "backtest": cmd_backtest,
    "gridsearch": cmd_gridsearch,
}


# --------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="qlstm-rbf", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--returns", help="date,ticker,return CSV (default: synthetic universe)")
    common.add_argument("--from", dest="first", metavar="QUARTER", help="first test quarter, e.g. 2022Q2")
    common.add_argument("--to", dest="last", metavar="QUARTER", help="last test quarter")
    common.add_argument("--lambda", dest="lam", type=float, help="DivMom penalty (gridsearch: single-value grid)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        modes = ["quantum", "classical", "both"] if name == "backtest" else ["quantum", "classical"]
        p.add_argument("--mode", choices=modes)
        if name in ("train", "embed", "kernel"):
            p.add_argument("--window", metavar="QUARTER", help="test quarter of the window")
            p.add_argument("--checkpoint", help="checkpoint path")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        cfg.validate(("quantum", "classical", "both") if args.command == "backtest" else ("quantum", "classical"))
        cfg = cfg.resolved()
        HANDLERS[args.command](cfg, args)
    except QlstmRbfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
