"""End-to-end acceptance suite.

Each test prints one ``[ACCEPT n] PASS|FAIL ...`` line (visible with
``pytest -s``) and asserts the same condition. Tolerances and runtime
budgets are fixed here.
"""

import filecmp
import json
import time
from pathlib import Path

import numpy as np

from oracles import central_difference, matrix_oracle_state, rel_err, simplex_grid
from qlstm_rbf import cli
from qlstm_rbf.allocation import DivMomConfig, GraphConfig, divmom_select, graph_allocate, graph_objective
from qlstm_rbf.backtest import (
    BacktestConfig,
    allocate,
    chain_equity,
    compute_metrics,
    fit_window,
    grid_search_lambda,
    make_rolling_windows,
)
from qlstm_rbf.data import ReturnsTable, SyntheticConfig, generate_synthetic_universe, weeks_through
from qlstm_rbf.manifold import rbf_kernel
from qlstm_rbf.quantum_sim import Gate, apply_gate, init_zero_state, pauli_z_expectations
from qlstm_rbf.recurrent import TrainConfig, init_model, loss_and_gradients, teacher_forcing_mask
from qlstm_rbf.vqc import parameter_shift_gradient, vqc_backward, vqc_forward

QUARTER_LABELS = [
    "2022Q2", "2022Q3", "2022Q4", "2023Q1", "2023Q2", "2023Q3", "2023Q4",
    "2024Q1", "2024Q2", "2024Q3", "2024Q4", "2025Q1", "2025Q2",
]


def report(n, ok, detail):
    print(f"\n[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def random_circuit(rng, q, depth=12):
    gates = []
    for _ in range(depth):
        if q > 1 and rng.random() < 0.3:
            c, t = rng.choice(q, size=2, replace=False)
            gates.append(Gate("CNOT", int(t), int(c)))
        else:
            gates.append(Gate(str(rng.choice(["RX", "RY", "RZ"])), int(rng.integers(q)), angle=float(rng.uniform(-np.pi, np.pi))))
    return gates


def test_criterion_1_quantum_core():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    cos_err = 0.0
    for theta in rng.uniform(-np.pi, np.pi, 100):
        state = apply_gate(init_zero_state(1), Gate("RY", 0, angle=float(theta)))
        cos_err = max(cos_err, abs(pauli_z_expectations(state)[0] - np.cos(theta)))
    oracle_err = 0.0
    for i in range(50):
        q = 1 + i % 3
        gates = random_circuit(rng, q)
        state = init_zero_state(q)
        for g in gates:
            state = apply_gate(state, g)
        oracle_err = max(oracle_err, np.max(np.abs(state.amplitudes - matrix_oracle_state(gates, q))))
    elapsed = time.perf_counter() - t0
    ok = cos_err <= 1e-12 and oracle_err <= 1e-10 and elapsed < 1.0
    report(1, ok, f"cos err {cos_err:.1e} (<=1e-12), oracle err {oracle_err:.1e} (<=1e-10), {elapsed:.2f}s (<1s)")
    assert ok


def test_criterion_2_gradients():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    shift_err = fd_err = 0.0
    for i in range(50):
        q = 1 + i % 4
        x, angles, up = rng.normal(size=q), rng.uniform(-np.pi, np.pi, (q, 2)), rng.normal(size=q)
        adj = vqc_backward(x, angles, up)
        shift = parameter_shift_gradient(x, angles, up)
        shift_err = max(shift_err, np.max(np.abs(adj.d_angles - shift.d_angles)), np.max(np.abs(adj.d_input - shift.d_input)))
        fd_err = max(
            fd_err,
            rel_err(adj.d_angles, central_difference(lambda a: up @ vqc_forward(x, a), angles)),
            rel_err(adj.d_input, central_difference(lambda v: up @ vqc_forward(v, angles), x)),
        )

    seq_err = {}
    cfg = TrainConfig(hidden_width=3, qubits=2)
    for mode in ("quantum", "classical"):
        mrng = np.random.default_rng(203)
        model = init_model(cfg, mode, mrng)
        for arr in model.parameters().values():
            arr[...] = mrng.uniform(-0.8, 0.8, size=arr.shape)
        x = mrng.normal(size=(3, 4, 1))
        forced = teacher_forcing_mask((3, 4), 0.5, np.random.default_rng(204))
        _, grads = loss_and_gradients(model, x, forced)
        worst = 0.0
        for name, arr in model.parameters().items():
            flat = arr.reshape(-1)

            def at(theta, flat=flat):
                saved = flat.copy()
                flat[:] = theta
                try:
                    return loss_and_gradients(model, x, forced)[0]
                finally:
                    flat[:] = saved

            worst = max(worst, rel_err(grads[name].ravel(), central_difference(at, flat.copy())))
        seq_err[mode] = worst
    elapsed = time.perf_counter() - t0
    ok = shift_err <= 1e-10 and fd_err <= 1e-5 and max(seq_err.values()) <= 1e-4 and elapsed < 30
    report(
        2,
        ok,
        f"adjoint-vs-shift {shift_err:.1e} (<=1e-10), VQC FD rel {fd_err:.1e} (<=1e-5), "
        f"Seq2Seq FD rel quantum {seq_err['quantum']:.1e} classical {seq_err['classical']:.1e} (<=1e-4), {elapsed:.1f}s (<30s)",
    )
    assert ok


def test_criterion_3_kernel_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    sym = diag = bounds = True
    min_eig, scale_err = np.inf, 0.0
    for _ in range(50):
        Z = rng.normal(size=(int(rng.integers(2, 40)), 2))
        K = rbf_kernel(Z).entries
        sym &= bool(np.array_equal(K, K.T))
        diag &= bool(np.all(np.diag(K) == 1.0))
        bounds &= bool(np.all(K > 0) and np.all(K <= 1))
        min_eig = min(min_eig, np.linalg.eigvalsh(K).min())
        scale_err = max(scale_err, np.max(np.abs(rbf_kernel(Z * rng.uniform(0.01, 100)).entries - K)))
    fixed = rbf_kernel([[0.0, 0.0], [3.0, 0.0]]).entries[0, 1]
    elapsed = time.perf_counter() - t0
    ok = (
        sym and diag and bounds and min_eig >= -1e-8 and scale_err <= 1e-12
        and abs(fixed - np.exp(-0.5)) < 1e-15 and abs(fixed - 0.606531) < 1e-6 and elapsed < 1.0
    )
    report(
        3,
        ok,
        f"symmetric={sym} unit-diag={diag} in(0,1]={bounds} min eig {min_eig:.1e} (>=-1e-8), "
        f"scale err {scale_err:.1e} (<=1e-12), K(sigma)={fixed:.6f}, {elapsed:.2f}s (<1s)",
    )
    assert ok


def test_criterion_4_structure_recovery():
    t0 = time.perf_counter()
    table, sectors = generate_synthetic_universe(SyntheticConfig())
    assert table.returns.shape == (65, 40)
    (window,) = make_rolling_windows("2022Q2", "2022Q2")
    state = fit_window(window, table, BacktestConfig())
    hist = state.estimator.loss_history_
    labels = np.array([sectors[e] for e in state.entity_ids])
    K = state.kernel.entries
    same = (labels[:, None] == labels[None]) & ~np.eye(len(labels), dtype=bool)
    within, cross = K[same].mean(), K[labels[:, None] != labels[None]].mean()
    ratio = hist[-1] / hist[0]
    elapsed = time.perf_counter() - t0
    ok = within > cross and ratio <= 0.5 and elapsed < 300
    report(
        4,
        ok,
        f"within-sector K {within:.3f} > cross-sector {cross:.3f}; final/epoch-0 loss {ratio:.3f} (<=0.5); "
        f"{len(hist)} epochs, {elapsed:.0f}s (<300s)",
    )
    assert ok


def test_criterion_5_allocators():
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    topk = True
    for _ in range(100):
        n = int(rng.integers(2, 30))
        m = rng.normal(0, 0.1, n)
        K = rbf_kernel(rng.normal(size=(n, 2))).entries
        k = int(rng.integers(1, n + 1))
        w = divmom_select(m, K, DivMomConfig(0.0, k))
        topk &= set(np.nonzero(w.weights)[0]) == set(np.argsort(-m)[:k])
    K3 = np.array([[1, 0.99, 0.1], [0.99, 1, 0.1], [0.1, 0.1, 1]])
    fixture = {int(i) for i in (np.nonzero(divmom_select(np.array([1, 1, 0.9]), K3, DivMomConfig(1.0, 2)).weights)[0] + 1)}

    grid = np.array(list(simplex_grid(3, 0.01)))
    oracle_gap, monotone, simplex = -np.inf, True, True
    for _ in range(10):
        m = rng.normal(0, 1, 3)
        K = rbf_kernel(rng.normal(size=(3, 2))).entries
        gamma = float(rng.uniform(0.2, 3))
        L = np.diag(K.sum(axis=1)) - K
        res = graph_allocate(m, K, GraphConfig(gamma=gamma))
        best = (np.einsum("gi,ij,gj->g", grid, L, grid) - gamma * grid @ m).min()
        oracle_gap = max(oracle_gap, graph_objective(res.weights, L, m, gamma) - best)
        monotone &= bool(np.all(np.diff(res.diagnostics["objective"]) <= 0))
    for _ in range(100):
        n = int(rng.integers(2, 30))
        m = rng.normal(0, 0.1, n)
        K = rbf_kernel(rng.normal(size=(n, 2))).entries
        for w in (divmom_select(m, K, DivMomConfig(rng.uniform(0, 1), int(rng.integers(1, n + 1)))), graph_allocate(m, K)):
            simplex &= bool(np.all(w.weights >= 0) and abs(w.weights.sum() - 1) <= 1e-10)
    elapsed = time.perf_counter() - t0
    ok = topk and fixture == {1, 3} and oracle_gap <= 1e-3 and monotone and simplex and elapsed < 60
    report(
        5,
        ok,
        f"lambda=0 top-k={topk}, fixture selects {sorted(fixture)} (want [1, 3]), graph-vs-grid {oracle_gap:.1e} (<=1e-3), "
        f"monotone={monotone}, simplex={simplex}, {elapsed:.1f}s (<60s)",
    )
    assert ok


def test_criterion_6_backtest_math():
    rng = np.random.default_rng(606)
    periods = [rng.normal(0, 0.03, int(rng.integers(1, 15))) for _ in range(13)]
    chain_err = np.max(np.abs(chain_equity(periods).values - np.cumprod(1 + np.concatenate(periods))))

    r = [0.012, -0.004, 0.021, -0.017, 0.008, 0.000, 0.015, -0.022, 0.006, 0.011, -0.009, 0.004, 0.018]
    b = [0.005, 0.002, 0.010, -0.012, 0.001, 0.003, 0.004, -0.010, 0.002, 0.006, -0.004, 0.001, 0.007]
    e = np.array(r) - np.array(b)
    path = np.cumprod(1 + e)
    oracle = (
        path[-1] ** (52 / 13) - 1,
        np.sqrt(np.sum((e - e.mean()) ** 2) / 12) * np.sqrt(52),
        e.mean() * 52 / (np.sqrt(np.sum((e - e.mean()) ** 2) / 12) * np.sqrt(52)),
        min(0.0, np.min(path / np.maximum.accumulate(np.concatenate([[1.0], path]))[1:] - 1)),
    )
    m = compute_metrics(r, b)
    metric_err = max(abs(a - o) for a, o in zip((m.cagr, m.vol, m.sharpe, m.max_dd), oracle))

    cfg = BacktestConfig(mode="classical", hidden_width=4, epochs=10, k=3)
    table = generate_synthetic_universe(
        SyntheticConfig(num_sectors=2, entities_per_sector=4, num_weeks=weeks_through("2021-04-02", "2022-06-30"))
    )[0]
    (window,) = make_rolling_windows("2022Q2", "2022Q2")
    keep = table.dates <= window.train_end
    truncated = ReturnsTable(table.dates[keep], table.entities, table.returns[keep])
    full, cut = fit_window(window, table, cfg), fit_window(window, truncated, cfg)
    no_look_ahead = all(np.array_equal(a.weights, c.weights) for a, c in zip(allocate(full, cfg), allocate(cut, cfg)))
    labels = [w.label for w in make_rolling_windows("2022Q2", "2025Q2")]
    ok = chain_err <= 1e-12 and metric_err <= 1e-10 and no_look_ahead and labels == QUARTER_LABELS
    report(
        6,
        ok,
        f"chaining err {chain_err:.1e} (<=1e-12), metric oracle err {metric_err:.1e} (<=1e-10), "
        f"no-look-ahead={no_look_ahead}, windows {len(labels)} {labels[0]}..{labels[-1]}",
    )
    assert ok


GRID_UNIVERSE = dict(num_sectors=4, entities_per_sector=10, momentum_drift=0.004)
GRID_WINDOWS = ("2022Q2", "2023Q1")


def test_criterion_7_grid_search_trend():
    t0 = time.perf_counter()
    windows = make_rolling_windows(*GRID_WINDOWS)
    cfg = SyntheticConfig(**GRID_UNIVERSE, num_weeks=weeks_through("2021-04-02", windows[-1].test_end))
    table, _ = generate_synthetic_universe(cfg)
    result = grid_search_lambda([0.0, 0.15, 0.30, 0.45, 0.60, 0.75, 0.90, 1.0], table, windows, BacktestConfig(k=10))
    sharpe = {r.lam: r.mean_sharpe for r in result.rows}
    elapsed = time.perf_counter() - t0
    ok = sharpe[0.15] >= sharpe[1.0]
    report(
        7,
        ok,
        f"mean Sharpe lambda=0.15 {sharpe[0.15]:.3f} >= lambda=1.0 {sharpe[1.0]:.3f} over {len(windows)} windows; "
        f"graph {result.graph_mean_sharpe:.3f}; {elapsed:.0f}s (target <900s)",
    )
    assert ok


HARNESS_CONFIG = {
    "first_quarter": "2022Q2",
    "last_quarter": "2022Q3",
    "model": {"epochs": 40, "k": 5},
    "synthetic": {"num_sectors": 2, "entities_per_sector": 6},
}


def _read_csv(path):
    lines = Path(path).read_text().splitlines()
    return lines[0], [line.split(",") for line in lines[1:]]


def test_criterion_8_quantum_vs_classical(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(HARNESS_CONFIG))
    status = cli.run(["backtest", "--config", str(config), "--mode", "both", "--out", str(tmp_path / "out")])
    headers, keys = {}, {}
    for mode in ("quantum", "classical"):
        header, rows = _read_csv(tmp_path / "out" / mode / "metrics.csv")
        headers[mode] = header
        keys[mode] = [r[:2] for r in rows]
    ok = status == 0 and headers["quantum"] == headers["classical"] and keys["quantum"] == keys["classical"]
    report(8, ok, f"exit {status}; metric files share header and {len(keys['quantum'])} (period, strategy) rows")
    assert ok


def test_criterion_9_reproducibility(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(HARNESS_CONFIG))
    outs = [tmp_path / "run1", tmp_path / "run2"]
    status = [cli.run(["backtest", "--config", str(config), "--seed", "7", "--out", str(o)]) for o in outs]
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    same = [filecmp.cmp(outs[0] / f, outs[1] / f, shallow=False) for f in files]
    ok = status == [0, 0] and len(files) > 0 and all(same)
    report(9, ok, f"{sum(same)}/{len(files)} output files byte-identical across two seeded runs")
    assert ok
