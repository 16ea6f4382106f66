"""Command line front end: ``levysig <command> --config run.yaml``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calculus import PayoffLifter, StructuralError
from .config import ConfigError, RunConfig, load_config
from .levy import expected_signature
from .market import SimulationGrid, evaluate_model_from_signature, simulate_model_direct, simulate_primary
from .paths import PathError
from .signature import marcus_signature
from .tensor import AlgebraError, WordParseError, format_word, parse_word, words_up_to
from .valuation import (
    DegenerateDenominatorError,
    fit_path_functional,
    hedge_pnl_mc,
    hedge_strategy,
    lift,
    mc_price,
    price_sig_payoff,
)


def _num(x) -> str:
    return repr(float(x))


class Writer:
    def __init__(self, out_dir: Path, json_mirror: bool):
        self.out_dir = out_dir
        self.json_mirror = json_mirror
        out_dir.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, header: list, rows: list):
        path = self.out_dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        if self.json_mirror:
            records = [dict(zip(header, r)) for r in rows]
            with open(path.with_suffix(".json"), "w") as fh:
                json.dump(records, fh, indent=1)
                fh.write("\n")
        return path

    def text(self, name: str, body: str):
        (self.out_dir / name).write_text(body)


def cmd_expected_sig(cfg: RunConfig, out: Writer, args):
    triplet = cfg.market.levy_triplet()
    L = cfg.market.level
    e = expected_signature(triplet, cfg.simulation.horizon, L)
    requested = cfg.task.get("words")
    words = [parse_word(str(w)) for w in requested] if requested else list(words_up_to(triplet.letters, L))
    rows = [[format_word(w), _num(e[w])] for w in words]
    return out.table("expected_signature.csv", ["word", "value"], rows)


def cmd_price(cfg: RunConfig, out: Writer, args):
    params = cfg.params()
    triplet = cfg.market.primary_triplet()
    sim = cfg.simulation
    rows = []
    lifts = []
    for pid, payoff in cfg.payoffs().items():
        analytic = price_sig_payoff(payoff, params, triplet, sim.horizon)
        if sim.paths > 0:
            mean, se = mc_price(
                payoff, params, triplet, sim.horizon, sim.paths, sim.steps, sim.seed,
                threads=args.threads, shard_size=sim.shard_size, brownian=sim.brownian,
            )
        else:
            mean, se = float("nan"), float("nan")
        rows.append([pid, _num(analytic), _num(mean), _num(se)])
        if cfg.task.get("dump_lift"):
            lifts.append(f"{pid}: {lift(payoff, params).to_text()}")
    if lifts:
        out.text("payoff_lift.txt", "\n".join(lifts) + "\n")
    return out.table("price_report.csv", ["payoff", "analytic", "mc_mean", "mc_se"], rows)


def cmd_hedge(cfg: RunConfig, out: Writer, args):
    params = cfg.params()
    triplet = cfg.market.primary_triplet()
    sim = cfg.simulation
    payoffs = cfg.payoffs()
    if len(payoffs) != 1:
        raise ConfigError("hedge needs exactly one payoff in task.payoffs")
    (pid, payoff), = payoffs.items()
    path = simulate_primary(triplet, SimulationGrid(sim.horizon, sim.steps, sim.seed), brownian=sim.brownian)
    level = max(lift(payoff, params).max_length, params.model_level, 1)
    report = hedge_strategy(payoff, params, triplet, sim.horizon, marcus_signature(path, level))
    rows = [[_num(t), _num(th), _num(s)] for t, th, s in zip(report.times, report.theta_path, report.s_left)]
    written = out.table("hedge_report.csv", ["time", "theta", "S_left"], rows)
    summary = [["v_star", _num(report.v_star)], ["path_squared_error", _num(report.residual_variance)]]
    if sim.paths > 0:
        unhedged, hedged = hedge_pnl_mc(
            payoff, params, triplet, sim.horizon, sim.paths, sim.steps, sim.seed,
            threads=args.threads, shard_size=sim.shard_size, brownian=sim.brownian,
        )
        summary += [["unhedged_variance", _num(unhedged)], ["hedged_variance", _num(hedged)]]
    out.table("hedge_summary.csv", ["quantity", "value"], summary)
    return written


def cmd_simulate(cfg: RunConfig, out: Writer, args):
    sim = cfg.simulation
    triplet = cfg.market.primary_triplet()
    params = cfg.params() if cfg.model is not None else None
    count = int(cfg.task.get("sample_paths", 1))
    rng = np.random.default_rng(np.random.SeedSequence(sim.seed))
    grid = SimulationGrid(sim.horizon, sim.steps, sim.seed)
    for i in range(count):
        path = simulate_primary(triplet, grid, rng=rng, brownian=sim.brownian)
        (out.out_dir / f"primary_{i:04d}.csv").write_text(path.to_csv())
        if params is not None:
            sig = marcus_signature(path, params.model_level)
            model = simulate_model_direct(params, path, sig)
            (out.out_dir / f"model_{i:04d}.csv").write_text(model.to_csv())
            rep = evaluate_model_from_signature(params, sig)
            gap = float(np.max(np.abs(rep - model.component(1))))
            out.table(f"model_{i:04d}_check.csv", ["quantity", "value"], [["max_gap_direct_vs_signature", _num(gap)]])
    return out.out_dir


def _fit_target(name: str, model_path, sig_terminal):
    if name == "running_max":
        return float(np.max(model_path.component(1)))
    if name == "terminal":
        return float(model_path.component(1)[-1])
    if name.startswith("word:"):
        return float(sig_terminal[parse_word(name[5:])])
    raise ConfigError(f"unknown fit target {name!r}; use running_max, terminal or word:<word>")


def cmd_fit(cfg: RunConfig, out: Writer, args):
    params = cfg.params()
    triplet = cfg.market.primary_triplet()
    sim = cfg.simulation
    fit = cfg.task.get("fit", {})
    level = int(fit.get("level", 2))
    target = str(fit.get("target", "running_max"))
    count = int(fit.get("paths", sim.paths or 100))
    rng = np.random.default_rng(np.random.SeedSequence(sim.seed))
    grid = SimulationGrid(sim.horizon, sim.steps, sim.seed)
    paths, targets = [], []
    for _ in range(count):
        primary = simulate_primary(triplet, grid, rng=rng, brownian=sim.brownian)
        model = simulate_model_direct(params, primary, marcus_signature(primary, max(params.n, 1)))
        paths.append(model)
        term = marcus_signature(model, level).terminal() if target.startswith("word:") else None
        targets.append(_fit_target(target, model, term))
    functional, resid = fit_path_functional(paths, targets, level)
    rows = [[format_word(w), _num(c)] for w, c in functional.sorted_items()]
    out.table("fit_summary.csv", ["quantity", "value"], [["level", str(level)], ["rms_residual", _num(resid)]])
    return out.table("fit_report.csv", ["word", "coefficient"], rows)


COMMANDS = {
    "expected-sig": cmd_expected_sig,
    "price": cmd_price,
    "hedge": cmd_hedge,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levysig", description="Signatures of Lévy-driven markets.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out-dir", default=".", help="directory for CSV outputs")
    ap.add_argument("--seed-override", type=int, default=None, help="replace simulation.seed")
    ap.add_argument("--threads", type=int, default=1, help="Monte Carlo worker threads")
    ap.add_argument("--json", action="store_true", help="also write a JSON mirror of every CSV")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed_override is not None:
            cfg = replace(cfg, simulation=replace(cfg.simulation, seed=args.seed_override))
        written = COMMANDS[args.command](cfg, Writer(Path(args.out_dir), args.json), args)
    except (ConfigError, StructuralError, WordParseError, AlgebraError, PathError,
            DegenerateDenominatorError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(written)
    return 0


if __name__ == "__main__":
    sys.exit(main())
