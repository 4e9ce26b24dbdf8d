"""Command-line sweeps: ``noma-airlink run|validate|figures``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .channel import GainModel
from .config import (
    MODES,
    RegionSection,
    RadioSection,
    RunSection,
    ScenarioConfig,
    SweepSection,
    SweepPoint,
    parse_config,
    scenario_at,
    strategies_of,
    sweep_points,
    validate,
)
from .errors import ConfigError, NomaAirlinkError
from .montecarlo import McEstimate, estimate_all, resolve_threads
from .outage import OutageReport, analyze


CSV_COLUMNS = (
    "strategy", "h_m", "delta_deg", "l1_m", "p_tx_dbm", "j", "i", "mode",
    "noma_rate", "oma_rate", "p_out_i", "p_out_j", "stderr_rate", "n_trials", "seed", "consistency_ok",
)
OUTAGE_ABS_TOL = 0.01
RATE_REL_TOL = 0.01


@dataclass(frozen=True)
class SweepResult:
    """One CSV row. Outages are conditioned on the user being scheduled."""

    strategy: str
    point: SweepPoint
    mode: str
    noma_rate: float
    oma_rate: float
    p_out_i: float
    p_out_j: float
    stderr_rate: float
    n_trials: int
    seed: int
    consistency_ok: bool | None

    def csv_row(self) -> list[str]:
        p = self.point
        ok = "" if self.consistency_ok is None else str(self.consistency_ok).lower()
        return [
            self.strategy, _fmt(p.h), _fmt(p.delta_deg), _fmt(p.l1), _fmt(p.p_tx_dbm), str(p.j), str(p.i),
            self.mode, _fmt(self.noma_rate), _fmt(self.oma_rate), _fmt(self.p_out_i), _fmt(self.p_out_j),
            _fmt(self.stderr_rate), str(self.n_trials), str(self.seed), ok,
        ]


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".10g")


def _close(a: float, m: float, se: float, tol: float) -> bool:
    if math.isnan(a) or math.isnan(m):
        return math.isnan(a) == math.isnan(m) or math.isnan(m)
    bound = max(3.0 * (0.0 if math.isnan(se) else se), tol)
    return abs(a - m) <= bound


def consistent(rep: OutageReport, est: McEstimate) -> bool:
    """Analytic and simulated values agree within ``max(3 stderr, tolerance)``."""
    return (
        _close(rep.p_out_i_given_present, est.p_out_i, est.p_out_i_stderr, OUTAGE_ABS_TOL)
        and _close(rep.p_out_j_given_present, est.p_out_j, est.p_out_j_stderr, OUTAGE_ABS_TOL)
        and _close(rep.noma_rate, est.noma_rate, est.noma_rate_stderr, RATE_REL_TOL * abs(rep.noma_rate))
        and _close(rep.oma_rate, est.oma_rate, est.oma_rate_stderr, RATE_REL_TOL * abs(rep.oma_rate))
    )


def _evaluate_point(cfg: ScenarioConfig, pt: SweepPoint, mc_threads: int) -> list[SweepResult]:
    run = cfg.run
    scn = scenario_at(cfg, pt)
    strategies = strategies_of(cfg)
    reports = {s: analyze(s, scn) for s in strategies} if run.mode in ("analytic", "both") else {}
    ests = (
        estimate_all(run.n_trials, scn, strategies, seed=run.seed, gain_model=GainModel(run.gain_model),
                     threads=mc_threads)
        if run.mode in ("mc", "both")
        else {}
    )
    rows = []
    for s in strategies:
        ok = consistent(reports[s], ests[s]) if run.mode == "both" else None
        if s in reports:
            r = reports[s]
            rows.append(SweepResult(s.value, pt, "analytic", r.noma_rate, r.oma_rate, r.p_out_i_given_present,
                                    r.p_out_j_given_present, math.nan, 0, run.seed, ok))
        if s in ests:
            e = ests[s]
            rows.append(SweepResult(s.value, pt, "mc", e.noma_rate, e.oma_rate, e.p_out_i, e.p_out_j,
                                    e.noma_rate_stderr, e.n_trials, run.seed, ok))
    return rows


def run_sweep(cfg: ScenarioConfig, out: Path | None = None, threads: int | None = None,
              plot_script: bool = True) -> list[SweepResult]:
    """Evaluate every sweep point; rows come out in sweep order whatever the thread count.

    The CSV is written to a temporary file and renamed into place, so a
    failed run never leaves a partial file behind.
    """
    validate(cfg)
    pts = sweep_points(cfg)
    n = resolve_threads(threads)
    point_workers = min(n, len(pts))
    mc_threads = 1 if point_workers > 1 else n
    if point_workers > 1:
        with ThreadPoolExecutor(max_workers=point_workers) as pool:
            chunks = list(pool.map(lambda p: _evaluate_point(cfg, p, mc_threads), pts))
    else:
        chunks = [_evaluate_point(cfg, p, mc_threads) for p in pts]
    rows = [r for chunk in chunks for r in chunk]
    if out is not None:
        write_csv(rows, Path(out))
        if plot_script:
            write_plot_script(Path(out))
    return rows


def write_csv(rows: list[SweepResult], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                w.writerow(r.csv_row())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


_PLOT_TEMPLATE = '''"""Plot NOMA and OMA sum rates from {csv_name} against altitude."""

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = Path(__file__).with_name("{csv_name}")
curves = defaultdict(list)
with src.open(newline="") as fh:
    for row in csv.DictReader(fh):
        key = (row["strategy"], row["mode"], row["delta_deg"], row["l1_m"], row["p_tx_dbm"], row["j"], row["i"])
        curves[key].append((float(row["h_m"]), float(row["noma_rate"]), float(row["oma_rate"])))

fig, ax = plt.subplots(figsize=(7, 4.5))
for (strategy, mode, delta, l1, p_tx, j, i), pts in sorted(curves.items()):
    pts.sort()
    h = [p[0] for p in pts]
    style = "-" if mode == "analytic" else "o"
    label = f"{{strategy}} {{mode}} delta={{delta}} l1={{l1}} p={{p_tx}} ({{j}},{{i}})"
    ax.plot(h, [p[1] for p in pts], style, label="NOMA " + label)
    ax.plot(h, [p[2] for p in pts], style, alpha=0.4, label="OMA " + label)
ax.set_xlabel("altitude h [m]")
ax.set_ylabel("outage sum rate [bits/channel use]")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=6)
fig.tight_layout()
out = src.with_suffix(".png") if len(sys.argv) < 2 else Path(sys.argv[1])
fig.savefig(out, dpi=150)
print(f"wrote {{out}}")
'''


def write_plot_script(csv_path: Path) -> Path:
    script = csv_path.with_name(csv_path.stem + "_plot.py")
    script.write_text(_PLOT_TEMPLATE.format(csv_name=csv_path.name), encoding="utf-8")
    return script


# ------------------------------------------------------------------ presets


def _deg_grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    n = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + step * k, 10) for k in range(n))


FIGURE_PRESETS = {
    "fig5": ScenarioConfig(),
    "fig6": ScenarioConfig(region=RegionSection(delta=1.0)),
    "fig7": ScenarioConfig(
        sweep=SweepSection(delta_grid=(1.0, 5.0), p_tx_grid=(10.0, 20.0)),
        run=RunSection(strategies=("fejer", "distance")),
    ),
    "fig9": ScenarioConfig(
        sweep=SweepSection(pairs=((20, 25), (40, 50)), p_tx_grid=(10.0, 20.0)),
        run=RunSection(strategies=("fejer", "angle")),
    ),
    "fig12": ScenarioConfig(
        radio=RadioSection(p_tx=10.0),
        sweep=SweepSection(
            h_list=(50.0,),
            l1_grid=_deg_grid(40.0, 85.0, 5.0),
            delta_grid=(0.2,) + _deg_grid(0.5, 5.0, 0.5),
        ),
        run=RunSection(strategies=("distance", "fejer"), mode="analytic"),
    ),
}


# ---------------------------------------------------------------------- cli


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noma-airlink", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--out", type=Path, default=Path("results.csv"), help="CSV output path")
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--threads", type=int, help="worker threads (default: $NOMA_AIRLINK_THREADS or CPU count)")
        p.add_argument("--no-plot-script", action="store_true", help="skip the companion plotting script")

    run = sub.add_parser("run", help="evaluate a sweep and write a CSV")
    run.add_argument("--config", type=Path, required=True)
    add_run_flags(run)

    val = sub.add_parser("validate", help="check a configuration and print it with defaults filled in")
    val.add_argument("--config", type=Path, required=True)

    fig = sub.add_parser("figures", help="run a preset sweep for one figure family")
    fig.add_argument("--family", choices=sorted(FIGURE_PRESETS), required=True)
    fig.add_argument("--print-config", action="store_true", help="print the preset and exit")
    add_run_flags(fig)
    return ap


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["n_trials"] = args.trials
    return cfg.with_run(**changes) if changes else cfg


def _echo(cfg: ScenarioConfig) -> None:
    print(json.dumps(cfg.to_dict(), indent=2))


def _execute(cfg: ScenarioConfig, args) -> int:
    cfg = _apply_overrides(cfg, args)
    validate(cfg)
    _echo(cfg)
    rows = run_sweep(cfg, args.out, threads=args.threads, plot_script=not args.no_plot_script)
    bad = [r for r in rows if r.consistency_ok is False and r.mode == "mc"]
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    for r in bad:
        p = r.point
        print(f"consistency check failed: {r.strategy} h={p.h:g} delta={p.delta_deg:g} l1={p.l1:g} "
              f"p_tx={p.p_tx_dbm:g} j={p.j} i={p.i}", file=sys.stderr)
    return 1 if bad else 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            _echo(parse_config(args.config))
            return 0
        if args.command == "run":
            return _execute(parse_config(args.config), args)
        cfg = FIGURE_PRESETS[args.family]
        if args.print_config:
            _echo(_apply_overrides(cfg, args))
            return 0
        return _execute(cfg, args)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NomaAirlinkError as exc:
        print(f"error: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
