"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 configuration or input file, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import montecarlo as mc
from . import nist, protocol, seeding
from .circuit import simulate_enable
from .config import ConfigError, TrngConfig, config_from_dict, load_config, nominal_config
from .distribution import EmpiricalDistribution
from .entropy import entropy_report, pack_bitstream, xor_chain
from .magnetics import FieldSpec, IntegrationError

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_values(text: str) -> list[float]:
    """``a,b,c`` or inclusive ``start:step:stop``."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[1] == 0:
            raise UsageError(f"bad range {text!r}; expected start:step:stop")
        start, step, stop = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise UsageError(f"empty range {text!r}")
        return [start + k * step for k in range(n)]
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad value list {text!r}") from None
    if not vals:
        raise UsageError("empty value list")
    return vals


def _config(args) -> TrngConfig:
    cfg = load_config(args.config) if args.config else nominal_config(args.n_devices)
    if args.dt:
        cfg = cfg.replace(dt=args.dt)
    return cfg


def _out(args, default: str) -> Path:
    p = Path(args.out or default)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _entropy_dict(rep) -> dict:
    return {"shannon_per_word": rep.shannon_per_word, "shannon_per_bit": rep.shannon_per_bit,
            "min_entropy_per_word": rep.min_entropy_per_word, "min_entropy_per_bit": rep.min_per_bit,
            "shannon_stderr": rep.bootstrap_stderr, "min_entropy_stderr": rep.min_bootstrap_stderr}


# ---------------------------------------------------------------- subcommands

def cmd_generate(args) -> int:
    cfg = _config(args)
    out = _out(args, "words.bin")
    words = mc.run_words(cfg, args.trials, args.seed, args.threads)
    dist = EmpiricalDistribution.from_words(words, cfg.n_devices)
    rep = entropy_report(dist, cfg.identical_devices, args.bootstrap, args.seed)
    protocol.write_word_stream(out, words, cfg.n_devices, cfg.digest(), args.seed,
                               {"config": cfg.to_dict(), "entropy": _entropy_dict(rep)})
    if args.trace:
        rng = seeding.generator(seeding.trial_key(args.seed, 0))
        state = protocol.reset_step(cfg, rng)
        _, trace = simulate_enable(cfg, rng, state, trace_every=args.trace_every)
        trace.to_csv(out.with_name(out.name + ".trace0.csv"))
    print(json.dumps({"out": str(out), "trials": args.trials, **_entropy_dict(rep)}))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    cands = parse_values(args.candidates)
    scan = mc.series_resistance_scan(cfg, cands, args.trials, args.seed, args.threads)
    best = mc.calibrate_series_resistance(cfg, cands, args.trials, args.seed, args.threads) \
        if len(cands) > 1 else cands[0]
    res = {"config_digest": cfg.digest(), "seed": args.seed, "trials": args.trials,
           "r_series": best,
           "scan": [{"r_series": r, **_entropy_dict(rep)} for r, rep in scan]}
    _write_json(_out(args, "calibration.json"), res)
    print(json.dumps({"r_series": best}))
    return EXIT_OK


def _run_sweep(args, plan: mc.SweepPlan, default_out: str) -> int:
    out = _out(args, default_out)
    pts = mc.sweep(plan, threads=args.threads)
    mc.write_sweep_csv(out, plan, pts)
    failed = [p for p in pts if p.error]
    for p in failed:
        print(f"point {p.value} {p.value2 or ''} failed: {p.error}", file=sys.stderr)
    return EXIT_NUMERIC if failed and len(failed) == len(pts) else EXIT_OK


def _plan(args, cfg, axis, values, axis2=None, values2=()):
    return mc.SweepPlan(cfg, axis, values, args.trials, args.seed, axis2, values2,
                        bootstrap=args.bootstrap, seed_policy=args.seed_policy)


def cmd_entropy_sweep(args) -> int:
    cfg = _config(args)
    return _run_sweep(args, _plan(args, cfg, args.axis, parse_values(args.values)), "sweep.csv")


def _with_direction(cfg, theta, phi, kind="constant", magnitude=0.0, frequency=0.0):
    return cfg.with_environment(field=FieldSpec(kind, magnitude, theta, phi, frequency))


def cmd_field_sweep(args) -> int:
    cfg = _with_direction(_config(args), args.theta, args.phi)
    return _run_sweep(args, _plan(args, cfg, "field", parse_values(args.magnitude)), "field_sweep.csv")


def cmd_rotate_grid(args) -> int:
    cfg = _with_direction(_config(args), 0.0, 90.0, magnitude=args.magnitude)
    plan = _plan(args, cfg, "theta", parse_values(args.theta), "phi", parse_values(args.phi))
    return _run_sweep(args, plan, "rotate_grid.csv")


def cmd_ac_field_sweep(args) -> int:
    cfg = _with_direction(_config(args), 0.0, 90.0, "alternating", args.magnitude, 1e9)
    plan = _plan(args, cfg, "frequency", parse_values(args.frequency),
                 "theta", parse_values(args.theta))
    return _run_sweep(args, plan, "ac_field_sweep.csv")


def cmd_temperature_sweep(args) -> int:
    plan = _plan(args, _config(args), "temperature", parse_values(args.values))
    plan.tmr_rate_pct_per_k = args.tmr_rate
    return _run_sweep(args, plan, "temperature_sweep.csv")


def cmd_variation_ensemble(args) -> int:
    cfg = _config(args)
    spec = mc.VariationSpec(args.sigma_geometry, args.sigma_resistance, args.sigma_series, args.seed)
    res = mc.variation_ensemble(cfg, args.instances, spec, args.trials, args.seed, args.threads)
    out = _out(args, "ensemble.csv")
    keys = ["instance", "shannon_per_word", "shannon_per_bit", "min_entropy_per_word",
            "min_entropy_per_bit", "switch_probability", "r_series"]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + ["instance_digest", "config_digest"])
        for row in res.rows:
            w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys]
                       + [row["config_digest"], cfg.digest()])
    summary = {"kind": "variation-ensemble", "config_digest": cfg.digest(), "seed": args.seed,
               "instances": args.instances, "trials_per_instance": args.trials,
               "n_devices": cfg.n_devices, "config": cfg.to_dict(),
               "variation": {"sigma_geometry": spec.sigma_geometry,
                             "sigma_resistance": spec.sigma_resistance,
                             "sigma_series": spec.sigma_series},
               "shannon_per_bit": res.summary("shannon_per_bit"),
               "min_entropy_per_bit": res.summary("min_entropy_per_bit")}
    _write_json(out.with_suffix(".json"), summary)
    print(json.dumps({k: summary[k] for k in ("shannon_per_bit", "min_entropy_per_bit")}))
    return EXIT_OK


def cmd_assistance_field(args) -> int:
    cfg = _config(args)
    target = args.target if args.target == "nominal" else float(args.target)
    out = _out(args, "assistance_field.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "capacitance", "entropy_per_bit", "target", "converged", "config_digest"])
        for h in parse_values(args.fields):
            r = mc.assistance_field_search(cfg, h, target, args.trials, args.seed,
                                           threads=args.threads)
            w.writerow([repr(r["field"]), repr(r["capacitance"]), repr(r["entropy_per_bit"]),
                        repr(r["target"]), r["converged"], cfg.digest()])
    return EXIT_OK


def cmd_nist(args) -> int:
    words, meta = protocol.read_word_stream(args.input)
    if not args.raw:
        words = xor_chain(words)
    stream = pack_bitstream(words, meta["n_bits"])
    seqs = stream.sequences(args.sequences, args.seqlen)
    res = nist.run_suite(seqs)
    report = json.loads(res.to_json())
    report.update({"config_digest": meta["config_digest"], "seed": meta["seed"],
                   "post_processed": not args.raw, "kind": "nist"})
    _write_json(_out(args, "nist.json"), report)
    for t in res.tests:
        print(f"{t.name:<22} P-value {t.uniformity_p_value:.6f}  rate {t.success_rate:.4f}  "
              f"{'pass' if t.passed else 'FAIL'}")
    return EXIT_OK


def _report_row(path: Path, meta: dict) -> dict:
    cfg = config_from_dict(meta["config"], where=str(path))
    if meta.get("kind") == "variation-ensemble":
        s = meta["shannon_per_bit"]
        row = {"source": str(path), "n_devices": cfg.n_devices, "instances": meta["instances"],
               **{f"shannon_per_bit_{k}": v for k, v in s.items()},
               **{f"min_entropy_per_bit_{k}": v for k, v in meta["min_entropy_per_bit"].items()}}
        per_word = [s["mean"] * cfg.n_devices, s["p10"] * cfg.n_devices]
    else:
        e = meta["entropy"]
        row = {"source": str(path), "n_devices": cfg.n_devices, "trials": meta["trial_count"], **e}
        per_word = [e["shannon_per_word"]]
    reps = [protocol.energy_report(cfg, h) for h in per_word]
    row.update({"t_cycle": reps[0].t_cycle, "e_cycle": reps[0].e_cycle, "power": reps[0].power,
                "entropy_rate": [r.entropy_rate for r in reps],
                "energy_per_entropy_bit": [r.energy_per_entropy_bit for r in reps],
                "config_digest": meta["config_digest"]})
    return row


def cmd_report(args) -> int:
    rows, digests = [], set()
    for name in args.inputs:
        p = Path(name)
        meta_path = p if p.suffix == ".json" else p.with_name(p.name + ".json")
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{meta_path}: {exc}") from None
        digests.add(meta.get("config_digest"))
        rows.append(_report_row(meta_path, meta))
    if len(digests) > 1 and not args.force:
        print(f"refusing to aggregate results from {len(digests)} different configs "
              f"({', '.join(sorted(map(str, digests)))}); pass --force to override", file=sys.stderr)
        return EXIT_CONFIG
    _write_json(_out(args, "report.json"), {"rows": rows, "config_digests": sorted(map(str, digests))})
    for r in rows:
        print(json.dumps(r))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mtjtrng", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        s = sub.add_parser(name, help=help_)
        s.set_defaults(fn=fn)
        s.add_argument("--config", help="TOML config file (default: packaged nominal topology)")
        s.add_argument("--n-devices", type=int, default=8, choices=(2, 4, 6, 8),
                       help="packaged nominal topology when --config is absent")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--trials", type=int, default=2000)
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--out")
        s.add_argument("--dt", type=float, help="override the integration step [s]")
        s.add_argument("--bootstrap", type=int, default=200)
        s.add_argument("--seed-policy", choices=("common", "independent"), default="common")
        s.add_argument("--trace", action="store_true", help="dump an Enable-step trace CSV")
        s.add_argument("--trace-every", type=int, default=10)
        return s

    add("generate", cmd_generate, "run trials and write a packed word stream")
    s = add("calibrate", cmd_calibrate, "choose the entropy-maximizing series resistance")
    s.add_argument("--candidates", required=True)
    s = add("entropy-sweep", cmd_entropy_sweep, "sweep a design parameter")
    s.add_argument("--axis", required=True, choices=sorted(mc.AXES))
    s.add_argument("--values", required=True)
    s = add("field-sweep", cmd_field_sweep, "sweep a constant field magnitude (negative flips it)")
    s.add_argument("--magnitude", required=True)
    s.add_argument("--theta", type=float, default=90.0)
    s.add_argument("--phi", type=float, default=90.0)
    s = add("rotate-grid", cmd_rotate_grid, "theta x phi grid at a fixed field magnitude")
    s.add_argument("--magnitude", type=float, default=10e3)
    s.add_argument("--theta", default="0:15:345")
    s.add_argument("--phi", default="0:15:90")
    s = add("ac-field-sweep", cmd_ac_field_sweep, "alternating field frequency x direction")
    s.add_argument("--magnitude", type=float, default=10e3)
    s.add_argument("--frequency", required=True)
    s.add_argument("--theta", default="0")
    s = add("temperature-sweep", cmd_temperature_sweep, "temperature with linear TMR drift")
    s.add_argument("--values", required=True)
    s.add_argument("--tmr-rate", type=float, default=-0.4, help="TMR change in %%/K")
    s = add("variation-ensemble", cmd_variation_ensemble, "process-variation instance ensemble")
    s.add_argument("--instances", type=int, default=1000)
    s.add_argument("--sigma-geometry", type=float, default=0.05)
    s.add_argument("--sigma-resistance", type=float, default=0.05)
    s.add_argument("--sigma-series", type=float, default=0.05)
    s = add("assistance-field", cmd_assistance_field, "smallest C per assistance field")
    s.add_argument("--fields", required=True)
    s.add_argument("--target", default="0.95", help="per-bit entropy or 'nominal'")
    s = add("nist", cmd_nist, "NIST suite on a word stream (XOR-chain whitened unless --raw)")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--sequences", type=int, default=1024)
    s.add_argument("--seqlen", type=int, default=1024)
    s.add_argument("--raw", action="store_true")
    s = add("report", cmd_report, "summary table over generate / variation-ensemble outputs")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--force", action="store_true", help="allow mixed config digests")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.trials < 1 or args.threads < 1:
            raise UsageError("--trials and --threads must be >= 1")
        return args.fn(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, mc.TrialError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
