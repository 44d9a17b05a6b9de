"""Command line: ``dispersal {simulate,verify,phase,cost,limits}``.

Every subcommand reads an optional JSON config, resolves the seed
(--seed, then the config, then $DISPERSALLAB_SEED, then a fixed default)
and writes CSV/JSON files into --out. Floats are written with 17
significant digits and the resolved config is echoed into every file.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np

DEFAULT_SEED = 20261015


class ConfigError(ValueError):
    pass


# --- serialisation -------------------------------------------------------------

def fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def to_json(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits and deterministic layout."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, Fraction):
        return json.dumps(f"{obj.numerator}/{obj.denominator}")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v)).replace("null", "nan")
    return str(v)


def write_csv(path: Path, header: list, rows, config: dict) -> None:
    with open(path, "w", newline="") as f:
        f.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_cell(v) for v in row) + "\n")


def write_json(path: Path, payload: dict, config: dict) -> None:
    with open(path, "w") as f:
        f.write(to_json({"config": config, **payload}) + "\n")


# --- configuration -------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as f:
            cfg = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e}") from None
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def resolve_seed(cli_seed, cfg: dict) -> int:
    for src in (cli_seed, cfg.get("seed"), os.environ.get("DISPERSALLAB_SEED")):
        if src is not None and src != "":
            try:
                seed = int(src)
            except (TypeError, ValueError):
                raise ConfigError(f"seed must be an integer, got {src!r}") from None
            if not 0 <= seed < 2**64:
                raise ConfigError("seed must fit in 64 unsigned bits")
            return seed
    return DEFAULT_SEED


def parse_masses(spec, rng=None) -> list[float]:
    """Explicit list, {"equal": {"w", "k"}} or {"iid": {"law", "scale", "k", "cap"}}."""
    if isinstance(spec, list):
        masses = [float(m) for m in spec]
    elif isinstance(spec, dict) and "equal" in spec:
        e = spec["equal"]
        masses = [float(e["w"])] * int(e["k"])
    elif isinstance(spec, dict) and "iid" in spec:
        d = spec["iid"]
        law, scale, k = d.get("law", "uniform"), float(d.get("scale", 0.05)), int(d["k"])
        cap = float(d.get("cap", 0.95))
        if rng is None:
            raise ConfigError("iid masses need a seed")
        draw = {"uniform": lambda: rng.uniform(0, scale), "exponential": lambda: rng.exponential(scale)}
        if law not in draw:
            raise ConfigError(f"unknown mass law {law!r}")
        masses, total = [], 0.0
        for _ in range(k):
            m = float(draw[law]())
            if total + m > cap:
                break
            masses.append(m)
            total += m
    else:
        raise ConfigError(f"bad mass spec {spec!r}")
    if any(m < 0 for m in masses):
        raise ConfigError("masses must be nonnegative")
    if sum(masses) >= 1:
        raise ConfigError(f"total mass {sum(masses)} must be < 1")
    if not masses:
        raise ConfigError("no masses")
    return masses


def _lambdas(cfg, default):
    lams = cfg.get("lambdas", default)
    if not isinstance(lams, list) or any(float(l) < 0 for l in lams):
        raise ConfigError("lambdas must be a list of nonnegative numbers")
    return [float(l) for l in lams]


def _positive_int(cfg, key, default):
    v = cfg.get(key, default)
    if not isinstance(v, int) or v < 1:
        raise ConfigError(f"{key} must be a positive integer")
    return v


# --- subcommands ---------------------------------------------------------------

def cmd_simulate(cfg: dict, seed: int, trials: int, threads: int, out: Path) -> int:
    from .circle import OccupiedConfig, free_components
    from .harness import map_trials, trial_rng
    from .policies import MassEvent, make_policy, relax

    policy = make_policy(cfg.get("policy", "rdcs"))
    masses = parse_masses(cfg.get("masses", [0.3, 0.1, 0.2]), trial_rng(seed, 0xA55))
    cfg = {**cfg, "policy": repr(policy), "masses": masses}

    def one(i):
        rng = trial_rng(seed, i)
        c = OccupiedConfig()
        for u, m in zip(rng.random(len(masses)), masses):
            c, _ = relax(c, MassEvent(float(u), m), policy, rng)
        occ = sorted((float(x) for x in c.lengths()), reverse=True)
        free = sorted((float(f[1]) for f in free_components(c)), reverse=True)
        return c.N, occ, free

    res = map_trials(one, trials, threads)
    rows = [(i, N, ";".join(fmt_float(x) for x in occ), ";".join(fmt_float(x) for x in free))
            for i, (N, occ, free) in enumerate(res)]
    write_csv(out / "simulate.csv", ["trial", "N", "occupied", "free"], rows, cfg)
    counts = Counter(r[0] for r in res)
    write_json(out / "simulate.json", {
        "trials": trials,
        "N_counts": {str(k): counts[k] for k in sorted(counts)},
        "mean_N": float(np.mean([r[0] for r in res])),
    }, cfg)
    return 0


def cmd_phase(cfg: dict, seed: int, trials: int, threads: int, out: Path) -> int:
    from .collecting_path import rdcs_blocks_batch
    from .discrete import cyclic_runs, park, phase_time
    from .harness import map_trials, trial_rng

    n = _positive_int(cfg, "n", 10**4)
    lams = _lambdas(cfg, [0.5, 1.0, 2.0])
    top = _positive_int(cfg, "top", 3)
    rows, summary = [], []
    for j, lam in enumerate(lams):
        t = phase_time(n, lam)
        if not 0 < t < n:
            raise ConfigError(f"lambda={lam} gives no valid time for n={n}")

        def one(i):
            u = trial_rng(seed, j, i).random(t)
            slots = np.ceil(n * u).astype(np.int64) % n
            disc = sorted((l for _, l in cyclic_runs(park(n, slots.tolist()).occupied_slots)), reverse=True)
            L, _ = rdcs_blocks_batch(u[None, :], np.full(t, 1.0 / n))
            cont = sorted(L[0][L[0] > 0], reverse=True)
            pad = lambda v: (list(v) + [0.0] * top)[:top]
            return ((len(disc) / math.sqrt(n), pad(x / n for x in disc)),
                    (len(cont) / math.sqrt(n), pad(float(x) for x in cont)))

        res = map_trials(one, trials, threads)
        for i, (d, c) in enumerate(res):
            rows.append([lam, i, "discrete", d[0], *d[1]])
            rows.append([lam, i, "continuous", c[0], *c[1]])
        summary.append({
            "lambda": lam, "t": t,
            "mean_N_over_sqrt_n_discrete": float(np.mean([r[0][0] for r in res])),
            "target_discrete": lam * (1 - math.exp(-1)),
            "mean_N_over_sqrt_n_continuous": float(np.mean([r[1][0] for r in res])),
            "target_continuous": lam,
        })
    header = ["lambda", "trial", "model", "N_over_sqrt_n"] + [f"top{i + 1}" for i in range(top)]
    cfg = {**cfg, "n": n, "lambdas": lams}
    write_csv(out / "phase.csv", header, rows, cfg)
    write_json(out / "phase.json", {"trials": trials, "summary": summary}, cfg)
    return 0


def cmd_cost(cfg: dict, seed: int, trials: int, threads: int, out: Path) -> int:
    from .cost import StandardParking, make_cost_model, scaled_cost_experiment

    n = _positive_int(cfg, "n", 10**4)
    lams = _lambdas(cfg, [0.0])
    model = make_cost_model(cfg.get("model", "standard"))
    realized = bool(cfg.get("realized", isinstance(model, StandardParking)))
    if realized and not isinstance(model, StandardParking):
        raise ConfigError("realized costs exist only for standard parking")
    scale = math.sqrt(n) * model.alpha(n)
    summary = []
    cfg = {**cfg, "n": n, "lambdas": lams, "model": repr(model), "realized": realized}
    for j, lam in enumerate(lams):
        x = scaled_cost_experiment(n, lam, model, trials, seed + j, realized=realized)
        name = "cost.csv" if len(lams) == 1 else f"cost_lambda={fmt_float(lam)}.csv"
        write_csv(out / name, ["trial", "cost", "scaled_cost"],
                  [(i, float(v * scale), float(v)) for i, v in enumerate(x)], {**cfg, "lambda": lam})
        summary.append({"lambda": lam, "mean_scaled_cost": float(x.mean()),
                        "stderr": float(x.std(ddof=1) / math.sqrt(trials)) if trials > 1 else None})
    write_json(out / "cost.json", {"trials": trials, "summary": summary}, cfg)
    return 0


def cmd_limits(cfg: dict, seed: int, trials: int, threads: int, out: Path) -> int:
    from .excursions import (
        closed_form_mean_id, fragmentation_tree, m_lambda_functional, sample_excursion,
        truncated_mean, truncation_deficit,
    )
    from .harness import map_trials, trial_rng

    lams = _lambdas(cfg, [0.0, 0.5, 1.0])
    eps = float(cfg.get("eps", 0.02))
    if not 0 < eps < 1:
        raise ConfigError("eps must lie in (0, 1)")
    N = _positive_int(cfg, "N", 2**12)

    def one(i):
        e = sample_excursion(N, trial_rng(seed, i))
        tree = fragmentation_tree(e, eps)
        return [m_lambda_functional(lambda l: l, e, lam, eps, tree) for lam in lams]

    vals = np.array(map_trials(one, trials, threads)) if trials else np.zeros((0, len(lams)))
    cfg = {**cfg, "lambdas": lams, "eps": eps, "N": N}
    rows = [(i, lam, float(vals[i, j])) for i in range(trials) for j, lam in enumerate(lams)]
    write_csv(out / "limits.csv", ["trial", "lambda", "functional"], rows, cfg)
    table = []
    for j, lam in enumerate(lams):
        table.append({
            "lambda": lam,
            "closed_form": closed_form_mean_id(lam),
            "truncated_exact": truncated_mean(lambda l: l, lam, eps),
            "truncation_deficit": truncation_deficit(lam, eps),
            "monte_carlo": float(vals[:, j].mean()) if trials else None,
        })
    write_json(out / "limits.json", {"sqrt_pi_over_2": math.sqrt(math.pi / 2), "table": table}, cfg)
    return 0


def cmd_verify(cfg: dict, seed: int, trials: int | None, threads: int, out: Path, quick: bool) -> int:
    from .acceptance import Suite

    scale = float(cfg.get("scale", 0.05 if quick else 1.0))
    suite = Suite(seed=seed, scale=scale, threads=threads)
    names = [c for c in Suite.CRITERIA if c != "c13_negative"]
    main = suite.run(names, log=lambda s: print(s, flush=True))
    neg = suite.run(["c13_negative"], log=lambda s: print("[negative controls] " + s, flush=True))
    lit = suite.c7_top3_literal()
    print("[known unattainable] " + lit.line(), flush=True)
    ok = all(r.passed for r in main + neg)
    write_json(out / "verify.json", {
        "seed": seed, "scale": scale, "passed": ok,
        "criteria": [r.to_dict() for r in main],
        "negative_controls": [r.to_dict() for r in neg],
        "known_unattainable": [lit.to_dict()],
    }, {**cfg, "quick": quick})
    return 0 if ok else 1


# --- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dispersal", description="Mass dispersion on the circle: simulation and checks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "disperse masses with a policy"),
                        ("verify", "run the acceptance suite"),
                        ("phase", "block counts and largest blocks near the phase transition"),
                        ("cost", "total insertion cost of parking runs"),
                        ("limits", "excursion-side functionals and closed forms")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--seed", help="master seed (unsigned 64-bit)")
        s.add_argument("--trials", type=int, help="number of trials")
        s.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        s.add_argument("--out", default=".", help="output directory")
        if name == "verify":
            s.add_argument("--quick", action="store_true", help="small sample sizes, same thresholds")
    return p


DEFAULT_TRIALS = {"simulate": 1000, "phase": 20, "cost": 50, "limits": 50}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = resolve_seed(args.seed, cfg)
        trials = args.trials if args.trials is not None else cfg.get("trials", DEFAULT_TRIALS.get(args.command))
        if trials is not None and (not isinstance(trials, int) or trials < 0):
            raise ConfigError("trials must be a nonnegative integer")
        threads = args.threads or os.cpu_count() or 1
        if threads < 1:
            raise ConfigError("threads must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg = {**cfg, "seed": seed}
        if args.command == "verify":
            return cmd_verify(cfg, seed, trials, threads, out, args.quick)
        cfg["trials"] = trials
        cmd = {"simulate": cmd_simulate, "phase": cmd_phase, "cost": cmd_cost, "limits": cmd_limits}[args.command]
        return cmd(cfg, seed, trials, threads, out)
    except (ConfigError, ValueError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
