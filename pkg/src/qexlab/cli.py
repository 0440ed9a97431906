"""Command-line entry point: seeded, reproducible certification runs.

Every run writes one JSON report carrying the tool version, the fully
resolved configuration, the seed and the PRNG name.  Precedence is
command-line flag over ``--config`` file over built-in default.  Output goes
to ``--out``, else to ``$QEXLAB_OUTPUT_DIR/<command>.json``, else stdout.

Exit codes: 0 success, 2 numerical non-convergence, 3 invalid input,
4 a certified property did not hold.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import __version__, arealaw, circuit, epr, expanders, linalg, serialize
from .errors import ConvergenceError, ParameterError, QexlabError

EXIT_OK, EXIT_CONVERGENCE, EXIT_INPUT, EXIT_CERT = 0, 2, 3, 4
OUTPUT_ENV = "QEXLAB_OUTPUT_DIR"

DEFAULTS = {
    "expander": {"kind": "haar", "D": 4, "d": 3, "n": None, "seed": 0, "mode": "auto"},
    "eprtest": {"variant": "basic", "kind": "haar", "D": 4, "d": 3, "n": 3, "seed": 0, "k": 1,
                "state": [], "mode": "auto"},
    "arealaw": {"D": [2, 4, 8], "seed": 0, "min_c": 0.02, "identity_ensemble": False, "mode": "auto"},
    "c2h.kitaev": {"T": [4, 8, 16, 32], "D": 1, "mode": "auto"},
    "c2h.hprime": {"D": 2, "T": 7, "seed": 0, "min_c": 0.02, "mode": "auto"},
    "c2h.twoclock": {"D": 4, "d": 3, "seed": 0, "min_c": 0.02, "kind": "haar-with-identity", "mode": "auto"},
    "c2h.entropy-bound": {"eps": 0.05, "D": 16},
}
COMMON = {"out": None, "format": "json", "workers": 1, "timing": False}


def _int_list(text) -> list:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=S, help="JSON file of parameters (flags take precedence)")
    common.add_argument("--out", default=S, help="output file")
    common.add_argument("--format", choices=["json", "csv"], default=S)
    common.add_argument("--workers", type=int, default=S, help="worker threads for sweeps")
    common.add_argument("--timing", action="store_true", default=S,
                        help="embed wall-clock duration (makes output non-reproducible)")

    p = argparse.ArgumentParser(prog="qexlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qexlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("expander", parents=[common], help="measure lambda of an ensemble")
    e.add_argument("--kind", choices=["haar", "haar-with-identity", "margulis"], default=S)
    e.add_argument("--D", type=int, default=S)
    e.add_argument("--d", type=int, default=S)
    e.add_argument("--n", type=int, default=S, help="margulis side length (D = n^2)")
    e.add_argument("--seed", type=int, default=S)
    e.add_argument("--mode", choices=["auto", "dense", "iterative"], default=S)

    t = sub.add_parser("eprtest", parents=[common], help="run an EPR test variant")
    t.add_argument("--variant", choices=list(epr.VARIANTS), default=S)
    t.add_argument("--kind", choices=["haar", "haar-with-identity"], default=S)
    t.add_argument("--D", type=int, default=S)
    t.add_argument("--d", type=int, default=S)
    t.add_argument("--n", type=int, default=S, help="margulis side length for shared-randomness")
    t.add_argument("--k", type=int, default=S, help="repetitions for the iterated variant")
    t.add_argument("--seed", type=int, default=S)
    t.add_argument("--state", action="append", default=S, help="extra input state file (repeatable)")
    t.add_argument("--mode", choices=["auto", "dense", "iterative"], default=S)

    a = sub.add_parser("arealaw", parents=[common], help="certify the four-particle chain over a D sweep")
    a.add_argument("--D", type=_int_list, default=S)
    a.add_argument("--seed", type=int, default=S)
    a.add_argument("--min-c", dest="min_c", type=float, default=S)
    a.add_argument("--identity-ensemble", dest="identity_ensemble", action="store_true", default=S)
    a.add_argument("--mode", choices=["auto", "dense", "iterative"], default=S)

    c = sub.add_parser("c2h", help="circuit-to-Hamiltonian experiments")
    csub = c.add_subparsers(dest="sub", required=True)
    k = csub.add_parser("kitaev", parents=[common])
    k.add_argument("--T", type=_int_list, default=S)
    k.add_argument("--D", type=int, default=S)
    k.add_argument("--mode", choices=["auto", "dense", "iterative"], default=S)
    h = csub.add_parser("hprime", parents=[common])
    h.add_argument("--D", type=int, default=S)
    h.add_argument("--T", type=int, default=S)
    h.add_argument("--seed", type=int, default=S)
    h.add_argument("--min-c", dest="min_c", type=float, default=S)
    h.add_argument("--mode", choices=["auto", "dense", "iterative"], default=S)
    w = csub.add_parser("twoclock", parents=[common])
    w.add_argument("--D", type=int, default=S)
    w.add_argument("--d", type=int, default=S)
    w.add_argument("--seed", type=int, default=S)
    w.add_argument("--min-c", dest="min_c", type=float, default=S)
    w.add_argument("--kind", choices=["haar", "haar-with-identity"], default=S)
    w.add_argument("--mode", choices=["auto", "dense", "iterative"], default=S)
    b = csub.add_parser("entropy-bound", parents=[common])
    b.add_argument("--eps", type=float, default=S)
    b.add_argument("--D", type=int, default=S)
    return p


def resolve_config(command: str, given: dict) -> dict:
    """Merge built-in defaults, the optional config file and explicit flags."""
    defaults = {**DEFAULTS[command], **COMMON}
    file_cfg = {}
    path = given.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ParameterError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ParameterError(f"unknown config keys for {command}: {unknown}")
    cfg = {**defaults, **file_cfg, **given}
    for key in ("D", "T"):
        if key in cfg and isinstance(DEFAULTS[command].get(key), list) and not isinstance(cfg[key], list):
            cfg[key] = _int_list(cfg[key])
    if cfg["workers"] < 1:
        raise ParameterError("workers must be >= 1")
    return cfg


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- commands ----------------------------------------------------------------------------

def cmd_expander(cfg):
    if cfg["kind"] == "margulis":
        n = cfg["n"] if cfg["n"] is not None else math.isqrt(cfg["D"])
        cfg["D"], cfg["d"], cfg["n"] = n * n, 8, n
        ens = expanders.build_ensemble("margulis", n * n, 8)
    else:
        ens = expanders.build_ensemble(cfg["kind"], cfg["D"], cfg["d"], seed=cfg["seed"])
    rep = expanders.expander_lambda(ens, mode=cfg["mode"], seed=cfg["seed"] or 0)
    result = {"D": ens.D, "d": ens.d, "kind": ens.kind, **rep.as_dict()}
    ok = rep.fixed_point_residual <= 1e-12
    return result, [result], ok


def _summary(completeness, soundness, bound, resources):
    return {"completeness": completeness, "worst_soundness": soundness, "soundness_bound": bound,
            **resources}


def cmd_eprtest(cfg):
    variant = cfg["variant"]
    extra_states = [serialize.load_state(p) for p in cfg["state"]]
    if variant == "shared-randomness":
        n = cfg["n"]
        ens = expanders.build_ensemble("margulis", n * n, 8)
        cfg["D"], cfg["d"] = n * n, 8
        run = epr.run_shared_randomness
        sound, worst = epr.max_orthogonal_accept(epr.shared_randomness_effect(ens), ens.D)
        bound = 0.64
        ok_sound = sound <= bound + 1e-9
    else:
        ens = expanders.build_ensemble(cfg["kind"], cfg["D"], cfg["d"], seed=cfg["seed"])
        lam = expanders.expander_lambda(ens, mode=cfg["mode"]).lambda_
        k = cfg["k"] if variant == "iterated" else 1
        runners = {
            "basic": epr.run_basic,
            "classical": epr.run_classical,
            "two-ancilla": epr.run_two_ancilla,
            "iterated": lambda e, s: epr.run_iterated(e, k, s),
        }
        run = runners[variant]
        target = expanders.product_ensemble(ens, k) if k > 1 else ens
        worst = epr.worst_orthogonal_state(target, mode=cfg["mode"])
        sound = None
        bound = lam ** (2 * k)
        ok_sound = True
    phi = linalg.maximally_entangled(ens.D)
    t_phi = run(ens, phi)
    t_worst = run(ens, worst)
    sound = t_worst.accept_prob if sound is None else sound
    if variant != "shared-randomness":
        ok_sound = sound <= bound + 1e-9
    transcripts = {"phi": t_phi.as_dict(), "worst_orthogonal": t_worst.as_dict()}
    for key, tr in (("phi", t_phi), ("worst_orthogonal", t_worst)):
        transcripts[key]["sampled_accepts"] = int(epr.sample_outcome(tr, shots=100, seed=cfg["seed"]).sum())
    for i, st in enumerate(extra_states):
        transcripts[f"state_{i + 1}"] = run(ens, st).as_dict()
    if variant == "iterated" and cfg["k"] > 1:
        single = epr.run_basic(expanders.product_ensemble(ens, cfg["k"]), worst)
        transcripts["product_cross_check"] = {"accept_prob": single.accept_prob,
                                              "difference": abs(single.accept_prob - t_worst.accept_prob)}
    summary = _summary(t_phi.accept_prob, sound, bound, t_phi.as_dict()["resources"])
    ok = abs(t_phi.accept_prob - 1) <= 1e-12 and ok_sound
    return {"summary": summary, "transcripts": transcripts}, [summary], ok


def _arealaw_row(D, cfg):
    if cfg["identity_ensemble"]:
        ens = expanders.identity_ensemble(D, 3)
        rep = expanders.expander_lambda(ens)
    else:
        ens, rep = expanders.certified_ensemble(D, 3, seed=cfg["seed"], min_c=cfg["min_c"])
    sr = arealaw.certify_h4(ens, rep, mode=cfg["mode"])
    row = {
        "D": D, "seed": ens.seed, "lambda": rep.lambda_, "c": rep.c, "E0": sr.ground_energy,
        "gap": sr.gap, "entropy": sr.extras.get("entropy"), **sr.certified,
    }
    return row, sr


AREALAW_COLUMNS = ["D", "seed", "lambda", "c", "E0", "gap", "entropy", "frustration_free", "unique_ground",
                   "gap_at_least"]


def cmd_arealaw(cfg):
    out = _map(lambda D: _arealaw_row(D, cfg), list(cfg["D"]), cfg["workers"])
    rows = [r for r, _ in out]
    reports = [{"D": r["D"], **sr.as_dict()} for r, sr in out]
    ok = True
    if not cfg["identity_ensemble"]:
        for r in rows:
            ok &= r["frustration_free"] and r["unique_ground"] and r["gap_at_least"]
            ok &= abs(r["entropy"] - math.log2(r["D"])) <= 1e-8
    for rep in reports:
        serialize.validate(rep, "spectral")
    return {"rows": rows, "reports": reports}, rows, bool(ok)


def cmd_kitaev(cfg):
    Ts = list(cfg["T"])
    if len(Ts) < 2:
        raise ParameterError("gap fit needs at least two values of T")
    rows = _map(lambda T: circuit.kitaev_gap(T, D=cfg["D"], mode=cfg["mode"]), Ts, cfg["workers"])
    slope = circuit.gap_slope(rows)
    ff = all(r["E0"] <= 1e-10 for r in rows)
    ok = ff and -2.5 <= slope <= -1.5
    return {"rows": rows, "slope": slope, "frustration_free": ff}, rows, ok


def cmd_hprime(cfg):
    ens, rep = expanders.certified_ensemble(cfg["D"], 3, seed=cfg["seed"], min_c=cfg["min_c"])
    sr = circuit.certify_hprime(ens, cfg["T"], rep, mode=cfg["mode"])
    result = {"seed_used": ens.seed, **sr.as_dict()}
    serialize.validate(result, "spectral")
    return result, [{"D": cfg["D"], "T": cfg["T"], "E0": sr.ground_energy, "gap": sr.gap,
                     "entropy": sr.extras.get("entropy"), **sr.certified}], all(sr.certified.values())


def cmd_twoclock(cfg):
    ens, _ = expanders.certified_ensemble(cfg["D"], cfg["d"], seed=cfg["seed"], min_c=cfg["min_c"], kind=cfg["kind"])
    sr = circuit.certify_two_clock(ens, mode=cfg["mode"])
    result = {"seed_used": ens.seed, **sr.as_dict()}
    serialize.validate(result, "spectral")
    ok = all(sr.certified.values()) and abs(sr.extras.get("entropy", -1) - sr.extras["expected_entropy"]) <= 1e-8
    return result, [{"D": ens.D, "d": ens.d, "entropy": sr.extras.get("entropy"), **sr.certified}], ok


def cmd_entropy_bound(cfg):
    b = circuit.entropy_lower_bound(cfg["eps"], cfg["D"])
    result = {"fidelity_deficit": b.fidelity_deficit, "D": b.D, "kappa": b.kappa, "bound_bits": b.bound_bits}
    return result, [result], True


COMMANDS = {
    "expander": cmd_expander,
    "eprtest": cmd_eprtest,
    "arealaw": cmd_arealaw,
    "c2h.kitaev": cmd_kitaev,
    "c2h.hprime": cmd_hprime,
    "c2h.twoclock": cmd_twoclock,
    "c2h.entropy-bound": cmd_entropy_bound,
}


def run(command: str, cfg: dict):
    """Execute one command; returns (report dict, csv rows, ok)."""
    start = time.perf_counter()
    result, rows, ok = COMMANDS[command](cfg)
    report = {
        "tool": "qexlab",
        "version": __version__,
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items()) if k not in ("out", "timing")},
        "seed": cfg.get("seed"),
        "prng": serialize.PRNG,
        "ok": bool(ok),
        "result": result,
    }
    if cfg.get("timing"):
        report["duration_s"] = time.perf_counter() - start
    serialize.validate(report, "report")
    return report, rows, ok


def _output_path(command: str, cfg: dict):
    if cfg.get("out"):
        return cfg["out"]
    directory = os.environ.get(OUTPUT_ENV)
    if directory:
        return os.path.join(directory, f"{command.replace('.', '-')}.{cfg['format']}")
    return None


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    given = vars(args)
    command = given.pop("command")
    if command == "c2h":
        command = f"c2h.{given.pop('sub')}"
    try:
        cfg = resolve_config(command, given)
        report, rows, ok = run(command, cfg)
        if cfg["format"] == "csv":
            columns = AREALAW_COLUMNS if command == "arealaw" else list(rows[0].keys())
            text = serialize.to_csv(rows, columns)
        else:
            text = serialize.dumps(report)
        path = _output_path(command, cfg)
        if path is None:
            sys.stdout.write(text)
        else:
            serialize.atomic_write(path, text)
    except ConvergenceError as exc:
        print(f"qexlab: no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (QexlabError, ValueError, KeyError, TypeError) as exc:
        print(f"qexlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not ok:
        print(f"qexlab: {command}: a certified property did not hold", file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
