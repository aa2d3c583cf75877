"""Command-line experiment runner.

Every subcommand builds its rows independently (one norm and centralizer
per row, so solver caches are never shared between threads), writes
``report.json`` plus a CSV table into ``--out`` and, with ``--plot``, an
SVG line plot.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, acceptance, report
from .centralizers import (BlockDerivation, KaltonPeck, LorentzDerivation, SolverConfig,
                           derivation_from_decomposition, lozanovskii_decompose)
from .centralizers import from_descriptor as centralizer_from
from .centralizers import parse_centralizer
from .diagnostics import (DistanceConfig, SamplerConfig, Strategy, analytic_parameter,
                          centralizer_constant, kp_lp_track, kp_nabla_closed_form, nabla,
                          parameter_M, parameter_m, psi_lower_track, psi_upper_scan,
                          quasi_linearity_constant, triviality_distance)
from .measure import AtomSpace, DisjointFamily
from .spaces import LpNorm
from .spaces import from_descriptor as norm_from
from .spaces import parse_norm

log = logging.getLogger("twistlab")


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "space": "lp:2",
    "centralizer": "kp",
    "n": "2,4,8,16",
    "atoms": None,
    "weights": "counting",
    "seed": 0,
    "budget": 20,
    "samples": None,
    "couple": "l1,linf",
    "theta": 0.5,
    "tolerance": 1e-8,
    "log_base": "e",
    "out": "twistlab-out",
    "plot": False,
    "only": None,
}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def parse_grid(text) -> list:
    """``"2,4,8"``, ``"1..10"`` or a mix such as ``"1..4,8,16"``; lists pass through."""
    if isinstance(text, (list, tuple)):
        vals = [int(v) for v in text]
    else:
        vals = []
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                a, b = part.split("..")
                vals.extend(range(int(a), int(b) + 1))
            else:
                vals.append(int(part))
    if not vals or min(vals) < 1:
        raise ConfigError(f"bad n-grid {text!r}: need positive integers")
    return sorted(set(vals))


def _norm_desc(v):
    return v if isinstance(v, dict) else parse_norm(str(v))


def _cent_desc(v):
    return v if isinstance(v, dict) else parse_centralizer(str(v))


def _couple(text):
    alias = {"l1": "lp:1", "linf": "lp:inf", "l2": "lp:2"}
    parts = text if isinstance(text, (list, tuple)) else str(text).split(",")
    if len(parts) != 2:
        raise ConfigError(f"a couple needs two spaces, got {text!r}")
    return [_norm_desc(alias.get(str(p).strip().lower(), p) if not isinstance(p, dict) else p)
            for p in parts]


def build_space(atoms: int, weights) -> AtomSpace:
    w = str(weights)
    if w == "counting":
        return AtomSpace.counting(atoms)
    if w == "uniform":
        return AtomSpace.uniform(atoms)
    if w.startswith("mesh:"):
        lv, per, ratio = w[5:].split(",")
        return AtomSpace.geometric_mesh(int(lv), int(per), float(ratio))
    raise ConfigError(f"unknown weights {weights!r} (counting, uniform, mesh:levels,per,ratio)")


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicitly given flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            cfg[k] = v
    cfg["command"] = command
    try:
        cfg["n"] = parse_grid(cfg["n"])
        cfg["space"] = _norm_desc(cfg["space"])
        cfg["centralizer"] = _cent_desc(cfg["centralizer"])
        cfg["couple"] = _couple(cfg["couple"])
        cfg["theta"] = float(cfg["theta"])
        cfg["seed"] = int(cfg["seed"])
        cfg["budget"] = int(cfg["budget"])
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["log_base"] not in ("e", "2", "10", 2, 10):
        raise ConfigError("log_base must be e, 2 or 10")
    cfg["log_base"] = str(cfg["log_base"])
    if cfg["budget"] < 1:
        raise ConfigError("budget must be at least 1")
    return cfg


def _log(x, base):
    return math.log(x) if base == "e" else math.log(x, float(base))


# ---------------------------------------------------------------------------
# per-row builders
# ---------------------------------------------------------------------------

def _block_total(desc):
    return sum(desc["params"]["block_sizes"]) if desc["kind"] in ("lp_sum_l2", "block_derivation") else None


def _atoms(cfg, default):
    fixed = _block_total(cfg["space"]) or _block_total(cfg["centralizer"])
    w = str(cfg["weights"])
    if w.startswith("mesh:"):
        lv, per, _ = w[5:].split(",")
        return int(lv) * int(per)
    if cfg["atoms"] is not None:
        return int(cfg["atoms"])
    if fixed:
        return fixed
    if cfg["space"]["kind"] == "schreier_dual":
        return min(default, int(cfg["space"]["params"].get("cap", 16)))
    return default


def _setup(cfg, atoms):
    space = build_space(atoms, cfg["weights"])
    cdesc = cfg["centralizer"]
    omega = centralizer_from(cdesc, space, norm=None) if cdesc["kind"] in (
        "lorentz_derivation", "block_derivation", "zero", "kappa") else None
    # derivations come with their own interpolation space; use it unless the
    # space was given explicitly as something else
    if isinstance(omega, (LorentzDerivation, BlockDerivation)) and cfg.get("_space_default", True):
        norm = omega.norm
    else:
        norm = norm_from(cfg["space"], space)
    if omega is None:
        omega = centralizer_from(cdesc, space, norm=norm)
    return space, norm, omega


def _check_grid(cfg, atoms):
    big = [n for n in cfg["n"] if n > atoms]
    if big:
        raise ConfigError(f"n-grid values {big} exceed the {atoms} atoms available")


def _kp_lp(cfg):
    """``p`` when the experiment is plain Kalton-Peck on an ``L_p`` space."""
    if cfg["centralizer"]["kind"] == "kalton_peck" and cfg["space"]["kind"] == "lp":
        return _as_p(cfg["space"]["params"]["p"])
    return None


def _as_p(v):
    return math.inf if str(v).lower() in ("inf", "infinity") else float(v)


def row_nabla(n, cfg):
    atoms = _atoms(cfg, max(cfg["n"]))
    space, norm, omega = _setup(cfg, atoms)
    fam = DisjointFamily.atoms(space, range(n), normalize=norm)
    samples = int(cfg["samples"] or 4096)
    r = nabla(omega, norm, fam, mode="auto", samples=samples, seed=cfg["seed"])
    row = {"n": n, "nabla": r.value, "mode": r.mode, "stderr": r.stderr}
    p = _kp_lp(cfg)
    if p is not None and space.is_counting:
        cf = kp_nabla_closed_form(p, n)
        row["closed_form"] = cf
        row["abs_error"] = abs(r.value - cf)
    return row


def row_params(n, cfg):
    atoms = _atoms(cfg, max(2 * max(cfg["n"]), 8))
    space, norm, _ = _setup(cfg, atoms)
    strat = Strategy(seed=cfg["seed"])
    rM, rm = parameter_M(norm, n, strat), parameter_m(norm, n, strat)
    row = {"n": n, "M": rM.value, "m": rm.value, "M_witness": rM.label, "m_witness": rm.label}
    kind, prm = cfg["space"]["kind"], cfg["space"]["params"]
    analytic = None
    if kind == "lp":
        analytic = analytic_parameter("lp", p=_as_p(prm["p"]))(n)
    elif kind == "lorentz":
        analytic = analytic_parameter("lorentz", p=prm["p"], q=prm["q"])(n)
    elif kind == "schreier":
        analytic = float(n)
    elif kind == "schreier_dual" and n > 1:
        analytic = _log(n, cfg["log_base"])
    if analytic is not None:
        row["M_analytic"] = analytic
        row["M_over_analytic"] = rM.value / analytic
    return row


def row_distance(n, cfg):
    atoms = _atoms(cfg, max(cfg["n"]))
    space, norm, omega = _setup(cfg, atoms)
    fam = DisjointFamily.atoms(space, range(n), normalize=norm)
    est = triviality_distance(omega, norm, fam, DistanceConfig(seed=cfg["seed"]))
    return {"n": n, "distance": est.lower_probe, "flagged": est.flagged,
            "probes": est.solver_trace["probes"]}


def lower_tracks(cfg, n):
    """``(general, literal)`` lower tracks where analytic parameters are known."""
    cd, sd = cfg["centralizer"], cfg["space"]
    if n < 2:
        return None, None
    if cd["kind"] == "kalton_peck" and sd["kind"] == "lp":
        p = _as_p(sd["params"]["p"])
        if not 1 < p < math.inf:
            return None, None
        th = 1.0 - 1.0 / p
        r = n ** (1.0 / p)
        # Omega_theta from (L_1, L_inf) is -p K_p
        return psi_lower_track(n, 1.0, r, r, th, n, scale=p), kp_lp_track(n, p)
    if (cd["kind"] == "kalton_peck" and sd["kind"] == "pconvexification"
            and sd["params"]["base"]["kind"] == "schreier" and n > 2):
        p = float(sd["params"]["p"])
        m = analytic_parameter("schreier_m")(n) ** (1 / p)
        return psi_lower_track(1.0, n, m, n ** (1 / p), 1 / p, n, scale=p), None
    if cd["kind"] == "lorentz_derivation":
        q = cd["params"]
        L = LorentzDerivation(AtomSpace.counting(1), q["p0"], q["q0"], q["p1"], q["q1"], q["theta"])
        M0 = analytic_parameter("lorentz", p=q["p0"], q=q["q0"])
        M1 = analytic_parameter("lorentz", p=q["p1"], q=q["q1"])
        Mt = analytic_parameter("lorentz", p=L.p, q=L.q)
        return psi_lower_track(M0, M1, Mt, Mt, float(q["theta"]), n), None
    return None, None


def row_psi(n, cfg):
    atoms = _atoms(cfg, 2 * max(cfg["n"]))
    space, norm, omega = _setup(cfg, atoms)
    scan = psi_upper_scan(omega, norm, n, budget=cfg["budget"], seed=cfg["seed"])
    general, literal = lower_tracks(cfg, n)
    return {"n": n, "psi_upper": scan.value, "psi_lower": general, "psi_lower_literal": literal,
            "consistent": None if general is None else bool(general <= scan.value)}


def row_decompose(k, cfg):
    atoms = int(cfg["atoms"] or 64)
    space = build_space(atoms, cfg["weights"])
    n0, n1 = (norm_from(d, space) for d in cfg["couple"])
    th = cfg["theta"]
    rng = np.random.default_rng([cfg["seed"], k])
    x = rng.uniform(0.1, 1.0, space.n_atoms)
    dec = lozanovskii_decompose(n0, n1, th, x, SolverConfig(tol=float(cfg["tolerance"])))
    omega = derivation_from_decomposition(dec, x)
    row = {"index": k, "achieved_value": dec.achieved_value, "iterations": dec.iterations,
           "converged": dec.converged, "epsilon": dec.epsilon}
    if isinstance(n0, LpNorm) and isinstance(n1, LpNorm):
        inv0 = 0.0 if math.isinf(n0.p) else 1.0 / n0.p
        inv1 = 0.0 if math.isinf(n1.p) else 1.0 / n1.p
        p = 1.0 / ((1 - th) * inv0 + th * inv1)
        norm = LpNorm(space, p)
        closed = (p * inv1 - p * inv0) * KaltonPeck(norm)(x)
        scale = max(float(np.abs(closed).max()), 1e-300)
        row.update({"closed_value": norm(x),
                    "value_rel_error": abs(dec.achieved_value - norm(x)) / norm(x),
                    "derivation_residual": float(np.abs(omega - closed).max()) / scale})
    return row


def row_constants(_, cfg):
    atoms = _atoms(cfg, 32)
    space, norm, omega = _setup(cfg, atoms)
    sc = SamplerConfig(samples=int(cfg["samples"] or 10_000), seed=cfg["seed"])
    return {"atoms": atoms, "quasi_linearity": quasi_linearity_constant(omega, norm, sc),
            "centralizer": centralizer_constant(omega, norm, sc),
            "samples": sc.samples, "seed": sc.seed}


ROWS = {"nabla": row_nabla, "params": row_params, "distance": row_distance,
        "psi": row_psi, "decompose": row_decompose, "constants": row_constants}

PLOTS = {"nabla": ["nabla", "closed_form"], "params": ["M", "m", "M_analytic"],
         "distance": ["distance"], "psi": ["psi_upper", "psi_lower", "psi_lower_literal"]}


def _threads():
    try:
        return max(1, int(os.environ.get("TWISTLAB_THREADS", "1")))
    except ValueError:
        return 1


def run_rows(fn, keys, cfg):
    """Row-parallel map; a failing row is recorded and the run continues."""

    def safe(k):
        try:
            return fn(k, cfg)
        except ConfigError:
            raise
        except Exception as exc:  # noqa: BLE001 - per-row failure record
            log.warning("row %s failed: %s", k, exc)
            return {"key": k, "error": f"{type(exc).__name__}: {exc}"}

    workers = min(_threads(), len(keys))
    if workers <= 1:
        return [safe(k) for k in keys]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(safe, keys))


def regime(cfg):
    if cfg["space"]["kind"] == "lp":
        return "L_p: boundedness on disjoint spans is equivalent to the parameter condition"
    return "general lattice: upper/lower estimates give one-sided implications only"


def execute(command, cfg) -> tuple[dict, list]:
    if command == "decompose":
        keys = list(range(int(cfg["samples"] or 10)))
    elif command == "constants":
        keys = [0]
    else:
        keys = list(cfg["n"])
        default = {"nabla": max(keys), "params": max(2 * max(keys), 8), "distance": max(keys),
                   "psi": 2 * max(keys)}[command]
        _check_grid(cfg, _atoms(cfg, default))
    rows = run_rows(ROWS[command], keys, cfg)
    body = {"rows": rows, "failures": sum(1 for r in rows if "error" in r)}
    if command == "params":
        body["regime"] = regime(cfg)
    return body, rows


def write_outputs(command, cfg, body, rows):
    out = cfg["out"]
    public = {k: v for k, v in cfg.items() if not k.startswith("_") and k not in ("out", "plot")}
    env = report.envelope(command, public, body)
    report.write_json(os.path.join(out, "report.json"), env)
    report.write_csv(os.path.join(out, f"{command}.csv"), rows)
    if cfg["plot"] and command in PLOTS:
        series = {}
        for col in PLOTS[command]:
            pts = [(r["n"], r[col]) for r in rows if r.get(col) is not None and "n" in r]
            if pts:
                series[col] = ([a for a, _ in pts], [b for _, b in pts])
        report.write_svg(os.path.join(out, f"{command}.svg"), series,
                         title=f"{command}: n vs value", ylabel=command)
    return env


def cmd_suite(cfg):
    only = None
    if cfg["only"]:
        only = set(parse_grid(cfg["only"]))
    results = acceptance.run_all(only=only, echo=print)
    body = {"criteria": [{k: v for k, v in r.to_dict().items() if k != "runtime"} for r in results],
            "passed": all(r.passed for r in results)}
    out = cfg["out"]
    public = {"command": "suite", "only": sorted(only) if only else None}
    report.write_json(os.path.join(out, "report.json"), report.envelope("suite", public, body))
    report.write_csv(os.path.join(out, "suite.csv"),
                     [{"number": r.number, "name": r.name, "passed": r.passed,
                       "runtime": round(r.runtime, 3), "limit": r.limit} for r in results])
    return 0 if body["passed"] else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="twistlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"twistlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with experiment settings; flags override it")
        p.add_argument("--out", help="output directory (default twistlab-out)")
        p.add_argument("--plot", action="store_true", default=None, help="also write an SVG plot")
        p.add_argument("--seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true")

    def space_opts(p):
        p.add_argument("--space", help="norm, e.g. lp:2, lorentz:2,1, schreier, pconv:2:schreier")
        p.add_argument("--centralizer", help="kp, kp:3, kappa, zero, lorentz:p0,q0,p1,q1,th, block:p0,p1,th:sizes")
        p.add_argument("--atoms", type=int, help="number of atoms (default depends on the command)")
        p.add_argument("--weights", help="counting, uniform or mesh:levels,per_level,ratio")
        p.add_argument("--n", help="grid such as 2,4,8 or 1..10")

    for name, helptext in (("nabla", "sign averages of the deviation"),
                           ("params", "growth parameters M(n) and m(n)"),
                           ("distance", "distance to linear maps on canonical families"),
                           ("psi", "upper scan and lower tracks for psi(n)"),
                           ("constants", "empirical quasi-linearity and centralizer constants")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        space_opts(p)
        if name in ("nabla", "constants"):
            p.add_argument("--samples", type=int, help="Monte-Carlo samples")
        if name == "psi":
            p.add_argument("--budget", type=int, help="random families per n")
        if name == "params":
            p.add_argument("--log-base", dest="log_base", help="e, 2 or 10")

    p = sub.add_parser("decompose", help="numerical Lozanovskii factorization on random vectors")
    common(p)
    p.add_argument("--couple", help="two spaces, e.g. l1,linf or lp:1.5,lp:4")
    p.add_argument("--theta", type=float)
    p.add_argument("--atoms", type=int)
    p.add_argument("--weights")
    p.add_argument("--samples", type=int, help="number of random vectors (default 10)")

    p = sub.add_parser("suite", help="run the acceptance battery")
    p.add_argument("--out")
    p.add_argument("--only", help="criterion numbers, e.g. 1,2,6")
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args.command, args)
        cfg["_space_default"] = getattr(args, "space", None) is None and not _config_has(args, "space")
        if args.command == "suite":
            return cmd_suite(cfg)
        body, rows = execute(args.command, cfg)
    except ConfigError as exc:
        print(f"twistlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    env = write_outputs(args.command, cfg, body, rows)
    print(f"wrote {os.path.join(cfg['out'], 'report.json')} ({len(rows)} rows, "
          f"{env['failures']} failed, config {env['config_hash'][:12]})")
    return 0


def _config_has(args, key):
    path = getattr(args, "config", None)
    if not path:
        return False
    try:
        with open(path) as fh:
            return key in json.load(fh)
    except (OSError, json.JSONDecodeError):
        return False


if __name__ == "__main__":
    sys.exit(main())
