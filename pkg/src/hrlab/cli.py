"""Command-line entry point: ``hrlab <subcommand> [flags]``.

Settings come from three layers, later ones winning: built-in defaults, an
optional JSON file given with ``--config``, and command-line flags. The only
environment variable consulted is HRLAB_THREADS (worker threads for sweeps).

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence,
1 anything unexpected (including a contradiction reported by the probe).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .constants import constants_report
from .geometry import domain_from_config
from .lemmas import DEFAULT_SEED, fuzz_lemmas
from .quadrature import QuadratureError, QuadratureSpec
from .sharpness import DEFAULT_EPS, sharpness_sweep
from .solver import (ContradictionFound, NonConvergence, ProblemSpec, RadialMesh, SolverError,
                     direct_minimize, mountain_pass, nonexistence_probe)
from .verifier import INEQUALITIES, NotApplicable, applicable, default_fields

CSV_VERSION = 1
JSON_SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAILURE, EXIT_INVALID, EXIT_NONCONVERGENCE = 0, 1, 2, 3

DEFAULTS = {
    "constants": dict(p=2.0, N=2, format="json"),
    "sharpness-sweep": dict(domain="ball", N=2, p=2.0, eps=list(DEFAULT_EPS), tube_radius=None,
                            format="csv"),
    "verify-inequality": dict(domain="ball", N=2, p=2.0, inequality="all", field="all",
                              include_sequence=False, format="csv"),
    "solve": dict(N=3, p=2.5, q=1.5, lam=0.0, nodes=400, grading=20.0, tol=1e-10, mode="auto",
                  format="json"),
    "pohozaev": dict(N=3, p=2.5, q=1.5, lam=0.0, nodes=400, grading=20.0, tol=1e-10, mode="auto",
                     refine=1, format="json"),
    "lemma-fuzz": dict(p=[1.3, 2.0, 3.0, 4.7], samples=100_000, seed=DEFAULT_SEED, format="csv"),
}
COMMON = dict(out=None, profile=None, quadrature=None, radius=None, center=None, r_inner=None,
              r_outer=None, lo=None, hi=None)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing


def _float_list(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _domain_flags(sp):
    g = sp.add_argument_group("domain")
    g.add_argument("--domain", help="ball | box | annulus | exterior-ball")
    g.add_argument("--N", type=int, help="space dimension")
    g.add_argument("--radius", type=float)
    g.add_argument("--center", type=_float_list)
    g.add_argument("--r-inner", dest="r_inner", type=float)
    g.add_argument("--r-outer", dest="r_outer", type=float)
    g.add_argument("--lo", type=_float_list, help="box lower corner")
    g.add_argument("--hi", type=_float_list, help="box upper corner")


def _problem_flags(sp):
    sp.add_argument("--N", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--q", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--nodes", type=int, help="radial mesh size")
    sp.add_argument("--grading", type=float, help="ratio of largest to smallest cell")
    sp.add_argument("--tol", type=float, help="residual tolerance")
    sp.add_argument("--mode", choices=["auto", "minimize", "mountain-pass", "probe"])
    sp.add_argument("--profile", help="write the radial profile CSV here")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hrlab", description="Hardy-Rellich numerical lab",
                 argument_default=argparse.SUPPRESS)
    ap.add_argument("--version", action="version", version=f"hrlab {__version__}")
    ap.add_argument("--config", help="JSON settings file (flags override it)")
    sub = ap.add_subparsers(dest="subcommand", parser_class=_Parser)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON settings file (flags override it)")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=["csv", "json"])
        return sp

    sp = add("constants", "closed-form constants for (p, N)")
    sp.add_argument("--p", type=float)
    sp.add_argument("--N", type=int)

    sp = add("sharpness-sweep", "Rayleigh quotients of the minimising sequence")
    _domain_flags(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--eps", type=_float_list, help="strictly decreasing list, e.g. 0.2,0.1,0.05")
    sp.add_argument("--tube-radius", dest="tube_radius", type=float)

    sp = add("verify-inequality", "slack of the weighted inequalities on test fields")
    _domain_flags(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--inequality", help="one of %s, or all" % ", ".join(INEQUALITIES))
    sp.add_argument("--field", help="test field name, or all")
    sp.add_argument("--include-sequence", dest="include_sequence", action="store_true",
                    help="also test the minimising-sequence field u_eps(0.1)")

    sp = add("solve", "critical point of the radial energy on the unit ball")
    _problem_flags(sp)

    sp = add("pohozaev", "Pohozaev balance of a computed solution under mesh refinement")
    _problem_flags(sp)
    sp.add_argument("--refine", type=int, help="number of mesh doublings")

    sp = add("lemma-fuzz", "random search for violations of the vector inequalities")
    sp.add_argument("--p", type=_float_list, help="comma-separated exponents")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--seed", type=int)
    return ap


def _load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _normalise_keys(d):
    alias = {"lambda": "lam"}
    return {alias.get(k, k.replace("-", "_")): v for k, v in d.items()}


def _flatten_domain(d):
    if isinstance(d.get("domain"), dict):
        dom = _normalise_keys(d.pop("domain"))
        d["domain"] = dom.pop("kind", "ball")
        d.update(dom)
    return d


def resolve_settings(argv=None) -> dict:
    """Merge defaults, config file and flags into a single settings dict."""
    args = vars(build_parser().parse_args(argv))
    cfg = _load_config(args["config"]) if "config" in args else {}
    sub = args.get("subcommand") or cfg.get("subcommand")
    if sub not in DEFAULTS:
        raise ConfigError("a subcommand is required: " + " | ".join(DEFAULTS))
    settings = dict(COMMON, **DEFAULTS[sub])
    # top-level keys may be shared by several subcommands; a section named after
    # the subcommand applies to it alone and is checked strictly
    shared = _flatten_domain(_normalise_keys(
        {k: v for k, v in cfg.items() if k not in DEFAULTS and k != "subcommand"}))
    section = cfg.get(sub, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section {sub!r} must be an object")
    section = _flatten_domain(_normalise_keys(section))
    known_anywhere = set(COMMON).union(*DEFAULTS.values())
    unknown = sorted((set(shared) - known_anywhere) | (set(section) - set(settings)))
    if unknown:
        raise ConfigError(f"unknown config keys for {sub}: {', '.join(unknown)}")
    settings.update({k: v for k, v in shared.items() if k in settings})
    settings.update(section)
    settings.update({k: v for k, v in args.items() if k not in ("config", "subcommand")})
    settings["subcommand"] = sub
    list_key = {"sharpness-sweep": "eps", "lemma-fuzz": "p"}.get(sub)
    if list_key and isinstance(settings[list_key], (int, float)):
        settings[list_key] = [float(settings[list_key])]
    return settings


# ---------------------------------------------------------------------------
# output


def _plain(obj):
    """JSON-ready copy with numpy scalars unwrapped and non-finite floats spelled out."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return obj


def render_json(payload, table: str) -> str:
    doc = {"schema": f"hrlab-json v{JSON_SCHEMA_VERSION}", "table": table, "version": __version__}
    doc.update(_plain(payload))
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_csv(rows: list[dict], columns: list[str], table: str) -> str:
    buf = io.StringIO()
    buf.write(f"# hrlab-csv v{CSV_VERSION} table={table} columns={','.join(columns)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _cell(v):
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _table(rows, columns, table, fmt, extra=None):
    if fmt == "json":
        return render_json(dict(rows=[{c: r[c] for c in columns} for r in rows], **(extra or {})),
                           table)
    return render_csv(rows, columns, table)


# ---------------------------------------------------------------------------
# subcommands


def _domain(s):
    cfg = {"kind": s["domain"], "N": s["N"]}
    kind = str(s["domain"]).lower()
    if kind == "box" and s["lo"] is None and s["hi"] is None and s["N"] == 2:
        cfg.update(lo=(0.0, 0.0), hi=(2.0, 1.0))  # the shipped box test fields assume 2:1
    for k in ("radius", "center", "r_inner", "r_outer", "lo", "hi"):
        if s[k] is not None:
            cfg[k] = s[k]
    if cfg.get("center") is not None and len(cfg["center"]) != s["N"]:
        raise ConfigError("center must have N coordinates")
    return domain_from_config(cfg)


def _quadrature(s):
    q = s["quadrature"]
    if q is None:
        return None
    if not isinstance(q, dict):
        raise ConfigError("quadrature must be an object of QuadratureSpec fields")
    try:
        return QuadratureSpec(**q)
    except TypeError as exc:
        raise ConfigError(f"bad quadrature settings: {exc}")


def cmd_constants(s):
    rep = constants_report(float(s["p"]), int(s["N"])).as_dict()
    if s["format"] == "csv":
        rows = [dict(key=k, value=v) for k, v in sorted(rep.items())]
        return render_csv(rows, ["key", "value"], "constants")
    return render_json(rep, "constants")


SWEEP_COLUMNS = ["eps", "Q_H", "Q_Lap", "gap", "Q_H_error", "Q_Lap_error", "decreasing"]


def cmd_sharpness(s):
    dom = _domain(s)
    rows = sharpness_sweep(dom, float(s["p"]), s["eps"], _quadrature(s), s["tube_radius"])
    return _table([asdict(r) for r in rows], SWEEP_COLUMNS, "sharpness-sweep", s["format"],
                  dict(domain=repr(dom), p=s["p"]))


VERIFY_COLUMNS = ["inequality", "domain", "field", "p", "lhs", "rhs", "slack", "quad_error", "holds"]


def cmd_verify(s):
    dom = _domain(s)
    p = float(s["p"])
    fields = default_fields(dom, p, include_sequence=bool(s["include_sequence"]))
    if s["field"] != "all":
        fields = [f for f in fields if f.name == s["field"]]
        if not fields:
            names = ", ".join(f.name for f in default_fields(dom, p))
            raise ConfigError(f"unknown field {s['field']!r}; available: {names}")
    if s["inequality"] == "all":
        names = list(INEQUALITIES)
    elif s["inequality"] in INEQUALITIES:
        names = [s["inequality"]]
    else:
        raise ConfigError(f"unknown inequality {s['inequality']!r}; "
                          f"choose from {', '.join(INEQUALITIES)}")
    spec = _quadrature(s)
    rows = []
    for fld in fields:
        for name in names:
            if not applicable(name, dom, fld, p):
                if len(names) == 1 and len(fields) == 1:
                    raise NotApplicable(f"{name} is not checked on {dom!r} with field {fld.name}")
                continue
            rep = INEQUALITIES[name](dom, fld, p, spec)
            rows.append(dict(inequality=name, domain=rep.domain, field=rep.field, p=rep.p,
                             lhs=rep.lhs, rhs=rep.rhs, slack=rep.slack, quad_error=rep.quad_error,
                             holds=rep.holds))
    if not rows:
        raise NotApplicable(f"no requested inequality applies on {dom!r}")
    return _table(rows, VERIFY_COLUMNS, "verify-inequality", s["format"],
                  dict(domain=repr(dom), p=p))


def _problem(s):
    return ProblemSpec(int(s["N"]), float(s["p"]), float(s["q"]), float(s["lam"]))


def _pick_mode(spec):
    if spec.q < spec.p:
        return "minimize"
    qs = spec.critical_exponent
    if spec.p < spec.q < qs and spec.lam <= 0:
        return "mountain-pass"
    if (spec.lam < 0 and spec.q >= qs) or (spec.lam <= 0 and spec.q > qs):
        return "probe"
    raise ConfigError(f"no solver covers q={spec.q} with lambda={spec.lam} "
                      f"(p={spec.p}, p**={qs}); this regime is left open")


def _solve(spec, s, nodes):
    mesh = RadialMesh(spec.N, nodes=nodes, grading=float(s["grading"]))
    mode = s["mode"] if s["mode"] != "auto" else _pick_mode(spec)
    if mode == "minimize":
        return direct_minimize(spec, mesh, tol=float(s["tol"]))
    if mode == "mountain-pass":
        return mountain_pass(spec, mesh, tol=float(s["tol"]))
    return nonexistence_probe(spec, mesh)


def _problem_header(spec):
    return dict(N=spec.N, p=spec.p, q=spec.q, lam=spec.lam, critical_exponent=spec.critical_exponent)


def cmd_solve(s):
    spec = _problem(s)
    cp = _solve(spec, s, int(s["nodes"]))
    if s["profile"]:
        Path(s["profile"]).write_text(
            f"# hrlab-csv v{CSV_VERSION} table=radial-profile columns=r,u\n" + cp.field.to_csv())
    return render_json(dict(problem=_problem_header(spec), solution=cp.summary()), "solve")


def cmd_pohozaev(s):
    spec = _problem(s)
    levels = int(s["refine"])
    if levels < 0:
        raise ConfigError("refine must be non-negative")
    meshes, last = [], None
    for k in range(levels + 1):
        cp = _solve(spec, s, int(s["nodes"]) * 2 ** k)
        last = cp
        meshes.append(dict(nodes=cp.field.mesh.nodes, energy=cp.energy, residual=cp.residual,
                           kind=cp.kind, **cp.pohozaev.as_dict()))
    imb = [abs(m["imbalance"]) for m in meshes]
    if s["profile"]:
        Path(s["profile"]).write_text(
            f"# hrlab-csv v{CSV_VERSION} table=radial-profile columns=r,u\n" + last.field.to_csv())
    return render_json(dict(problem=_problem_header(spec), meshes=meshes,
                            shrinking=all(b < a for a, b in zip(imb, imb[1:]))), "pohozaev")


LEMMA_COLUMNS = ["lemma", "p", "samples", "violations", "worst_excess"]


def cmd_lemmas(s):
    rows = []
    for p in s["p"]:
        for chk in fuzz_lemmas(float(p), int(s["samples"]), int(s["seed"])):
            rows.append(dict(lemma=chk.lemma, p=chk.p, samples=chk.samples,
                             violations=chk.violations, worst_excess=chk.worst_excess))
    return _table(rows, LEMMA_COLUMNS, "lemma-fuzz", s["format"], dict(seed=s["seed"]))


COMMANDS = {
    "constants": cmd_constants,
    "sharpness-sweep": cmd_sharpness,
    "verify-inequality": cmd_verify,
    "solve": cmd_solve,
    "pohozaev": cmd_pohozaev,
    "lemma-fuzz": cmd_lemmas,
}


def run(settings: dict) -> str:
    return COMMANDS[settings["subcommand"]](settings)


def main(argv=None) -> int:
    warnings.simplefilter("default")
    try:
        settings = resolve_settings(argv)
        text = run(settings)
        _emit(text, settings["out"])
    except SystemExit as exc:  # argparse: --help, --version, usage errors
        return int(exc.code or 0)
    except NonConvergence as exc:
        print(f"hrlab: did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except QuadratureError as exc:
        print(f"hrlab: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except ContradictionFound as exc:
        print(f"hrlab: contradiction: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, NotImplementedError) as exc:
        print(f"hrlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"hrlab: solver failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
