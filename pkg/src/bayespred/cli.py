"""Command-line front end.

Every run writes one header comment line holding the JSON-encoded run
configuration (plus reference values such as ``p/(2n)``), then a CSV
table; ``--format json`` writes ``{"config": ..., "rows": [...]}``
instead.  Numbers carry 12 significant digits.  ``--threads`` is left
out of the header because results do not depend on it.

Grids are written ``lo:hi:count``: log-spaced for positive parameters
(Poisson means, sample sizes, radii), linear otherwise.  Several points
may be joined with ``;``, and a vector parameter is comma separated.

Exit status is 0 on success, 1 when an operation fails and 2 for usage
errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import ExpansionError, alpha_solve, excess_risk_extrapolate, g_theta
from .cumulants import identities_check
from .families import FAMILY_NAMES, FamilyError, make_family
from .priors import PRIOR_GRAMMAR, PriorSpecError, parse_prior

OUTPUT_DIR_ENV = "BAYESPRED_OUTPUT_DIR"
SIG_DIGITS = 12
_POSITIVE_FAMILIES = {"poisson"}


class CliError(Exception):
    pass


class UsageError(CliError):
    """Bad arguments rather than a failed computation; exit status 2."""


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; ``threads`` is deliberately absent."""

    subcommand: str
    family: str | None = None
    family_args: dict = field(default_factory=dict)
    prior: str | None = None
    theta: list[str] = field(default_factory=list)
    n: str | None = None
    reps: int | None = None
    seed: int | None = None
    format: str = "csv"
    output: str | None = None
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)


# ---------------------------------------------------------------------------
# parsing helpers


def _grid(spec: str, positive: bool, integer: bool = False) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"malformed grid {spec!r}; expected lo:hi:count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"malformed grid {spec!r}; expected lo:hi:count") from None
    if count < 1:
        raise UsageError(f"grid {spec!r} needs a positive count")
    if positive:
        if lo <= 0 or hi <= 0:
            raise UsageError(f"grid {spec!r} must be positive for a log-spaced axis")
        vals = np.geomspace(lo, hi, count)
    else:
        vals = np.linspace(lo, hi, count)
    if integer:
        out = []
        for v in np.rint(vals).astype(int).tolist():
            if v not in out:
                out.append(v)
        return out
    return vals.tolist()


def _scalars(spec: str, positive: bool, integer: bool = False) -> list:
    out = []
    for piece in spec.split(";"):
        piece = piece.strip()
        if not piece:
            continue
        if ":" in piece:
            out.extend(_grid(piece, positive, integer))
        else:
            try:
                out.append(int(piece) if integer else float(piece))
            except ValueError:
                raise UsageError(f"cannot read {piece!r} as a number") from None
    if not out:
        raise UsageError(f"empty value list {spec!r}")
    return out


def _thetas(specs: list[str], family) -> list[np.ndarray]:
    pts = []
    for spec in specs:
        for piece in spec.split(";"):
            piece = piece.strip()
            if not piece:
                continue
            if ":" in piece:
                if family.dim != 1:
                    raise UsageError(f"grid syntax needs a scalar parameter; {family.name} has {family.dim}")
                pts.extend(np.array([v]) for v in _grid(piece, family.name in _POSITIVE_FAMILIES))
            else:
                try:
                    vec = np.array([float(v) for v in piece.split(",")])
                except ValueError:
                    raise UsageError(f"cannot read theta {piece!r}") from None
                if vec.size != family.dim:
                    raise UsageError(f"theta {piece!r} has {vec.size} entries; {family.name} needs {family.dim}")
                pts.append(vec)
    if not pts:
        raise UsageError("no theta given")
    return pts


def _family(cfg: RunConfig):
    if cfg.family is None:
        raise CliError("--family is required")
    try:
        return make_family(cfg.family, **cfg.family_args)
    except FamilyError as exc:
        raise CliError(str(exc)) from None


def _prior(cfg: RunConfig, family):
    try:
        return parse_prior(cfg.prior or "jeffreys", family)
    except PriorSpecError:
        raise UsageError(f"malformed prior spec {cfg.prior!r}; grammar: {PRIOR_GRAMMAR}") from None
    except FamilyError as exc:
        raise CliError(str(exc)) from None


def _at(point, fn):
    """Run ``fn`` and name the grid point in any error."""
    try:
        return fn()
    except CliError:
        raise
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        raise CliError(f"at {point}: {exc}") from None


def _pt(theta) -> list[float]:
    return [float(v) for v in np.atleast_1d(theta)]


# ---------------------------------------------------------------------------
# subcommands; each returns (rows, extra header fields)


def cmd_risk(cfg: RunConfig, threads: int = 1):
    from .risk import risk_exact, risk_mc

    fam = _family(cfg)
    prior = _prior(cfg, fam)
    ns = _scalars(cfg.n or "", positive=True, integer=True)
    procs = cfg.options.get("procedures", ["predictive"])
    exact = cfg.options.get("exact", False)
    rows = []
    for th in _thetas(cfg.theta, fam):
        for n in ns:
            for proc in procs:
                point = f"theta={_pt(th)}, n={n}, procedure={proc}"
                if exact:
                    est = _at(point, lambda: risk_exact(fam, th, n, proc, prior if proc == "predictive" else None))
                else:
                    est = _at(point, lambda: risk_mc(fam, th, n, proc, prior if proc == "predictive" else None, reps=cfg.reps, seed=cfg.seed, threads=threads))
                row = est.as_row()
                row["prior"] = prior.label if proc == "predictive" else ""
                rows.append(row)
    ref = {f"p_over_2n[n={n}]": fam.dim / (2.0 * n) for n in ns}
    return rows, {"reference": ref}


def cmd_alpha_search(cfg: RunConfig, threads: int = 1):
    fam = _family(cfg)
    grid = None
    if cfg.theta:
        grid = np.array(_thetas(cfg.theta, fam))
    tensors = None
    if cfg.options.get("lemma1"):
        if fam.name != "mvn-scale":
            raise CliError("--lemma1 applies to the mvn-scale family only")
        from .lemma1 import closed_form_cumulants

        def tensors(th):
            return closed_form_cumulants(fam.to_matrix(th))

    try:
        res = alpha_solve(fam, grid, tensors=tensors)
    except ExpansionError as exc:
        raise CliError(str(exc)) from None
    rows = res.as_rows()
    for r in rows:
        r["roots"] = ";".join(f"{x:.12g}" for x in res.roots)
        r["degenerate"] = res.degenerate
    summary = {
        "argmin_alpha": res.argmin_alpha,
        "argmin_spread": res.argmin_spread,
        "constant_risk_alphas": list(res.constant_risk_alphas),
        "least_constant_alpha": res.least_constant_alpha,
        "printed_condition_alpha": res.printed_condition_alpha,
    }
    return rows, {"summary": summary}


def cmd_expansion_check(cfg: RunConfig, threads: int = 1):
    fam = _family(cfg)
    prior = _prior(cfg, fam)
    ns = _scalars(cfg.n or "20;40;80;160", positive=True, integer=True)
    rows = []
    for th in _thetas(cfg.theta, fam):
        point = f"theta={_pt(th)}"
        if cfg.reps is None and not fam.name.startswith(("poisson", "bernoulli", "negbinomial")):
            raise CliError(f"{fam.name} has no exact risk; pass --reps and --seed for a Monte Carlo fit")
        ext = _at(point, lambda: excess_risk_extrapolate(fam, prior, th, ns, reps=cfg.reps, seed=cfg.seed, threads=threads))
        g = _at(point, lambda: g_theta(fam, prior, th))
        rel = abs(ext.g_theta - g) / abs(g) if g != 0 else math.inf
        rows.append(
            {
                "theta": _pt(th),
                "prior": prior.label,
                "g_analytic": g,
                "g_extrapolated": ext.g_theta,
                "abs_gap": abs(ext.g_theta - g),
                "rel_gap": rel,
                "cubic": ext.cubic,
                "fit_residual": ext.residual,
                "noise": ext.noise,
                "method": ext.method,
            }
        )
    return rows, {"n_grid": ns}


def cmd_dominance(cfg: RunConfig, threads: int = 1):
    from .location import LocationError, dominance_experiment

    p = int(cfg.family_args.get("p", 3))
    probes = None
    if cfg.theta:
        probes = []
        for spec in cfg.theta:
            for piece in spec.split(";"):
                try:
                    probes.append(np.array([float(v) for v in piece.split(",")]))
                except ValueError:
                    raise UsageError(f"cannot read probe {piece!r}") from None
    try:
        res = dominance_experiment(p, cfg.options["shrink_alpha"], probes, n=int(cfg.n or 25), reps=cfg.reps, seed=cfg.seed, threads=threads)
    except LocationError as exc:
        raise CliError(str(exc)) from None
    return res.as_rows(), {"summary": {"verdict": res.verdict, "no_uniform_gap": res.no_uniform_gap}}


def cmd_laplacian_scan(cfg: RunConfig, threads: int = 1):
    from .location import superharmonic_scan

    p = int(cfg.family_args.get("p", 3))
    rep = superharmonic_scan(p, cfg.options["shrink_alpha"], cfg.options.get("radius_max", 1e3), cfg.options.get("grid_size", 200))
    return rep.as_rows(), {"summary": rep.summary()}


def cmd_identities(cfg: RunConfig, threads: int = 1):
    fam = _family(cfg)
    method = cfg.options.get("method", "analytic")
    rows = []
    for th in _thetas(cfg.theta, fam):
        point = f"theta={_pt(th)}"
        kw = {"reps": cfg.reps, "seed": cfg.seed} if method == "monte-carlo" else {}
        res = _at(point, lambda: identities_check(fam, th, method=method, **kw))
        for r in res:
            rows.append({"theta": _pt(th), "identity": r.name, "max_abs": r.max_abs, "max_z": r.max_z, "passed": r.passed})
    return rows, {}


COMMANDS = {
    "risk": cmd_risk,
    "alpha-search": cmd_alpha_search,
    "expansion-check": cmd_expansion_check,
    "dominance": cmd_dominance,
    "laplacian-scan": cmd_laplacian_scan,
    "identities": cmd_identities,
}


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.{SIG_DIGITS}g}")
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, dict):
        return {k: _fmt(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_fmt(x) for x in v]
    return v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, list):
        return " ".join(_cell(x) for x in v)
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def render(cfg: RunConfig, rows: list[dict], extra: dict) -> str:
    header = {"config": cfg.to_dict()}
    header.update(_fmt(extra))
    rows = [_fmt(r) for r in rows]
    if cfg.format == "json":
        return json.dumps({**header, "rows": rows}, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def read_config(text: str) -> RunConfig:
    """Recover the RunConfig from an emitted CSV or JSON document."""
    if text.startswith("# "):
        head = json.loads(text.split("\n", 1)[0][2:])
    else:
        head = json.loads(text)
    return RunConfig.from_dict(head["config"])


def _output_path(path: str | None) -> str | None:
    if path is None:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


# ---------------------------------------------------------------------------
# argument handling


def _add_common(sp, family=True, prior=False, theta=True, n=False, mc=False):
    if family:
        sp.add_argument("--family", choices=FAMILY_NAMES, required=True)
        sp.add_argument("--dim", type=int, help="p for mvn-location and mvn-scale")
        sp.add_argument("--r", type=float, help="number of successes for negbinomial-canonical")
        sp.add_argument("--sigma", type=float, help="known sd for normal-location")
    if prior:
        sp.add_argument("--prior", default="jeffreys", help=PRIOR_GRAMMAR)
    if theta:
        sp.add_argument("--theta", action="append", default=[], help="value, vector a,b,c, grid lo:hi:count, or ';'-joined list")
    if n:
        sp.add_argument("--n", help="sample size, grid lo:hi:count, or ';'-joined list")
    if mc:
        sp.add_argument("--reps", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--output", help=f"output file (relative paths resolve under ${OUTPUT_DIR_ENV} when set); stdout if omitted")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayespred", description="Kullback-Leibler risk of Bayes predictive densities")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("risk", help="exact or Monte Carlo risk")
    _add_common(sp, prior=True, n=True, mc=True)
    sp.add_argument("--procedure", default="predictive", help="comma list of predictive, estimative, truth")
    sp.add_argument("--exact", action="store_true", help="enumerate the sufficient statistic (discrete families)")

    sp = sub.add_parser("alpha-search", help="minimum- and constant-risk members of the alpha-class")
    _add_common(sp)
    sp.add_argument("--lemma1", action="store_true", help="closed-form normal scale tensors")

    sp = sub.add_parser("expansion-check", help="analytic G against the finite-n extrapolation")
    _add_common(sp, prior=True, n=True, mc=True)

    sp = sub.add_parser("dominance", help="shrinkage prior against the uniform prior on N(mu, I)")
    _add_common(sp, family=False, n=True, mc=True)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--shrink-alpha", type=float, required=True)
    sp.add_argument("--probe", action="append", default=[], help="probe mean a,b,c (repeatable)")

    sp = sub.add_parser("laplacian-scan", help="sign of the Laplacian of g along a radius")
    _add_common(sp, family=False, theta=False)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--shrink-alpha", type=float, required=True)
    sp.add_argument("--radius-max", type=float, default=1e3)
    sp.add_argument("--grid-size", type=int, default=200)

    sp = sub.add_parser("identities", help="likelihood identity residuals")
    _add_common(sp, mc=True)
    sp.add_argument("--method", choices=("analytic", "monte-carlo"), default="analytic")
    return ap


def config_from_args(args) -> RunConfig:
    fam_args = {}
    for key, name in (("dim", "p"), ("r", "r"), ("sigma", "sigma")):
        v = getattr(args, key, None)
        if v is not None:
            fam_args[name] = v
    opts: dict = {}
    sub = args.subcommand
    if sub == "risk":
        opts["procedures"] = [s.strip() for s in args.procedure.split(",") if s.strip()]
        opts["exact"] = bool(args.exact)
    elif sub == "alpha-search":
        opts["lemma1"] = bool(args.lemma1)
    elif sub in ("dominance", "laplacian-scan"):
        opts["shrink_alpha"] = args.shrink_alpha
        if sub == "laplacian-scan":
            opts["radius_max"] = args.radius_max
            opts["grid_size"] = args.grid_size
    elif sub == "identities":
        opts["method"] = args.method
    theta = list(getattr(args, "theta", []) or []) + list(getattr(args, "probe", []) or [])
    return RunConfig(
        subcommand=sub,
        family=getattr(args, "family", None),
        family_args=fam_args,
        prior=getattr(args, "prior", None),
        theta=theta,
        n=getattr(args, "n", None),
        reps=getattr(args, "reps", None),
        seed=getattr(args, "seed", None),
        format=args.format,
        output=args.output,
        options=opts,
    )


def _needs_seed(cfg: RunConfig) -> bool:
    if cfg.subcommand == "risk":
        return not cfg.options.get("exact")
    if cfg.subcommand == "expansion-check":
        return cfg.reps is not None
    if cfg.subcommand == "identities":
        return cfg.options.get("method") == "monte-carlo"
    return cfg.subcommand == "dominance"


def run(cfg: RunConfig, threads: int = 1) -> str:
    if _needs_seed(cfg):
        if cfg.seed is None:
            raise UsageError(f"{cfg.subcommand}: --seed is required for Monte Carlo runs")
        if cfg.reps is None:
            cfg.reps = {"risk": 100_000, "dominance": 200_000, "identities": 1_000_000}.get(cfg.subcommand)
    if cfg.subcommand == "risk" and not cfg.n:
        raise UsageError("risk: --n is required")
    if cfg.subcommand in ("risk", "expansion-check", "identities") and not cfg.theta:
        raise UsageError(f"{cfg.subcommand}: --theta is required")
    rows, extra = COMMANDS[cfg.subcommand](cfg, threads)
    return render(cfg, rows, extra)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = config_from_args(args)
    try:
        text = run(cfg, getattr(args, "threads", 1) or 1)
    except CliError as exc:
        print(f"bayespred {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, UsageError) else 1
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"bayespred {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    path = _output_path(cfg.output)
    if path is None:
        sys.stdout.write(text)
    else:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
