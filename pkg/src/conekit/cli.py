"""Command-line front end.

    conekit <command> [flags]

Commands: validate, riccati, laplace, density, sample, simulate, examples,
selftest.  Exit codes: 0 success, 1 validation or domain failure (outputs
still written), 2 usage or configuration error.  Every run emits a manifest
(``<out>.manifest.json``, or stderr when writing to stdout) that echoes the
resolved configuration, the library version and the algebra descriptor.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import jordan as J
from .affine_params import AffineParameterSet, load_params, params_from_dict, parse_element, validate
from .errors import AlgebraMismatch, ConekitError, ConfigError, InvalidSize, UnsupportedAlgebra

USAGE_ERRORS = (ConfigError, InvalidSize, UnsupportedAlgebra, AlgebraMismatch)

DEFAULTS = {
    "validate": {"samples": 256, "alpha": "identity", "delta": None},
    "riccati": {"u": "identity", "t": 1.0, "points": 21, "method": "numeric", "rtol": 1e-10, "atol": 1e-12,
                "N": 64, "alpha": "identity", "delta": None},
    "laplace": {"u": "identity", "t": 1.0, "x": "zero", "alpha": "identity", "delta": None},
    "density": {"xi": "identity", "t": 1.0, "x": "zero", "alpha": "identity", "delta": None, "cap": 40,
                "tol": 1e-8},
    "sample": {"t": 1.0, "x": "zero", "alpha": "identity", "delta": None, "paths": 1000},
    "simulate": {"x": "identity", "t": 1.0, "steps": 100, "paths": 1000, "scheme": "euler", "record": "all",
                 "u": None, "alpha": "identity", "delta": None},
    "examples": {"example": None, "t": 1.0, "steps": 100, "paths": 1000, "record": "all",
                 "y0": "[0.5, -0.3, 0.8, 0.2]", "b": 2.0, "x0": 0.5, "z1": "[0.7, 0.4]", "z2": "[0.3, -0.6]",
                 "u": None},
    "selftest": {"only": None},
}


@dataclass
class RunConfig:
    """Resolved configuration of one CLI run."""
    command: str
    algebra: str = "sym:1"
    params: str | None = None
    options: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    format: str = "csv"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict) or "command" not in doc:
            raise ConfigError("run config needs a 'command' field")
        unknown = set(doc) - {"command", "algebra", "params", "options", "seed", "out", "format"}
        if unknown:
            raise ConfigError(f"unknown run config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add(p, *names, **kw):
    p.add_argument(*names, default=argparse.SUPPRESS, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conekit", description="Affine processes on symmetric cones.")
    parser.add_argument("--version", action="version", version=f"conekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(name, help_):
        p = sub.add_parser(name, help=help_)
        _add(p, "--config", help="RunConfig JSON; explicit flags override its fields")
        _add(p, "--algebra", help="kind:size, e.g. sym:2, herm:2, spin:4 (default sym:1)")
        _add(p, "--params", help="parameter-set JSON document")
        _add(p, "--seed", type=int)
        _add(p, "--out", help="output path (default stdout)")
        _add(p, "--format", choices=["csv", "json"])
        _add(p, "--manifest", help="manifest path (default <out>.manifest.json)")
        return p

    def law_flags(p):
        _add(p, "--alpha", help="identity|zero|file:<path>|coords:[...]")
        _add(p, "--delta", type=float)
        _add(p, "--t", type=float)

    p = common("validate", "admissibility report for a parameter set")
    _add(p, "--alpha")
    _add(p, "--delta", type=float)
    _add(p, "--samples", type=int, help="boundary samples for the inward-drift check")

    p = common("riccati", "solve the generalized Riccati system")
    law_flags(p)
    _add(p, "--u")
    _add(p, "--points", type=int, help="grid points on [0, t] (numeric/closed)")
    _add(p, "--method", choices=["numeric", "closed", "split", "both"])
    _add(p, "--rtol", type=float)
    _add(p, "--atol", type=float)
    _add(p, "--N", type=int, help="splitting steps")

    p = common("laplace", "Laplace transform E exp(-<u, X_t>)")
    law_flags(p)
    _add(p, "--x")
    _add(p, "--u")

    p = common("density", "Wishart density at xi")
    law_flags(p)
    _add(p, "--x")
    _add(p, "--xi")
    _add(p, "--cap", type=int)
    _add(p, "--tol", type=float)

    p = common("sample", "draw from a Wishart law")
    law_flags(p)
    _add(p, "--x")
    _add(p, "--paths", type=int)

    p = common("simulate", "simulate paths")
    law_flags(p)
    _add(p, "--x")
    _add(p, "--u", help="optional u for a transform summary in the manifest")
    _add(p, "--steps", type=int)
    _add(p, "--paths", type=int)
    _add(p, "--scheme", choices=["euler", "jumps", "exact"])
    _add(p, "--record", help="all, final or a stride")

    p = common("examples", "non-symmetric cone examples")
    _add(p, "example", choices=["polyhedral", "vinberg"])
    _add(p, "--t", type=float)
    _add(p, "--steps", type=int)
    _add(p, "--paths", type=int)
    _add(p, "--record")
    _add(p, "--y0", help="JSON list of four numbers (polyhedral)")
    _add(p, "--b", type=float)
    _add(p, "--x0", type=float)
    _add(p, "--z1")
    _add(p, "--z2")
    _add(p, "--u", help="JSON list (a, b1, b2, c1, c2) for a transform summary (vinberg)")

    p = common("selftest", "run the acceptance suite")
    _add(p, "--only", help="comma-separated criterion ids")
    return parser


TOP_LEVEL = ("algebra", "params", "seed", "out", "format")


def resolve(argv) -> tuple:
    """Parse argv into (RunConfig, manifest path)."""
    ns = vars(build_parser().parse_args(argv))
    cmd = ns.pop("command")
    manifest = ns.pop("manifest", None)
    base = RunConfig(cmd)
    if "config" in ns:
        path = ns.pop("config")
        try:
            with open(path) as fh:
                base = RunConfig.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        if base.params and not os.path.isabs(base.params):
            base.params = os.path.join(os.path.dirname(os.path.abspath(path)), base.params)
        if base.command != cmd:
            raise ConfigError(f"config is for {base.command!r}, not {cmd!r}")
    opts = dict(DEFAULTS[cmd])
    opts.update(base.options)
    top = {k: getattr(base, k) for k in TOP_LEVEL}
    for k, v in ns.items():
        if k in TOP_LEVEL:
            top[k] = v
        else:
            opts[k] = v
    unknown = set(opts) - set(DEFAULTS[cmd])
    if unknown:
        raise ConfigError(f"options not understood by {cmd}: {sorted(unknown)}")
    return RunConfig(cmd, options=opts, **top), manifest


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def parse_cli_element(alg: J.JordanAlgebra, text, name: str) -> J.Element:
    """identity | zero | 2*identity | 2 | file:<path> | coords:[...] | [...]

    A bare number c means c times the identity.
    """
    if text is None or isinstance(text, (list, tuple, dict)):
        return parse_element(alg, text, name)
    s = str(text).strip()
    if s.startswith("file:"):
        path = s[5:]
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"{name}: cannot read {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}: {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if isinstance(doc, dict) and "algebra" in doc:
            if J.parse_algebra(doc["algebra"]) != alg:
                raise ConfigError(f"{name}: element in {path} lives in {doc['algebra']}, not {alg}")
            doc = {"coords": doc["coords"]}
        return parse_element(alg, doc, name)
    if s.startswith("coords:"):
        s = s[7:]
    if s.startswith("["):
        try:
            return parse_element(alg, json.loads(s), name)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}: bad coordinate list: {exc.msg}") from None
    try:
        c = float(s)
    except ValueError:
        return parse_element(alg, s, name)
    return c * alg.e


def _json_list(text, name):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in json.loads(text)]
    except (json.JSONDecodeError, TypeError, ValueError):
        raise ConfigError(f"{name}: expected a JSON list of numbers, got {text!r}") from None


def _fmt(v) -> str:
    return repr(float(v))


class Outputs:
    """Collects everything one run writes and produces the manifest."""

    def __init__(self, cfg: RunConfig, manifest: str | None):
        self.cfg = cfg
        self.manifest_path = manifest or (cfg.out + ".manifest.json" if cfg.out else None)
        self.algebra = None
        self.files = {}
        self.summary = {}

    def emit(self, text: str):
        if self.cfg.out:
            with open(self.cfg.out, "w", newline="") as fh:
                fh.write(text)
            self.files[self.cfg.out] = hashlib.sha256(text.encode()).hexdigest()
        else:
            sys.stdout.write(text)
            self.files["<stdout>"] = hashlib.sha256(text.encode()).hexdigest()

    def table(self, columns, rows, extra=None):
        if self.cfg.format == "json":
            doc = {"columns": list(columns), "rows": [[float(v) if not isinstance(v, (int, np.integer)) else int(v)
                                                       for v in r] for r in rows]}
            if extra:
                doc.update(extra)
            self.emit(json.dumps(doc, indent=1) + "\n")
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([str(int(v)) if isinstance(v, (int, np.integer)) else _fmt(v) for v in r])
            self.emit(buf.getvalue())

    def write_manifest(self, status: str, exit_code: int):
        doc = {"conekit_version": __version__,
               "algebra": self.algebra.descriptor() if self.algebra is not None else None,
               "config": self.cfg.to_dict(), "status": status, "exit_code": exit_code,
               "outputs": self.files}
        if self.summary:
            doc["summary"] = self.summary
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if self.manifest_path:
            with open(self.manifest_path, "w") as fh:
                fh.write(text)
        else:
            sys.stderr.write(text)


def _algebra_and_params(cfg: RunConfig, need_params: bool):
    """Algebra from --params (if any) checked against --algebra, plus the parameter set."""
    o = cfg.options
    alg = J.parse_algebra(cfg.algebra)
    params = None
    if cfg.params:
        try:
            params = load_params(cfg.params)
        except OSError as exc:
            raise ConfigError(f"cannot read {cfg.params}: {exc}") from None
        if cfg.algebra != RunConfig.algebra and params.algebra != alg:
            raise ConfigError(f"--algebra {cfg.algebra} disagrees with {params.algebra} in {cfg.params}")
        alg = params.algebra
    elif need_params:
        if o.get("delta") is None:
            raise ConfigError("give --params or --delta (with --alpha) for a Bru parameter set")
        params = AffineParameterSet.bru(alg, parse_cli_element(alg, o["alpha"], "alpha"), float(o["delta"]))
    return alg, params


def _law(cfg: RunConfig, alg):
    from .wishart import WishartLaw
    o = cfg.options
    if cfg.params:
        _, params = _algebra_and_params(cfg, True)
        delta = params.bru_delta()
        if delta is None or np.any(params.B.matrix) or params.has_jumps:
            raise ConfigError("parameter set is not of Bru type (b = delta alpha, B = 0, no jumps)")
        alpha = params.alpha
    else:
        if o.get("delta") is None:
            raise ConfigError("--delta is required")
        delta = float(o["delta"])
        alpha = parse_cli_element(alg, o["alpha"], "alpha")
    x = parse_cli_element(alg, o.get("x"), "x")
    return WishartLaw(alg, delta, alpha, float(o["t"]), x)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(cfg, out: Outputs) -> int:
    alg, params = _algebra_and_params(cfg, True)
    out.algebra = alg
    rep = validate(params, n_boundary_samples=int(cfg.options["samples"]), seed=cfg.seed)
    if cfg.format == "json":
        out.emit(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "passed", "verdict", "detail"])
        for c in rep.checks:
            w.writerow([c.name, "Pass" if c.passed else "Fail", c.verdict, c.detail])
        out.emit(buf.getvalue())
    out.summary = {"admissible": rep.admissible, "failures": [c.name for c in rep.failures]}
    return 0 if rep.admissible else 1


def cmd_riccati(cfg, out: Outputs) -> int:
    from . import riccati as R
    o = cfg.options
    alg, params = _algebra_and_params(cfg, True)
    out.algebra = alg
    u = parse_cli_element(alg, o["u"], "u")
    T = float(o["t"])
    method = o["method"]
    psi_cols = [f"psi_{i + 1}" for i in range(alg.n)]
    if method == "split":
        flow = R.split_flow(params, u, T, int(o["N"]), rtol=float(o["rtol"]), atol=float(o["atol"]))
        out.table(["t", "phi"] + psi_cols, flow.table(), {"stats": flow.stats})
        return 0
    grid = np.linspace(0.0, T, int(o["points"]))
    if method == "closed":
        flow = R.closed_form_flow(params, u, grid)
        out.table(["t", "phi"] + psi_cols, flow.table(), {"stats": flow.stats})
        return 0
    flow = R.solve_numeric(params, u, T, rtol=float(o["rtol"]), atol=float(o["atol"]), times=grid)
    stats = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in flow.stats.items()}
    if method == "numeric":
        out.table(["t", "phi"] + psi_cols, flow.table(), {"stats": stats})
        return 0
    closed = R.closed_form_flow(params, u, grid)
    err = np.maximum(np.abs(flow.phi - closed.phi), np.abs(flow.psi - closed.psi).max(axis=1))
    rows = np.column_stack([flow.table(), closed.phi, closed.psi, err])
    cols = ["t", "phi"] + psi_cols + ["phi_closed"] + [f"psi_closed_{i + 1}" for i in range(alg.n)] + ["max_error"]
    out.summary = {"max_error": float(err.max())}
    out.table(cols, rows, {"stats": stats, "max_error": float(err.max())})
    return 0


def cmd_laplace(cfg, out: Outputs) -> int:
    from . import riccati as R
    from .wishart import laplace
    o = cfg.options
    alg, params = _algebra_and_params(cfg, False)
    out.algebra = alg
    u = parse_cli_element(alg, o["u"], "u")
    x = parse_cli_element(alg, o["x"], "x")
    if params is not None and (params.has_jumps or np.any(params.B.matrix) or params.bru_delta() is None):
        f = R.closed_form_for(params)
        if f is not None:
            phi, psi = f(float(o["t"]), u)
            value = math.exp(-phi - psi.coords @ x.coords)
        else:
            value = R.solve_numeric(params, u, float(o["t"])).transform(x)
    else:
        value = laplace(_law(cfg, alg), u)
    out.summary = {"value": value}
    if cfg.out or cfg.format == "json":
        out.table(["value"], [[value]])
    else:
        out.emit(_fmt(value) + "\n")
    return 0


def cmd_density(cfg, out: Outputs) -> int:
    from .wishart import noncentral_density
    o = cfg.options
    alg = J.parse_algebra(cfg.algebra) if not cfg.params else _algebra_and_params(cfg, False)[0]
    out.algebra = alg
    law = _law(cfg, alg)
    xi = parse_cli_element(alg, o["xi"], "xi")
    res = noncentral_density(law, xi, series_cap=int(o["cap"]), target_tol=float(o["tol"]), seed=cfg.seed)
    out.summary = {"value": res.value, "tail_bound": res.tail_bound}
    if cfg.out or cfg.format == "json":
        out.table(["value", "tail_bound"], [[res.value, res.tail_bound]])
    else:
        out.emit(f"{_fmt(res.value)} {_fmt(res.tail_bound)}\n")
    return 0


def cmd_sample(cfg, out: Outputs) -> int:
    from .wishart import sample_coords
    alg = J.parse_algebra(cfg.algebra) if not cfg.params else _algebra_and_params(cfg, False)[0]
    out.algebra = alg
    law = _law(cfg, alg)
    X = sample_coords(law, int(cfg.options["paths"]), seed=cfg.seed)
    rows = [[i, *row] for i, row in enumerate(X)]
    out.table(["sample_id"] + [f"coord_{i + 1}" for i in range(alg.n)], rows)
    return 0


def _record(v):
    return v if v in ("all", "final") else int(v)


def _ensemble_rows(times, paths, mins):
    count, m, _ = paths.shape
    for p in range(count):
        for k in range(m):
            yield [p, times[k], *paths[p, k], mins[p, k]]


def cmd_simulate(cfg, out: Outputs) -> int:
    from . import riccati as R
    from . import simulate as S
    o = cfg.options
    alg, params = _algebra_and_params(cfg, True)
    out.algebra = alg
    x0 = parse_cli_element(alg, o["x"], "x")
    T, steps, count = float(o["t"]), int(o["steps"]), int(o["paths"])
    rec = _record(o["record"])
    if o["scheme"] == "exact":
        delta = params.bru_delta()
        if delta is None or np.any(params.B.matrix) or params.has_jumps:
            raise ConfigError("scheme exact needs Bru parameters")
        ens = S.exact_bru_path(params.alpha, delta, x0, np.linspace(0.0, T, steps + 1), count, cfg.seed,
                               record=rec)
    elif o["scheme"] == "jumps":
        ens = S.jump_augmented_path(params, x0, T, steps, count, cfg.seed, record=rec)
    else:
        ens = S.euler_path(params, x0, T, steps, count, cfg.seed, record=rec)
    bstats = S.boundary_stats(ens, 1e-6)
    summary = {"scheme": ens.scheme, "fraction_touching_1e-6": bstats.fraction_touching}
    if o.get("u") is not None:
        u = parse_cli_element(alg, o["u"], "u")
        est = S.mc_laplace(ens, u)
        summary["transform"] = {"t": float(ens.times[-1]), "mean": est.mean, "se": est.se}
        f = R.closed_form_for(params)
        if f is not None:
            phi, psi = f(float(ens.times[-1]), u)
            summary["transform"]["reference"] = math.exp(-phi - psi.coords @ x0.coords)
        elif params.is_conservative:
            summary["transform"]["reference"] = R.solve_numeric(params, u, float(ens.times[-1])).transform(x0)
    out.summary = summary
    cols = ["path_id", "t"] + [f"coord_{i + 1}" for i in range(alg.n)] + ["min_eigen"]
    out.table(cols, _ensemble_rows(ens.times, ens.paths, ens.min_eigs()), {"summary": summary})
    return 0


def cmd_examples(cfg, out: Outputs) -> int:
    from . import exotic as E
    o = cfg.options
    which = o["example"]
    if which is None:
        raise ConfigError("examples needs polyhedral or vinberg")
    T, steps, count, rec = float(o["t"]), int(o["steps"]), int(o["paths"]), _record(o["record"])
    summary = {"example": which}
    if which == "polyhedral":
        ens = E.polyhedral_path(_json_list(o["y0"], "y0"), T, steps, count, cfg.seed, keep_y=False, record=rec)
        if count > 1 and len(ens.times) > 1:
            mean, se = E.drift_estimate(ens)
            summary["drift"] = {"mean": mean.tolist(), "se": se.tolist()}
        summary["violations"] = int(np.sum(E.PolyhedralConeSpec.slacks(ens.paths) < 0.0))
    else:
        spec = E.VinbergProcessSpec(float(o["b"]), float(o["x0"]), _json_list(o["z1"], "z1"), _json_list(o["z2"], "z2"))
        ens = E.vinberg_path(spec, T, steps, count, cfg.seed, record=rec)
        if o.get("u") is not None:
            u = _json_list(o["u"], "u")
            est = E.vinberg_mc_laplace(ens, u)
            summary["transform"] = {"t": float(ens.times[-1]), "mean": est.mean, "se": est.se,
                                    "reference": E.vinberg_laplace(spec, float(ens.times[-1]), u)}
    out.summary = summary
    dim = ens.paths.shape[-1]
    cols = ["path_id", "t"] + [f"coord_{i + 1}" for i in range(dim)] + ["min_eigen"]
    out.table(cols, _ensemble_rows(ens.times, ens.paths, ens.margin), {"summary": summary})
    return 0


def cmd_selftest(cfg, out: Outputs) -> int:
    from .acceptance import run_all
    only = cfg.options.get("only")
    ids = None
    if only:
        try:
            ids = {int(v) for v in str(only).split(",")}
        except ValueError:
            raise ConfigError(f"--only expects comma-separated integers, got {only!r}") from None
    results = run_all(ids, stream=lambda line: print(line, file=sys.stderr if cfg.out is None else sys.stdout))
    if cfg.format == "json" or cfg.out:
        out.table(["id", "passed", "seconds"], [[r.id, int(r.passed), r.seconds] for r in results],
                  {"results": [r.to_dict() for r in results]})
    passed = sum(r.passed for r in results)
    out.summary = {"passed": passed, "total": len(results)}
    print(f"{passed}/{len(results)} criteria passed", file=sys.stderr)
    return 0 if passed == len(results) else 1


COMMANDS = {"validate": cmd_validate, "riccati": cmd_riccati, "laplace": cmd_laplace, "density": cmd_density,
            "sample": cmd_sample, "simulate": cmd_simulate, "examples": cmd_examples, "selftest": cmd_selftest}


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg, manifest = resolve(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"conekit: error: {exc}", file=sys.stderr)
        return 2
    out = Outputs(cfg, manifest)
    try:
        code = COMMANDS[cfg.command](cfg, out)
        status = "ok" if code == 0 else "failed"
    except USAGE_ERRORS as exc:
        print(f"conekit: error: {exc}", file=sys.stderr)
        code, status = 2, f"usage error: {exc}"
    except ConekitError as exc:
        print(f"conekit: {type(exc).__name__}: {exc}", file=sys.stderr)
        code, status = 1, f"{type(exc).__name__}: {exc}"
    except OSError as exc:
        print(f"conekit: error: {exc}", file=sys.stderr)
        code, status = 2, f"io error: {exc}"
    out.write_manifest(status, code)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
