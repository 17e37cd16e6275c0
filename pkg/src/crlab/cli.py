"""Config ingestion, task dispatch, reports and the result cache.

Config grammar (a TOML subset)::

    # comment
    [section]
    key = "string" | integer | float | true | false

Sections: ``domain``, ``discretization``, ``task``, ``ambient``, ``ma``,
``pe``.  Unknown sections or keys are rejected.  The canonical text form
(sections and keys sorted, defaults filled, polynomial literals stripped of
whitespace) is what gets hashed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import re
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from . import jets

TASKS = ("analyze", "spectrum", "ma-solve", "paneitz-audit", "pe-solve")
OPERATORS = ("sublaplacian", "kohn", "paneitz", "dbar_b")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_AUDIT = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


# -- schema ---------------------------------------------------------------------------

_REQUIRED = object()


def _poly(v):
    return isinstance(v, str) and bool(v.strip())


# section -> key -> (python type(s), default, check or None)
SCHEMA: dict[str, dict[str, tuple]] = {
    "domain": {
        "n": (int, _REQUIRED, lambda v: v >= 2),
        "u": (str, _REQUIRED, _poly),
        "inside_sign": (str, "negative_inside", lambda v: v in ("negative_inside", "positive_inside")),
        "phi": (str, "", None),
    },
    "discretization": {
        "resolution": (int, 5, lambda v: 1 <= v <= 40),
        "second_resolution": (int, 0, lambda v: v >= 0),
        "degree": (int, 3, lambda v: 1 <= v <= 12),
    },
    "task": {
        "name": (str, "", lambda v: v in TASKS + ("",)),
        "operator": (str, "paneitz", lambda v: v in OPERATORS),
        "seed": (int, 0, None),
        "tests": (int, 20, lambda v: v >= 1),
        "convention": (str, "full", lambda v: v in ("full", "pure", "mixed")),
        "gradient_factor": (float, 2.0, None),
        "internal_tol": (float, 1e-6, lambda v: v > 0),
        "frame_tol": (float, 5e-3, lambda v: v > 0),
        "drift_tol": (float, 0.05, lambda v: v > 0),
        "q_phi": (str, "", None),
        "q_tol": (float, 1e-2, lambda v: v > 0),
        "dump_matrix": (bool, False, None),
    },
    "ambient": {
        "potential": (str, _REQUIRED, _poly),
        "minimal_norm": (bool, False, None),
    },
    "ma": {
        "ansatz_degree": (int, 2, lambda v: v >= 1),
        "collar_width": (float, 0.05, lambda v: v > 0),
        "max_iter": (int, 30, lambda v: v >= 1),
        "damping": (float, 0.5, lambda v: 0 < v < 1),
        "resolution": (int, 4, lambda v: v >= 1),
        "initial_exponent": (str, "", None),
    },
    "pe": {
        "manufactured_potential": (str, _REQUIRED, _poly),
        "degree": (int, 3, lambda v: v >= 1),
        "factor_n_plus_1": (bool, False, None),
        "tol": (float, 1e-6, lambda v: v > 0),
    },
}
_POLY_KEYS = {("domain", "u"), ("domain", "phi"), ("ambient", "potential"), ("ma", "initial_exponent"),
              ("pe", "manufactured_potential"), ("task", "q_phi")}
_HERMITIAN_KEYS = {("domain", "u"), ("domain", "phi"), ("ambient", "potential"), ("pe", "manufactured_potential"),
                   ("task", "q_phi")}


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line of its definition; (section, None) -> header line."""
    out = {}
    sec = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip() if '"' not in line else line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_\-]+)\s*\]", s)
        if m:
            sec = m.group(1)
            out.setdefault((sec, None), i)
            continue
        m = re.match(r"^([A-Za-z0-9_\-]+)\s*=", s)
        if m:
            out.setdefault((sec, m.group(1)), i)
    return out


@dataclass
class RunConfig:
    sections: dict

    def __getitem__(self, name):
        return self.sections[name]

    def get(self, name, default=None):
        return self.sections.get(name, default)

    @property
    def task(self) -> str:
        return self.sections["task"]["name"]

    def to_text(self) -> str:
        parts = []
        for sec in sorted(self.sections):
            parts.append(f"[{sec}]")
            for key in sorted(self.sections[sec]):
                parts.append(f"{key} = {_toml_value(self.sections[sec][key])}")
            parts.append("")
        return "\n".join(parts)

    @property
    def canonical_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def with_overrides(self, task: Optional[str] = None, seed: Optional[int] = None) -> "RunConfig":
        secs = {k: dict(v) for k, v in self.sections.items()}
        if task is not None:
            if secs["task"]["name"] and secs["task"]["name"] != task:
                raise ValidationError(f"config names task {secs['task']['name']!r} but {task!r} was requested")
            secs["task"]["name"] = task
        if seed is not None:
            secs["task"]["seed"] = int(seed)
        cfg = RunConfig(secs)
        _cross_validate(cfg, {})
        return cfg


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return json.dumps(v)


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text; errors carry the offending line."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(exc), int(m.group(1)) if m else None) from None
    lines = _line_index(text)
    sections = {}
    for sec, body in raw.items():
        if sec not in SCHEMA:
            raise ValidationError(f"unknown section [{sec}]", lines.get((sec, None)))
        if not isinstance(body, dict):
            raise ValidationError(f"{sec} must be a section", lines.get((None, sec)))
        schema = SCHEMA[sec]
        out = {}
        for key, val in body.items():
            ln = lines.get((sec, key))
            if key not in schema:
                raise ValidationError(f"unknown key {sec}.{key}", ln)
            typ, _, check = schema[key]
            if typ is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
                raise ValidationError(f"{sec}.{key} must be {typ.__name__}", ln)
            if (sec, key) in _POLY_KEYS:
                val = "".join(val.split())
            if check is not None and not check(val):
                raise ValidationError(f"invalid value for {sec}.{key}: {val!r}", ln)
            out[key] = val
        for key, (typ, default, _) in schema.items():
            if key not in out:
                if default is _REQUIRED:
                    raise ValidationError(f"missing {sec}.{key}", lines.get((sec, None)))
                out[key] = default
        sections[sec] = out
    for sec in ("domain",):
        if sec not in sections:
            raise ValidationError(f"missing section [{sec}]")
    for sec in ("discretization", "task"):
        if sec not in sections:
            sections[sec] = {k: d for k, (_, d, _) in SCHEMA[sec].items()}
    cfg = RunConfig(sections)
    _cross_validate(cfg, lines)
    return cfg


def _cross_validate(cfg: RunConfig, lines: dict) -> None:
    s = cfg.sections
    n = s["domain"]["n"]
    for sec, key in sorted(_POLY_KEYS):
        if sec not in s or not s[sec][key]:
            continue
        ln = lines.get((sec, key))
        try:
            if (sec, key) in _HERMITIAN_KEYS:
                jets.parse_hermitian(s[sec][key], n)
            else:
                jets.parse_polynomial(s[sec][key], n)
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{sec}.{key}: {exc}", ln) from None
    if "ma" in s and "ambient" not in s:
        raise ValidationError("[ma] section present without [ambient]", lines.get(("ma", None)))
    task = s["task"]["name"]
    if task == "ma-solve" and ("ma" not in s or "ambient" not in s):
        raise ValidationError("ma-solve needs [ma] and [ambient] sections")
    if task == "pe-solve":
        if "pe" not in s:
            raise ValidationError("pe-solve needs a [pe] section")
        if n < 3:
            raise ValidationError("pe-solve needs n >= 3", lines.get(("domain", "n")))
    if task == "paneitz-audit" and n != 2:
        raise ValidationError("paneitz-audit needs n = 2", lines.get(("domain", "n")))
    if task == "spectrum" and s["task"]["operator"] == "paneitz" and n != 2:
        raise ValidationError("the Paneitz operator is assembled for n = 2 only", lines.get(("task", "operator")))


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# -- reports --------------------------------------------------------------------------


@dataclass
class Report:
    task: str
    inputs: dict
    results: dict
    artifacts: dict = field(default_factory=dict)
    version: str = __version__
    config_hash: str = ""
    seed: int = 0
    audit_pass: Optional[bool] = None
    wall_time: float = 0.0  # kept out of report.json so reruns are byte-identical

    def payload(self) -> dict:
        return {
            "task": self.task,
            "inputs": self.inputs,
            "results": self.results,
            "artifacts": self.artifacts,
            "version": self.version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "audit_pass": self.audit_pass,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.payload()), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        d = json.loads(text)
        return cls(**d)


def _clean(x):
    """JSON-safe copy: numpy scalars to python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else repr(v)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# -- task implementations -------------------------------------------------------------


def _resolutions(cfg) -> list:
    d = cfg["discretization"]
    r2 = d["second_resolution"] or d["resolution"] + 1
    return [d["resolution"], r2]


def _surface(cfg):
    from .pseudohermitian import build_hypersurface

    return build_hypersurface(cfg["domain"])


def _pipeline(M, res, degree=None, curvature=True):
    from .operators import build_space
    from .pseudohermitian import build_frames, compute_invariants, sample_nodes

    ns = sample_nodes(M, res)
    fr = build_frames(M, ns)
    inv = compute_invariants(fr, curvature=curvature)
    S = build_space(M, ns, fr, degree) if degree else None
    return ns, fr, inv, S


def _task_analyze(cfg, out: Path) -> tuple:
    from .operators import export_nodal_csv
    from .pseudohermitian import levi_eigenvalues

    M = _surface(cfg)
    results, artifacts = {}, {}
    for res in _resolutions(cfg):
        ns, fr, inv, _ = _pipeline(M, res, curvature=True)
        R = inv.R
        lev = levi_eigenvalues(M.u, ns.nodes, M.sign)
        results[f"res{res}"] = {
            "nodes": len(ns),
            "volume": float(ns.weights.sum()),
            "R_mean": float(np.sum(ns.weights * R) / ns.weights.sum()),
            "R_rel_std": float(np.std(R) / abs(np.mean(R))) if np.mean(R) != 0 else float("nan"),
            "A_max": float(np.max(inv.torsion_norm)),
            "fit_residual": float(np.max(inv.residual)),
            "levi_min": float(np.min(lev)),
        }
        name = f"invariants_res{res}.csv"
        export_nodal_csv(out / name, ns, np.stack([R, np.abs(inv.A[:, 0, 0])], axis=1), name="R,abs_A11")
        artifacts[name] = name
    return results, artifacts, None


def _spectrum_matrix(op_name, S, inv):
    from . import operators as op

    if op_name == "sublaplacian":
        return op.op_sublaplacian(S)
    if op_name == "kohn":
        return op.op_box_b(S)
    if op_name == "paneitz":
        return op.op_paneitz(S, invariants=inv)
    return op.op_dbar_b(S)


def _task_spectrum(cfg, out: Path) -> tuple:
    from . import spectra as sp
    from .operators import export_matrix

    M = _surface(cfg)
    t = cfg["task"]
    name = t["operator"]
    deg = cfg["discretization"]["degree"]
    rows, results, artifacts = [], {}, {}
    reports = []
    for res in _resolutions(cfg):
        _, _, inv, S = _pipeline(M, res, deg, curvature=name == "paneitz")
        A = _spectrum_matrix(name, S, inv)
        if name == "dbar_b":
            gap, kd = sp.closedness_gap(A, return_kernel_dim=True)
            entry = {"gap": gap, "kernel_dim": kd}
        else:
            rep = sp.eig_sym(A)
            reports.append((A, rep))
            entry = {"gap": rep.gap, "kernel_dim": rep.kernel_dim, "max_imag": rep.max_imag,
                     "lowest": [float(x) for x in rep.eigenvalues[: min(8, len(rep.eigenvalues))]]}
        entry["dim"] = S.dim
        results[f"res{res}"] = entry
        rows.append((res, name, entry["kernel_dim"], entry["gap"]))
        if t["dump_matrix"] and name != "dbar_b":
            fn = f"{name}_res{res}.bin"
            export_matrix(A, out / fn, {"operator": name, "resolution": res, "degree": deg})
            artifacts[fn] = fn
    g = [results[k]["gap"] for k in results]
    kd = [results[k]["kernel_dim"] for k in results]
    drift = abs(g[1] - g[0]) / abs(g[0])
    results["gap_drift"] = drift
    results["kernel_dim_stable"] = kd[0] == kd[1]
    ok = drift <= t["drift_tol"] and kd[0] == kd[1]
    if reports:
        # direct check |A f| >= gap |f| and Rayleigh bound on seeded kernel-orthogonal vectors
        A, rep = reports[-1]
        ker = rep.kernel_vectors()
        X = sp.random_orthogonal_to(ker, A.shape[0], t["tests"], seed=t["seed"])
        ratios = np.linalg.norm(A.matrix @ X, axis=0) / np.linalg.norm(X, axis=0)
        ray = [sp.rayleigh_quotient(A, X[:, j]) for j in range(X.shape[1])]
        results["min_norm_ratio"] = float(ratios.min())
        results["min_rayleigh"] = float(min(ray))
        direct = bool(ratios.min() >= rep.gap * (1 - 1e-9)) and min(ray) >= rep.gap - 1e-9 * max(1, abs(rep.gap))
        results["direct_check"] = direct
        ok = ok and direct
    fn = "spectrum.csv"
    with (out / fn).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["resolution", "operator", "kernel_dim", "gap"])
        for r in rows:
            w.writerow([r[0], r[1], r[2], repr(float(r[3]))])
    artifacts[fn] = fn
    return results, artifacts, bool(ok)


def _task_ma(cfg, out: Path) -> tuple:
    from . import fefferman as fe

    M = _surface(cfg)
    a, m = cfg["ambient"], cfg["ma"]
    pot = jets.parse_hermitian(a["potential"], M.n)
    amb = fe.ricci_potential(pot, a["minimal_norm"], M=M)
    v0 = jets.parse_polynomial(m["initial_exponent"], M.n) if m["initial_exponent"] else None
    st = fe.ma_solve(M, amb, ansatz_degree=m["ansatz_degree"], collar_width=m["collar_width"],
                     max_iter=m["max_iter"], damping=m["damping"], resolution=m["resolution"], initial_exponent=v0)
    fn = "ma_history.csv"
    st.write_csv(out / fn)
    h = st.history
    results = {
        "status": st.status,
        "iterations": st.iterations,
        "initial_residual": h[0],
        "final_residual": h[-1],
        "reduction": h[0] / h[-1] if h[-1] > 0 else float("inf"),
        "collar_points": len(st.collar),
        "coefficients": [float(c) for c in st.coeffs],
        "history": h,
    }
    return results, {fn: fn}, None


def _task_paneitz_audit(cfg, out: Path) -> tuple:
    from . import spectra as sp
    from .operators import op_paneitz

    M = _surface(cfg)
    t = cfg["task"]
    deg = cfg["discretization"]["degree"]
    results, ok = {}, True
    rows = []
    for res in _resolutions(cfg):
        _, _, inv, S = _pipeline(M, res, deg)
        P = op_paneitz(S, invariants=inv)
        rng = np.random.default_rng(t["seed"])
        fs = rng.normal(size=(S.dim, t["tests"]))
        rep = sp.paneitz_integral_audit(fs, S, inv, P=P, convention=t["convention"],
                                        gradient_factor=t["gradient_factor"])
        results[f"res{res}"] = {
            "max_internal": rep.max_internal,
            "max_frame": rep.max_frame,
            "convention_mismatch": rep.max_frame > t["frame_tol"],
            "entries": [e.__dict__ for e in rep.entries],
        }
        ok = ok and rep.max_internal < t["internal_tol"] and rep.max_frame < t["frame_tol"]
        rows += [(res, j, e.internal_rel, e.frame_rel) for j, e in enumerate(rep.entries)]
        if t["q_phi"]:
            q = sp.q_law_audit(M, t["q_phi"], res, deg)
            results[f"res{res}"]["q_law"] = q.__dict__
            ok = ok and q.residual < t["q_tol"]
    fn = "audit.csv"
    with (out / fn).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["resolution", "test", "internal_rel", "frame_rel"])
        for r in rows:
            w.writerow([r[0], r[1], repr(float(r[2])), repr(float(r[3]))])
    return results, {fn: fn}, bool(ok)


def _task_pe(cfg, out: Path) -> tuple:
    from .pseudoeinstein import manufactured_pipeline

    M = _surface(cfg)
    p = cfg["pe"]
    res = cfg["discretization"]["resolution"]
    _, _, inv, S = _pipeline(M, res, p["degree"], curvature=False)
    u_star = jets.parse_hermitian(p["manufactured_potential"], M.n)
    rep = manufactured_pipeline(S, inv, u_star, factor_n_plus_1=p["factor_n_plus_1"], tol=p["tol"])
    fn = "pe.json"
    rep.write(out / fn)
    results = dict(rep.__dict__)
    results["resolution"] = res
    return results, {fn: fn}, None


_DISPATCH = {
    "analyze": _task_analyze,
    "spectrum": _task_spectrum,
    "ma-solve": _task_ma,
    "paneitz-audit": _task_paneitz_audit,
    "pe-solve": _task_pe,
}


# -- cache -----------------------------------------------------------------------------


def default_cache_dir() -> Path:
    return Path(os.environ.get("CRLAB_CACHE", Path.home() / ".cache" / "crlab"))


def _cache_key(cfg: RunConfig) -> str:
    return hashlib.sha256(f"{cfg.canonical_hash}:{__version__}".encode()).hexdigest()


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _cache_load(cache: Path, key: str) -> Optional[tuple]:
    """(report, entry dir) or None when absent or damaged."""
    entry = cache / key
    try:
        manifest = json.loads((entry / "manifest.json").read_text())
        for name, dig in manifest["files"].items():
            if _digest(entry / name) != dig:
                return None
        rep = Report.from_json((entry / "report.json").read_text())
    except (OSError, ValueError, KeyError, TypeError):
        return None
    return rep, entry


def _cache_store(cache: Path, key: str, out: Path, rep: Report) -> None:
    cache.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{key[:12]}-", dir=cache))
    try:
        files = {}
        for name in ["report.json", *sorted(rep.artifacts.values())]:
            shutil.copy2(out / name, tmp / name)
            files[name] = _digest(tmp / name)
        (tmp / "manifest.json").write_text(json.dumps({"files": files}, sort_keys=True))
        final = cache / key
        if final.exists():
            shutil.rmtree(final, ignore_errors=True)
        os.replace(tmp, final)
    except OSError:
        shutil.rmtree(tmp, ignore_errors=True)


def run(cfg: RunConfig, out=None, use_cache: bool = True, cache_dir=None) -> Report:
    """Run the configured task, writing report.json and artifacts into ``out``."""
    task = cfg.task
    if task not in _DISPATCH:
        raise ValidationError(f"no task selected (choose one of {', '.join(TASKS)})")
    out = Path(out) if out is not None else Path("crlab-out")
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    key = _cache_key(cfg)
    if use_cache:
        hit = _cache_load(cache, key)
        if hit is not None:
            rep, entry = hit
            for name in ["report.json", *rep.artifacts.values()]:
                shutil.copy2(entry / name, out / name)
            rep.wall_time = 0.0
            return rep
    t0 = time.perf_counter()
    results, artifacts, audit = _DISPATCH[task](cfg, out)
    rep = Report(
        task=task,
        inputs=cfg.sections,
        results=_clean(results),
        artifacts=artifacts,
        config_hash=cfg.canonical_hash,
        seed=cfg["task"]["seed"],
        audit_pass=audit,
    )
    rep.wall_time = time.perf_counter() - t0
    (out / "report.json").write_text(rep.to_json())
    (out / "timing.json").write_text(json.dumps({"wall_time": rep.wall_time}) + "\n")
    if use_cache:
        _cache_store(cache, key, out, rep)
    return rep


# -- command line ----------------------------------------------------------------------


def _numeric_errors() -> tuple:
    from . import fefferman, operators, pseudoeinstein, pseudohermitian, spectra

    return (
        pseudohermitian.NotRegular,
        pseudohermitian.NotPseudoconvex,
        pseudohermitian.RadialProjectionFailed,
        pseudohermitian.DegenerateContact,
        pseudohermitian.FitResidualTooLarge,
        operators.RankCollapse,
        operators.DimensionUnsupported,
        fefferman.DegenerateMetric,
        fefferman.LinearizationSingular,
        fefferman.NoDescent,
        pseudoeinstein.ResidualAboveTolerance,
        spectra.NotHermitian,
        spectra.AllKernel,
        np.linalg.LinAlgError,
        ValueError,
        RuntimeError,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crlab", description="Numerical CR geometry workbench")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True, help="path to the config file")
    ap.add_argument("--out", default="crlab-out", help="output directory")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--no-cache", action="store_true")
    ap.add_argument("--cache-dir", default=None, help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(task=args.task, seed=args.seed)
    except OSError as exc:
        print(f"crlab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"crlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run(cfg, args.out, use_cache=not args.no_cache, cache_dir=args.cache_dir)
    except ConfigError as exc:
        print(f"crlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _numeric_errors() as exc:
        print(f"crlab: {args.task} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{rep.task}: report written to {Path(args.out) / 'report.json'}")
    if rep.audit_pass is False:
        print(f"crlab: {rep.task} audit above tolerance", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
