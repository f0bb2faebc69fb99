"""Experiment runner: config validation, the solve/analyze pipeline and artifact verification."""
from __future__ import annotations

import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .duality import (concentration_diagnostics, dual_form, dual_periods, duality_map,
                      mass_bound, pairing, primitive, region_masses_csv)
from .hyperbolic import cone_csv, cone_profile
from .lamination import (MeasuredLamination, annulus_transversals, cocycle_csv, cocycle_properties,
                         lamination_to_json, plaques, rs_primitive)
from .limits import convergence_csv, least_gradient_test, limit_report, limit_report_json
from .mesh import (EquivariantField, boundary_layer_radii, build_annulus, build_torus, differential,
                   form_norm, mesh_from_json, mesh_to_json)
from .penergy import SolverConfig, energy, minimize, report_to_json, trace_to_csv
from .svg import line_plot, mesh_overlay

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_STALL, EXIT_INVARIANT, EXIT_ARTIFACTS = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ----------------------------------------------------------------------------
# configuration

_DEFAULTS = {
    "duality": {"regions": {"outer": 1.25}},
    "limits": {"eps": 0.1, "search_radius": 50, "lg_trials": 100, "kl_tol": 1e-2},
    "cones": {"n": [2, 3], "p_list": [8, 32, 128], "t_max": 2.0, "steps": 64},
    "lamination": {"transversals": 40, "laminations": 3},
}


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(where or "config", "expected an object")
    for k in doc:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}" if where else k, "unknown key")


def _num(doc, key, where, positive=False, integer=False):
    if key not in doc:
        raise ConfigError(f"{where}.{key}", "missing")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}", "must be a finite number")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key}", "must be an integer")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key}", "must be positive")
    return int(v) if integer else float(v)


@dataclass
class ExperimentConfig:
    domain: dict
    rho: list
    solver: SolverConfig
    analyses: dict
    output_dir: str
    seed: int
    raw: dict

    @property
    def kind(self) -> str:
        return self.domain["kind"]


def parse_config(doc: dict, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    _check_keys(doc, {"schema_version", "domain", "rho", "solver", "analyses", "output_dir", "seed"}, "")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"must be {SCHEMA_VERSION}")
    dom = doc.get("domain")
    if not isinstance(dom, dict) or dom.get("kind") not in ("torus", "annulus"):
        raise ConfigError("domain.kind", "must be 'torus' or 'annulus'")
    if dom["kind"] == "torus":
        _check_keys(dom, {"kind", "basis", "resolution"}, "domain")
        basis = dom.get("basis")
        try:
            E = np.array(basis, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("domain.basis", "must be a 2x2 list of numbers") from None
        if E.shape != (2, 2) or not np.all(np.isfinite(E)):
            raise ConfigError("domain.basis", "must be a 2x2 list of numbers")
        if abs(np.linalg.det(E)) < 1e-12:
            raise ConfigError("domain.basis", "vectors are linearly dependent")
        _num(dom, "resolution", "domain", positive=True, integer=True)
        n_gen = 2
    else:
        _check_keys(dom, {"kind", "r0", "r1", "n_theta", "n_r", "grading"}, "domain")
        r0 = _num(dom, "r0", "domain", positive=True)
        r1 = _num(dom, "r1", "domain", positive=True)
        if r0 >= r1:
            raise ConfigError("domain.r0", f"must be smaller than domain.r1 (got r0={r0}, r1={r1})")
        if _num(dom, "n_theta", "domain", positive=True, integer=True) < 3:
            raise ConfigError("domain.n_theta", "must be >= 3")
        if _num(dom, "n_r", "domain", positive=True, integer=True) < 2:
            raise ConfigError("domain.n_r", "must be >= 2")
        if "grading" in dom and dom["grading"] is not None:
            _check_keys(dom["grading"], {"first", "ratio"}, "domain.grading")
            _num(dom["grading"], "first", "domain.grading", positive=True)
            if _num(dom["grading"], "ratio", "domain.grading", positive=True) < 1:
                raise ConfigError("domain.grading.ratio", "must be >= 1")
        n_gen = 1
    rho = doc.get("rho")
    if (not isinstance(rho, list) or len(rho) != n_gen
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in rho)):
        raise ConfigError("rho", f"must be a list of {n_gen} numbers")
    sdoc = doc.get("solver", {})
    _check_keys(sdoc, {"p_schedule", "delta", "grad_tol", "max_iters"}, "solver")
    try:
        solver = SolverConfig(**{k: (tuple(v) if k == "p_schedule" else v) for k, v in sdoc.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError("solver", str(exc)) from None
    adoc = doc.get("analyses", {})
    _check_keys(adoc, set(_DEFAULTS), "analyses")
    analyses = {}
    for name, val in adoc.items():
        if val is False:
            continue
        params = copy.deepcopy(_DEFAULTS[name])
        if isinstance(val, dict):
            _check_keys(val, set(params), f"analyses.{name}")
            params.update(val)
        elif val is not True:
            raise ConfigError(f"analyses.{name}", "must be true, false or an object")
        analyses[name] = params
    if "lamination" in analyses and not {"duality", "limits"} <= set(analyses):
        raise ConfigError("analyses.lamination", "needs the duality and limits analyses")
    if "limits" in analyses and len(solver.p_schedule) < 2:
        raise ConfigError("solver.p_schedule", "limits need at least two exponents")
    out = doc.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir", "must be a non-empty string")
    out = str((Path(base_dir) / out).resolve())
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a nonnegative integer")
    return ExperimentConfig(domain=dom, rho=[float(x) for x in rho], solver=solver,
                            analyses=analyses, output_dir=out, seed=seed, raw=doc)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(doc, base_dir=path.parent)


def build_mesh(domain: dict):
    if domain["kind"] == "torus":
        return build_torus(domain["basis"], int(domain["resolution"]))
    radii = None
    g = domain.get("grading")
    if g:
        radii = boundary_layer_radii(domain["r0"], domain["r1"], int(domain["n_r"]), g["first"], g["ratio"])
    return build_annulus(domain["r0"], domain["r1"], int(domain["n_theta"]), int(domain["n_r"]), radii=radii)


def threads() -> int:
    env = os.environ.get("LAMINATE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring LAMINATE_THREADS=%r", env)
    return os.cpu_count() or 1


# ----------------------------------------------------------------------------
# artifact writing

def _ptag(p: float) -> str:
    return f"{p:g}"


class _Writer:
    def __init__(self, root: Path):
        self.root = root
        self.ops = {}

    def write(self, rel: str, text: str, op: str):
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.ops[rel] = op

    def manifest(self, extra=None):
        files = {}
        for rel in sorted(self.ops):
            data = (self.root / rel).read_bytes()
            files[rel] = {"sha256": hashlib.sha256(data).hexdigest(), "operation": self.ops[rel]}
        doc = {"tool": "laminate", "version": __version__, "files": files,
               "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
        if extra:
            doc.update(extra)
        (self.root / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _fail(w: _Writer, invariant: str, detail: str, code: int) -> int:
    w.write("failure.json", _dumps({"invariant": invariant, "detail": detail, "exit_code": code}), "runner.failure")
    w.manifest()
    log.error("%s: %s", invariant, detail)
    return code


def _ring_radii(mesh):
    return np.hypot(*mesh.barycenters.T) / mesh.params["radial_scale"]


def run(cfg: ExperimentConfig) -> int:
    """Execute the pipeline; returns the exit status."""
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    stale = root / "failure.json"
    if stale.exists():
        stale.unlink()
    w = _Writer(root)
    w.write("config.json", _dumps(cfg.raw), "runner.config")
    mesh = build_mesh(cfg.domain)
    w.write("mesh.json", mesh_to_json(mesh) + "\n", "mesh.build_" + mesh.kind)

    u, reports = minimize(mesh, cfg.rho, cfg.solver)
    for r in reports:
        tag = _ptag(r.p)
        w.write(f"solve/{tag}.json", report_to_json(r, include_field=True) + "\n", "penergy.minimize")
        w.write(f"solve/{tag}_trace.csv", trace_to_csv(r), "penergy.minimize")
    bad = [r for r in reports if r.stalled or not r.converged]
    if bad:
        r = bad[0]
        return _fail(w, "penergy.converged", f"p={r.p:g}: {r.message}", EXIT_STALL)

    n_threads = threads()
    duals, masses = [], []
    final = reports[-1]
    if "duality" in cfg.analyses:
        regions_cfg = cfg.analyses["duality"]["regions"]
        for r in reports:
            V = dual_form(mesh, r.field, r.p, r.k_p)
            alpha = dual_periods(mesh, V)
            d = primitive(mesh, V, alpha, r.p)
            du = differential(mesh, r.field)
            dv = differential(mesh, d.v)
            regions = {}
            if mesh.kind == "annulus":
                rr = _ring_radii(mesh)
                regions = {f"r>{v:g}": rr > v for k, v in sorted(regions_cfg.items())}
            diag = concentration_diagnostics(mesh, r.field, r.k_p * du, V, final.field, r.p,
                                             ref_scale=final.k_p, dv=dv, regions=regions)
            diag["pairing_du_V"] = pairing(mesh, du, V)
            diag["mass_bound"] = mass_bound(mesh, r.p, r.k_p)
            doc = {"p": r.p, "q": d.q, "k_p": r.k_p, "alpha": d.alpha.periods.tolist(),
                   "normalization": "zero mean over the cut domain",
                   "residual": d.residual, "mass": d.mass, "form_mass": d.form_mass,
                   "pairing": pairing(mesh, du, dv), "diagnostics": diag, "v": d.v.values.tolist()}
            w.write(f"dual/{d.q:.6g}.json", _dumps(doc), "duality.primitive")
            duals.append(d)
            masses.append(d.mass)
        if regions:
            w.write("tables/region_masses.csv", region_masses_csv(diag), "duality.concentration_diagnostics")

    lrep = None
    if "limits" in cfg.analyses:
        lp = cfg.analyses["limits"]
        lrep = limit_report(mesh, reports, masses if masses else None, eps=lp["eps"],
                            search_radius=int(lp["search_radius"]))
        doc = json.loads(limit_report_json(lrep))
        if duals:
            lg = least_gradient_test(mesh, duals[-1], int(lp["lg_trials"]), cfg.seed,
                                     L_hat=lrep.L_hat, threads=n_threads)
            doc["least_gradient"] = lg
        doc["kl_tol"] = lp["kl_tol"]
        w.write("limits.json", _dumps(doc), "limits.limit_report")
        w.write("tables/convergence.csv", convergence_csv(lrep), "limits.limit_report")
        du = form_norm(mesh, differential(mesh, final.field))
        w.write("plots/stretch.svg", mesh_overlay(mesh, du, lrep.stretch.triangles,
                                                  title=f"|du| at p={final.p:g}, stretch set eps={lrep.stretch.eps:g}"),
                "limits.stretch_set")
        if lrep.stretch.empty:
            return _fail(w, "limits.stretch-nonempty", f"max ratio {lrep.stretch.max_ratio:.6g}", EXIT_INVARIANT)
        if lrep.K_hat > lrep.L_hat * (1 + lp["kl_tol"]):
            return _fail(w, "limits.K-le-L", f"K={lrep.K_hat:.12g} > L={lrep.L_hat:.12g}", EXIT_INVARIANT)
        if duals and not doc["least_gradient"]["passed"]:
            return _fail(w, "limits.least-gradient", "perturbation lowered the total variation", EXIT_INVARIANT)

    if "cones" in cfg.analyses:
        cp = cfg.analyses["cones"]
        jobs = [(int(n), float(p)) for n in cp["n"] for p in cp["p_list"]]
        profiles = [cone_profile(n, p, cp["t_max"], int(cp["steps"])) for n, p in jobs]
        series = {}
        for (n, p), prof in zip(jobs, profiles):
            w.write(f"tables/cone_n{n}_p{p:g}.csv", cone_csv(prof), "hyperbolic.cone_profile")
            series[f"n={n} p={p:g}"] = (np.concatenate([[0.0], prof.grid]), np.concatenate([[0.0], prof.values]))
            if not prof.sandwich_ok():
                return _fail(w, "hyperbolic.sandwich", f"n={n} p={p:g}", EXIT_INVARIANT)
        w.write("plots/cones.svg", line_plot(series, "cone profiles f_p against t", identity=True),
                "hyperbolic.cone_profile")

    if "lamination" in cfg.analyses:
        code = _lamination_stage(cfg, mesh, lrep, duals, w)
        if code:
            return code

    w.manifest()
    return EXIT_OK


def _lamination_stage(cfg, mesh, lrep, duals, w) -> int:
    lp = cfg.analyses["lamination"]
    doc = {}
    dec = plaques(mesh, lrep.stretch.triangles, duals[-1])
    doc["plaques"] = dec.summary()
    doc["plaques"]["degenerate"] = dec.degenerate
    if mesh.kind == "annulus" and dec.virtual:
        fam = annulus_transversals(dec, int(lp["transversals"]), cfg.seed)
        res = cocycle_properties(dec, fam, seed=cfg.seed)
        w.write("tables/cocycles.csv", cocycle_csv(res["rows"]), "lamination.cocycle")
        doc["cocycles"] = {"n_paths": res["n_paths"], "failures": res["failures"], "passed": res["passed"]}
        if not res["passed"]:
            w.write("lamination.json", _dumps(doc), "lamination.plaques")
            return _fail(w, "lamination.cocycle-axioms", json.dumps(res["failures"], sort_keys=True), EXIT_INVARIANT)
    if mesh.kind == "torus":
        rng = np.random.default_rng(cfg.seed)
        trips = []
        for k in range(int(lp["laminations"])):
            m, n = [(1, 0), (0, 1), (1, 1), (2, 1), (1, -2)][int(rng.integers(5))]
            nl = int(rng.integers(1, 4))
            offs = rng.choice(32, nl, replace=False) / 32
            lam = MeasuredLamination([((m, n), float(o), float(rng.uniform(0.1, 1.0))) for o in offs])
            _, rec = rs_primitive(lam, mesh, seed=cfg.seed + k)
            rec["lamination"] = json.loads(lamination_to_json(lam))
            trips.append(rec)
        doc["ruelle_sullivan"] = trips
        if not all(t["passed"] for t in trips):
            w.write("lamination.json", _dumps(doc), "lamination.rs_primitive")
            return _fail(w, "lamination.rs-round-trip", "pairing and current disagree", EXIT_INVARIANT)
    w.write("lamination.json", _dumps(doc), "lamination.plaques")
    return 0


# ----------------------------------------------------------------------------
# verification

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _load_solves(root: Path, mesh):
    out = []
    for path in sorted((root / "solve").glob("*.json"), key=lambda q: float(q.stem)):
        doc = json.loads(path.read_text())
        doc["field"] = EquivariantField(np.array(doc["u"]), doc["rho"])
        out.append(doc)
    return out


def verify(artifact_dir) -> tuple[int, list]:
    """Re-check the stored artifacts; returns (exit status, suite results)."""
    root = Path(artifact_dir)
    man_path = root / "manifest.json"
    if not man_path.exists():
        return EXIT_ARTIFACTS, [SuiteResult("artifacts", False, "manifest.json missing")]
    manifest = json.loads(man_path.read_text())
    problems = []
    for rel, rec in manifest["files"].items():
        p = root / rel
        if not p.exists():
            problems.append(f"missing {rel}")
        elif hashlib.sha256(p.read_bytes()).hexdigest() != rec["sha256"]:
            problems.append(f"stale {rel}")
    if problems:
        return EXIT_ARTIFACTS, [SuiteResult("artifacts", False, "; ".join(problems))]
    results = [SuiteResult("artifacts", True, f"{len(manifest['files'])} files match the manifest")]
    mesh = mesh_from_json((root / "mesh.json").read_text())

    def suite(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a suite that cannot run counts as failed
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(SuiteResult(name, bool(ok), detail))

    suite("mesh.topology", lambda: (mesh.euler_characteristic == 0,
                                    f"chi={mesh.euler_characteristic}, {len(mesh.gluings)} gluings"))
    solves = _load_solves(root, mesh)

    def kp_law():
        worst = 0.0
        for s in solves:
            J = energy(mesh, s["field"], s["p"])
            worst = max(worst, abs(J - s["energy"]) / J,
                        abs(s["k_p"] ** s["p"] * J - s["k_p"]) / s["k_p"])
        return worst <= 1e-9, f"max relative defect {worst:.3e}"
    suite("penergy.kp-law", kp_law)

    by_q = {}
    for path in sorted((root / "dual").glob("*.json")):
        doc = json.loads(path.read_text())
        by_q[doc["p"]] = doc
    if by_q:
        def mass_law():
            worst = 0.0
            for s in solves:
                d = by_q.get(s["p"])
                if d is None:
                    return False, f"no dual artifact for p={s['p']:g}"
                du = form_norm(mesh, differential(mesh, s["field"]))
                m = s["k_p"] ** (s["p"] - 1) * float(np.sum(mesh.areas * du ** (s["p"] - 1)))
                worst = max(worst, abs(m - d["form_mass"]) / d["form_mass"])
                if d["form_mass"] > mass_bound(mesh, s["p"], s["k_p"]) + 1e-12:
                    return False, f"p={s['p']:g}: mass above the Hoelder bound"
            return worst <= 1e-9, f"max relative defect {worst:.3e}"
        suite("duality.mass-law", mass_law)

        def conjugacy():
            worst = 0.0
            for s in solves:
                U = differential(mesh, s["field"]) * s["k_p"]
                V = duality_map(mesh, U, s["p"])
                back = duality_map(mesh, V, s["p"] / (s["p"] - 1))
                n = form_norm(mesh, U)
                ok = n > 0
                err = form_norm(mesh, back + U)[ok] / n[ok]
                worst = max(worst, float(err.max()) if err.size else 0.0)
            return worst <= 1e-10, f"max relative defect {worst:.3e}"
        suite("duality.conjugacy", conjugacy)

    if (root / "limits.json").exists():
        def limits_suite():
            doc = json.loads((root / "limits.json").read_text())
            L, K = doc["L_hat"], doc["K_hat"]
            if K > L * (1 + doc.get("kl_tol", 0.0)):
                return False, f"K={K:.9g} exceeds L={L:.9g}"
            if doc["stretch_components"]["n_triangles"] == 0:
                return False, "empty stretch set"
            s_last = solves[-1]
            du = form_norm(mesh, differential(mesh, s_last["field"]))
            if abs(float(du.max()) - L) > 1e-12 * L:
                return False, "L_hat does not match the stored final field"
            lg = doc.get("least_gradient")
            if lg is not None and not lg["passed"]:
                return False, "least-gradient violations recorded"
            return True, f"K={K:.6g} <= L={L:.6g} * (1 + {doc.get('kl_tol', 0.0):g})"
        suite("limits.k-le-l", limits_suite)

    cones = sorted((root / "tables").glob("cone_*.csv")) if (root / "tables").exists() else []
    if cones:
        def cone_suite():
            for path in cones:
                rows = list(csv.DictReader(io.StringIO(path.read_text())))
                f = np.array([float(r["f_p"]) for r in rows])
                lo = np.array([float(r["lower"]) for r in rows])
                hi = np.array([float(r["upper"]) for r in rows])
                if np.any(np.diff(f) <= 0) or np.any(f < lo - 1e-12) or np.any(f > hi + 1e-12):
                    return False, path.name
            return True, f"{len(cones)} tables inside their bounds"
        suite("hyperbolic.sandwich", cone_suite)

    if (root / "lamination.json").exists():
        def lam_suite():
            doc = json.loads((root / "lamination.json").read_text())
            if "cocycles" in doc and not doc["cocycles"]["passed"]:
                return False, "cocycle axiom failures recorded"
            if "ruelle_sullivan" in doc and not all(t["passed"] for t in doc["ruelle_sullivan"]):
                return False, "round-trip failures recorded"
            if (root / "tables" / "cocycles.csv").exists():
                rows = list(csv.DictReader(io.StringIO((root / "tables" / "cocycles.csv").read_text())))
                tol = 3 * doc["plaques"]["plaque_tol"]
                neg = [r["path_id"] for r in rows
                       if r["subdivision_signs"] and set(r["subdivision_signs"]) == {"+"} and float(r["nu"]) < -tol]
                if neg:
                    return False, f"negative measure on positive transversals {neg}"
            return True, f"{doc['plaques']['n_plaques']} plaques"
        suite("lamination.cocycle", lam_suite)

    code = EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT
    return code, results


def k_vs_l(artifact_dir) -> tuple[int, dict]:
    path = Path(artifact_dir) / "limits.json"
    if not path.exists():
        return EXIT_ARTIFACTS, {}
    doc = json.loads(path.read_text())
    L, K = doc["L_hat"], doc["K_hat"]
    return EXIT_OK, {"K_hat": K, "L_hat": L, "kl_tol": doc.get("kl_tol", 0.0), "relative_gap": (L - K) / L if L else float("nan"),
                     "argmax_class": doc.get("argmax_class")}
