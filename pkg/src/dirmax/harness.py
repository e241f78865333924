"""Experiment configs, orchestration, manifests and report tables.

A config is a JSON document::

    {"version": 1, "seed": 0, "output_dir": "out", "parallel": false,
     "experiments": [{"kind": "family", "name": "fam", "params": {"N": 8}}]}

Each experiment writes into ``output_dir/<name>/``.  The manifest echoes the
config and records per-experiment status, summary tables and sha256 digests of
every artifact.  Nothing time-dependent is recorded, so a rerun from the same
manifest reproduces every file byte for byte.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .circle_method import approx_error_scan, profile_csv
from .errors import ConfigInvalid, DirmaxError, IoFailure
from .family import DirectionFamily, FamilyParams, angular_separation, build_family, validate_family
from .incidence import Box, block_combs, default_C1, default_rho0, incidence_count
from .number_theory import PolynomialSpec, gauss_sum, poly_exp_sum, select_primes, weyl_sum
from .operators import GridFunction, MaximalOperator, apply_family_max, estimate_opnorm

KINDS = ("primes", "family", "incidence", "expsum", "operator", "opnorm", "approx-scan", "separation")

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version", "experiments"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "parallel": {"type": "boolean"},
        "experiments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "name"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": list(KINDS)},
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "params": {"type": "object"},
                },
            },
        },
    },
}

TABLES = {
    "experiments": ["name", "kind", "status", "error"],
    "primes": ["name", "N", "eps", "count", "primes"],
    "family": ["name", "family_id", "N", "kappa", "L0_bits", "violations", "angular_c"],
    "incidence": ["s", "method", "value", "argmax_x", "argmax_y", "family_id"],
    "expsum": ["name", "type", "input", "re", "im", "abs"],
    "operator": ["name", "Q", "route", "in_norm", "out_norm"],
    "opnorm": ["name", "Q", "strategy", "lower_bound", "sqrt_N"],
    "approx_scan": ["name", "k", "sup_error", "on_arc_max", "off_arc_max", "on_arc_bound", "slope"],
    "separation": ["name", "N", "s", "family", "value", "family_id"],
}


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigInvalid(f"config: {exc.message}") from None
    names = [e["name"] for e in cfg["experiments"]]
    if len(names) != len(set(names)):
        raise ConfigInvalid("config: experiment names must be unique")
    return cfg


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None
    return validate_config(cfg)


def experiment_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0] >> 1)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def family_id(fam: DirectionFamily) -> str:
    return hashlib.sha256(fam.dumps().encode()).hexdigest()[:12]


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] for c in columns] if isinstance(r, dict) else r)
    return buf.getvalue()


def _box(spec) -> Box:
    return Box(*(Fraction(str(x)) for x in spec))


def _family_params(p: dict, seed: int) -> FamilyParams:
    keys = ("N", "eps", "M", "pool_size", "A", "annulus_band", "base", "attempts", "prime_sets")
    kw = {k: p[k] for k in keys if k in p}
    if "eps" in kw:
        kw["eps"] = Fraction(str(kw["eps"]))
    if "annulus_band" in kw:
        kw["annulus_band"] = tuple(Fraction(str(c)) for c in kw["annulus_band"])
    for k in ("A", "base"):
        if k in kw:
            kw[k] = int(kw[k])
    return FamilyParams(seed=int(p.get("seed", seed)), **kw)


def _load_or_build_family(p: dict, seed: int) -> DirectionFamily:
    if "family_file" in p:
        try:
            return DirectionFamily.loads(Path(p["family_file"]).read_text())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
    return build_family(_family_params(p.get("family", p), seed))


# ------------------------------------------------------------ experiment kinds


def _run_primes(p, seed, out: Path):
    N, eps = int(p["N"]), Fraction(str(p.get("eps", 1)))
    primes = select_primes(N, eps, p["window"], p.get("count"))
    _write(out / "primes.csv", _csv_text(["index", "prime"], list(enumerate(primes))))
    return {"primes": [{"N": N, "eps": str(eps), "count": len(primes), "primes": " ".join(map(str, primes))}]}


def _run_family(p, seed, out: Path):
    fam = build_family(_family_params(p, seed))
    viol = validate_family(fam)
    _write(out / "family.json", fam.dumps())
    rows = [[i, dv.m, dv.n, " ".join(map(str, dv.prime_set)), dv.q_exponent, str(dv.v[0]), str(dv.v[1]),
             dv.rescaled[0], dv.rescaled[1]] for i, dv in enumerate(fam.vectors)]
    _write(out / "family.csv", _csv_text(["index", "m", "n", "primes", "q_exponent", "vx", "vy", "Lvx", "Lvy"], rows))
    _write(out / "violations.csv", _csv_text(["bullet", "indices", "detail"],
                                             [[v.bullet, " ".join(map(str, v.indices)), v.detail] for v in viol]))
    return {"family": [{"family_id": family_id(fam), "N": fam.params.N, "kappa": fam.kappa_primes,
                        "L0_bits": fam.L0.bit_length(), "violations": len(viol),
                        "angular_c": repr(angular_separation(fam))}]}


def _incidence_setup(p, seed):
    fam = _load_or_build_family(p, seed)
    s = int(p.get("s", 2))
    ambient = p.get("ambient", "dilated")
    C1 = int(p.get("C1", default_C1(s)))
    tau = Fraction(str(p["tau"])) if "tau" in p else Fraction(1, 2 ** (C1 * s))
    rho0 = Fraction(str(p["rho0"])) if "rho0" in p else default_rho0(fam.A, ambient)
    box = _box(p.get("domain", ["-1/2", "1/2", "-1/2", "1/2"]))
    return fam, s, ambient, tau, rho0, box


def _run_incidence(p, seed, out: Path):
    fam, s, ambient, tau, rho0, box = _incidence_setup(p, seed)
    method = p.get("method", "candidate")
    rep = incidence_count(block_combs(fam.unit_vectors(), s, tau, rho0, ambient), box, method,
                          int(p.get("budget", 2_000_000)))
    _write(out / "report.json", json.dumps(rep.to_json(), indent=1, sort_keys=True) + "\n")
    row = {"s": s, "method": method, "value": rep.value,
           "argmax_x": str(rep.argmax[0]) if rep.argmax else "", "argmax_y": str(rep.argmax[1]) if rep.argmax else "",
           "family_id": family_id(fam)}
    _write(out / "incidence.csv", _csv_text(TABLES["incidence"], [row]))
    return {"incidence": [row]}


def _run_separation(p, seed, out: Path):
    fam, s, ambient, tau, rho0, box = _incidence_setup(p, seed)
    method = p.get("method", "candidate")
    budget = int(p.get("budget", 2_000_000))
    vecs = fam.unit_vectors()
    rows = []
    for label, dirs in (("constructed", vecs), ("parallel", [vecs[0]] * len(vecs))):
        rep = incidence_count(block_combs(dirs, s, tau, rho0, ambient), box, method, budget)
        rows.append({"N": fam.params.N, "s": s, "family": label, "value": rep.value, "family_id": family_id(fam)})
    _write(out / "separation.csv", _csv_text(["N", "s", "family", "value", "family_id"], rows))
    return {"separation": rows}


def _run_expsum(p, seed, out: Path):
    typ = p.get("type", "gauss")
    rows = []
    if typ == "gauss":
        for q in p.get("q", [1, 2, 3, 4, 5]):
            for a in range(q):
                if math.gcd(a, q) == 1:
                    rows.append((f"{a}/{q}", gauss_sum(a, q)))
    elif typ == "poly":
        P = PolynomialSpec.parse(str(p.get("P", "0,0,1")))
        for q in p.get("q", [1, 2, 3, 4, 5]):
            for a in range(q):
                if math.gcd(a, q) == 1:
                    rows.append((f"{a}/{q}", poly_exp_sum(P, a, q)))
    elif typ == "weyl":
        coeffs = [Fraction(str(c)) for c in p["coeffs"]]
        N = int(p["N"])
        rows.append((" ".join(map(str, coeffs)) + f" N={N}", weyl_sum(coeffs, N)))
    else:
        raise ConfigInvalid(f"unknown expsum type {typ!r}")
    table = [{"type": typ, "input": inp, "re": repr(z.real), "im": repr(z.imag), "abs": repr(abs(z))} for inp, z in rows]
    _write(out / "expsum.csv", _csv_text(["type", "input", "re", "im", "abs"], table))
    return {"expsum": table}


def _directions(p, seed):
    if "directions" in p:
        return [tuple(int(c) for c in v) for v in p["directions"]]
    return _load_or_build_family(p, seed).lattice_vectors()


def _run_operator(p, seed, out: Path):
    Q = int(p.get("Q", 64))
    dirs = _directions(p, seed)
    ks = [int(k) for k in p.get("k_set", [2])]
    P = PolynomialSpec.parse(str(p["P"])) if "P" in p else None
    route = p.get("route", "spectral")
    f = GridFunction.random(Q, seed=seed)
    g = apply_family_max(f, dirs, ks, P, p.get("bump", "exp"), route)
    g.save(out / "output.bin")
    f.save(out / "input.bin")
    row = {"Q": Q, "route": route, "in_norm": repr(f.norm()), "out_norm": repr(g.norm())}
    _write(out / "operator.csv", _csv_text(["Q", "route", "in_norm", "out_norm"], [row]))
    return {"operator": [row]}


def _run_opnorm(p, seed, out: Path):
    Q = int(p.get("Q", 64))
    dirs = _directions(p, seed)
    ks = [int(k) for k in p.get("k_set", [0])]
    P = PolynomialSpec.parse(str(p["P"])) if "P" in p else None
    op = MaximalOperator.directional(Q, dirs, ks, P, p.get("bump", "exp"))
    rows = []
    for strategy in p.get("strategies", ["gaussian", "frequency", "reweight"]):
        est = estimate_opnorm(op, Q, int(p.get("trials", 4)), seed, strategy)
        rows.append({"Q": Q, "strategy": strategy, "lower_bound": repr(est.lower_bound),
                     "sqrt_N": repr(math.sqrt(len(dirs)))})
    _write(out / "opnorm.csv", _csv_text(["Q", "strategy", "lower_bound", "sqrt_N"], rows))
    return {"opnorm": rows}


def _run_approx_scan(p, seed, out: Path):
    ks = list(range(int(p.get("k_min", 8)), int(p.get("k_max", 16)) + 1))
    prof: list = []
    rep = approx_error_scan(ks, int(p.get("samples", 10_000)), Fraction(str(p.get("eps0", "1/10"))),
                            Fraction(str(p.get("eps1", "1/20"))), seed, p.get("bump", "exp"), prof,
                            bool(p.get("transition", False)))
    _write(out / "profile.csv", profile_csv(prof))
    _write(out / "fit.json", json.dumps(rep.to_json(), indent=1, sort_keys=True) + "\n")
    rows = [{"k": k, "sup_error": repr(e), "on_arc_max": repr(on), "off_arc_max": repr(off),
             "on_arc_bound": repr(rep.on_arc_bound(k)), "slope": repr(rep.slope)}
            for k, e, on, off in zip(rep.ks, rep.sup_error, rep.on_arc_max, rep.off_arc_max)]
    return {"approx_scan": rows}


RUNNERS = {
    "primes": _run_primes,
    "family": _run_family,
    "incidence": _run_incidence,
    "expsum": _run_expsum,
    "operator": _run_operator,
    "opnorm": _run_opnorm,
    "approx-scan": _run_approx_scan,
    "separation": _run_separation,
}


# ------------------------------------------------------------------ manifests


@dataclass
class RunManifest:
    config: dict
    seed: int
    version: str
    experiments: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e["status"] == "ok" for e in self.experiments)

    def to_json(self) -> dict:
        return {"config": self.config, "seed": self.seed, "version": self.version, "experiments": self.experiments}

    @classmethod
    def from_json(cls, d: dict) -> "RunManifest":
        return cls(d["config"], d["seed"], d["version"], d.get("experiments", []))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            return cls.from_json(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc


def _execute(args):
    index, exp, seed, root = args
    out = Path(root) / exp["name"]
    eseed = experiment_seed(seed, index)
    record = {"name": exp["name"], "kind": exp["kind"], "seed": eseed, "status": "ok", "error": "",
              "tables": {}, "outputs": {}}
    try:
        out.mkdir(parents=True, exist_ok=True)
        record["tables"] = RUNNERS[exp["kind"]](dict(exp.get("params", {})), eseed, out)
    except ConfigInvalid:
        raise
    except (DirmaxError, ValueError, KeyError, TypeError) as exc:
        record["status"] = "error"
        record["error"] = f"{type(exc).__name__}: {exc}"
    if out.exists():
        for f in sorted(out.rglob("*")):
            if f.is_file():
                record["outputs"][str(f.relative_to(root))] = sha256_file(f)
    return record


def run_experiment(config: dict, output_dir=None) -> RunManifest:
    """Run every experiment in the config and write ``manifest.json`` in the output directory."""
    cfg = validate_config(config)
    seed = int(cfg.get("seed", 0))
    root = Path(output_dir if output_dir is not None else cfg.get("output_dir", "dirmax-out"))
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    jobs = [(i, e, seed, str(root)) for i, e in enumerate(cfg["experiments"])]
    if cfg.get("parallel") and len(jobs) > 1:
        with ProcessPoolExecutor() as ex:
            records = list(ex.map(_execute, jobs))
    else:
        records = [_execute(j) for j in jobs]
    manifest = RunManifest(cfg, seed, __version__, records)
    _write(root / "manifest.json", manifest.dumps())
    return manifest


def rerun(manifest_path, output_dir) -> tuple[RunManifest, list[str]]:
    """Rerun from a manifest; returns the new manifest and the artifacts whose digests differ."""
    old = RunManifest.load(manifest_path)
    new = run_experiment(old.config, output_dir)
    old_d = {k: v for e in old.experiments for k, v in e["outputs"].items()}
    new_d = {k: v for e in new.experiments for k, v in e["outputs"].items()}
    diffs = sorted(k for k in set(old_d) | set(new_d) if old_d.get(k) != new_d.get(k))
    return new, diffs


# -------------------------------------------------------------------- reports


def report_tables(manifest: RunManifest) -> dict:
    """Every report table as {name: {"columns": [...], "rows": [[str, ...]]}}."""
    tables = {"experiments": {"columns": TABLES["experiments"], "rows": []}}
    for e in manifest.experiments:
        tables["experiments"]["rows"].append([e["name"], e["kind"], e["status"], e["error"]])
        for tname, rows in e.get("tables", {}).items():
            cols = TABLES[tname]
            t = tables.setdefault(tname, {"columns": cols, "rows": []})
            for r in rows:
                full = dict(r, name=e["name"])
                t["rows"].append([str(full.get(c, "")) for c in cols])
    return tables


def emit_report(manifest: RunManifest, fmt: str, out_dir) -> list[Path]:
    """Write one CSV per table, or one JSON document mirroring them."""
    out_dir = Path(out_dir)
    tables = report_tables(manifest)
    written = []
    if fmt == "csv":
        for name, t in tables.items():
            path = out_dir / f"{name}.csv"
            _write(path, _csv_text(t["columns"], t["rows"]))
            written.append(path)
    elif fmt == "json":
        path = out_dir / "report.json"
        _write(path, json.dumps(tables, indent=1, sort_keys=True) + "\n")
        written.append(path)
    else:
        raise ConfigInvalid(f"unknown report format {fmt!r}")
    return written


def read_csv_tables(paths) -> dict:
    out = {}
    for p in paths:
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        out[Path(p).stem] = {"columns": rows[0], "rows": rows[1:]}
    return out
