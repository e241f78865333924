"""Command-line front end.  Exit codes: 0 success, 1 configuration error, 2 computation error."""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from .errors import ConfigInvalid, DirmaxError

EPILOG = "exit codes: 0 success, 1 configuration error, 2 computation error"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(f"{self.prog}: {message}")


def _emit(obj):
    print(json.dumps(obj, indent=1, sort_keys=True, default=str))


def _dirs(text: str):
    """'1,0;0,1;2,1' -> [(1, 0), (0, 1), (2, 1)]"""
    return [tuple(int(c) for c in part.split(",")) for part in text.split(";") if part.strip()]


def _family_from(args):
    from .family import DirectionFamily

    return DirectionFamily.loads(Path(args.family).read_text())


def _directions(args):
    if getattr(args, "directions", None):
        return _dirs(args.directions)
    if getattr(args, "family", None):
        return _family_from(args).lattice_vectors()
    raise ConfigInvalid("give --directions or --family")


# ------------------------------------------------------------------ commands


def cmd_primes(args):
    from .number_theory import select_primes

    _emit({"primes": select_primes(args.N, Fraction(args.eps), (args.lo, args.hi), args.count)})


def _params_from(args):
    from .family import FamilyParams

    return FamilyParams(N=args.N, eps=Fraction(args.eps), M=args.M, pool_size=args.pool_size,
                        A=args.A, seed=args.seed, base=args.base)


def cmd_family_build(args):
    from .family import angular_separation, build_family, validate_family

    fam = build_family(_params_from(args))
    text = fam.dumps()
    if args.out:
        Path(args.out).write_text(text)
    _emit({"N": len(fam), "kappa_primes": fam.kappa_primes, "L0": str(fam.L0), "L1": str(fam.L1),
           "violations": len(validate_family(fam)), "angular_c": angular_separation(fam), "out": args.out})


def cmd_family_validate(args):
    from .family import validate_family

    viol = validate_family(_family_from(args))
    _emit({"violations": [{"bullet": v.bullet, "indices": list(v.indices), "detail": v.detail} for v in viol]})
    return 2 if viol else 0


def cmd_incidence(args):
    from .incidence import Box, block_combs, default_C1, default_rho0, incidence_count

    fam = _family_from(args)
    C1 = args.C1 if args.C1 is not None else default_C1(args.s)
    tau = Fraction(args.tau) if args.tau else Fraction(1, 2 ** (C1 * args.s))
    rho0 = Fraction(args.rho0) if args.rho0 else default_rho0(fam.A, args.ambient)
    box = Box(*(Fraction(x) for x in args.domain))
    vecs = fam.unit_vectors()
    if args.parallel_baseline:
        vecs = [vecs[0]] * len(vecs)
    rep = incidence_count(block_combs(vecs, args.s, tau, rho0, args.ambient), box, args.method, args.budget,
                          args.workers)
    _emit(rep.to_json())


def cmd_expsum(args):
    from .number_theory import PolynomialSpec, gauss_sum, poly_exp_sum, weyl_sum

    if args.which == "gauss":
        z = gauss_sum(args.a, args.q)
    elif args.which == "poly":
        z = poly_exp_sum(PolynomialSpec.parse(args.P), args.a, args.q)
    else:
        z = weyl_sum([Fraction(c) for c in args.coeffs.split(",")], args.N)
    _emit({"re": z.real, "im": z.imag, "abs": abs(z)})


def cmd_op_apply(args):
    from .number_theory import PolynomialSpec
    from .operators import GridFunction, apply_directional_singular, apply_family_max

    f = GridFunction.load(args.input) if args.input else GridFunction.random(args.Q, seed=args.seed)
    dirs = _directions(args)
    P = PolynomialSpec.parse(args.P)
    if args.operator == "max":
        g = apply_family_max(f, dirs, args.k, P, args.bump, args.route)
    else:
        g = apply_directional_singular(f, 0, dirs[:1], P, (args.m_min, args.m_max))
    g.save(args.out)
    _emit({"Q": f.Q, "in_norm": f.norm(), "out_norm": g.norm(), "out": args.out})


def cmd_op_norm(args):
    from .number_theory import PolynomialSpec
    from .operators import MaximalOperator, estimate_opnorm

    dirs = _directions(args)
    op = MaximalOperator.directional(args.Q, dirs, args.k, PolynomialSpec.parse(args.P), args.bump)
    est = estimate_opnorm(op, args.Q, args.trials, args.seed, args.strategy)
    if args.witness:
        est.witness.save(args.witness)
    _emit({"lower_bound": est.lower_bound, "strategy": est.strategy, "sqrt_N": math.sqrt(len(dirs)),
           "history_len": len(est.history)})


def cmd_approx_scan(args):
    from .circle_method import approx_error_scan, profile_csv

    prof: list = []
    rep = approx_error_scan(range(args.k_min, args.k_max + 1), args.samples, Fraction(args.eps0),
                            Fraction(args.eps1), args.seed, args.bump, prof if args.profile else None,
                            args.transition)
    if args.profile:
        Path(args.profile).write_text(profile_csv(prof))
    _emit(rep.to_json())


def cmd_separation(args):
    from .harness import _run_separation
    import tempfile

    p = {"N": args.N, "pool_size": args.pool_size, "s": args.s, "C1": args.C1, "method": args.method,
         "budget": args.budget, "seed": args.seed}
    with tempfile.TemporaryDirectory() as tmp:
        rows = _run_separation(p, args.seed, Path(tmp))["separation"]
    _emit({r["family"]: r["value"] for r in rows})


def cmd_report(args):
    from .harness import RunManifest, emit_report

    paths = emit_report(RunManifest.load(args.manifest), args.format, args.out)
    _emit({"written": [str(p) for p in paths]})


def cmd_run(args):
    from .harness import load_config, run_experiment

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.parallel:
        cfg["parallel"] = True
    m = run_experiment(cfg, args.output_dir)
    _emit({e["name"]: e["status"] + (f" ({e['error']})" if e["error"] else "") for e in m.experiments})
    return 0 if m.ok else 2


def cmd_rerun(args):
    from .harness import rerun

    m, diffs = rerun(args.manifest, args.output_dir)
    _emit({"identical": not diffs, "differing": diffs})
    return 0 if (m.ok and not diffs) else 2


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dirmax", description=__doc__, epilog=EPILOG)
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("primes", help="smallest primes in a window avoiding the divisors of N (prime pool of the construction)")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--eps", default="1")
    s.add_argument("--lo", type=int, required=True)
    s.add_argument("--hi", type=int, required=True)
    s.add_argument("--count", type=int)
    s.set_defaults(func=cmd_primes)

    fam = sub.add_parser("family", help="arithmetic-independent direction families (existence of the family V_{N,eps})")
    fsub = fam.add_subparsers(dest="action", required=True, parser_class=_Parser)
    b = fsub.add_parser("build", help="construct a family and write it as JSON")
    b.add_argument("--N", type=int, required=True)
    b.add_argument("--eps", default="1")
    b.add_argument("--M", type=int, default=1)
    b.add_argument("--pool-size", type=int)
    b.add_argument("--A", type=int)
    b.add_argument("--base", type=int)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_family_build)
    v = fsub.add_parser("validate", help="check every construction constraint; exit 2 on violations")
    v.add_argument("family")
    v.set_defaults(func=cmd_family_validate)

    inc = sub.add_parser("incidence", help="comb incidence C(s, V) of a family (the incidence estimate)")
    inc.add_argument("--family", required=True)
    inc.add_argument("--s", type=int, default=2)
    inc.add_argument("--C1", type=int)
    inc.add_argument("--tau")
    inc.add_argument("--rho0")
    inc.add_argument("--ambient", choices=["torus", "dilated"], default="dilated")
    inc.add_argument("--method", choices=["grid", "candidate"], default="candidate")
    inc.add_argument("--domain", nargs=4, default=["-1/2", "1/2", "-1/2", "1/2"], metavar=("X0", "X1", "Y0", "Y1"))
    inc.add_argument("--budget", type=int, default=2_000_000)
    inc.add_argument("--workers", type=int, default=1)
    inc.add_argument("--parallel-baseline", action="store_true", help="replace the family by N copies of its first vector")
    inc.set_defaults(func=cmd_incidence)

    ex = sub.add_parser("expsum", help="complete and incomplete exponential sums (Gauss sum bound, Weyl's lemma)")
    esub = ex.add_subparsers(dest="which", required=True, parser_class=_Parser)
    g = esub.add_parser("gauss", help="S(a/q) = (1/q) sum_r e(-a r^2 / q)")
    g.add_argument("a", type=int)
    g.add_argument("q", type=int)
    pp = esub.add_parser("poly", help="(1/q) sum_r e(-a P(r) / q)")
    pp.add_argument("a", type=int)
    pp.add_argument("q", type=int)
    pp.add_argument("--P", default="0,0,1", help="coefficients, constant term first")
    w = esub.add_parser("weyl", help="sum_{n<=N} e(a_d n^d + ... + a_1 n)")
    w.add_argument("--coeffs", required=True, help="a_1,...,a_d as rationals")
    w.add_argument("--N", type=int, required=True)
    for q in (g, pp, w):
        q.set_defaults(func=cmd_expsum)

    op = sub.add_parser("op", help="directional maximal and singular operators on Z_Q^2")
    osub = op.add_subparsers(dest="action", required=True, parser_class=_Parser)
    a = osub.add_parser("apply", help="apply the family maximal operator (or the singular operator) to a grid function")
    a.add_argument("--input", help="raw complex128 file with JSON sidecar; random if omitted")
    a.add_argument("--out", required=True)
    a.add_argument("--operator", choices=["max", "singular"], default="max")
    a.add_argument("--m-min", type=int, default=1)
    a.add_argument("--m-max", type=int, default=8)
    nrm = osub.add_parser("norm", help="certified lower bound for the l2 norm (the N^{1/2} unit-scale bound)")
    nrm.add_argument("--strategy", choices=["gaussian", "frequency", "reweight", "all"], default="all")
    nrm.add_argument("--trials", type=int, default=4)
    nrm.add_argument("--witness")
    for q in (a, nrm):
        q.add_argument("--Q", type=int, default=64)
        q.add_argument("--directions", help="'1,0;0,1;...'")
        q.add_argument("--family")
        q.add_argument("--k", type=int, action="append", default=None)
        q.add_argument("--P", default="0,1")
        q.add_argument("--bump", choices=["exp", "cos2"], default="exp")
        q.add_argument("--seed", type=int, default=0)
    a.add_argument("--route", choices=["spectral", "spatial"], default="spectral")
    a.set_defaults(func=cmd_op_apply)
    nrm.set_defaults(func=cmd_op_norm)

    ap = sub.add_parser("approx", help="major-arc approximation of the quadratic multiplier")
    asub = ap.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sc = asub.add_parser("scan", help="sampled sup |khat_k - L_k| per k and the fitted decay slope")
    sc.add_argument("--k-min", type=int, default=8)
    sc.add_argument("--k-max", type=int, default=16)
    sc.add_argument("--samples", type=int, default=10_000)
    sc.add_argument("--eps0", default="1/10")
    sc.add_argument("--eps1", default="1/20")
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--bump", choices=["exp", "cos2"], default="exp")
    sc.add_argument("--transition", action="store_true", help="also sample the cutoff ramp")
    sc.add_argument("--profile", help="write the per-sample CSV here")
    sc.set_defaults(func=cmd_approx_scan)

    sp = sub.add_parser("separation", help="constructed family vs all-parallel baseline incidence")
    sp.add_argument("--N", type=int, default=16)
    sp.add_argument("--pool-size", type=int, default=12)
    sp.add_argument("--s", type=int, default=2)
    sp.add_argument("--C1", type=int, default=90)
    sp.add_argument("--method", choices=["grid", "candidate"], default="candidate")
    sp.add_argument("--budget", type=int, default=2_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_separation)

    r = sub.add_parser("report", help="emit report tables from a run manifest")
    r.add_argument("manifest")
    r.add_argument("--format", choices=["csv", "json"], default="csv")
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_report)

    ru = sub.add_parser("run", help="run every experiment of a JSON config and write a manifest")
    ru.add_argument("config")
    ru.add_argument("--output-dir")
    ru.add_argument("--seed", type=int)
    ru.add_argument("--parallel", action="store_true")
    ru.set_defaults(func=cmd_run)

    rr = sub.add_parser("rerun", help="rerun from a manifest and compare artifact digests")
    rr.add_argument("manifest")
    rr.add_argument("--output-dir", required=True)
    rr.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "k", "") is None:
            args.k = [2]
        return int(args.func(args) or 0)
    except ConfigInvalid as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DirmaxError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
