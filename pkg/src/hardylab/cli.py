"""Command-line driver: ``hardylab <command> [flags]``.

Exit codes: 0 when every verdict holds, 2 when any inequality or target is
violated, 3 when nothing is violated but some verdict is inconclusive, 1 on
usage, configuration or evaluation errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable


from hardylab.cone import (
    ConeSpec,
    SharpConstants,
    angular_eigenfunction,
    hardy_constant,
    principal_eigenvalue,
    weighted_halfspace_constant,
)
from hardylab.decompose import energy_doubling_check, low_degree_vanishing_check, monomial_moment
from hardylab.errors import HardyLabError
from hardylab.functionals import INCONCLUSIVE, VIOLATED, check_ft, check_ft_radial, check_hardy, check_weighted_hardy
from hardylab.operators import conjugation_identity_sweep, eigen_relation_sweep, product_identity_sweep
from hardylab.quadrature import default_cone_ball_rule, sphere_rule
from hardylab.report import (
    STATUS_ERROR,
    STATUS_INCONCLUSIVE,
    STATUS_PASS,
    STATUS_VIOLATED,
    ConfigError,
    RunRecord,
    Stopwatch,
    Table,
    emit,
    load_config,
    now_timestamp,
)
from hardylab.sharpness import DEFAULT_EPSILONS, sharpness_sweep
from hardylab.spectral import angular_rayleigh, verify_principal_eigenvalues
from hardylab.trial import (
    bump_profile,
    minimizing_profile,
    polynomial_profile,
    product_bump_trial,
    random_trial,
    separable_trial,
)

DEFAULT_SPECS = ((3, 1), (3, 2), (3, 3), (4, 2), (5, 3))
DEFAULT_WEIGHTS = ("1/2", "1", "3/2", "2")
EXIT = {STATUS_PASS: 0, STATUS_ERROR: 1, STATUS_VIOLATED: 2, STATUS_INCONCLUSIVE: 3}
PARAM_KEYS = ("n", "k", "R", "trials", "seed", "eps_list", "resolutions", "depth", "tol", "format", "out", "l", "quick")


class UsageError(Exception):
    pass


def combine(statuses) -> str:
    statuses = list(statuses)
    if STATUS_ERROR in statuses:
        return STATUS_ERROR
    if STATUS_VIOLATED in statuses:
        return STATUS_VIOLATED
    if STATUS_INCONCLUSIVE in statuses:
        return STATUS_INCONCLUSIVE
    return STATUS_PASS


def _verdict_status(verdict: str) -> str:
    return {VIOLATED: STATUS_VIOLATED, INCONCLUSIVE: STATUS_INCONCLUSIVE}.get(verdict, STATUS_PASS)


def _flag(ok: bool) -> str:
    return STATUS_PASS if ok else STATUS_VIOLATED


def _specs(p: dict, fallback=DEFAULT_SPECS) -> list[ConeSpec]:
    n, k = p.get("n"), p.get("k")
    if n is not None and k is not None:
        return [ConeSpec(int(n), int(k))]
    if n is not None:
        return [ConeSpec(int(n), kk) for kk in range(1, int(n) + 1)]
    if k is not None:
        return [ConeSpec(nn, kk) for nn, kk in fallback if kk == int(k)] or [ConeSpec(max(3, int(k)), int(k))]
    return [ConeSpec(nn, kk) for nn, kk in fallback]


def _as_list(value) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [value]


def _rule(spec: ConeSpec, R: float, seed: int, samples: int = 4000):
    return default_cone_ball_rule(spec, R, seed=seed, samples=samples)


# ----------------------------------------------------------------------------
# commands; each returns (result, status, table)


def cmd_constants(p: dict):
    specs = _specs(p, tuple((n, k) for n in range(3, 11) for k in range(1, n + 1)))
    entries, rows = [], []
    for spec in specs:
        c = SharpConstants(spec)
        lhs = hardy_constant(spec)
        rhs = Fraction((spec.n - 2) ** 2, 4) + principal_eigenvalue(spec)
        entry = {**c.as_dict(), "decomposition_exact": lhs == rhs}
        for l in _as_list(p.get("l")):
            entry.setdefault("weighted_halfspace", {})[str(Fraction(str(l)))] = str(c.weighted_halfspace(str(l)))
        entries.append(entry)
        rows.append([spec.n, spec.k, str(lhs), float(lhs), entry["lambda1"], entry["free_part"], entry["decomposition_exact"]])
    status = _flag(all(e["decomposition_exact"] for e in entries))
    table = Table(["n", "k", "hardy", "hardy_float", "lambda1", "free_part", "decomposition_exact"], rows)
    return {"constants": entries}, status, table


def cmd_verify_hardy(p: dict):
    R, seed, trials = float(p["R"]), int(p["seed"]), int(p["trials"])
    rel_tol = float(p["tol"]) if p.get("tol") is not None else 1e-6
    summaries, rows, statuses = [], [], []
    for spec in _specs(p):
        rule = _rule(spec, R, seed)
        C = float(hardy_constant(spec))
        counts = {"holds": 0, "violated": 0, "inconclusive": 0}
        worst_q, worst_rel = math.inf, math.inf
        for i in range(trials):
            u = random_trial(spec, R, 6, seed + i, rule=rule)
            rep = check_hardy(spec, u, rule, tol=rel_tol * C * 1.0)
            counts[rep.verdict] += 1
            q = rep.energy / rep.hardy
            worst_q = min(worst_q, q)
            worst_rel = min(worst_rel, rep.margin / (C * rep.hardy))
            statuses.append(_verdict_status(rep.verdict))
            rows.append([spec.n, spec.k, i, u.descriptor["draw_seed"], q, rep.margin, rep.tolerance, rep.verdict])
        summaries.append({
            "spec": spec.as_dict(), "constant": C, "trials": trials, "counts": counts,
            "min_quotient": worst_q, "min_relative_margin": worst_rel,
            "relative_tol": rel_tol, "rule": rule.describe(),
        })
    table = Table(["n", "k", "trial", "draw_seed", "quotient", "margin", "tolerance", "verdict"], rows,
                  {"rules": [s["rule"]["domain_tag"] for s in summaries]})
    return {"specs": summaries}, combine(statuses), table


def cmd_verify_weighted(p: dict):
    R, seed, trials = float(p["R"]), int(p["seed"]), int(p["trials"])
    rel_tol = float(p["tol"]) if p.get("tol") is not None else 1e-6
    ns = [int(p["n"])] if p.get("n") is not None else [3, 4]
    ls = [str(v) for v in _as_list(p.get("l"))] or list(DEFAULT_WEIGHTS)
    summaries, rows, statuses = [], [], []
    for n in ns:
        spec = ConeSpec(n, 1)
        rule = _rule(spec, R, seed)
        for l in ls:
            counts = {"holds": 0, "violated": 0, "inconclusive": 0}
            bitmatch = True
            worst = math.inf
            for i in range(trials):
                u = random_trial(spec, R, 6, seed + i, rule=rule)
                C = float(hardy_constant(spec)) if Fraction(l) == 1 else None
                rep = check_weighted_hardy(n, l, u, rule, tol=rel_tol * rule_constant(n, l))
                counts[rep.verdict] += 1
                statuses.append(_verdict_status(rep.verdict))
                worst = min(worst, rep.margin / (rep.constant_used * rep.hardy))
                if C is not None:
                    plain = check_hardy(spec, u, rule, tol=rel_tol * C)
                    bitmatch &= plain.margin == rep.margin and plain.verdict == rep.verdict
                rows.append([n, l, i, rep.energy, rep.weighted if rep.weighted is not None else 0.0,
                             rep.hardy, rep.margin, rep.verdict])
            entry = {"n": n, "l": l, "constant": rule_constant(n, l), "coefficient": str(Fraction(l) * (Fraction(l) - 1)),
                     "trials": trials, "counts": counts, "min_relative_margin": worst, "rule": rule.describe()}
            if Fraction(l) == 1:
                entry["matches_halfspace_check_bitwise"] = bitmatch
                statuses.append(_flag(bitmatch))
            summaries.append(entry)
    table = Table(["n", "l", "trial", "energy", "weighted", "hardy", "margin", "verdict"], rows)
    return {"cases": summaries}, combine(statuses), table


def rule_constant(n: int, l) -> float:
    return float(weighted_halfspace_constant(n, l))


def _ft_trials(spec: ConeSpec, R: float, seed: int, count: int, rule):
    phi = angular_eigenfunction(spec)
    suite = [
        ("product_bump", product_bump_trial(spec, R)),
        ("separable_bump_k", separable_trial(phi, bump_profile(spec.k, R))),
        ("separable_bump_k+1", separable_trial(phi, bump_profile(spec.k + 1, R))),
    ]
    suite += [(f"random_{seed + i}", random_trial(spec, R, 6, seed + i, rule=rule)) for i in range(count)]
    return suite


def _profile_suite(n: int, R: float):
    spec = ConeSpec(n, 1)
    return [
        ("bump_l1", bump_profile(1, R)),
        ("bump_l2", bump_profile(2, R)),
        ("bump_l0", bump_profile(0, R)),
        ("r(1-r)", polynomial_profile([0.0, 1.0, -1.0 / R], R)),
        ("minimizing_eps0.25", minimizing_profile(spec, 0.25, 1e-3)),
        ("minimizing_eps0.1", minimizing_profile(spec, 0.1, log_inner_cut=-180.0)),
    ]


def _monotone_nonincreasing(values, slack=0.0) -> bool:
    return all(b <= a + slack for a, b in zip(values, values[1:]))


def cmd_verify_ft(p: dict):
    R, seed, depth = float(p["R"]), int(p["seed"]), int(p["depth"])
    trials = int(p["trials"])
    specs = _specs(p)
    results, rows, statuses = [], [], []
    for spec in specs:
        rule = _rule(spec, R, seed)
        for name, u in _ft_trials(spec, R, seed, trials, rule):
            rep = check_ft(spec, u, rule, R, depth)
            terms = rep.remainder_terms
            positive = all(t >= 0 for t in terms)
            terms_monotone = _monotone_nonincreasing(terms)
            margins_monotone = _monotone_nonincreasing(rep.margins_by_depth)
            statuses += [_verdict_status(rep.verdict), _flag(positive and terms_monotone and margins_monotone)]
            results.append({"spec": spec.as_dict(), "trial": name, "verdict": rep.verdict,
                            "margins_by_depth": rep.margins_by_depth, "terms": terms,
                            "terms_nonnegative": positive, "terms_monotone": terms_monotone,
                            "margins_monotone": margins_monotone, "tolerance": rep.tolerance})
            for m, (t, mg) in enumerate(zip(terms, rep.margins_by_depth), start=1):
                rows.append([spec.n, spec.k, name, m, t, mg, rep.verdict])
    radial = []
    for n in sorted({s.n for s in specs}):
        for name, f in _profile_suite(n, R):
            rep = check_ft_radial(n, f, R, depth)
            ok = _monotone_nonincreasing(rep.margins_by_depth) and all(t >= 0 for t in rep.remainder_terms)
            statuses += [_verdict_status(rep.verdict), _flag(ok)]
            radial.append({"n": n, "profile": name, "verdict": rep.verdict,
                           "margins_by_depth": rep.margins_by_depth, "terms": rep.remainder_terms})
            for m, (t, mg) in enumerate(zip(rep.remainder_terms, rep.margins_by_depth), start=1):
                rows.append([n, 0, f"radial:{name}", m, t, mg, rep.verdict])
    table = Table(["n", "k", "trial", "depth", "term", "margin", "verdict"], rows)
    return {"depth": depth, "R": R, "trials": results, "radial_profiles": radial}, combine(statuses), table


def cmd_sharpness(p: dict):
    eps = [float(e) for e in _as_list(p.get("eps_list"))] or list(DEFAULT_EPSILONS)
    tol = float(p["tol"]) if p.get("tol") is not None else 1e-3
    specs = _specs(p, ((3, 1), (4, 2)))
    reports = [sharpness_sweep(s, eps, tol=tol) for s in specs]
    if len(reports) == 1:
        table = Table(["epsilon", "quotient", "margin"], [list(r) for r in reports[0].rows()])
    else:
        table = Table(["n", "k", "epsilon", "quotient", "margin"],
                      [[r.spec.n, r.spec.k, *row] for r in reports for row in r.rows()])
    return {"sweeps": [r.as_dict() for r in reports]}, combine(_flag(r.passed) for r in reports), table


def cmd_eigen(p: dict):
    tol = float(p["tol"]) if p.get("tol") is not None else 1e-3
    res = [int(r) for r in _as_list(p.get("resolutions"))] or [32, 64, 128, 256]
    seed = int(p["seed"])
    n = p.get("n")
    if n is not None and int(n) >= 4:
        specs = _specs(p, ((4, 2), (5, 3), (6, 3)))
        out, rows, statuses = [], [], []
        for spec in specs:
            est = angular_rayleigh(spec, sphere_rule(spec.n, seed=seed, restrict_to_cone=spec.k, samples=20000))
            lam = principal_eigenvalue(spec)
            ok_r = abs(est.value - lam) <= 3 * est.stderr
            rel = eigen_relation_sweep(spec, seed=seed)
            statuses += [_flag(ok_r), _flag(rel.passed)]
            out.append({"spec": spec.as_dict(), "lambda1": lam, "rayleigh": est.value, "stderr": est.stderr,
                        "rayleigh_within_3sigma": ok_r, "eigen_relation": rel.as_dict()})
            rows.append([spec.n, spec.k, lam, est.value, est.stderr, rel.order_estimate])
        table = Table(["n", "k", "lambda1", "rayleigh", "stderr", "relation_order"], rows)
        return {"general_n": out}, combine(statuses), table
    ks = [int(p["k"])] if p.get("k") is not None else [1, 2, 3]
    reports = [verify_principal_eigenvalues(k, res, tol) for k in ks]
    rows = [[r.k, "x".join(map(str, e.resolution)), e.eigenvalue, e.eigenvalue - r.target]
            for r in reports for e in r.results]
    values = [r.target for r in reports]
    nesting = all(a < b for a, b in zip(values, values[1:]))
    table = Table(["k", "resolution", "estimate", "error"], rows)
    result = {"resolutions": res, "tol": tol, "sections": [r.as_dict() for r in reports]}
    return result, combine([_flag(r.passed) for r in reports] + [_flag(nesting)]), table


def cmd_decompose(p: dict):
    R, seed, trials = float(p["R"]), int(p["seed"]), int(p["trials"])
    out, rows, statuses = [], [], []
    for spec in _specs(p):
        rule = _rule(spec, R, seed)
        for i in range(trials):
            u = random_trial(spec, R, 6, seed + i, rule=rule)
            van = low_degree_vanishing_check(u, spec, seed=seed)
            control = low_degree_vanishing_check(u, spec, extension="even", seed=seed)
            dbl = energy_doubling_check(u, spec, cone_rule=rule)
            entry = {"spec": spec.as_dict(), "trial": i, "vanishing": van.as_dict(),
                     "even_control_fails": not control.passed, "control_max": control.max_coefficient,
                     "doubling": dbl.as_dict()}
            if spec.n >= 4 and spec.k >= 1:
                alpha = [0] * (spec.n - spec.k) + [1] * spec.k
                entry["degree_k_moment"] = monomial_moment(u, spec, alpha, enforce_degree=False, seed=seed)
            statuses += [_flag(van.passed), _flag(not control.passed), _flag(dbl.passed)]
            out.append(entry)
            rows.append([spec.n, spec.k, i, van.path, van.max_coefficient, van.threshold,
                         control.max_coefficient, dbl.energy_ratio, dbl.hardy_ratio])
    table = Table(["n", "k", "trial", "path", "max_coefficient", "threshold", "control_max",
                   "energy_ratio", "hardy_ratio"], rows)
    return {"checks": out}, combine(statuses), table


def cmd_identities(p: dict):
    seed = int(p["seed"])
    n = int(p["n"]) if p.get("n") is not None else 3
    ls = [str(v) for v in _as_list(p.get("l"))] or list(DEFAULT_WEIGHTS)
    specs = _specs(p)
    out, rows, statuses = {"conjugation": [], "product": [], "eigen_relation": []}, [], []
    for l in ls:
        rep = conjugation_identity_sweep(n, Fraction(l), seed=seed)
        out["conjugation"].append(rep.as_dict())
        statuses.append(_flag(rep.passed))
        for pid, s in enumerate(rep.samples):
            rows += [[f"conjugation:l={l}", pid, h, r] for h, r in zip(s.effective_steps, s.residuals)]
    for spec in specs:
        rep = product_identity_sweep(spec, seed=seed)
        out["product"].append(rep.as_dict())
        coherent = rep.coherence is None or rep.coherence <= 1e-9
        statuses += [_flag(rep.passed), _flag(coherent)]
        for pid, s in enumerate(rep.samples):
            rows += [[f"product:n={spec.n},k={spec.k}", pid, h, r] for h, r in zip(s.effective_steps, s.residuals)]
    rel_specs = [s for s in specs if s.n <= 6] if p.get("n") is not None else [ConeSpec(4, 2), ConeSpec(5, 3), ConeSpec(6, 3)]
    for spec in rel_specs:
        rep = eigen_relation_sweep(spec, seed=seed)
        out["eigen_relation"].append(rep.as_dict())
        statuses.append(_flag(rep.passed))
    table = Table(["sweep", "point_id", "h", "residual"], rows)
    return out, combine(statuses), table


def _quick(p: dict, **over) -> dict:
    q = dict(p)
    q.update(over)
    return q


def cmd_all(p: dict):
    quick = bool(p.get("quick"))
    trials = 50 if quick else 200
    base = {k: p.get(k) for k in ("R", "seed")}
    base.update({"n": None, "k": None, "l": None, "tol": None, "eps_list": None, "resolutions": None})
    tasks: list[tuple[str, Callable, dict]] = [
        ("constants", cmd_constants, _quick(base)),
        ("identities", cmd_identities, _quick(base, n=None)),
        ("verify-hardy", cmd_verify_hardy, _quick(base, trials=trials)),
        ("verify-weighted", cmd_verify_weighted, _quick(base, trials=10 if quick else 50)),
        ("sharpness", cmd_sharpness, _quick(base, n=3, k=1) if quick else _quick(base)),
        ("eigen", cmd_eigen, _quick(base, resolutions=[16, 32, 64] if quick else None)),
        ("decompose", cmd_decompose, _quick(base, trials=2 if quick else 5)),
        ("verify-ft", cmd_verify_ft, _quick(base, depth=4 if quick else 6, trials=2 if quick else 5)),
    ]
    threads = max(1, int(os.environ.get("HARDYLAB_THREADS", "1") or 1))

    def run_one(task):
        name, fn, params = task
        with Stopwatch() as sw:
            try:
                result, status, _ = fn(params)
            except HardyLabError as exc:
                result, status = {"error": str(exc)}, STATUS_ERROR
        return {"command": name, "status": status, "wall_time": sw.elapsed, "result": result}

    if threads == 1:
        parts = [run_one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            parts = list(pool.map(run_one, tasks))
    # per-part timings stay out of the payload so reruns compare byte for byte
    for part in parts:
        part.pop("wall_time")
    summary = {part["command"]: part["status"] for part in parts}
    rows = [[name, st] for name, st in summary.items()]
    return ({"quick": quick, "summary": summary, "parts": parts},
            combine(summary.values()), Table(["command", "status"], rows))


COMMANDS: dict[str, tuple[Callable, dict]] = {
    "constants": (cmd_constants, {}),
    "verify-hardy": (cmd_verify_hardy, {"trials": 200}),
    "verify-weighted": (cmd_verify_weighted, {"trials": 50}),
    "verify-ft": (cmd_verify_ft, {"trials": 5}),
    "sharpness": (cmd_sharpness, {}),
    "eigen": (cmd_eigen, {}),
    "decompose": (cmd_decompose, {"trials": 3}),
    "identities": (cmd_identities, {}),
    "all": (cmd_all, {}),
}

BASE_DEFAULTS = {"R": 1.0, "seed": 0, "depth": 6, "trials": 20, "format": "json", "quick": False}

SYNOPSIS = "hardylab {" + ",".join(COMMANDS) + "} [--n N] [--k K] [--R R] [--trials T] [--seed S] ..."


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\nusage: {SYNOPSIS}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--R", type=float)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--eps-list", dest="eps_list", type=_float_list)
    common.add_argument("--resolutions", type=_int_list)
    common.add_argument("--depth", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--l", type=_str_list, help="half-integer weight(s), e.g. 1/2,1,3/2")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--out")
    common.add_argument("--config")
    parser = _Parser(prog="hardylab", description="Numerical verification of sharp Hardy constants on orthant cones.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "all":
            sp.add_argument("--quick", action="store_true", default=None)
    return parser


def resolve_parameters(args: argparse.Namespace) -> tuple[dict, list]:
    """Defaults, then the config file, then explicit flags."""
    _, cmd_defaults = COMMANDS[args.command]
    params = {**BASE_DEFAULTS, **cmd_defaults}
    for key in PARAM_KEYS:
        params.setdefault(key, None)
    warnings: list = []
    if args.config:
        conf, warnings = load_config(args.config, PARAM_KEYS, args.command, sections=COMMANDS)
        params.update(conf)
    for key in PARAM_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params, warnings


def run(argv=None, stdout=None, stderr=None) -> tuple[int, list[RunRecord]]:
    """Execute one command; returns (exit code, records)."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError(f"missing command\nusage: {SYNOPSIS}")
        params, warnings = resolve_parameters(args)
    except UsageError as exc:
        stderr.write(f"hardylab: {exc}\n")
        return 1, []
    except (ConfigError, OSError) as exc:
        stderr.write(f"hardylab: {exc}\n")
        return 1, []

    fn, _ = COMMANDS[args.command]
    with Stopwatch() as sw:
        try:
            out = fn(params)
        except (HardyLabError, ValueError, ArithmeticError) as exc:
            stderr.write(f"hardylab: {args.command} failed: {exc}\n")
            return 1, []
    result, status, table = out
    shown = {k: v for k, v in params.items() if k not in ("out", "config")}
    record = RunRecord(args.command, shown, result, status, EXIT[status], warnings,
                       wall_time=sw.elapsed, timestamp=now_timestamp(), table=table)
    try:
        emit(record, params["format"], params.get("out"), stream=None if params.get("out") else stdout)
    except OSError as exc:
        stderr.write(f"hardylab: cannot write output: {exc}\n")
        return 1, [record]
    for w in warnings:
        stderr.write(f"hardylab: warning: {w}\n")
    return record.exit_code, [record]


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
