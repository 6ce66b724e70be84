"""Command line interface: ``fieldport <subcommand> [--config scenario.json]``.

Exit codes: 0 all checks passed, 1 some check failed, 2 invalid
configuration, 3 numerical failure.
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
import tempfile
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .amplitude import (
    CoverageError,
    Scenario,
    TERM_ORDER,
    conformance_report,
    parasitic_fraction,
    symbolic_amplitude,
    total_amplitude,
)
from .conventions import default_conventions
from .measurement import MomentumGrid, Outcome, POVMFamily, completeness_report, kernel_completeness_defect
from .nonrel import (
    nr_direct_term_lattice,
    nr_limit_expansion,
    nr_outcome_probability,
    nr_teleport_amplitude,
    random_qudit,
    teleport_qudit,
)
from .numerics import QuadratureError
from .propagator import (
    FourVector,
    LightConeError,
    decay_fit,
    dplus_closed_form,
    dplus_quadrature,
    pauli_jordan,
    sign_assignment_report,
)
from .states import EPRFamily, GaussianPacket, NRPacket
from .svg import heatmap, line_plot

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SUBCOMMANDS = (
    "propagator-scan",
    "microcausality",
    "decay-fit",
    "povm-check",
    "amplitude-scan",
    "nr-limit",
    "teleport-qudit",
    "conformance-report",
)


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------------
# configuration


def load_schema() -> dict:
    text = resources.files("fieldport").joinpath("data/scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_config(path: str | None) -> dict:
    """Parse and validate a scenario file; an absent path means all defaults."""
    import jsonschema

    if path is None:
        cfg = {}
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        lines = [f"at {'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _pick_time(cfg, block, key, times_key, default):
    """A time may be given in its own block or under ``times``; both must agree."""
    a = cfg.get(block, {}).get(key)
    b = cfg.get("times", {}).get(times_key)
    if a is not None and b is not None and a != b:
        raise ConfigError(f"at {block}.{key}: {a} disagrees with times.{times_key} = {b}")
    return float(a if a is not None else b if b is not None else default)


def resolve_times(cfg) -> dict:
    """Packet and pair times, with the ``times`` block as the shared source."""
    return {
        "t_packet": _pick_time(cfg, "packet", "t0", "t_packet", 0.0),
        "t_pair": _pick_time(cfg, "epr", "pair_time", "t_pair", 0.0),
    }


def build_conventions(cfg):
    c = cfg.get("conventions", {})
    return default_conventions(**{k: c[k] for k in ("spatial_dims", "mass", "contraction_norm", "closed_form_calibration") if k in c})


def _vector(v, dims, name):
    v = [float(t) for t in v]
    if len(v) != dims:
        raise ConfigError(f"at {name}: expected {dims} components, got {len(v)}")
    return tuple(v)


def build_scenario(cfg, conv) -> Scenario:
    D = conv.spatial_dims
    p, e = cfg.get("packet", {}), cfg.get("epr", {})
    packet = GaussianPacket(
        _vector(p.get("k_center", [0.3] + [0.0] * (D - 1)), D, "packet.k_center"),
        float(p.get("sigma_k", 0.5)),
        _vector(p.get("x_center", [0.5] + [0.0] * (D - 1)), D, "packet.x_center"),
        _pick_time(cfg, "packet", "t0", "t_packet", 0.0),
    ).normalized(conv)
    epr = EPRFamily(
        float(e.get("sigma", packet.sigma_k / 4)),
        _vector(e.get("q_total", [0.0] * D), D, "epr.q_total"),
        _pick_time(cfg, "epr", "pair_time", "t_pair", 0.0),
    )
    times = cfg.get("times", {})
    return Scenario(packet, epr, float(times.get("t_meas", 1.0)), float(times.get("t_out", 1.5)), conv)


def build_grid(cfg, dims=1) -> MomentumGrid:
    g = cfg.get("grid", {})
    n = int(g.get("n_points", 33))
    if n % 2 == 0:
        raise ConfigError(f"at grid.n_points: {n} must be odd")
    return MomentumGrid(dims, n, float(g.get("spacing", 0.25)))


# ----------------------------------------------------------------------------
# output


class Output:
    """Atomic writer for one run's artifacts."""

    def __init__(self, directory, formats):
        self.dir = Path(directory)
        self.formats = set(formats)
        self.files: list[str] = []

    def _write(self, name, text):
        self.dir.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, self.dir / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.files.append(name)

    def csv(self, name, header, rows):
        if "csv" not in self.formats:
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self._write(name, buf.getvalue())

    def svg(self, name, text):
        if "svg" in self.formats:
            self._write(name, text)

    def json(self, name, obj):
        self._write(name, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def resolve_threads(flag) -> int:
    if flag is not None:
        n = flag
    else:
        env = os.environ.get("FIELDPORT_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError as exc:
            raise ConfigError(f"FIELDPORT_THREADS must be an integer, got {env!r}") from exc
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


def ordered_map(fn, items, threads):
    """map() with results in input order, whatever the worker count."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _check(name, passed, value=None, threshold=None):
    return {"name": name, "passed": bool(passed), "value": value, "threshold": threshold}


# ----------------------------------------------------------------------------
# subcommands; each returns (results, checks)


def _default_points(D):
    pts = [(0.0, 1.0), (0.0, 2.5), (1.0, 2.0), (-1.5, 2.2), (2.0, 0.5), (-2.0, 1.0), (3.0, 1.0), (0.5, 3.0)]
    return [(t, x) + (0.0,) * (D - 1) for t, x in pts]


def cmd_propagator_scan(args, cfg, conv, out, threads):
    D = conv.spatial_dims
    scan = cfg.get("scan", {})
    points = [tuple(map(float, p)) for p in scan.get("points", _default_points(D))]
    for p in points:
        if len(p) != D + 1:
            raise ConfigError(f"at scan.points: {list(p)} needs {D + 1} components")

    def one(p):
        fv = FourVector(p[0], p[1:])
        q = dplus_quadrature(fv, conv)
        c = dplus_closed_form(fv, conv)
        return fv, q, c

    res = ordered_map(one, points, threads)
    rows, ratios = [], []
    for fv, q, c in res:
        ratio = c.value / q.value
        ratios.append(ratio)
        rows.append([fv.t, *fv.x, fv.branch, q.value.real, q.value.imag, q.est_error, c.value.real, c.value.imag])
    header = ["t"] + [f"x{i + 1}" for i in range(D)] + ["branch", "re_quad", "im_quad", "est_error", "re_closed", "im_closed"]
    out.csv("propagator_scan.csv", header, rows)
    spread = max(abs(r - ratios[0]) for r in ratios) / abs(ratios[0])
    results = {"points": len(points), "ratio_closed_over_quadrature": ratios[0], "ratio_spread": spread}
    return results, [_check("closed_over_quadrature_constant", spread <= 1e-6, spread, 1e-6)]


def spacelike_points(n, D, rng):
    pts = []
    for _ in range(n):
        t = rng.uniform(-3.0, 3.0)
        r = abs(t) + rng.uniform(0.05, 4.0)
        d = rng.normal(size=D)
        d /= np.linalg.norm(d)
        pts.append((float(t), *map(float, r * d)))
    return pts


def cmd_microcausality(args, cfg, conv, out, threads):
    D = conv.spatial_dims
    n = args.n if args.n is not None else int(cfg.get("scan", {}).get("n_spacelike", 50))
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg.get("seed", 0))
    points = spacelike_points(n, D, rng)

    def one(p):
        fv = FourVector(p[0], p[1:])
        dp = dplus_closed_form(fv, conv).value
        pj_c = pauli_jordan(fv, conv, "closed").value
        pj_q = pauli_jordan(fv, conv, "quadrature")
        return fv, dp, pj_c, pj_q

    rows, worst_c, worst_q = [], 0.0, 0.0
    ok_c = ok_q = True
    for fv, dp, pj_c, pj_q in ordered_map(one, points, threads):
        rel = abs(pj_c) / abs(dp)
        pc = abs(pj_c) <= 1e-12 * abs(dp)
        pq = abs(pj_q.value) <= 10 * pj_q.est_error
        ok_c, ok_q = ok_c and pc, ok_q and pq
        worst_c = max(worst_c, rel)
        worst_q = max(worst_q, abs(pj_q.value) / max(pj_q.est_error, 1e-300))
        rows.append([fv.t, *fv.x, abs(dp), abs(pj_c), pc, abs(pj_q.value), pj_q.est_error, pq])
    header = ["t"] + [f"x{i + 1}" for i in range(D)] + [
        "abs_dplus", "abs_sum_closed", "pass_closed", "abs_sum_quad", "est_error_quad", "pass_quad"
    ]
    out.csv("microcausality.csv", header, rows)
    results = {"points": n, "max_relative_closed": worst_c, "max_over_est_error_quad": worst_q}
    return results, [
        _check("closed_form_commutator_vanishes", ok_c, worst_c, 1e-12),
        _check("quadrature_commutator_within_error", ok_q, worst_q, 10.0),
    ]


def cmd_decay_fit(args, cfg, conv, out, threads):
    scan = cfg.get("scan", {})
    masses = [float(m) for m in scan.get("masses", [1.0, 2.0])]
    samples = int(scan.get("samples", 12))
    fits = ordered_map(lambda m: (m, decay_fit(m, (2 / m, 6 / m), samples, conv)), masses, threads)
    rows, checks, results, series = [], [], {}, {}
    for m, fit in fits:
        rel = abs(-fit["slope"] / m - 1.0)
        checks.append(_check(f"decay_rate_m={m:g}", rel <= 0.05, rel, 0.05))
        results[f"m={m:g}"] = {"slope": fit["slope"], "intercept": fit["intercept"], "residual": fit["residual"], "relative_deviation": rel}
        for s, lv in zip(fit["s"], fit["log_values"]):
            rows.append([m, s, lv])
        series[f"m = {m:g}"] = (fit["s"], fit["log_values"])
    out.csv("decay_fit.csv", ["mass", "s", "log_abs_dplus_plus_prefactor"], rows)
    out.svg("decay_fit.svg", line_plot(series, "spacelike decay of D+", "s", "log|D+| + 0.75 log s^2"))
    return results, checks


def cmd_povm_check(args, cfg, conv, out, threads):
    from dataclasses import replace

    conv1 = replace(default_conventions(spatial_dims=1), mass=conv.mass)
    grid = build_grid(cfg)
    xi0 = float(cfg.get("grid", {}).get("xi0", 0.0))
    fine = grid.refined()
    reps = ordered_map(
        completeness_report,
        [POVMFamily("nr", grid), POVMFamily("rel", grid, conv1, xi0), POVMFamily("rel", fine, conv1, xi0)],
        threads,
    )
    nr, rel, rel_fine = reps
    ratio = rel["defect_interior"] / rel_fine["defect_interior"]
    kernel = kernel_completeness_defect(MomentumGrid(1, 9, grid.spacing))
    out.csv(
        "povm_check.csv",
        ["family", "n_points", "spacing", "defect_interior", "defect_full", "boundary_rows"],
        [
            ["nr", grid.n_points, grid.spacing, nr["defect_interior"], nr["defect_full"], nr["boundary_rows"]],
            ["rel", grid.n_points, grid.spacing, rel["defect_interior"], rel["defect_full"], rel["boundary_rows"]],
            ["rel", fine.n_points, fine.spacing, rel_fine["defect_interior"], rel_fine["defect_full"], rel_fine["boundary_rows"]],
        ],
    )
    results = {"nr": nr, "rel": rel, "rel_refined": rel_fine, "refinement_ratio": ratio, "kernel_defect": kernel}
    return results, [
        _check("nr_interior_defect", nr["defect_interior"] <= 1e-10, nr["defect_interior"], 1e-10),
        _check("rel_defect_refinement_ratio", ratio >= 1.8, ratio, 1.8),
        _check("kernel_completeness", kernel <= 1e-12, kernel, 1e-12),
    ]


def cmd_amplitude_scan(args, cfg, conv, out, threads):
    if conv.spatial_dims != 1:
        raise ConfigError("at conventions.spatial_dims: amplitude-scan needs spatial_dims = 1")
    scen = build_scenario(cfg, conv)
    scan = cfg.get("scan", {})
    Xs = [float(v) for v in scan.get("X", np.linspace(-2, 2, 9).tolist())]
    Ps = [float(args.P)] if args.P is not None else [float(v) for v in scan.get("P", [0.0])]
    xs = [float(v) for v in scan.get("x", np.linspace(-4, 4, 17).tolist())]
    jobs = [(X, P, x) for P in Ps for X in Xs for x in xs]
    res = ordered_map(lambda j: total_amplitude(scen, Outcome((j[0],), (j[1],)), j[2]), jobs, threads)
    rows, partial = [], 0
    for (X, P, x), b in zip(jobs, res):
        partial += b.partial
        vals = {t.tag: t.value for t in b.terms}
        row = [X, P, x, b.total.real, b.total.imag]
        for tag in TERM_ORDER:
            v = vals.get(tag, complex("nan"))
            row += [v.real, v.imag]
        rows.append(row + [b.est_error])
    header = ["X", "P", "x", "re_total", "im_total", "re_t1", "im_t1", "re_t2", "im_t2", "re_par", "im_par", "est_error"]
    out.csv("amplitude_scan.csv", header, rows)
    P0 = Ps[0]
    z = np.array([[abs(b.total) ** 2 for (X, P, x), b in zip(jobs, res) if P == P0 and X == Xv] for Xv in Xs])
    out.svg("amplitude_heatmap.svg", heatmap(z, xs, Xs, f"|A|^2 at P = {P0:g}", "x", "X"))
    results = {"scenario": scen.to_dict(), "evaluations": len(jobs), "partial": partial}
    return results, [_check("all_terms_evaluated", partial == 0, partial, 0)]


def cmd_nr_limit(args, cfg, conv, out, threads):
    exp = symbolic_amplitude()
    terms = nr_limit_expansion(exp)
    weights = [t.weight for t in terms]
    grid = build_grid(cfg)
    p = cfg.get("packet", {})
    packet = NRPacket.gaussian(
        grid, p.get("k_center", [0.3])[0], float(p.get("sigma_k", 0.5)), p.get("x_center", [0.5])[0]
    )
    probs = nr_outcome_probability(packet)
    rows = [[o.X[0], o.P[0], v] for o, v in probs.items()]
    out.csv("nr_limit.csv", ["X", "P", "prob"], rows)
    vals = np.array(list(probs.values()))
    flat = float(np.ptp(vals) / vals.mean())
    # direct term against the shifted packet on a few lattice points
    dx = grid.x_spacing
    worst = 0.0
    for jX, jx, P in [(0, 0, 0.0), (2, -1, grid.spacing), (-3, 4, -2 * grid.spacing)]:
        a = nr_direct_term_lattice(packet, Outcome((jX * dx,), (P,)), jx * dx)
        b = nr_teleport_amplitude(packet, Outcome((-jX * dx,), (P,)), jx * dx)
        worst = max(worst, abs(a - b))
    results = {
        "terms": [t.render() for t in terms],
        "weights": weights,
        "probability_total": float(vals.sum()),
        "probability_relative_spread": flat,
        "direct_term_max_deviation": worst,
    }
    return results, [
        _check("weights_2_2_4", weights == [2, 2, 4], weights, [2, 2, 4]),
        _check("probability_map_flat", flat <= 1e-10, flat, 1e-10),
        _check("direct_term_is_shifted_packet", worst <= 1e-12, worst, 1e-12),
    ]


def cmd_teleport_qudit(args, cfg, conv, out, threads):
    d, trials = args.dim, args.trials
    if d < 2 or d > 16:
        raise ConfigError("--dim must be between 2 and 16")
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg.get("seed", 0))
    prob_sum = np.zeros(d * d)
    worst_p, fids = 0.0, []
    for _ in range(trials):
        for o in teleport_qudit(random_qudit(d, rng)):
            prob_sum[o.index] += o.probability
            worst_p = max(worst_p, abs(o.probability - 1 / d**2))
            fids.append(o.fidelity)
    results = {
        "dim": d,
        "trials": trials,
        "per_outcome_probability": (prob_sum / trials).tolist(),
        "max_probability_deviation": worst_p,
        "min_fidelity": min(fids),
        "mean_fidelity": math.fsum(fids) / len(fids),
    }
    return results, [
        _check("uniform_probabilities", worst_p <= 1e-12, worst_p, 1e-12),
        _check("corrected_fidelity", min(fids) >= 1 - 1e-12, min(fids), 1 - 1e-12),
    ]


def cmd_conformance_report(args, cfg, conv, out, threads):
    from fractions import Fraction

    full = symbolic_amplitude(ideal=False)
    ideal = symbolic_amplitude()
    weights = {t: w for t, w in sorted(__import__("fieldport.wick", fromlist=["x"]).tagged_weights(ideal).items())}
    frac = parasitic_fraction(ideal)
    raw_frac = parasitic_fraction(ideal, intra_pair_doubling=False)
    conv3 = default_conventions(mass=conv.mass)
    signs = sign_assignment_report(conv3)
    results = {
        "pairings": len(full.terms),
        "collapsed_expansion": ideal.to_json_obj(),
        "weights": weights,
        "parasitic_fraction": str(frac),
        "parasitic_fraction_raw_wick": str(raw_frac),
        "argument_orders": conformance_report(ideal),
        "closed_form_sign_layouts": signs,
    }
    return results, [
        _check("six_pairings", len(full.terms) == 6, len(full.terms), 6),
        _check("weights_2_2_4", [weights[t] for t in TERM_ORDER] == [2, 2, 4], [weights[t] for t in TERM_ORDER], [2, 2, 4]),
        _check("parasitic_fraction_half", frac == Fraction(1, 2), str(frac), "1/2"),
    ]


COMMANDS = {
    "propagator-scan": cmd_propagator_scan,
    "microcausality": cmd_microcausality,
    "decay-fit": cmd_decay_fit,
    "povm-check": cmd_povm_check,
    "amplitude-scan": cmd_amplitude_scan,
    "nr-limit": cmd_nr_limit,
    "teleport-qudit": cmd_teleport_qudit,
    "conformance-report": cmd_conformance_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldport", description="Relativistic teleportation amplitude toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="scenario JSON file (defaults apply when omitted)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--threads", type=int, help="worker threads (env FIELDPORT_THREADS)")
        p.add_argument("--seed", type=int, help="random seed (overrides config seed)")
        if name == "amplitude-scan":
            p.add_argument("--P", type=float, help="fix the outcome momentum P")
        if name == "microcausality":
            p.add_argument("--n", type=int, help="number of spacelike points")
        if name == "teleport-qudit":
            p.add_argument("--dim", type=int, default=2)
            p.add_argument("--trials", type=int, default=100)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for opt in ("n", "P", "dim", "trials"):
        if not hasattr(args, opt):
            setattr(args, opt, None)
    try:
        cfg = load_config(args.config)
        resolve_times(cfg)
        conv = build_conventions(cfg)
        threads = resolve_threads(args.threads)
        o = cfg.get("output", {})
        out = Output(args.out or o.get("dir", "fieldport_out"), o.get("formats", ["csv", "json", "svg"]))
        results, checks = COMMANDS[args.command](args, cfg, conv, out, threads)
    except ConfigError as exc:
        print(f"fieldport: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, LightConeError, CoverageError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fieldport: numerical failure in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    passed = all(c["passed"] for c in checks)
    summary = {
        "subcommand": args.command,
        "version": __version__,
        "conventions": conv.to_dict(),
        "config_hash": config_hash(cfg),
        "seed": args.seed if args.seed is not None else cfg.get("seed", 0),
        "checks": checks,
        "passed": passed,
        "results": results,
        "artifacts": sorted(out.files),
    }
    out.json(f"{args.command}.json", summary)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']}")
    return EXIT_OK if passed else EXIT_CHECKS


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
