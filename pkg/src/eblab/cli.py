"""Command-line front end: one subcommand per experiment family.

Every experiment is described by an ``ExperimentSpec`` and dispatched
through ``run``, which returns an ``ExperimentReport``.  Reports are
written as CSV plus a JSON sidecar when ``--out`` is given, otherwise the
CSV goes to stdout (summary to stderr).  Independent cells (one per grid
point of the experiment) may run on a thread pool; results are merged by
cell index, so output bytes never depend on the thread count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import pathlib
import sys

import numpy as np

from . import families, metrics, npmle, orthopoly
from .hermite import alpha_bounds_hold, moment_gap_table
from .mixtures import DiscretePrior, MarginalModel, check_class_membership
from .quadrature import ToleranceNotMet
from .reports import ExperimentReport, ExperimentSpec, InvalidParameter, UnknownExperiment

__all__ = ["main", "run", "generate_prior", "parse_prior_spec"]


# ---------------------------------------------------------------------------
# prior argument parsing


def generate_prior(name, params, rng):
    """Draw a random prior from a named generator.

    ``two_point``: two distinct atoms uniform in [-m, m], random split.
    ``k_atom``: k atoms uniform in [-m, m] with Dirichlet weights.
    ``g_alpha``: k Gaussian-scale atoms shrunk until the exponential
    moment E exp((|u|/sigma)^alpha) is at most two.
    """
    if name == "point":
        return DiscretePrior.point(params.get("u", 0.0))
    if name == "two_point":
        m = float(params.get("m", 1.0))
        if not m > 0.0:
            raise InvalidParameter("two_point needs m > 0")
        atoms = rng.uniform(-m, m, size=2)
        for _ in range(100):
            if atoms[0] != atoms[1]:
                break
            atoms = rng.uniform(-m, m, size=2)
        split = rng.uniform(0.05, 0.95)
        return DiscretePrior(atoms, [split, 1.0 - split])
    if name == "k_atom":
        k = int(params.get("k", 5))
        m = float(params.get("m", 2.0))
        if k < 1 or not m > 0.0:
            raise InvalidParameter("k_atom needs k >= 1 and m > 0")
        atoms = rng.uniform(-m, m, size=k)
        for _ in range(100):
            if np.unique(atoms).size == k:
                break
            atoms = rng.uniform(-m, m, size=k)
        weights = rng.dirichlet(np.ones(k))
        return DiscretePrior(atoms, weights)
    if name == "g_alpha":
        alpha = float(params.get("alpha", 1.0))
        sigma = float(params.get("sigma", 1.0))
        k = int(params.get("k", 8))
        if not (alpha > 0.0 and sigma > 0.0 and k >= 1):
            raise InvalidParameter("g_alpha needs alpha, sigma > 0 and k >= 1")
        atoms = sigma * rng.standard_normal(k)
        for _ in range(100):
            if np.unique(atoms).size == k:
                break
            atoms = sigma * rng.standard_normal(k)
        weights = rng.dirichlet(np.ones(k))
        for _ in range(200):
            prior = DiscretePrior(atoms, weights)
            if check_class_membership(prior, alpha, sigma):
                return prior
            atoms = 0.8 * atoms
        raise InvalidParameter("could not shrink g_alpha draw into the class")
    raise InvalidParameter(f"unknown prior generator {name!r}")


def parse_prior_spec(text, rng):
    """Parse a prior given as @file.json, inline JSON, or name:key=val,...."""
    text = text.strip()
    if text.startswith("@"):
        return DiscretePrior.from_json(pathlib.Path(text[1:]).read_text())
    if text.startswith("{"):
        return DiscretePrior.from_json(text)
    name, _, rest = text.partition(":")
    params = {}
    if rest:
        for part in rest.split(","):
            key, sep, val = part.partition("=")
            if not sep:
                raise InvalidParameter(f"bad generator parameter {part!r}")
            try:
                params[key.strip()] = float(val)
            except ValueError as exc:
                raise InvalidParameter(f"bad generator value {part!r}") from exc
    return generate_prior(name.strip(), params, rng)


def _parse_floats(text):
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidParameter(f"bad numeric list {text!r}") from exc
    if not values:
        raise InvalidParameter(f"empty numeric list {text!r}")
    return values


def _parse_ints(text):
    return [int(v) for v in _parse_floats(text)]


def _run_cells(cells, threads):
    """Evaluate zero-argument cells, merging results by index."""
    if threads <= 1 or len(cells) <= 1:
        return [cell() for cell in cells]
    results = [None] * len(cells)
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(cell): i for i, cell in enumerate(cells)}
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()
    return results


# ---------------------------------------------------------------------------
# experiment runners: spec -> (columns, rows, summary)


def _run_metrics(spec):
    p = spec.params
    rng = npmle.cell_rng(spec.seed, 0)
    prior_g = parse_prior_spec(p["prior_g"], rng)
    prior_h = parse_prior_spec(p["prior_h"], rng)
    rhos = sorted(p.get("rhos", []))
    report = metrics.compute_metric_report(prior_g, prior_h, rhos=rhos)
    columns = ["hellinger_sq", "delta", "delta_flux", "regret"]
    row = {
        "hellinger_sq": report.hellinger_sq,
        "delta": report.delta,
        "delta_flux": report.delta_flux,
        "regret": report.regret,
    }
    for i, rho in enumerate(rhos):
        columns += [f"rho_{i}", f"regret_reg_{i}"]
        row[f"rho_{i}"] = rho
        row[f"regret_reg_{i}"] = report.regret_regularized[rho]
    summary = {
        "prior_g": json.loads(prior_g.to_json()),
        "prior_h": json.loads(prior_h.to_json()),
    }
    return columns, [row], summary


def _run_bernstein(spec):
    p = spec.params
    rng = npmle.cell_rng(spec.seed, 0)
    prior = parse_prior_spec(p["prior"], rng)
    k_min = int(p.get("k_min", 1))
    k_max = int(p.get("k_max", 20))
    grid_size = int(p.get("grid_size", 4000))
    if k_min < 1 or k_max < k_min:
        raise InvalidParameter("need 1 <= k_min <= k_max")
    m_bound = prior.support_bound

    def cell(k):
        def work():
            table = orthopoly.recurrence_for_weight(prior, k, grid_size=grid_size)
            ops = orthopoly.build_operators(prior, table)
            l_norm = orthopoly.operator_norm(ops.L)
            bound = (2.0 * m_bound + 1.0) * math.sqrt(k + 1.0)
            return {
                "k": k,
                "l_norm": l_norm,
                "bound": bound,
                "gauss_reference": math.sqrt(float(k)),
                "within_bound": l_norm <= bound * (1.0 + 1e-9),
            }

        return work

    rows = _run_cells([cell(k) for k in range(k_min, k_max + 1)], spec.threads)
    if p.get("dump_matrices"):
        table = orthopoly.recurrence_for_weight(prior, k_max, grid_size=grid_size)
        ops = orthopoly.build_operators(prior, table)
        np.savez(p["dump_matrices"], L=ops.L, A=ops.A, B=ops.B, S=ops.S, J=ops.J)
    summary = {
        "support_bound": m_bound,
        "max_norm_to_bound": max(r["l_norm"] / r["bound"] for r in rows),
        "all_within_bound": all(r["within_bound"] for r in rows),
    }
    columns = ["k", "l_norm", "bound", "gauss_reference", "within_bound"]
    return columns, rows, summary


def _run_hermite(spec):
    p = spec.params
    m_min = int(p.get("m_min", 1))
    m_max = int(p.get("m_max", 8))
    j_max = int(p.get("j_max", 200))
    if m_min < 1 or m_max < m_min:
        raise InvalidParameter("need 1 <= m_min <= m_max")

    def cell(m):
        def work():
            table = moment_gap_table(m, j_max)
            lead = table.gaps[2 * m]
            return {
                "m": m,
                "leading_gap": lead,
                "leading_gap_exact": 2.0 ** (1 - 2 * m),
                "alpha": table.alpha_m,
                "beta": table.beta_m,
                "alpha_lower": math.exp(
                    -4.0 * m * math.log(2.0) - math.lgamma(2.0 * m + 1.0)
                ),
                "alpha_upper": math.exp(math.log(2.0) - math.lgamma(2.0 * m + 1.0)),
                "beta_to_alpha": table.beta_m / table.alpha_m,
                "bounds_ok": alpha_bounds_hold(table),
            }

        return work

    rows = _run_cells([cell(m) for m in range(m_min, m_max + 1)], spec.threads)
    holds_from = None
    for row in reversed(rows):
        if not row["bounds_ok"]:
            break
        holds_from = row["m"]
    summary = {"bounds_hold_from_m": holds_from}
    columns = [
        "m",
        "leading_gap",
        "leading_gap_exact",
        "alpha",
        "beta",
        "alpha_lower",
        "alpha_upper",
        "beta_to_alpha",
        "bounds_ok",
    ]
    return columns, rows, summary


def _run_lowerbound(spec):
    p = spec.params
    m_min = int(p.get("m_min", 2))
    m_max = int(p.get("m_max", 12))
    j_max = int(p.get("j_max", 200))

    def cell(m):
        def work():
            inst = families.build_lowerbound_instance(m, j_max)
            return {
                "m": inst.m,
                "tau": inst.tau,
                "alpha": inst.alpha,
                "beta": inst.beta,
                "eps_sq": inst.eps_sq,
                "regret": inst.regret_val,
                "ratio": inst.ratio,
            }

        return work

    rows = _run_cells([cell(m) for m in range(m_min, m_max + 1)], spec.threads)
    ratios = [r["ratio"] for r in rows]
    rate_cs = [
        r["m"] * math.log(-math.log(r["alpha"])) / (-math.log(r["alpha"])) for r in rows
    ]
    summary = {
        "min_ratio": min(ratios),
        "max_ratio": max(ratios),
        "rate_c0": min(rate_cs),
    }
    columns = ["m", "tau", "alpha", "beta", "eps_sq", "regret", "ratio"]
    return columns, rows, summary


def _run_moment(spec):
    p = spec.params
    p_exp = float(p.get("p", 2.0))
    b_values = [float(b) for b in p.get("b_values", [4.0, 8.0, 16.0, 32.0])]

    def cell(b):
        def work():
            inst = families.build_moment_instance(p_exp, b)
            return {
                "p": inst.p,
                "b": inst.b,
                "eta": inst.eta,
                "eps_sq": inst.eps_sq,
                "regret": inst.regret_val,
                "regret_lb": inst.regret_lb,
                "lb_ok": inst.regret_val >= inst.regret_lb - 1e-12,
            }

        return work

    rows = _run_cells([cell(b) for b in b_values], spec.threads)
    exponent = families.fit_loglog_exponent(
        [r["eps_sq"] for r in rows], [r["regret"] for r in rows]
    )
    summary = {
        "fitted_exponent": exponent,
        "target_exponent": 1.0 - 1.0 / p_exp,
        "max_regret_to_eps_sq": max(r["regret"] / r["eps_sq"] for r in rows),
    }
    columns = ["p", "b", "eta", "eps_sq", "regret", "regret_lb", "lb_ok"]
    return columns, rows, summary


def _run_regratio(spec):
    p = spec.params
    pairs = p.get("pairs")
    if pairs is None:
        rows, summary = families.regularization_necessity_demo(
            float(p.get("p", 2.0)),
            float(p.get("b", 16.0)),
            [float(r) for r in p.get("rhos", [])],
        )
        columns = ["rho", "regret", "regret_regularized", "ratio", "envelope"]
        return columns, rows, summary
    for key in ("p", "b", "rhos"):
        if p.get(key) is not None:
            raise InvalidParameter("--pairs runs the random-pair sweep; drop --p/--b/--rhos")
    if pairs.lstrip().startswith(("@", "{")):
        raise InvalidParameter("pair sweep needs a random generator spec, not a fixed prior")
    count = int(p.get("count", 100))
    if count < 1:
        raise InvalidParameter("count must be >= 1")

    def cell(idx):
        def work():
            rng = npmle.cell_rng(spec.seed, idx)
            for _ in range(100):
                prior_g = parse_prior_spec(pairs, rng)
                prior_h = parse_prior_spec(pairs, rng)
                report = metrics.compute_metric_report(prior_g, prior_h)
                # identical draws carry no separation signal; redraw
                if report.hellinger_sq > 0.0:
                    break
            else:
                raise InvalidParameter(f"generator {pairs!r} keeps returning identical pairs")
            return {
                "pair": idx,
                "eps_sq": report.hellinger_sq,
                "delta": report.delta,
                "delta_flux": report.delta_flux,
                "regret": report.regret,
                "ratio": report.regret / metrics.hellinger_rate_normalizer(report.hellinger_sq),
            }

        return work

    rows = _run_cells([cell(i) for i in range(count)], spec.threads)
    summary = {
        "generator": pairs,
        "pairs": count,
        "max_ratio": max(r["ratio"] for r in rows),
    }
    columns = ["pair", "eps_sq", "delta", "delta_flux", "regret", "ratio"]
    return columns, rows, summary


def _load_observations(path):
    values = []
    for line in pathlib.Path(path).read_text().splitlines():
        line = line.split(",")[0].strip()
        if not line or line.startswith("#"):
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise InvalidParameter(f"bad observation line {line!r}") from exc
    if not values:
        raise InvalidParameter(f"no observations in {path}")
    return np.asarray(values)


def _run_npmle(spec):
    p = spec.params
    grid_size = int(p.get("grid_size", 400))
    tol = float(p.get("tol", 1e-6))
    max_iters = int(p.get("max_iters", 50000))
    constrained = bool(p.get("constrained", False))
    mprime = p.get("mprime")

    if p.get("data"):
        y = _load_observations(p["data"])
        if p.get("grid_min") is not None and p.get("grid_max") is not None:
            grid = np.linspace(float(p["grid_min"]), float(p["grid_max"]), grid_size)
            problem = npmle.NpmleProblem(y, grid, max_iters=max_iters, tol=tol)
        else:
            problem = npmle.NpmleProblem.from_observations(
                y,
                grid_size=grid_size,
                constrained=constrained,
                mprime=mprime,
                max_iters=max_iters,
                tol=tol,
            )
        solution = npmle.solve_npmle(problem)
        row = {
            "n": y.size,
            "loglik": solution.loglik,
            "cert": solution.gradient_cert,
            "iterations": solution.iterations,
            "support_size": solution.prior.atoms.size,
        }
        summary = {"fitted_prior": json.loads(solution.prior.to_json())}
        return ["n", "loglik", "cert", "iterations", "support_size"], [row], summary

    rng = npmle.cell_rng(spec.seed, 0)
    true_prior = parse_prior_spec(p.get("prior", "two_point:m=1"), rng)
    n_values = [int(n) for n in p.get("n_values", [200, 800, 3200])]
    n_seeds = int(p.get("n_seeds", 20))
    if n_seeds < 1:
        raise InvalidParameter("need at least one seed")
    seeds = [
        int(s.generate_state(1, dtype=np.uint64)[0])
        for s in np.random.SeedSequence(spec.seed).spawn(n_seeds)
    ]

    def cell(n, seed):
        def work():
            return npmle.empirical_regret_experiment(
                true_prior,
                n,
                seed,
                constrained=constrained,
                mprime=mprime,
                grid_size=grid_size,
                max_iters=max_iters,
                tol=tol,
            )

        return work

    cells = [cell(n, seed) for n in n_values for seed in seeds]
    rows = _run_cells(cells, spec.threads)
    medians = {}
    for n in n_values:
        regrets = sorted(r["regret"] for r in rows if r["n"] == n)
        medians[str(n)] = regrets[len(regrets) // 2]
    summary = {
        "true_prior": json.loads(true_prior.to_json()),
        "median_regret": medians,
        "max_cert": max(r["cert"] for r in rows),
    }
    columns = ["n", "seed", "eps_sq", "regret", "loglik", "cert"]
    return columns, rows, summary


_EXPERIMENTS = {
    "metrics": _run_metrics,
    "bernstein": _run_bernstein,
    "hermite": _run_hermite,
    "lowerbound": _run_lowerbound,
    "moment": _run_moment,
    "regratio": _run_regratio,
    "npmle": _run_npmle,
}


def run(spec):
    """Dispatch an ExperimentSpec to its runner; returns an ExperimentReport."""
    try:
        runner = _EXPERIMENTS[spec.name]
    except KeyError:
        raise UnknownExperiment(f"no experiment named {spec.name!r}") from None
    columns, rows, summary = runner(spec)
    return ExperimentReport(spec=spec, columns=columns, rows=rows, summary=summary)


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="eblab",
        description="Numerical laboratory for empirical-Bayes denoising metrics.",
    )
    parser.add_argument("--config", help="JSON file with defaults for flags and params")
    parser.add_argument("--seed", type=int, help="master seed (default 0)")
    parser.add_argument("--out", help="output stem; writes <out>.csv and <out>.json")
    parser.add_argument("--tol-abs", type=float, dest="tol_abs", help="absolute tolerance")
    parser.add_argument("--tol-rel", type=float, dest="tol_rel", help="relative tolerance")
    parser.add_argument("--threads", type=int, help="worker threads for independent cells")

    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("metrics", help="divergence battery between two priors")
    s.add_argument("--prior-g", required=True)
    s.add_argument("--prior-h", required=True)
    s.add_argument("--rhos", help="comma-separated clipping levels")

    s = sub.add_parser("bernstein", help="derivative-operator norms for phi^2/f weights")
    s.add_argument("--prior", required=True)
    s.add_argument("--k-min", type=int)
    s.add_argument("--k-max", type=int)
    s.add_argument("--grid-size", type=int)
    s.add_argument("--dump-matrices", help="write operator matrices to this .npz path")

    s = sub.add_parser("hermite", help="arcsine moment-gap tables and tail sums")
    s.add_argument("--m-min", type=int)
    s.add_argument("--m-max", type=int)
    s.add_argument("--j-max", type=int)

    s = sub.add_parser("lowerbound", help="matched-moment contamination sweep")
    s.add_argument("--m-min", type=int)
    s.add_argument("--m-max", type=int)
    s.add_argument("--j-max", type=int)

    s = sub.add_parser("moment", help="heavy-tail spike family sweep")
    s.add_argument("--p", type=float)
    s.add_argument("--b-values")

    s = sub.add_parser("regratio", help="regret against the Hellinger rate over random pairs")
    s.add_argument("--pairs", help="pair generator, e.g. two_point:m=1 or k_atom:k=5,m=2")
    s.add_argument("--count", type=int)
    s.add_argument("--p", type=float, help="clipping demo: tail exponent")
    s.add_argument("--b", type=float, help="clipping demo: spike location")
    s.add_argument("--rhos", help="clipping demo: comma-separated levels")

    s = sub.add_parser("npmle", help="grid maximum-likelihood prior fits")
    s.add_argument("--data", help="file of observations, one per line")
    s.add_argument("--prior", help="true prior for synthetic runs")
    s.add_argument("--n-values", help="comma-separated sample sizes")
    s.add_argument("--n-seeds", type=int)
    s.add_argument("--grid-min", type=float)
    s.add_argument("--grid-max", type=float)
    s.add_argument("--grid-size", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--constrained", action="store_true", default=None)
    s.add_argument("--mprime", type=float)

    return parser


_PARAM_KEYS = {
    "metrics": ["prior_g", "prior_h", "rhos"],
    "bernstein": ["prior", "k_min", "k_max", "grid_size", "dump_matrices"],
    "hermite": ["m_min", "m_max", "j_max"],
    "lowerbound": ["m_min", "m_max", "j_max"],
    "moment": ["p", "b_values"],
    "regratio": ["pairs", "count", "p", "b", "rhos"],
    "npmle": [
        "data",
        "prior",
        "n_values",
        "n_seeds",
        "grid_min",
        "grid_max",
        "grid_size",
        "tol",
        "max_iters",
        "constrained",
        "mprime",
    ],
}

_LIST_FLOAT_KEYS = {"rhos", "b_values"}
_LIST_INT_KEYS = {"n_values"}


def _spec_from_args(args):
    config = {}
    if args.config:
        config = json.loads(pathlib.Path(args.config).read_text())
        if not isinstance(config, dict):
            raise InvalidParameter("config file must hold a JSON object")

    def pick(key, default):
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            return cli_val
        return config.get(key, default)

    params = {}
    for key in _PARAM_KEYS[args.command]:
        value = pick(key, None)
        if value is None:
            continue
        if key in _LIST_FLOAT_KEYS and isinstance(value, str):
            value = _parse_floats(value)
        elif key in _LIST_INT_KEYS and isinstance(value, str):
            value = _parse_ints(value)
        params[key] = value

    return ExperimentSpec(
        name=args.command,
        params=params,
        seed=int(pick("seed", 0)),
        abs_tol=float(pick("tol_abs", 1e-11)),
        rel_tol=float(pick("tol_rel", 1e-9)),
        threads=int(pick("threads", 1)),
    )


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
        report = run(spec)
    except (InvalidParameter, UnknownExperiment, ValueError) as exc:
        print(f"eblab: {exc}", file=sys.stderr)
        return 2
    except (ToleranceNotMet, npmle.NotConverged, orthopoly.DegreeUnstable) as exc:
        print(f"eblab: {exc}", file=sys.stderr)
        return 3
    out = args.out
    if out is None and args.config:
        config = json.loads(pathlib.Path(args.config).read_text())
        out = config.get("out")
    if out:
        report.write(out)
        print(f"wrote {pathlib.Path(out).with_suffix('.csv')}")
        print(f"wrote {pathlib.Path(out).with_suffix('.json')}")
    else:
        sys.stdout.write(report.csv_text())
        print(json.dumps(report.summary, sort_keys=True, default=float), file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
