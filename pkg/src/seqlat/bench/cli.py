"""Command line interface: ``seqlat {gen,laterate,stress-min,bound,exp,plot}``.

Exit codes: 0 success, 2 invalid input or configuration, 3 infeasible
scenario (no laterable instance could be drawn or embedded).
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from ..errors import (
    DegenerateStepError,
    InvalidInputError,
    NotLaterableError,
    ScenarioInfeasibleError,
)
from ..geometry import embedding_error, read_configuration, write_configuration
from ..graph import (
    DomainSpec,
    NoiseSpec,
    apply_noise,
    find_laterative_ordering,
    geometric_graph,
    read_graph,
    sample_domain,
    write_graph,
)
from ..sequential import (
    sequential_laterate_best,
    sequential_laterate_first,
    theory_bound,
    verify_perturbation_bound,
    write_embedding_result,
)
from ..stress import OptimizerConfig, minimize_gd, minimize_smacof
from .output import read_rows_csv, write_rows_csv, write_svg_configuration, write_svg_scatter
from .scenario import METHODS, PRESETS, ScenarioConfig, load_config, loglog_slope, preset, run_scenarios

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 2, 3

logger = logging.getLogger("seqlat")


def _common():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=0, help="64-bit seed")
    parent.add_argument("--out", type=Path, default=None, help="output path")
    parent.add_argument("--config", type=Path, default=None, help="JSON scenario config")
    parent.add_argument("-v", "--verbose", action="store_true")
    return parent


def _graph_and_p(args):
    graph, p = read_graph(args.graph)
    p = args.p if args.p is not None else (p if p is not None else 2)
    return graph, p


def cmd_gen(args):
    domain = DomainSpec(args.h, args.kappa)
    ss = np.random.SeedSequence(args.seed)
    s_latent, s_noise = (int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(2))
    latent = sample_domain(domain, args.n, s_latent)
    exact = geometric_graph(latent, args.radius)
    noisy, eps = apply_noise(exact, NoiseSpec(args.noise_model, args.sigma2, s_noise))
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    write_configuration(out / "latent.csv", latent)
    write_graph(out / "graph.csv", noisy, 2)
    laterable = find_laterative_ordering(exact, 2) is not None
    info = {
        "n": args.n, "n_edges": noisy.n_edges, "laterable": laterable,
        "mean_perturbation": float(eps @ eps) / max(noisy.n_edges, 1),
    }
    print(json.dumps(info))
    return EXIT_OK


def cmd_laterate(args):
    graph, p = _graph_and_p(args)
    if args.variant == "best":
        res = sequential_laterate_best(graph, p, budget=args.budget, seed=args.seed)
    else:
        res = sequential_laterate_first(graph, p)
    extra = {}
    if args.latent is not None:
        latent = read_configuration(args.latent)
        chk = verify_perturbation_bound(latent, graph, res)
        extra = {
            "embedding_error": embedding_error(res.config, latent),
            "empirical_ratio": chk.ratio, "eps_sq_sum": chk.eps_sq_sum,
            "violation": chk.violation,
        }
        if args.svg is not None:
            write_svg_configuration(latent, res.config, args.svg)
    out = args.out or Path("embedding.csv")
    write_embedding_result(out, res, **extra)
    print(json.dumps({"stress": res.stress, "wall_time": res.wall_time, **extra}, default=float))
    return EXIT_OK


def cmd_stress_min(args):
    graph, p = _graph_and_p(args)
    init = args.init
    if init == "lateration":
        init = "sequential-lateration"
    elif init != "random":
        init = read_configuration(init)
    opt = OptimizerConfig(
        max_iters=args.max_iters or (5000 if args.method == "gd" else 1000),
        rel_tol=args.rel_tol, seed=args.seed,
    )
    fn = minimize_gd if args.method == "gd" else minimize_smacof
    fit = fn(graph, p, init, opt, trace=args.trace)
    out = args.out or Path("embedding.csv")
    write_configuration(out, fit.config)
    info = {"s_stress": fit.s_stress, "raw_stress": fit.raw_stress, "n_iter": fit.n_iter,
            "converged": fit.converged}
    print(json.dumps(info))
    return EXIT_OK


def cmd_bound(args):
    graph, p = _graph_and_p(args)
    latent = read_configuration(args.latent)
    ordering = find_laterative_ordering(graph, p)
    if ordering is None:
        raise NotLaterableError("graph has no laterative ordering")
    tb = theory_bound(latent, ordering, args.C1, args.C2, p)
    text = json.dumps(asdict(tb), indent=2, default=float)
    if args.out is not None:
        args.out.write_text(text + "\n")
    print(text)
    return EXIT_OK


def _scenarios(args):
    if args.config is not None:
        configs = load_config(args.config)
    elif args.preset is not None:
        configs = preset(args.preset)
    else:
        raise InvalidInputError("exp needs --preset or --config")
    overrides = {"seed": args.seed}
    for key in ("trials", "n", "n_jobs"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.sigma2:
        overrides["sigma2"] = tuple(args.sigma2)
    if args.methods:
        overrides["methods"] = tuple(args.methods)
    return [replace(c, **overrides) for c in configs]


def cmd_exp(args):
    configs = _scenarios(args)
    rows = run_scenarios(configs)
    out = args.out or Path(f"{args.preset or 'exp'}.csv")
    write_rows_csv(rows, out)
    for method in sorted({r.method for r in rows if r.laterable}):
        try:
            slope, _, r2 = loglog_slope(rows, method)
            logger.info("%s: log-log slope %.3f (r2 %.3f)", method, slope, r2)
        except InvalidInputError:
            pass
    print(json.dumps({"rows": len(rows), "csv": str(out)}))
    return EXIT_OK


def cmd_plot(args):
    rows = read_rows_csv(args.rows)
    out = args.out or Path(args.rows).with_suffix(".svg")
    write_svg_scatter(rows, out, method=args.method, title=args.title)
    print(json.dumps({"svg": str(out)}))
    return EXIT_OK


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="seqlat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="sample a latent configuration and noisy RGG")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--h", type=float, default=0.2)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=0.3)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument("--noise-model", default="additive-gaussian",
                   choices=["additive-gaussian", "multiplicative-gaussian", "none"])
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("laterate", parents=[common], help="embed a graph by sequential lateration")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--variant", choices=["first", "best"], default="first")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--latent", type=Path, default=None, help="latent CSV for error reporting")
    p.add_argument("--svg", type=Path, default=None, help="latent vs embedding plot (needs --latent)")
    p.set_defaults(func=cmd_laterate)

    p = sub.add_parser("stress-min", parents=[common], help="minimize stress by GD or SMACOF")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--method", choices=["gd", "smacof"], default="smacof")
    p.add_argument("--init", default="lateration", help="lateration, random, or a configuration CSV")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--trace", type=Path, default=None, help="per-iteration CSV trace")
    p.set_defaults(func=cmd_stress_min)

    p = sub.add_parser("bound", parents=[common], help="worst-case constants for a lateration instance")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--latent", type=Path, required=True)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--C1", type=float, default=1.0)
    p.add_argument("--C2", type=float, default=1.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("exp", parents=[common], help="run an experiment preset or config")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--sigma2", type=float, nargs="+", default=None)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=None)
    p.add_argument("--n-jobs", dest="n_jobs", type=int, default=None)
    p.set_defaults(func=cmd_exp)

    p = sub.add_parser("plot", parents=[common], help="log-log SVG from an experiment CSV")
    p.add_argument("--rows", type=Path, required=True)
    p.add_argument("--method", default=None)
    p.add_argument("--title", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioInfeasibleError, NotLaterableError, DegenerateStepError) as exc:
        print(f"seqlat: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidInputError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"seqlat: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
