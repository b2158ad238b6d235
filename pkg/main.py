import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
from pydantic import ValidationError
from scipy.stats import pearsonr, spearmanr

from quotient.common import (
    FileFormatException,
    InvalidInputException,
    NumericalException,
    OutputException,
)
from quotient.display import align_for_display, embed_mean
from quotient.experiment import DESK_GROUP_SIZES, desk_sampler_config, run_study, summarize_study
from quotient.frechet import credible_radius, frechet_mean, frechet_variation
from quotient.geometry import gram_of, gram_of_factor, validate_gram
from quotient.links import get_link
from quotient.models import FrechetConfig, SamplerConfig, SimulationSpec
from quotient.readers import (
    AdjacencyFileReader,
    DrawsFileReader,
    LinesReader,
    MatrixFileReader,
    PairsReader,
    TableReader,
)
from quotient.sampler import mh_sample
from quotient.simulation import calibrate_intercept, expected_density, simulate_graph, simulate_template
from quotient.summaries import (
    all_pairs,
    dyad_summaries,
    dyad_type_summary,
    edge_density,
    group_summary,
    node_centrality,
    node_uncertainty,
    nodewise_loss,
    posterior_predictive,
    reference_sensitivity,
)
from quotient.tangent import significant_rank, tangent_covariance, tangent_residuals
from quotient.writers import (
    save_report_to_json,
    write_adjacency,
    write_draws,
    write_intercepts,
    write_lines,
    write_matrix_csv,
    write_table_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

CREDIBLE_LEVELS = (0.5, 0.9, 0.95)


class UsageError(Exception):
    """Unknown subcommand, unknown flag or bad flag value"""
    pass


class CLIParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def configure_logging(quiet: bool = False):
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def _frechet_config(args) -> FrechetConfig:
    overrides = dict(tolerance=args.tol, max_iterations=args.max_iter, threads=args.threads)
    if getattr(args, "restarts", None) is not None:
        overrides["restarts"] = args.restarts
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if getattr(args, "frechet_config", None):
        return FrechetConfig.from_file(args.frechet_config, **overrides)
    try:
        return FrechetConfig(**overrides)
    except ValidationError as e:
        raise InvalidInputException(f"Invalid Fréchet settings: {str(e)}")


def _load_draws(args):
    intercepts = getattr(args, "intercepts", None)
    if intercepts is None and os.path.exists(args.draws + ".intercepts"):
        intercepts = args.draws + ".intercepts"
    return DrawsFileReader(args.draws, intercepts).read()


def cmd_simulate(args):
    spec = SimulationSpec.preset(args.regime, tuple(args.sizes), args.density)
    link = get_link(args.link)
    X, labels = simulate_template(spec, args.seed)
    alpha = calibrate_intercept(X, spec.target_density, link)
    A = simulate_graph(X, alpha, link, seed=args.seed + 1)
    prefix = args.out_prefix

    write_matrix_csv(f"{prefix}_template.csv", X, prefix="x")
    write_matrix_csv(f"{prefix}_truth_gram.csv", gram_of(X), prefix="b")
    write_lines(f"{prefix}_labels.txt", labels)
    write_adjacency(f"{prefix}_graph.txt", A)
    save_report_to_json(
        {
            "regime": spec.regime,
            "seed": args.seed,
            "group_sizes": list(spec.group_sizes),
            "link": link.kind,
            "target_density": spec.target_density,
            "alpha": alpha,
            "expected_density": expected_density(X, alpha, link),
            "empirical_density": edge_density(A),
        },
        f"{prefix}_alpha.json",
    )


def cmd_calibrate(args):
    X = MatrixFileReader(args.template).read()
    link = get_link(args.link)
    alpha = calibrate_intercept(X, args.density, link)
    save_report_to_json(
        {
            "target_density": args.density,
            "link": link.kind,
            "alpha": alpha,
            "expected_density": expected_density(X, alpha, link),
        },
        args.out,
    )


def cmd_sample(args):
    A = AdjacencyFileReader(args.graph).read()
    overrides = dict(seed=args.seed, burn_in=args.burn_in, thin=args.thin, draws=args.draws)
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if args.preset == "florentine":
        overrides = {**SamplerConfig.florentine().model_dump(exclude_defaults=True), **overrides}
    try:
        if args.config:
            config = SamplerConfig.from_file(args.config, **overrides)
        else:
            config = SamplerConfig(**overrides)
    except ValidationError as e:
        raise InvalidInputException(f"Invalid sampler settings: {str(e)}")

    result = mh_sample(A, args.rank, config)
    write_draws(args.out, result.draws)
    write_intercepts(args.out + ".intercepts", result.draws.intercepts)
    save_report_to_json(
        {
            "seed": config.seed,
            "n": result.draws.n,
            "r": result.draws.r,
            "M": result.draws.M,
            "acceptance_position": result.acceptance_position,
            "acceptance_alpha": result.acceptance_alpha,
            "config": config.model_dump(),
            "log_posterior_trace": result.log_posterior_trace,
        },
        args.out + ".acceptance.json",
    )


def cmd_summarize(args):
    draws = _load_draws(args)
    config = _frechet_config(args)
    result = frechet_mean(draws, config)
    report = {
        "seed": config.seed,
        "restarts": config.restarts,
        "n": draws.n,
        "r": draws.r,
        "M": draws.M,
        "variation": frechet_variation(result),
        "credible_radii": {str(level): credible_radius(result, level) for level in CREDIBLE_LEVELS},
        "iterations": result.iterations,
        "converged": result.converged,
        "init": result.init,
        "objective_trace": result.objective_trace,
        "start_objectives": result.start_objectives,
        "mean_gram": result.mean_gram,
    }
    if draws.M >= 2:
        sample = tangent_residuals(result.mean_factor, draws, threads=args.threads)
        if sample.M >= 2:
            cov = tangent_covariance(sample)
            report["tangent"] = {
                "retained": sample.M,
                "excluded": sample.excluded,
                "effective_dim": cov.effective_dim,
                "significant_rank": significant_rank(cov),
                "trace": float(np.sum(cov.eigenvalues)),
                "top_eigenvalues": cov.eigenvalues[: args.components].tolist(),
            }
    save_report_to_json(report, args.out)
    write_matrix_csv(_stem(args.out) + "_mean_factor.csv", result.mean_factor, prefix="y")


DYAD_COLUMNS = [
    "i", "j", "mean_distance", "median_distance", "var_distance", "ci_lo", "ci_hi",
    "tail_probability", "mean_probability", "ci_prob_lo", "ci_prob_hi", "mean_link_effect",
]


def cmd_dyads(args):
    draws = _load_draws(args)
    pairs = all_pairs(draws.n) if args.all else PairsReader(args.pairs).read()
    summaries = dyad_summaries(draws, pairs, args.level, get_link(args.link), args.threshold)
    write_table_csv(
        args.out,
        DYAD_COLUMNS,
        ([getattr(s, column) for column in DYAD_COLUMNS] for s in summaries),
    )
    if args.compare:
        primary = AdjacencyFileReader(args.compare[0]).read()
        secondary = AdjacencyFileReader(args.compare[1]).read()
        save_report_to_json(
            {"level": args.level, "dyad_types": dyad_type_summary(summaries, primary, secondary)},
            _stem(args.out) + "_types.json",
        )


def cmd_nodes(args):
    draws = _load_draws(args)
    names = LinesReader(args.names).read() if args.names else [str(i) for i in range(draws.n)]
    if len(names) != draws.n:
        raise InvalidInputException(f"{len(names)} names given for {draws.n} nodes")
    uncertainty = np.array(node_uncertainty(draws, args.method, frechet_config=_frechet_config(args)).values)

    columns = {"node": list(range(draws.n)), "name": names, "U": uncertainty.tolist()}
    report = {"method": args.method, "n": draws.n, "M": draws.M}

    if args.truth:
        truth = validate_gram(MatrixFileReader(args.truth).read())
        loss = nodewise_loss(draws, truth)
        columns["L"] = loss.tolist()
        report["corr_u_l"] = float(pearsonr(uncertainty, loss)[0])
    if args.graph:
        centrality = node_centrality(AdjacencyFileReader(args.graph).read())
        for key, values in centrality.items():
            columns[key] = values.tolist()
            report[f"spearman_u_{key}"] = float(spearmanr(uncertainty, values)[0])
    if args.labels:
        labels = LinesReader(args.labels).read()
        columns["group"] = labels
        report["groups_u"] = group_summary(uncertainty, labels)
        if "L" in columns:
            report["groups_l"] = group_summary(columns["L"], labels)

    order = np.argsort(-uncertainty, kind="stable")[: args.top]
    report["most_uncertain"] = [{"node": int(i), "name": names[i], "U": float(uncertainty[i])} for i in order]

    header = list(columns)
    write_table_csv(args.out, header, zip(*(columns[key] for key in header)))
    save_report_to_json(report, _stem(args.out) + ".json")


def cmd_embed(args):
    B = validate_gram(MatrixFileReader(args.gram).read())
    coordinates = embed_mean(B, args.rank)
    header = [f"x{k}" for k in range(coordinates.shape[1])]
    rows = coordinates.tolist()
    if args.nodes:
        table = TableReader(args.nodes, required_fields=["U"]).read()
        if len(table) != B.shape[0]:
            raise InvalidInputException(f"nodes table has {len(table)} rows for {B.shape[0]} nodes")
        sizes = np.sqrt(np.maximum([float(row["U"]) for row in table], 0.0))
        header.append("size")
        rows = [row + [float(size)] for row, size in zip(rows, sizes)]
    write_table_csv(args.out, header, rows)
    residual = np.linalg.norm(gram_of_factor(coordinates) - B)
    logger.info(f"Embedding Gram residual {residual:.3e} (trace {np.trace(B):.3e})")


def cmd_align(args):
    draws = _load_draws(args)
    mean_factor = MatrixFileReader(args.mean).read()
    if mean_factor.shape != (draws.n, draws.r):
        raise InvalidInputException(f"mean factor is {mean_factor.shape}, draws are ({draws.n}, {draws.r})")
    aligned = align_for_display(draws, mean_factor)
    header = ["draw", "node"] + [f"x{k}" for k in range(draws.r)]
    rows = (
        [m, i] + aligned[m, i].tolist()
        for m in range(draws.M)
        for i in range(draws.n)
    )
    write_table_csv(args.out, header, rows)


def cmd_sensitivity(args):
    draws = _load_draws(args)
    save_report_to_json(reference_sensitivity(draws, args.k, args.seed), args.out)


def cmd_predictive(args):
    draws = _load_draws(args)
    link = get_link(args.link)
    replicates = posterior_predictive(draws, link, args.count, args.seed)
    width = max(4, len(str(args.count - 1)))
    for t, A in enumerate(replicates):
        write_adjacency(f"{args.out_prefix}_{t:0{width}d}.txt", A)
    densities = [edge_density(A) for A in replicates]
    report = {
        "seed": args.seed,
        "count": args.count,
        "link": link.kind,
        "densities": densities,
        "mean_density": float(np.mean(densities)),
    }
    if args.graph:
        report["observed_density"] = edge_density(AdjacencyFileReader(args.graph).read())
    save_report_to_json(report, f"{args.out_prefix}_summary.json")


def cmd_study(args):
    try:
        sampler_config = SamplerConfig(
            **{**desk_sampler_config().model_dump(), "burn_in": args.burn_in, "thin": args.thin, "draws": args.draws}
        )
    except ValidationError as e:
        raise InvalidInputException(f"Invalid sampler settings: {str(e)}")
    report = {"seed": args.seed, "group_sizes": list(args.sizes), "regimes": {}}
    for regime in args.regimes:
        summaries = run_study(
            regime,
            args.replicates,
            args.seed,
            group_sizes=tuple(args.sizes),
            sampler_config=sampler_config,
            frechet_config=_frechet_config(args),
        )
        report["regimes"][regime] = {
            "summary": summarize_study(summaries),
            "replicates": [s.model_dump() for s in summaries],
        }
    save_report_to_json(report, args.out)


def build_parser() -> CLIParser:
    # accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="Fréchet relative tolerance")
    common.add_argument("--max-iter", type=int, default=argparse.SUPPRESS, help="Fréchet iteration cap")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads (results do not depend on it)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="only log warnings and errors")

    parser = CLIParser(
        prog="main.py",
        description="Quotient posterior summaries for Euclidean latent space network models",
        parents=[common],
    )
    parser.set_defaults(tol=None, max_iter=None, threads=1, quiet=False)
    sub = parser.add_subparsers(dest="command")

    def command(name, handler, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=handler)
        return p

    def draws_args(p, intercepts=False):
        p.add_argument("--draws", required=True, help="draws file (header 'n r M')")
        p.add_argument("--intercepts", required=intercepts, default=None,
                       help="intercepts file (default: <draws>.intercepts if present)")

    p = command("simulate", cmd_simulate, "simulate a three-group template and graph")
    p.add_argument("--regime", choices=["well", "weak"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", default="output/sim")
    p.add_argument("--sizes", type=int, nargs=3, default=[48, 24, 48], metavar=("NL", "NB", "NR"))
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--link", choices=["logistic", "probit"], default="logistic")

    p = command("calibrate", cmd_calibrate, "calibrate the intercept of a template to a density")
    p.add_argument("--template", required=True)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--link", choices=["logistic", "probit"], default="logistic")
    p.add_argument("--out", default="output/calibration.json")

    p = command("sample", cmd_sample, "random-walk Metropolis draws for an observed graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--config", default=None, help="KEY=value sampler config file")
    p.add_argument("--preset", choices=["default", "florentine"], default="default")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--out", default="output/draws.txt")

    p = command("summarize", cmd_summarize, "Fréchet mean, variation and credible radii")
    draws_args(p)
    p.add_argument("--frechet-config", default=None, help="KEY=value Fréchet config file")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--components", type=int, default=5, help="tangent eigenvalues to report")
    p.add_argument("--out", default="output/summary.json")

    p = command("dyads", cmd_dyads, "posterior dyad distance and edge probability summaries")
    draws_args(p)
    selection = p.add_mutually_exclusive_group(required=True)
    selection.add_argument("--pairs", default=None, help="file of 'i j' lines")
    selection.add_argument("--all", action="store_true")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--link", choices=["logistic", "probit"], default=None)
    p.add_argument("--threshold", type=float, default=None, help="report P(D_ij > threshold)")
    p.add_argument("--compare", nargs=2, default=None, metavar=("PRIMARY", "SECONDARY"))
    p.add_argument("--out", default="output/dyads.csv")

    p = command("nodes", cmd_nodes, "node uncertainty U_i (and loss L_i against a truth)")
    draws_args(p)
    p.add_argument("--truth", default=None, help="true Gram matrix CSV")
    p.add_argument("--method", choices=["monte-carlo", "delta"], default="monte-carlo")
    p.add_argument("--graph", default=None, help="adjacency for degree/betweenness columns")
    p.add_argument("--labels", default=None, help="group label per line")
    p.add_argument("--names", default=None, help="node name per line")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--out", default="output/nodes.csv")

    p = command("embed", cmd_embed, "display embedding of a Gram matrix")
    p.add_argument("--gram", required=True)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--nodes", default=None, help="nodes table whose U column sizes the points")
    p.add_argument("--out", default="output/embedding.csv")

    p = command("sensitivity", cmd_sensitivity, "reference-sensitivity index S_ref")
    draws_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="output/sensitivity.json")

    p = command("predictive", cmd_predictive, "posterior predictive replicate networks")
    draws_args(p)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--link", choices=["logistic", "probit"], default="logistic")
    p.add_argument("--graph", default=None, help="observed graph for density comparison")
    p.add_argument("--out-prefix", default="output/replicate")

    p = command("align", cmd_align, "align draws to a mean factor for display")
    draws_args(p)
    p.add_argument("--mean", required=True, help="mean factor CSV")
    p.add_argument("--out", default="output/aligned.csv")

    p = command("study", cmd_study, "desk-scale simulation study over seeded replicates")
    p.add_argument("--regimes", nargs="+", choices=["well", "weak"], default=["well", "weak"])
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=int, nargs=3, default=list(DESK_GROUP_SIZES), metavar=("NL", "NB", "NR"))
    p.add_argument("--burn-in", type=int, default=2000)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--draws", type=int, default=200)
    p.add_argument("--out", default="output/study.json")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
    except UsageError as e:
        sys.stderr.write(parser.format_help())
        sys.stderr.write(f"error: {str(e)}\n")
        return EXIT_USAGE

    configure_logging(args.quiet)
    try:
        args.handler(args)
        return EXIT_OK
    except InvalidInputException as e:
        logger.error(f"❌ Invalid input: {str(e)}")
        return EXIT_USAGE
    except NumericalException as e:
        logger.error(f"❌ Numerical failure: {str(e)}")
        return EXIT_NUMERICAL
    except (FileFormatException, OutputException, OSError) as e:
        logger.error(f"❌ I/O failure: {str(e)}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
