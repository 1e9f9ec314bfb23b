"""Command-line interface: fit, predict, eval, synth, and oracle.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import csv
import sys

import numpy as np

from . import data as datamod
from . import model_io, oracle
from .evaluate import best_permutation_error
from .exceptions import (
    DataError,
    IcamixtureError,
    InvalidInputError,
    NumericalError,
)
from .ica import Nonlinearity
from .mixture import FitConfig, fit, predict

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="icamixture", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_fit = sub.add_parser("fit", help="fit a mixture model to a CSV dataset")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--label-column", default=None,
                       help="held-out class column; used only to report an error rate")
    p_fit.add_argument("--components", type=int, required=True)
    p_fit.add_argument("--mode", choices=("ica", "npem"), default="ica")
    p_fit.add_argument("--init", choices=("kmeans", "random"), default="kmeans")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--max-iter", type=int, default=300)
    p_fit.add_argument("--tol", type=float, default=1e-7)
    p_fit.add_argument("--ica-tol", type=float, default=3e-3)
    p_fit.add_argument("--ica-max-inner", type=int, default=100)
    p_fit.add_argument("--nonlinearity", choices=("logcosh", "gauss"),
                       default="logcosh")
    p_fit.add_argument("--alpha1", type=float, default=1.0)
    p_fit.add_argument("--bandwidth-coef", type=float, default=0.5)
    p_fit.add_argument("--pca", type=int, default=None, metavar="D",
                       help="reduce to D principal-component scores before fitting "
                            "(correlation-matrix PCA unless --pca-cov)")
    p_fit.add_argument("--pca-corr", action="store_true",
                       help="use correlation-matrix PCA (the default)")
    p_fit.add_argument("--pca-cov", action="store_true",
                       help="use covariance-matrix PCA of the raw attributes")
    p_fit.add_argument("--standardize", action="store_true")
    p_fit.add_argument("--min-lambda", type=float, default=1e-4)
    p_fit.add_argument("--recompute-posterior-after-ica", action="store_true",
                       help="weight the density update with responsibilities "
                            "recomputed after the ICA pass (the default)")
    p_fit.add_argument("--reuse-posterior", action="store_true",
                       help="reuse the iteration's opening responsibilities for "
                            "the density update instead")
    p_fit.add_argument("--reinit-dying", action="store_true")
    p_fit.add_argument("--threads", type=int, default=1)
    p_fit.add_argument("--output", required=True)

    p_pred = sub.add_parser("predict", help="label a CSV dataset with a saved model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--label-column", default=None,
                        help="column to ignore when reading features")
    p_pred.add_argument("--output", required=True)

    p_eval = sub.add_parser("eval", help="score predicted labels against truth")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--pred-column", default="label")
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--truth-column", default="label")

    p_synth = sub.add_parser("synth", help="generate a labeled synthetic sample")
    p_synth.add_argument("--components", type=int, required=True)
    p_synth.add_argument("--dim", type=int, required=True)
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--lambdas", default=None,
                         help="comma-separated weights; default equal")
    p_synth.add_argument("--source-kinds", default="uniform",
                         help="per-component ';' groups of per-coordinate ',' kinds; "
                              "a single kind broadcasts")
    p_synth.add_argument("--shifts", default=None,
                         help="per-component ';' groups of ',' offsets; default zero")
    p_synth.add_argument("--mixing", choices=("identity", "random"), default="random")
    p_synth.add_argument("--max-condition", type=float, default=4.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--output", required=True)

    p_oracle = sub.add_parser("oracle", help="run the grid-operator check suite")
    p_oracle.add_argument("--seed", type=int, default=0)

    return parser


def _preprocess_from_flags(x, args):
    """Apply --standardize/--pca and return (matrix, stored transform)."""
    pre = {}
    work = x
    if args.standardize:
        work, means, sds = datamod.standardize(work)
        pre["standardize"] = {"means": list(map(float, means)),
                              "sds": list(map(float, sds))}
    if args.pca is not None:
        use_corr = not args.pca_cov
        if args.pca_corr and args.pca_cov:
            raise _UsageError("--pca-corr and --pca-cov are mutually exclusive")
        if use_corr:
            center = work.mean(axis=0)
            scale = work.std(axis=0)
            if np.any(scale <= 0.0):
                raise DataError("constant column; correlation PCA undefined")
        else:
            center = work.mean(axis=0)
            scale = np.ones(work.shape[1])
        scores, loadings, _ = datamod.pca_project(work, args.pca,
                                                  use_correlation=use_corr)
        pre["pca"] = {
            "center": list(map(float, center)),
            "scale": list(map(float, scale)),
            "loadings": [list(map(float, row)) for row in loadings],
        }
        work = scores
    return work, pre


def _apply_preprocess(x, pre):
    work = np.asarray(x, dtype=float)
    if not pre:
        return work
    if "standardize" in pre:
        block = pre["standardize"]
        work = (work - np.asarray(block["means"])) / np.asarray(block["sds"])
    if "pca" in pre:
        block = pre["pca"]
        centered = (work - np.asarray(block["center"])) / np.asarray(block["scale"])
        work = centered @ np.asarray(block["loadings"])
    return work


def _cmd_fit(args, out):
    dataset = datamod.load_csv(args.input, args.label_column)
    work, pre = _preprocess_from_flags(dataset.x, args)
    cfg = FitConfig(
        m=args.components,
        mode=args.mode,
        max_outer=args.max_iter,
        outer_tol=args.tol,
        ica_tol=args.ica_tol,
        ica_max_inner=args.ica_max_inner,
        nonlinearity=Nonlinearity(kind=args.nonlinearity, alpha1=args.alpha1),
        bandwidth_coef=args.bandwidth_coef,
        init=args.init,
        seed=args.seed,
        min_lambda=args.min_lambda,
        recompute_posterior_after_ica=not args.reuse_posterior,
        reinit_dying=args.reinit_dying,
        threads=args.threads,
    )
    model = fit(work, cfg)
    model_io.save_model(model, args.output, preprocess=pre or None)
    report = model.fit_report
    print(f"n={work.shape[0]} r={work.shape[1]} m={cfg.m} mode={cfg.mode}", file=out)
    print(f"converged={report.converged} iterations={report.outer_iters}", file=out)
    print(f"loglik={report.loglik_trace[-1]:.6f}", file=out)
    print("lambda=" + ",".join(f"{v:.6f}" for v in model.lambdas), file=out)
    if dataset.labels is not None:
        labels, _ = predict(model, work, cfg.threads)
        error, _, _ = best_permutation_error(labels, dataset.labels)
        print(f"error_rate={error:.6f}", file=out)
    print(f"model written to {args.output}", file=out)
    return EXIT_OK


def _cmd_predict(args, out):
    model, pre = model_io.load_model(args.model)
    dataset = datamod.load_csv(args.input, args.label_column)
    work = _apply_preprocess(dataset.x, pre)
    labels, posteriors = predict(model, work)
    with open(args.output, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "label"] + [f"p{j + 1}" for j in range(model.m)])
        for i in range(work.shape[0]):
            writer.writerow([i, int(labels[i])] + [repr(float(v)) for v in posteriors[i]])
    print(f"predictions written to {args.output}", file=out)
    return EXIT_OK


def _cmd_eval(args, out):
    pred = datamod.load_csv(args.pred, args.pred_column)
    truth = datamod.load_csv(args.truth, args.truth_column)
    if pred.labels is None or truth.labels is None:
        raise DataError("both files must contain the requested label columns")
    error, _, confusion = best_permutation_error(pred.labels, truth.labels)
    print(f"error_rate={error:.6f}", file=out)
    print("confusion_matrix rows=true cols=pred", file=out)
    for row in confusion.counts:
        print(" ".join(str(int(v)) for v in row), file=out)
    return EXIT_OK


def _parse_grid(text, m, r, what, default):
    if text is None:
        return tuple(tuple(default for _ in range(r)) for _ in range(m))
    groups = [g.strip() for g in text.split(";")]
    if len(groups) == 1 and m > 1:
        groups = groups * m
    if len(groups) != m:
        raise _UsageError(f"--{what} needs {m} ';' groups, got {len(groups)}")
    out = []
    for group in groups:
        items = [v.strip() for v in group.split(",")]
        if len(items) == 1 and r > 1:
            items = items * r
        if len(items) != r:
            raise _UsageError(f"--{what} group {group!r} needs {r} entries")
        out.append(tuple(items))
    return tuple(out)


def _cmd_synth(args, out):
    m, r = args.components, args.dim
    try:
        if args.lambdas is None:
            lambdas = tuple(1.0 / m for _ in range(m))
        else:
            lambdas = tuple(float(v) for v in args.lambdas.split(","))
        kinds = _parse_grid(args.source_kinds, m, r, "source-kinds", "uniform")
        shift_text = _parse_grid(args.shifts, m, r, "shifts", "0")
        shifts = tuple(tuple(float(v) for v in group) for group in shift_text)
    except ValueError as exc:
        raise _UsageError(f"bad numeric value: {exc}") from None
    rng = np.random.default_rng(args.seed)
    if args.mixing == "identity":
        mixing = tuple(np.eye(r) for _ in range(m))
    else:
        mixing = tuple(
            datamod.random_mixing_matrix(r, rng, args.max_condition)
            for _ in range(m)
        )
    spec = datamod.SynthSpec(m=m, r=r, n=args.n, lambdas=lambdas,
                             source_kinds=kinds, mixing=mixing, shifts=shifts,
                             seed=args.seed)
    dataset = datamod.synth(spec)
    datamod.write_csv(dataset, args.output)
    print(f"wrote {dataset.n} rows x {dataset.r} features to {args.output}", file=out)
    return EXIT_OK


def _cmd_oracle(args, out):
    results = oracle.run_all(args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.seconds:6.3f}s  {r.detail}", file=out)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=out)
    return EXIT_OK if not failed else EXIT_NUMERICAL


def run(argv, out=None):
    """Execute one CLI invocation; returns the process exit code."""
    out = out if out is not None else sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        handler = {
            "fit": _cmd_fit,
            "predict": _cmd_predict,
            "eval": _cmd_eval,
            "synth": _cmd_synth,
            "oracle": _cmd_oracle,
        }[args.command]
        return handler(args, out)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InvalidInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, IcamixtureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
