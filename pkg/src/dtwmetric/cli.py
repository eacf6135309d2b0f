"""Command-line entry point.

Settings come from flags and, optionally, a flat ``key = value`` config file
given with ``--config``; flags win over the file. Exit codes: 0 success,
1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import learner
from .classifier import classify, error_rate, write_predictions
from .dataset import DataError, Sequence, load_ucr_split, read_ucr_file, znormalize
from .descriptors import KINDS, DescriptorConfig, extract_all, point_series
from .dtw import align, write_path_csv
from .evaluation import (
    STUDIES,
    alignment_study,
    run_study,
    simulate_warped_pair,
    write_outputs,
)
from .learner import DEFAULT_MU_GRID, FitConfig, MetricModel

logger = logging.getLogger("dtwmetric")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


def read_config(path):
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _float_list(text):
    try:
        return tuple(float(v) for v in str(text).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _int_list(text):
    try:
        return tuple(int(v) for v in str(text).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


def _bool(text):
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _common(p):
    p.add_argument("--config", help="flat key=value settings file")
    p.add_argument("--descriptor", choices=KINDS, default="hog1d")
    p.add_argument("--align-descriptor", choices=KINDS, default=None,
                   help="descriptor used for alignment (default: --descriptor)")
    p.add_argument("--window-length", type=int, default=30)
    p.add_argument("--hog-intervals", type=int, default=2)
    p.add_argument("--hog-bins", type=int, default=8)
    p.add_argument("--hog-sigma", type=float, default=0.1)
    p.add_argument("--k-clusters", type=int, default=5)
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--mu-grid", type=_float_list, default=DEFAULT_MU_GRID)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--baseline", action="store_true",
                   help="plain 1NN-DTW on raw sample values, no descriptors")
    p.add_argument("--normalize", action="store_true", help="z-normalize every sequence")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="dtwmetric", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="align two sequence files")
    p.add_argument("first")
    p.add_argument("second")
    _common(p)

    p = sub.add_parser("fit", help="learn cluster-pair weights, write model.json")
    _common(p)

    p = sub.add_parser("classify", help="1NN-classify the test split")
    p.add_argument("--model", help="model.json from `fit` (default: unit metric)")
    _common(p)

    p = sub.add_parser("evaluate", help="run a study protocol")
    p.add_argument("study", help=f"one of {', '.join(STUDIES)}")
    p.add_argument("--data-dir", help="directory holding NAME/NAME_TRAIN.* and NAME_TEST.*")
    p.add_argument("--datasets", default="", help="comma-separated dataset names")
    p.add_argument("--ks", type=_int_list, default=(5, 10, 15, 20, 25, 30))
    _common(p)

    p = sub.add_parser("simulate", help="write a corpus of warped pairs")
    p.add_argument("--n-pairs", type=int, default=100)
    p.add_argument("--strength", type=float, default=0.3)
    p.add_argument("--no-amplitude", action="store_true")
    _common(p)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            settings = read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        # re-parse with the file as defaults so explicit flags still win
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in settings.items():
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
            action = known[key]
            if action.const is True:
                defaults[key] = _bool(value)
            elif action.type is not None:
                defaults[key] = action.type(value)
            else:
                defaults[key] = value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def descriptor_cfg(args, kind=None):
    return DescriptorConfig(
        kind=kind or args.descriptor,
        window_length=args.window_length,
        hog_intervals=args.hog_intervals,
        hog_bins=args.hog_bins,
        hog_sigma=args.hog_sigma,
    )


def fit_cfg(args):
    align_kind = args.align_descriptor
    return FitConfig(
        descriptor=descriptor_cfg(args),
        align_descriptor=None if align_kind is None else descriptor_cfg(args, align_kind),
        k=args.k_clusters,
        kappa=args.kappa,
        mu_grid=tuple(args.mu_grid),
        seed=args.seed,
    )


def _require(args, *names):
    missing = [n for n in names if not getattr(args, n)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join(f"--{n}" for n in missing))


def _load(args, test=True):
    _require(args, "train", *(["test"] if test else []))
    return load_ucr_split(args.train, args.test if test else None, normalize=args.normalize)


def _read_sequence(path, normalize):
    text = Path(path).read_text()
    values = [float(v) for v in text.replace(",", " ").split()]
    seq = Sequence(values, id=Path(path).stem)
    if normalize:
        seq = Sequence(znormalize(seq.values), id=seq.id)
    return seq


def cmd_align(args):
    a = _read_sequence(args.first, args.normalize)
    b = _read_sequence(args.second, args.normalize)
    if args.baseline:
        P, Q = point_series(a), point_series(b)
    else:
        cfg = descriptor_cfg(args, args.align_descriptor)
        P, Q = extract_all(a, cfg), extract_all(b, cfg)
    res = align(P, Q)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "path.csv", "w") as fh:
        write_path_csv(res.path, fh)
    (out / "distance.txt").write_text(f"{res.distance!r}\n")
    print(f"distance={res.distance!r}")
    return EXIT_OK


def cmd_fit(args):
    data = _load(args, test=False)
    model = learner.fit(data, fit_cfg(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(model.to_json() + "\n")
    print(f"mu={model.mu} omega={np.array2string(model.omega, precision=6)}")
    return EXIT_OK


def cmd_classify(args):
    data = _load(args)
    if args.baseline:
        model = None
    elif args.model:
        model = MetricModel.from_json(Path(args.model).read_text())
    else:
        model = descriptor_cfg(args)
    preds = classify(data.test, data.train, model)
    err = error_rate(preds, [s.label for s in data.test])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "predictions.csv", "w") as fh:
        write_predictions(preds, fh)
    (out / "error_rate.txt").write_text(f"{err!r}\n")
    print(f"error_rate={err!r}")
    return EXIT_OK


def _study_datasets(args):
    if args.data_dir:
        names = [n for n in args.datasets.split(",") if n]
        root = Path(args.data_dir)
        if not names:
            names = sorted(p.name for p in root.iterdir() if p.is_dir())
        items = []
        for name in names:
            train = sorted((root / name).glob(f"{name}_TRAIN*"))
            test = sorted((root / name).glob(f"{name}_TEST*"))
            # keep unloadable entries so the harness logs and skips them
            items.append((train[0] if train else root / name / f"{name}_TRAIN",
                          test[0] if test else root / name / f"{name}_TEST"))
        return items
    _require(args, "train", "test")
    return [(args.train, args.test)]


def cmd_evaluate(args):
    if args.study not in STUDIES:
        raise UsageError(f"unknown study {args.study!r}; expected one of {', '.join(STUDIES)}")
    params = dict(window_length=args.window_length, hog_intervals=args.hog_intervals,
                  hog_bins=args.hog_bins, hog_sigma=args.hog_sigma)
    results = run_study(
        args.study,
        _study_datasets(args),
        seed=args.seed,
        ks=args.ks,
        k=args.k_clusters,
        descriptor_params=params,
        normalize=args.normalize,
        kappa=args.kappa,
        mu_grid=tuple(args.mu_grid),
    )
    if not results:
        raise DataError("no dataset could be evaluated")
    write_outputs(results, args.out, args.study)
    for r in results:
        print(f"{r.dataset:24s} {r.condition:24s} euclidean={r.error_euclidean:.4f} "
              f"learned={r.error_learned:.4f}")
    return EXIT_OK


def cmd_simulate(args):
    _require(args, "train")
    _, series = read_ucr_file(args.train)
    seqs = [Sequence(znormalize(v) if args.normalize else v, id=f"s{i}")
            for i, v in enumerate(series)]
    rng = np.random.default_rng(args.seed)
    corpus = []
    for t in range(args.n_pairs):
        base = seqs[int(rng.integers(len(seqs)))]
        pair = simulate_warped_pair(base, seed=int(rng.integers(2**31)),
                                    stretch_strength=args.strength,
                                    amplitude=not args.no_amplitude)
        corpus.append({
            "original_id": base.id,
            "original": pair.original.values.tolist(),
            "warped": pair.warped.values.tolist(),
            "truth": pair.truth.tolist(),
        })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "warped_pairs.json").write_text(json.dumps(corpus) + "\n")
    errors = alignment_study(seqs, n_pairs=args.n_pairs, seed=args.seed,
                             stretch_strength=args.strength)
    with open(out / "alignment_errors.csv", "w") as fh:
        fh.write("method,mean_error,median_error\n")
        for method, errs in errors.items():
            fh.write(f"{method},{errs.mean()!r},{float(np.median(errs))!r}\n")
    for method, errs in errors.items():
        print(f"{method:12s} mean alignment error {errs.mean():.4f}")
    return EXIT_OK


COMMANDS = {
    "align": cmd_align,
    "fit": cmd_fit,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
}


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except (UsageError, argparse.ArgumentTypeError, ValueError) as exc:
        print(f"dtwmetric: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    learner.set_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dtwmetric: error: {exc}", file=sys.stderr)
        build_parser().print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, OSError, RuntimeError) as exc:
        print(f"dtwmetric: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
