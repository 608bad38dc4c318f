"""Command-line entry point: ``ddn <subcommand> ...``.

Exit codes are 0 on success, 1 on usage errors and 2 on data errors (bad or
missing files, dimension mismatches).  Results go to stdout or ``--out``;
logs go to stderr, with the level taken from DDN_LOG.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataio import DataError, Dataset, gen_synth, load_dataset, load_jsonl, save_dataset
from .gibbs import GibbsConfig, gibbs_mpe
from .local_search import LocalSearchConfig, greedy_mpe, random_walk_mpe
from .metrics import evaluate
from .milp.lpfile import LpFormatError, export_lp
from .milp.program import EncodingError, encode
from .milp.pwl import paper_pwl
from .milp.solve import solve
from .model import DdnModel, DimensionError, ModelFormatError
from .oracle import OracleSizeError, brute_force_mpe
from .rng import stream
from .trainer import TrainConfig, TrainingError, train

log = logging.getLogger("ddn")

DEFAULT_TIME_LIMIT = 60.0
ENGINES = ("gibbs", "rw", "greedy", "milp")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

_DATA_ERRORS = (
    DataError,
    ModelFormatError,
    DimensionError,
    LpFormatError,
    EncodingError,
    OracleSizeError,
    TrainingError,
    OSError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _configure_logging() -> None:
    level = os.environ.get("DDN_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("ddn")
    root.handlers[:] = [handler]
    root.setLevel(levels.get(level, logging.ERROR))
    root.propagate = False


def _load_model(path) -> DdnModel:
    try:
        return DdnModel.load(path)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None


def _load_data(path, model: DdnModel | None = None) -> Dataset:
    data = load_dataset(path)
    if model is not None:
        for k, inst in enumerate(data):
            if inst.features.shape[0] != model.n_features:
                raise DataError(
                    f"{path}: instance {k} has {inst.features.shape[0]} features, "
                    f"model expects {model.n_features}"
                )
    return data


def _write_lines(rows, out) -> None:
    text = "".join(json.dumps(r) + "\n" for r in rows)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# train


def _cmd_train(args) -> int:
    data = load_dataset(args.data)
    if not data.labelled:
        raise DataError(f"{args.data}: training needs labels on every instance")
    cfg = TrainConfig(
        learning_rate=args.lr,
        l1_lambda=args.l1,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
    )
    result = train(data, cfg)
    result.model.save(args.out)
    log.info("trained: loss %.6f -> %.6f", result.initial_loss, result.loss_trace[-1] if result.loss_trace else result.initial_loss)
    return EXIT_OK


# infer


def _infer_one(task):
    model, features, k, opts = task
    engine = opts["engine"]
    if engine == "gibbs":
        cfg = GibbsConfig(
            n_samples=opts["samples"],
            burn_in=opts["burn_in"],
            seed=opts["seed"],
            time_limit_s=opts["time_limit"],
        )
        res = gibbs_mpe(model, features, cfg, rng=stream(opts["seed"], k))
    elif engine in ("rw", "greedy"):
        cfg = LocalSearchConfig(
            max_flips=opts["max_flips"],
            noise_p=opts["noise_p"],
            restarts=opts["restarts"],
            seed=opts["seed"],
            time_limit_s=opts["time_limit"],
        )
        fn = greedy_mpe if engine == "greedy" else random_walk_mpe
        res = fn(model, features, cfg, stream_key=(k,))
    else:
        pwl = paper_pwl() if opts["pwl"] == "paper" else None
        program = encode(model, features, pwl=pwl, epsilon=opts["epsilon"])
        res = solve(program, time_limit_s=opts["time_limit"], mode=opts["mode"])
    return res.to_json()


def _run_tasks(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [_infer_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps input order whatever the completion order
        return list(pool.map(_infer_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _cmd_infer(args) -> int:
    model = _load_model(args.model)
    data = _load_data(args.data, model)
    opts = {
        "engine": args.engine,
        "seed": args.seed,
        "time_limit": args.time_limit,
        "samples": args.samples,
        "burn_in": args.burn_in,
        "max_flips": args.max_flips,
        "noise_p": args.noise_p,
        "restarts": args.restarts,
        "pwl": args.pwl,
        "epsilon": args.epsilon,
        "mode": args.mode,
    }
    # validate engine settings once, before any work is dispatched
    try:
        if args.engine == "gibbs":
            GibbsConfig(args.samples, args.burn_in, args.seed, args.time_limit)
        elif args.engine in ("rw", "greedy"):
            LocalSearchConfig(args.max_flips, args.noise_p, args.restarts, args.seed, args.time_limit)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tasks = [(model, inst.features, k, opts) for k, inst in enumerate(data)]
    rows = _run_tasks(tasks, args.jobs)
    _write_lines(rows, args.out)
    return EXIT_OK


# evaluate


def _cmd_evaluate(args) -> int:
    preds = load_jsonl(args.pred)
    truth = load_dataset(args.truth)
    if not truth.labelled:
        raise DataError(f"{args.truth}: every instance needs labels")
    if len(preds) != len(truth):
        raise DataError(f"{args.pred}: {len(preds)} predictions for {len(truth)} truth instances")
    try:
        y_pred = np.array([row["assignment"] for row in preds])
    except (KeyError, TypeError):
        raise DataError(f"{args.pred}: every line needs an 'assignment' list") from None
    y_true = truth.labels()
    if y_pred.shape != y_true.shape:
        raise DataError(f"{args.pred}: prediction shape {y_pred.shape} does not match truth {y_true.shape}")
    scores = None
    if args.scores:
        if any(row.get("marginals") is None for row in preds):
            raise DataError(f"{args.pred}: --scores needs marginals on every line (use the gibbs engine)")
        scores = np.array([row["marginals"] for row in preds], dtype=float)
    report = evaluate(y_true, y_pred, scores)
    sys.stdout.write(json.dumps(report.to_dict()) + "\n")
    return EXIT_OK


# oracle


def _cmd_oracle(args) -> int:
    model = _load_model(args.model)
    data = _load_data(args.data, model)
    rows = []
    for inst in data:
        x, s = brute_force_mpe(model, inst.features)
        rows.append({"assignment": [int(a) for a in x], "score": s})
    _write_lines(rows, None)
    return EXIT_OK


# export-milp


def _cmd_export(args) -> int:
    model = _load_model(args.model)
    data = _load_data(args.data, model)
    if len(data) == 0:
        raise DataError(f"{args.data}: no instances to export")
    pwl = paper_pwl() if args.pwl == "paper" else None
    out = Path(args.out)
    for k, inst in enumerate(data):
        program = encode(model, inst.features, pwl=pwl, epsilon=args.epsilon)
        path = out if len(data) == 1 else out.with_name(f"{out.stem}_{k}{out.suffix}")
        export_lp(program, path)
    return EXIT_OK


# gen-synth


def _cmd_gen(args) -> int:
    try:
        data, model = gen_synth(args.labels, args.features, args.n, args.coupling, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_dataset(data, args.out)
    if args.model_out:
        model.save(args.model_out)
    return EXIT_OK


def _positive_float(text: str) -> float:
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return val


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ddn", description="Dependency-network training and MPE inference.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="fit a model by CPLL with SGD")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--lr", type=float, default=0.05)
    t.add_argument("--l1", type=float, default=0.0)
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=_cmd_train)

    i = sub.add_parser("infer", help="MPE inference per instance, JSONL output")
    i.add_argument("--data", required=True)
    i.add_argument("--model", required=True)
    i.add_argument("--engine", choices=ENGINES, default="milp")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--time-limit", type=_positive_float, default=DEFAULT_TIME_LIMIT)
    i.add_argument("--samples", type=int, default=1000)
    i.add_argument("--burn-in", type=int, default=None)
    i.add_argument("--max-flips", type=int, default=1000)
    i.add_argument("--noise-p", type=float, default=0.3)
    i.add_argument("--restarts", type=int, default=0)
    i.add_argument("--pwl", choices=("paper", "adaptive"), default="adaptive")
    i.add_argument("--epsilon", type=_positive_float, default=1e-3)
    i.add_argument("--mode", choices=("auto", "enumerate", "bnb"), default="auto")
    i.add_argument("--jobs", type=int, default=1)
    i.add_argument("--out", default=None)
    i.set_defaults(func=_cmd_infer)

    e = sub.add_parser("evaluate", help="score predictions against labelled data")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--scores", action="store_true", help="rank by the marginals in the prediction file")
    e.set_defaults(func=_cmd_evaluate)

    o = sub.add_parser("oracle", help="brute-force MPE per instance")
    o.add_argument("--data", required=True)
    o.add_argument("--model", required=True)
    o.set_defaults(func=_cmd_oracle)

    x = sub.add_parser("export-milp", help="write each instance's program in LP format")
    x.add_argument("--data", required=True)
    x.add_argument("--model", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--pwl", choices=("paper", "adaptive"), default="adaptive")
    x.add_argument("--epsilon", type=_positive_float, default=1e-3)
    x.set_defaults(func=_cmd_export)

    g = sub.add_parser("gen-synth", help="synthetic correlated-label data")
    g.add_argument("--labels", type=int, required=True)
    g.add_argument("--features", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--coupling", type=float, default=3.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--model-out", default=None)
    g.set_defaults(func=_cmd_gen)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "jobs", 1) < 1:
        print("ddn: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ddn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"ddn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
