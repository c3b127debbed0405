"""Command line interface: ``rceustat <command> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import STATISTICS, test_statistic
from .decomposition import SupportPolicy, detect_principal_support
from .experiments import ConfigError, ExperimentConfig, format_report, run_power, run_qq, run_rate, run_verify
from .graphs import Catalog
from .kernels import BUILTIN_NAMES, builtin
from .models import VARIANTS, DegreeFunction, ModelSpec, sample
from .ustat import u_statistic

_MODEL_ALIASES = {"gaussian": "gaussian_iid", "poisson": "poisson_bedd",
                  "overdispersed": "overdispersed_poisson_bedd"}


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", default="gaussian_iid",
                   choices=list(VARIANTS) + list(_MODEL_ALIASES))
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="intensity")
    p.add_argument("--f", default="constant", help="row degree function: constant | power:<a>")
    p.add_argument("--g", default="constant", help="column degree function: constant | power:<a>")
    p.add_argument("--dispersion", type=float, default=0.0,
                   help="overdispersion alpha of the mixing law")


def _model(args) -> ModelSpec:
    variant = _MODEL_ALIASES.get(args.model, args.model)
    return ModelSpec(variant, args.lam, DegreeFunction.parse(args.f),
                     DegreeFunction.parse(args.g), args.dispersion)


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_matrix(path: str) -> np.ndarray:
    y = np.loadtxt(path, delimiter=",", ndmin=2)
    return y


# -- commands ----------------------------------------------------------------

def cmd_catalog(args) -> int:
    rows = Catalog(args.max_rows, args.max_cols).rows()
    if args.format == "json":
        _emit(rows, args.out)
        return 0
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["r", "c", "edges_hex", "aut", "connected", "class_id"],
                       lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_simulate(args) -> int:
    model = _model(args)
    s = sample(model, args.m, args.n, args.seed)
    np.savetxt(args.out, s.Y, delimiter=",", fmt="%.17g")
    side = os.path.splitext(args.out)[0] + ".json"
    _emit({"model": model.as_dict(), "m": args.m, "n": args.n, "seed": args.seed,
           "version": __version__}, side)
    return 0


def cmd_ustat(args) -> int:
    y = _read_matrix(args.input)
    kern = args.kernel if args.path == "fast" else builtin(args.kernel)
    _emit(u_statistic(kern, y, args.path).as_dict())
    return 0


def cmd_support(args) -> int:
    policy = SupportPolicy(pilot=args.pilot, alpha=args.alpha, seed=args.seed)
    rep = detect_principal_support(_model(args), builtin(args.kernel), policy)
    _emit(rep.as_dict(), args.out)
    return 0


def cmd_test(args) -> int:
    y = _read_matrix(args.input)
    try:
        st = test_statistic(args.stat, y, lam=args.lam, f=DegreeFunction.parse(args.f),
                            g=DegreeFunction.parse(args.g))
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    _emit({"stat": st.name, "value": st.value, "variance": st.variance_used,
           "p": st.two_sided_p})
    return 0


def _config(args, experiment: str) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if cfg.experiment != experiment:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {experiment!r}")
    for attr in ("out_dir", "run_name", "workers", "seed"):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, attr, v)
    return cfg.validate()


def cmd_qq(args) -> int:
    man = run_qq(_config(args, "qq"))
    _emit({"outputs": man.outputs, "wall_clock": man.wall_clock})
    return 0


def cmd_power(args) -> int:
    man = run_power(_config(args, "power"))
    _emit({"outputs": man.outputs, "wall_clock": man.wall_clock})
    return 0


def cmd_rate(args) -> int:
    res, man = run_rate(_config(args, "rate"))
    _emit(dict(res, outputs=man.outputs))
    return 0


def cmd_verify(args) -> int:
    rep = run_verify(seed=args.seed, samples=args.samples, out_path=args.out)
    print(format_report(rep))
    return 0 if rep["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rceustat", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="list graph classes with automorphism counts")
    p.add_argument("--max-rows", type=int, default=2)
    p.add_argument("--max-cols", type=int, default=2)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("simulate", help="sample a matrix and write it as CSV")
    _add_model_args(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ustat", help="U-statistic of a CSV matrix")
    p.add_argument("--kernel", choices=BUILTIN_NAMES, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--path", choices=("fast", "exact", "ordered"), default="fast")
    p.set_defaults(func=cmd_ustat)

    p = sub.add_parser("support", help="detect the principal support of a kernel")
    _add_model_args(p)
    p.add_argument("--kernel", choices=BUILTIN_NAMES, required=True)
    p.add_argument("--alpha", type=float, default=0.01, help="family-wise significance")
    p.add_argument("--pilot", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_support)

    p = sub.add_parser("test", help="test statistic of a CSV matrix")
    p.add_argument("--stat", choices=STATISTICS, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--f", default="constant")
    p.add_argument("--g", default="constant")
    p.set_defaults(func=cmd_test)

    for name, fn in (("qq", cmd_qq), ("power", cmd_power), ("rate", cmd_rate)):
        p = sub.add_parser(name, help=f"run a {name} experiment from a JSON config")
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--run-name", dest="run_name")
        p.add_argument("--workers", type=int)
        p.add_argument("--seed", type=int)
        p.set_defaults(func=fn)

    p = sub.add_parser("verify", help="run the invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
