"""Command line driver: ``train``, ``grad-check``, ``adjoint-check`` and ``toy``.

Exit codes: 0 success, 1 a check failed, 2 usage, configuration or I/O
error.  Errors go to stderr as one line starting with ``error:``.

Config format (``#`` starts a comment)::

    eta = 0.01
    lambda = 0
    batch_size = 40
    iterations = 50
    seed = 1
    init_scale = 0.5
    classes = 2
    data = toy.txt
    tangent = toy_tangents.txt

    [layer]
    rows = 6
    cols = 6
    depth = 1
    p = 3
    q = 3
    stride = 1
    pool = 2
    out_depth = 2
    nonlinearity = tanh
    mixing = 1; 1          # optional, one vector per output channel

    [layer]                # the last layer is the fully connected output
    out_depth = 2
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import dataio, training, verify
from .linalg import DimensionError, GeometryError
from .network import ConfigError, NetworkSpec, make_layer
from .operators import CONFIG_NONLINEARITIES
from .training import Sample, TangentTarget, TrainConfig


class ConfigParseError(ValueError):
    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}" if lineno else msg)
        self.lineno = lineno


@dataclass(frozen=True)
class LayerConfig:
    rows: Optional[int] = None
    cols: Optional[int] = None
    depth: Optional[int] = None
    p: Optional[int] = None
    q: Optional[int] = None
    stride: int = 1
    pool: int = 1
    out_depth: Optional[int] = None
    nonlinearity: str = "tanh"
    mixing: Optional[tuple] = None


@dataclass(frozen=True)
class RunConfig:
    layers: tuple
    classes: int
    eta: float = 0.01
    lam: float = 0.0
    batch_size: int = 1
    iterations: int = 1
    seed: int = 0
    init_scale: float = 0.5
    data: Optional[str] = None
    tangent: Optional[str] = None
    base_dir: str = field(default=".", compare=False)

    @property
    def train(self):
        return TrainConfig(self.eta, self.lam, self.batch_size, self.iterations, self.seed, self.init_scale)

    def resolve(self, path):
        return path if path is None or os.path.isabs(path) else os.path.join(self.base_dir, path)

    def build_network(self):
        return build_network(self.layers, self.classes)


_TOP_KEYS = {
    "eta": float, "lambda": float, "batch_size": int, "iterations": int, "seed": int,
    "init_scale": float, "classes": int, "data": str, "tangent": str,
}
_LAYER_KEYS = {
    "rows": int, "cols": int, "depth": int, "p": int, "q": int, "stride": int,
    "pool": int, "out_depth": int, "nonlinearity": str, "mixing": str,
}


def _convert(kind, raw, lineno, key):
    if kind is str:
        return raw
    try:
        return kind(raw)
    except ValueError:
        raise ConfigParseError(lineno, f"{key} must be {kind.__name__}, got {raw!r}") from None


def _parse_mixing(raw, lineno):
    try:
        rows = tuple(tuple(float(t) for t in part.split()) for part in raw.split(";"))
    except ValueError:
        raise ConfigParseError(lineno, f"bad mixing vectors {raw!r}") from None
    if not rows or any(not r for r in rows) or len({len(r) for r in rows}) != 1:
        raise ConfigParseError(lineno, "mixing needs equal-length vectors separated by ';'")
    return rows


def build_network(layers, classes):
    """Turn layer descriptions into a validated :class:`NetworkSpec`.

    Input dims of later layers default to the previous layer's output; the
    last layer's filter defaults to its whole input.
    """
    specs = []
    prev = None
    for t, lc in enumerate(layers, 1):
        last = t == len(layers)
        rows, cols, depth = lc.rows, lc.cols, lc.depth
        if prev is not None:
            pm, pn, pl = prev.out_shape
            if (rows, cols, depth) != (None, None, None) and (rows, cols, depth) != (pn, pl, pm):
                got = f"{rows}x{cols}x{depth}"
                raise ConfigError(f"layer {t - 1} output {pn}x{pl}x{pm} does not match layer {t} input {got}")
            rows, cols, depth = pn, pl, pm
        if None in (rows, cols, depth):
            raise ConfigError(f"layer {t}: rows, cols and depth are required")
        if lc.nonlinearity not in CONFIG_NONLINEARITIES:
            raise ConfigError(f"layer {t}: unknown nonlinearity {lc.nonlinearity!r}")
        p = lc.p if lc.p is not None else (rows if last else None)
        q = lc.q if lc.q is not None else (cols if last else None)
        out_depth = lc.out_depth if lc.out_depth is not None else (classes if last else None)
        if None in (p, q, out_depth):
            raise ConfigError(f"layer {t}: p, q and out_depth are required")
        try:
            spec = make_layer(rows, cols, depth, p, q, out_depth, lc.stride, lc.pool,
                              lc.nonlinearity, None if lc.mixing is None else np.array(lc.mixing), final=last)
        except (GeometryError, DimensionError) as exc:
            raise ConfigError(f"layer {t}: {exc}") from None
        specs.append(spec)
        prev = spec
    if not specs:
        raise ConfigError("config defines no [layer] sections")
    return NetworkSpec(specs, classes)


def parse_config(text, base_dir="."):
    top = {}
    layers = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[layer]":
                raise ConfigParseError(lineno, f"unknown section {line}")
            current = {}
            layers.append(current)
            continue
        if "=" not in line:
            raise ConfigParseError(lineno, f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        table, target = (_TOP_KEYS, top) if current is None else (_LAYER_KEYS, current)
        if key not in table:
            where = "top level" if current is None else "[layer]"
            raise ConfigParseError(lineno, f"unknown key {key!r} at {where}")
        if key in target:
            raise ConfigParseError(lineno, f"duplicate key {key!r}")
        if key == "mixing":
            target[key] = _parse_mixing(value, lineno)
        elif key == "nonlinearity":
            target[key] = value.lower()
        else:
            target[key] = _convert(table[key], value, lineno, key)

    layer_cfgs = tuple(LayerConfig(**d) for d in layers)
    classes = top.pop("classes", None)
    if classes is None:
        if not layer_cfgs or layer_cfgs[-1].out_depth is None:
            raise ConfigParseError(0, "set 'classes' or the last layer's out_depth")
        classes = layer_cfgs[-1].out_depth
    if "lambda" in top:
        top["lam"] = top.pop("lambda")
    cfg = RunConfig(layers=layer_cfgs, classes=classes, base_dir=base_dir, **top)
    cfg.build_network()
    cfg.train
    return cfg


def serialize_config(cfg):
    out = [
        f"eta = {cfg.eta!r}",
        f"lambda = {cfg.lam!r}",
        f"batch_size = {cfg.batch_size}",
        f"iterations = {cfg.iterations}",
        f"seed = {cfg.seed}",
        f"init_scale = {cfg.init_scale!r}",
        f"classes = {cfg.classes}",
    ]
    if cfg.data is not None:
        out.append(f"data = {cfg.data}")
    if cfg.tangent is not None:
        out.append(f"tangent = {cfg.tangent}")
    net = cfg.build_network()
    for lc, ls in zip(cfg.layers, net.layers):
        g = ls.geometry
        out += [
            "",
            "[layer]",
            f"rows = {g.in_rows}",
            f"cols = {g.in_cols}",
            f"depth = {ls.in_depth}",
            f"p = {g.p}",
            f"q = {g.q}",
            f"stride = {g.stride}",
            f"pool = {ls.pool_r}",
            f"out_depth = {ls.out_depth}",
            f"nonlinearity = {ls.nl.kind}",
        ]
        if lc.mixing is not None:
            out.append("mixing = " + "; ".join(" ".join(repr(v) for v in row) for row in lc.mixing))
    return "\n".join(out) + "\n"


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def _override(cfg, args):
    changes = {}
    for flag, name in (("eta", "eta"), ("lam", "lam"), ("seed", "seed"), ("iterations", "iterations")):
        val = getattr(args, flag, None)
        if val is not None:
            changes[name] = val
    return replace(cfg, **changes) if changes else cfg


def _load_samples(cfg, spec):
    if cfg.data is None:
        raise ConfigError("config has no 'data' file")
    samples = dataio.load_dataset(cfg.resolve(cfg.data))
    if cfg.tangent is not None:
        tangents = dataio.load_tangents(cfg.resolve(cfg.tangent), len(samples))
        samples = dataio.attach_tangents(samples, tangents)
    if samples and samples[0].x.shape != spec.in_shape:
        raise ConfigError(f"data inputs have shape {samples[0].x.shape}, network expects {spec.in_shape}")
    if samples and samples[0].y.size != spec.class_count:
        raise ConfigError(f"data targets have {samples[0].y.size} entries, network has {spec.class_count} classes")
    return samples


# --- commands ------------------------------------------------------------------


def cmd_train(args):
    cfg = _override(load_config(args.config), args)
    spec = cfg.build_network()
    train_cfg = cfg.train
    training.check_second_order(spec, train_cfg.lam)
    samples = _load_samples(cfg, spec)
    result = training.train(spec, samples, train_cfg, mode=args.mode)
    lines = [f"{it} {j!r} {r!r} {c!r}\n" for it, j, r, c in result.curve]
    if args.out:
        with open(args.out, "w") as fh:
            fh.writelines(lines)
    else:
        sys.stdout.writelines(lines)
    if args.params_out:
        write_params(args.params_out, result.state)
    return 0


def write_params(path, state):
    with open(path, "w") as fh:
        fh.write(f"cfcnn-params {len(state.params)}\n")
        for lp in state.params:
            fh.write(" ".join(repr(float(v)) for v in lp.w.ravel()) + "\n")
            fh.write(" ".join(repr(float(v)) for v in lp.b.ravel()) + "\n")


def cmd_grad_check(args):
    cfg = _override(load_config(args.config), args)
    spec = cfg.build_network()
    rng = np.random.default_rng(cfg.seed)
    if cfg.data is not None:
        sample = _load_samples(cfg, spec)[0]
    else:
        sample = Sample(rng.standard_normal(spec.in_shape), rng.standard_normal(spec.class_count))
    if sample.tangents:
        training.check_second_order(spec, 1.0)
    state = verify.random_state(rng, spec)
    ok = True

    analytic = training.grads_first_order(spec, state, sample)
    numeric = verify.fd_gradient(lambda s: training.loss_J(spec, s, sample), state, args.h)
    rep = verify.compare_gradients(analytic, numeric, args.tol, 1e-8)
    for line in rep.lines("J"):
        print(line)
    ok &= rep.passed
    if sample.tangents:
        analytic = training.grads_higher_order(spec, state, sample)
        numeric = verify.fd_gradient(lambda s: training.loss_R(spec, s, sample), state, args.h)
        rep = verify.compare_gradients(analytic, numeric, args.tol_r, 1e-7)
        for line in rep.lines("R"):
            print(line)
        ok &= rep.passed
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_adjoint_check(args):
    reports = verify.adjoint_suite(args.dims, args.trials, args.tol, args.dense_tol, args.seed)
    for rep in reports:
        print(rep.line())
    return 0 if all(r.passed for r in reports) else 1


def cmd_toy(args):
    os.makedirs(args.outdir, exist_ok=True)
    samples = dataio.toy_blobs(args.count, args.size, args.size, args.seed)
    dataio.write_dataset(os.path.join(args.outdir, "toy.txt"), samples)
    tangents = {i: [TangentTarget(dataio.translation_tangent(s.x), np.zeros(2))] for i, s in enumerate(samples)}
    dataio.write_tangents(os.path.join(args.outdir, "toy_tangents.txt"), tangents)
    n = args.size
    conv_out = n - 2
    pool = 2 if conv_out % 2 == 0 else 1
    with open(os.path.join(args.outdir, "toy.cfg"), "w") as fh:
        fh.write(
            f"eta = 0.01\nlambda = 0\nbatch_size = {args.count}\niterations = 50\n"
            f"seed = {args.seed}\ninit_scale = 0.5\nclasses = 2\n"
            "data = toy.txt\ntangent = toy_tangents.txt\n\n"
            f"[layer]\nrows = {n}\ncols = {n}\ndepth = 1\np = 3\nq = 3\nstride = 1\n"
            f"pool = {pool}\nout_depth = 2\nnonlinearity = tanh\n\n"
            "[layer]\nout_depth = 2\nnonlinearity = tanh\n"
        )
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: {message}\n")


def build_parser():
    parser = _Parser(prog="cfcnn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="run gradient descent and write the loss curve")
    p.add_argument("config")
    p.add_argument("--mode", choices=("single", "batch"), default="batch")
    p.add_argument("--out", help="curve file (default: stdout)")
    p.add_argument("--params-out", help="write final parameters here")
    p.add_argument("--eta", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grad-check", help="compare analytic gradients with finite differences")
    p.add_argument("config")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--tol-r", type=float, default=1e-5)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("adjoint-check", help="dot-product and dense checks of every adjoint")
    p.add_argument("--dims", type=int, default=6)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--dense-tol", type=float, default=1e-12)
    p.add_argument("--seed", type=int, default=verify.DEFAULT_SEED)
    p.set_defaults(func=cmd_adjoint_check)

    p = sub.add_parser("toy", help="write the two-class toy dataset, tangents and a config")
    p.add_argument("outdir")
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--size", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toy)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigParseError, dataio.DataFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
