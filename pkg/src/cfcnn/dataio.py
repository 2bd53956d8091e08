"""Plain-text dataset and tangent files, plus a seeded toy dataset.

Dataset file::

    cfcnn-data n l m N count
    <n*l*m input scalars, slice-major>
    <N target scalars>
    ...                                  (two lines per sample)

Tangent file::

    cfcnn-tangents n l m N count
    <sample index, 0-based>
    <n*l*m direction scalars>
    <N target scalars>
    ...                                  (three lines per record)

An index may appear several times; its records accumulate.  An empty
tangent file is valid and means no tangent targets.  Scalars are written
with ``repr`` so values survive a write/read cycle exactly.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .linalg import feature_stack
from .training import Sample, TangentTarget

DATA_MAGIC = "cfcnn-data"
TANGENT_MAGIC = "cfcnn-tangents"


class DataFormatError(ValueError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def _lines(path):
    with open(path) as fh:
        return fh.read().splitlines()


def _floats(path, lineno, line, count, what):
    try:
        vals = [float(tok) for tok in line.split()]
    except ValueError as exc:
        raise DataFormatError(path, lineno, f"bad number in {what}: {exc}") from None
    if len(vals) != count:
        raise DataFormatError(path, lineno, f"{what} has {len(vals)} values, expected {count}")
    return vals


def _header(path, lines, magic):
    if not lines:
        raise DataFormatError(path, 1, f"missing '{magic}' header")
    toks = lines[0].split()
    if len(toks) != 6 or toks[0] != magic:
        raise DataFormatError(path, 1, f"expected header '{magic} n l m N count'")
    try:
        n, l, m, N, count = (int(t) for t in toks[1:])
    except ValueError:
        raise DataFormatError(path, 1, "header dimensions must be integers") from None
    if min(n, l, m, N) < 1 or count < 0:
        raise DataFormatError(path, 1, "header dimensions must be positive")
    return n, l, m, N, count


def _record_lines(path, lines, start, per_record, count):
    body = lines[start:]
    # tolerate trailing blank lines only
    while body and not body[-1].strip():
        body.pop()
    need = per_record * count
    if len(body) < need:
        raise DataFormatError(path, start + len(body) + 1, f"file ends early: expected {need} data lines")
    if len(body) > need:
        raise DataFormatError(path, start + need + 1, f"unexpected extra line after {count} records")
    return body


def load_dataset(path):
    """Read a dataset file into a list of :class:`Sample` (no tangents attached)."""
    lines = _lines(path)
    n, l, m, N, count = _header(path, lines, DATA_MAGIC)
    body = _record_lines(path, lines, 1, 2, count)
    samples = []
    for s in range(count):
        lx, ly = 2 + 2 * s, 3 + 2 * s
        x = _floats(path, lx, body[2 * s], n * l * m, "input")
        y = _floats(path, ly, body[2 * s + 1], N, "target")
        samples.append(Sample(feature_stack(x, n, l, m), np.array(y)))
    return samples


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def write_dataset(path, samples):
    x0 = samples[0].x
    m, n, l = x0.shape
    N = samples[0].y.size
    with open(path, "w") as fh:
        fh.write(f"{DATA_MAGIC} {n} {l} {m} {N} {len(samples)}\n")
        for s in samples:
            fh.write(_fmt(s.x) + "\n")
            fh.write(_fmt(s.y) + "\n")


def load_tangents(path, sample_count=None):
    """Read a tangent file into ``{sample_index: [TangentTarget, ...]}``."""
    lines = _lines(path)
    if not any(line.strip() for line in lines):
        return {}
    n, l, m, N, count = _header(path, lines, TANGENT_MAGIC)
    body = _record_lines(path, lines, 1, 3, count)
    out = defaultdict(list)
    for rec in range(count):
        li = 2 + 3 * rec
        try:
            idx = int(body[3 * rec].strip())
        except ValueError:
            raise DataFormatError(path, li, "record must start with an integer sample index") from None
        if idx < 0 or (sample_count is not None and idx >= sample_count):
            raise DataFormatError(path, li, f"sample index {idx} out of range")
        v = _floats(path, li + 1, body[3 * rec + 1], n * l * m, "tangent direction")
        beta = _floats(path, li + 2, body[3 * rec + 2], N, "tangent target")
        out[idx].append(TangentTarget(feature_stack(v, n, l, m), np.array(beta)))
    return dict(out)


def write_tangents(path, tangents):
    records = [(i, tg) for i in sorted(tangents) for tg in tangents[i]]
    with open(path, "w") as fh:
        if not records:
            return
        m, n, l = records[0][1].v.shape
        N = np.size(records[0][1].beta)
        fh.write(f"{TANGENT_MAGIC} {n} {l} {m} {N} {len(records)}\n")
        for i, tg in records:
            fh.write(f"{i}\n{_fmt(tg.v)}\n{_fmt(tg.beta)}\n")


def attach_tangents(samples, tangents):
    return [
        Sample(s.x, s.y, tuple(s.tangents) + tuple(tangents.get(i, ()))) for i, s in enumerate(samples)
    ]


def toy_blobs(count=40, rows=6, cols=6, seed=0, noise=0.3):
    """Two classes of noisy images around two seeded random templates.

    Labels alternate between the classes; targets are one-hot.
    """
    rng = np.random.default_rng(seed)
    templates = rng.choice([-1.0, 1.0], size=(2, 1, rows, cols))
    samples = []
    for i in range(count):
        c = i % 2
        x = templates[c] + noise * rng.standard_normal((1, rows, cols))
        y = np.zeros(2)
        y[c] = 1.0
        samples.append(Sample(x, y))
    return samples


def translation_tangent(x):
    """Central-difference generator of a horizontal shift, zero at the borders."""
    v = np.zeros_like(x)
    v[:, :, 1:-1] = 0.5 * (x[:, :, 2:] - x[:, :, :-2])
    return v
