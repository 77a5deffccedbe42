"""Plain-text field snapshots (format "SPFIELD v1").

Line 1: ``SPFIELD v1``
Line 2: ``N=<int> cells=<int> L=<real> dt=<real> steps=<int> p=<real> m=<real> eq=<plap|dnl>``
Then one line per time slice: whitespace-separated decimal values in
row-major spatial order, 17 significant digits (lossless for doubles).

Boundary kind and time origin are not part of the format; reading yields a
periodic grid at origin zero.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .core_model import (DOUBLY_NONLINEAR, P_LAPLACIAN, Grid, ProblemParams,
                         SpaceTimeField)
from .errors import FormatError

_VERSION_LINE = "SPFIELD v1"
_SUPPORTED = (_VERSION_LINE,)
_EQ_CODE = {P_LAPLACIAN: "plap", DOUBLY_NONLINEAR: "dnl"}
_EQ_DECODE = {v: k for k, v in _EQ_CODE.items()}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(field: SpaceTimeField, path) -> None:
    """Write atomically (temp file + rename)."""
    grid, params = field.grid, field.params
    header = (f"N={grid.dim_n} cells={grid.cells_per_axis} "
              f"L={_fmt(grid.domain_half_width)} dt={_fmt(grid.dt)} "
              f"steps={grid.n_steps} p={_fmt(params.p)} m={_fmt(params.m)} "
              f"eq={_EQ_CODE[params.equation]}")
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               prefix=".spfield-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(_VERSION_LINE + "\n")
            fh.write(header + "\n")
            for k in range(field.n_slices):
                fh.write(" ".join(_fmt(v) for v in field.values[k].ravel()) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_header(line: str) -> dict:
    expected = ("N", "cells", "L", "dt", "steps", "p", "m", "eq")
    tokens = line.split()
    if len(tokens) != len(expected):
        raise FormatError(f"header needs {len(expected)} fields, got {len(tokens)}: {line!r}")
    out = {}
    for token, key in zip(tokens, expected):
        name, _, value = token.partition("=")
        if name != key or not value:
            raise FormatError(f"bad header token {token!r} (expected {key}=...)")
        out[key] = value
    return out


def read_snapshot(path) -> SpaceTimeField:
    with open(path, "r") as fh:
        version = fh.readline().rstrip("\n")
        if version not in _SUPPORTED:
            raise FormatError(
                f"unsupported version line {version!r}; supported: {', '.join(_SUPPORTED)}")
        header_line = fh.readline().rstrip("\n")
        if not header_line:
            raise FormatError("truncated file: missing header line")
        head = _parse_header(header_line)
        try:
            dim_n = int(head["N"])
            cells = int(head["cells"])
            L = float(head["L"])
            dt = float(head["dt"])
            steps = int(head["steps"])
            p = float(head["p"])
            m = float(head["m"])
        except ValueError as exc:
            raise FormatError(f"non-numeric header value: {exc}") from exc
        if head["eq"] not in _EQ_DECODE:
            raise FormatError(f"unknown equation code {head['eq']!r} (plap|dnl)")
        equation = _EQ_DECODE[head["eq"]]

        per_slice = cells ** dim_n
        shape = (cells,) * dim_n
        slices = []
        for k in range(steps + 1):
            line = fh.readline()
            if not line:
                raise FormatError(f"truncated file: expected {steps + 1} slices, got {k}")
            row = np.fromstring(line, dtype=float, sep=" ")
            if row.size != per_slice:
                raise FormatError(
                    f"slice {k}: expected {per_slice} values, got {row.size}")
            slices.append(row.reshape(shape))

    grid = Grid(dim_n=dim_n, cells_per_axis=cells, domain_half_width=L,
                dt=dt, n_steps=steps)
    params = ProblemParams(dim_n=dim_n, p=p, equation=equation, m=m)
    return SpaceTimeField(grid, np.stack(slices), params, label=os.fspath(path))
