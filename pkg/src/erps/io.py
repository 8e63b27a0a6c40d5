"""File formats: state JSON and the CSV tables for samples, weak values and trajectories."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidGrid, InvalidState
from .phase_space import ErpsSamples
from .state import Grid, GridState
from .weak import WeakValueField

FLOAT_FMT = "%.17g"


def state_to_dict(state: GridState):
    g = state.grid
    flat = state.psi.reshape(-1)
    return {
        "dims": g.dims,
        "q_min": [float(x) for x in g.q_min],
        "q_max": [float(x) for x in g.q_max],
        "n_points": [int(n) for n in g.n_points],
        "hbar": float(state.hbar),
        "psi": np.column_stack([flat.real, flat.imag]).tolist(),
    }


def state_from_dict(doc, renormalize=False):
    try:
        dims = int(doc["dims"])
        grid = Grid(tuple(doc["q_min"]), tuple(doc["q_max"]), tuple(doc["n_points"]))
        hbar = float(doc["hbar"])
        pairs = np.asarray(doc["psi"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidState(f"malformed state document: {exc}") from exc
    if grid.dims != dims:
        raise InvalidGrid(f"dims={dims} does not match the grid bounds")
    if pairs.shape != (int(np.prod(grid.shape)), 2):
        raise InvalidState(f"psi must hold {int(np.prod(grid.shape))} [re, im] pairs")
    psi = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(grid.shape)
    if renormalize:
        return GridState.from_unnormalized(grid, hbar, psi)
    return GridState(grid, hbar, psi)


def write_state(path, state: GridState):
    # json writes floats with repr, which round-trips doubles exactly
    Path(path).write_text(json.dumps(state_to_dict(state)))


def read_state(path, renormalize=False):
    return state_from_dict(json.loads(Path(path).read_text()), renormalize)


def _write_table(path, header, columns):
    table = np.column_stack(columns) if columns else np.empty((0, len(header)))
    np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")


def _read_table(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise InvalidState(f"{path}: row width does not match header")
    return header, data.reshape(-1, len(header))


def write_samples(path, samples: ErpsSamples):
    n = len(samples)
    q = samples.q.reshape(n, -1)
    p = samples.p.reshape(n, -1)
    xi = samples.xi.reshape(n, -1)
    dims = q.shape[1]
    header = ["q", "p"] if dims == 1 else ["q1", "q2", "p1", "p2"]
    header += ["xi"] if xi.shape[1] == 1 else [f"xi{k + 1}" for k in range(xi.shape[1])]
    _write_table(path, header, [*q.T, *p.T, *xi.T])


def read_samples(path):
    header, data = _read_table(path)
    if header[:2] == ["q", "p"]:
        dims = 1
    elif header[:4] == ["q1", "q2", "p1", "p2"]:
        dims = 2
    else:
        raise InvalidState(f"{path}: unexpected samples header {header}")
    xi = data[:, 2 * dims:]
    return ErpsSamples(data[:, :dims], data[:, dims:2 * dims], xi[:, 0] if xi.shape[1] == 1 else xi)


def write_weak_values(path, wv: WeakValueField, stderr_re=None, stderr_im=None, count=None):
    g = wv.grid
    if g.dims == 1:
        header = ["q", "re_pw", "im_pw"]
        cols = [g.q, wv.re[0], wv.im[0]]
    else:
        header = ["q1", "q2", "re_pw1", "im_pw1", "re_pw2", "im_pw2"]
        Q1, Q2 = g.mesh
        cols = [Q1.ravel(), Q2.ravel(), wv.re[0].ravel(), wv.im[0].ravel(), wv.re[1].ravel(), wv.im[1].ravel()]
    if stderr_re is not None:
        header += ["stderr_re", "stderr_im", "count"]
        cols += [np.ravel(stderr_re), np.ravel(stderr_im), np.ravel(count)]
    _write_table(path, header, cols)


def _uniform_axis(values, name):
    axis = np.unique(values)
    if axis.size > 1:
        step = np.diff(axis)
        if not np.allclose(step, step[0], rtol=1e-8, atol=0.0):
            raise InvalidGrid(f"{name} values are not uniformly spaced")
    return axis


def read_weak_values(path, hbar=1.0, grid: Grid | None = None):
    """Weak-value field and optional ``(stderr_re, stderr_im, count)``; NaN rows are masked.

    ``grid`` (when given and compatible) replaces the grid inferred from the
    ``q`` column, which avoids last-digit differences in the bounds.
    """
    header, data = _read_table(path)
    extra = header[-3:] == ["stderr_re", "stderr_im", "count"]
    base = header[:-3] if extra else header
    if base == ["q", "re_pw", "im_pw"]:
        q = data[:, 0]
        _uniform_axis(q, "q")
        inferred = Grid.line(q[0], q[-1], q.size)
        pw = (data[:, 1] + 1j * data[:, 2])[None]
    elif base == ["q1", "q2", "re_pw1", "im_pw1", "re_pw2", "im_pw2"]:
        a1 = _uniform_axis(data[:, 0], "q1")
        a2 = _uniform_axis(data[:, 1], "q2")
        inferred = Grid((a1[0], a2[0]), (a1[-1], a2[-1]), (a1.size, a2.size))
        shape = inferred.shape
        pw = np.stack([(data[:, 2] + 1j * data[:, 3]).reshape(shape), (data[:, 4] + 1j * data[:, 5]).reshape(shape)])
    else:
        raise InvalidState(f"{path}: unexpected weak-value header {header}")
    if grid is not None:
        if grid.shape != inferred.shape or not all(np.allclose(a, b, rtol=0, atol=1e-9 * (1 + np.abs(b).max()))
                                                   for a, b in zip(grid.axes, inferred.axes)):
            raise InvalidGrid("weak-value file does not match the supplied grid")
        inferred = grid
    mask = ~np.all(np.isfinite(pw), axis=0)
    wv = WeakValueField(inferred, hbar, pw, mask)
    if not extra:
        return wv, None
    shape = inferred.shape
    errs = tuple(data[:, k].reshape(shape) for k in (-3, -2, -1))
    return wv, errs


def write_trajectories(path, trajectories):
    if not trajectories:
        raise InvalidState("no trajectories to write")
    times = max((tr.times for tr in trajectories), key=len)
    header = ["t"] + [f"q_{i + 1}" for i in range(len(trajectories))]
    # truncated trajectories are padded with NaN in the wide format
    cols = [np.concatenate([tr.positions, np.full(times.size - tr.positions.size, np.nan)]) for tr in trajectories]
    _write_table(path, header, [times] + cols)


def write_marginal(path, p_grid, density):
    _write_table(path, ["p", "density"], [np.asarray(p_grid), np.asarray(density)])


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
