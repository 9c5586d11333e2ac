"""Hot traversal kernels over the flattened circuit arena.

The upward (forward) and downward (adjoint) sweeps are the only parts of
inference that cannot be vectorized across nodes, so they exist twice: as
plain loops compiled with numba's @njit, and as a pure-numpy fallback that
loops over nodes but vectorizes over the batch. The backend is chosen at
import time from the CREDFUSE_BACKEND environment variable ("numba" or
"numpy", default "numba" when importable) and can be switched at runtime
with set_backend() — the benchmark uses that to compare the two paths.

Array layout (CSR-style):
  kind[n]       0=sum, 1=product, 2=leaf
  child_off[n]  slot range of node n is child_off[n]:child_off[n+1]
  child_ids[t]  arena id of the child in slot t
  child_logw[t] log mixture weight for slots of sum nodes (0 elsewhere)
  vals[b, n, w] per-example, per-node log-values; w indexes the target class
                in vector mode and is a singleton in scalar mode
"""

import math
import os

import numpy as np

KIND_SUM = 0
KIND_PRODUCT = 1
KIND_LEAF = 2

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    HAS_NUMBA = False

_NEG_INF = -math.inf


def _forward_loops(kind, child_off, child_ids, child_logw, vals):
    B, N, W = vals.shape
    for n in range(N):
        k = kind[n]
        if k == KIND_LEAF:
            continue
        lo = child_off[n]
        hi = child_off[n + 1]
        if k == KIND_PRODUCT:
            for b in range(B):
                for w in range(W):
                    acc = 0.0
                    for t in range(lo, hi):
                        acc += vals[b, child_ids[t], w]
                    vals[b, n, w] = acc
        else:
            for b in range(B):
                for w in range(W):
                    m = _NEG_INF
                    for t in range(lo, hi):
                        v = child_logw[t] + vals[b, child_ids[t], w]
                        if v > m:
                            m = v
                    if m == _NEG_INF:
                        vals[b, n, w] = _NEG_INF
                    else:
                        acc = 0.0
                        for t in range(lo, hi):
                            acc += math.exp(child_logw[t] + vals[b, child_ids[t], w] - m)
                        vals[b, n, w] = m + math.log(acc)
    return vals


def _adjoint_loops(kind, child_off, child_ids, child_logw, vals, adj):
    # adj must arrive initialized with the upstream cotangent at the root
    # and zeros elsewhere; children carry smaller arena ids than parents,
    # so a reverse sweep finalizes each node before it is read.
    B, N, W = vals.shape
    for n in range(N - 1, -1, -1):
        k = kind[n]
        if k == KIND_LEAF:
            continue
        lo = child_off[n]
        hi = child_off[n + 1]
        for b in range(B):
            for w in range(W):
                a = adj[b, n, w]
                if a == 0.0:
                    continue
                if k == KIND_PRODUCT:
                    for t in range(lo, hi):
                        adj[b, child_ids[t], w] += a
                else:
                    pv = vals[b, n, w]
                    if not (pv > _NEG_INF):  # -inf or nan: no mass flows back
                        continue
                    for t in range(lo, hi):
                        cv = vals[b, child_ids[t], w]
                        if cv == _NEG_INF:
                            continue
                        adj[b, child_ids[t], w] += a * math.exp(child_logw[t] + cv - pv)
    return adj


if HAS_NUMBA:
    _forward_njit = numba.njit(cache=True)(_forward_loops)
    _adjoint_njit = numba.njit(cache=True)(_adjoint_loops)


def _forward_numpy(kind, child_off, child_ids, child_logw, vals):
    N = vals.shape[1]
    for n in range(N):
        k = kind[n]
        if k == KIND_LEAF:
            continue
        lo = child_off[n]
        hi = child_off[n + 1]
        ch = child_ids[lo:hi]
        if k == KIND_PRODUCT:
            vals[:, n, :] = vals[:, ch, :].sum(axis=1)
        else:
            z = vals[:, ch, :] + child_logw[lo:hi][None, :, None]
            m = z.max(axis=1)
            finite = np.isfinite(m)
            with np.errstate(invalid="ignore", divide="ignore"):
                s = np.exp(z - m[:, None, :]).sum(axis=1)
                vals[:, n, :] = np.where(finite, m + np.log(s), _NEG_INF)
    return vals


def _adjoint_numpy(kind, child_off, child_ids, child_logw, vals, adj):
    N = vals.shape[1]
    for n in range(N - 1, -1, -1):
        k = kind[n]
        if k == KIND_LEAF:
            continue
        lo = child_off[n]
        hi = child_off[n + 1]
        ch = child_ids[lo:hi]
        a = adj[:, n, :]
        if not a.any():
            continue
        if k == KIND_PRODUCT:
            contrib = np.broadcast_to(a[:, None, :], (a.shape[0], ch.size, a.shape[1]))
        else:
            z = child_logw[lo:hi][None, :, None] + vals[:, ch, :] - vals[:, n, None, :]
            with np.errstate(invalid="ignore"):
                r = np.where(np.isfinite(z), np.exp(np.where(np.isfinite(z), z, 0.0)), 0.0)
            contrib = a[:, None, :] * r
        # add.at handles repeated child ids in the slot list
        np.add.at(adj, (slice(None), ch), contrib)
    return adj


def _default_backend():
    name = os.environ.get("CREDFUSE_BACKEND", "").strip().lower()
    if name in ("numpy", "numba"):
        return name
    return "numba" if HAS_NUMBA else "numpy"


_BACKEND = _default_backend()
if _BACKEND == "numba" and not HAS_NUMBA:
    _BACKEND = "numpy"


def set_backend(name):
    """Select "numba" or "numpy" traversal kernels at runtime."""
    global _BACKEND
    if name not in ("numpy", "numba"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _BACKEND = name


def active_backend():
    return _BACKEND


def forward(kind, child_off, child_ids, child_logw, vals):
    """Fill log-values of internal nodes in place; leaf rows must be set."""
    if _BACKEND == "numba":
        return _forward_njit(kind, child_off, child_ids, child_logw, vals)
    return _forward_numpy(kind, child_off, child_ids, child_logw, vals)


def adjoint(kind, child_off, child_ids, child_logw, vals, adj):
    """Propagate d(root log-value)/d(node log-value) down the arena in place."""
    if _BACKEND == "numba":
        return _adjoint_njit(kind, child_off, child_ids, child_logw, vals, adj)
    return _adjoint_numpy(kind, child_off, child_ids, child_logw, vals, adj)
