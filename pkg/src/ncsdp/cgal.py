"""Conditional gradient augmented Lagrangian solver for block-diagonal SDPs.

Solves min <C, X> over block psd matrices with tr(X) = a and A svec(X) = b.
Each iteration linearizes the augmented Lagrangian, finds the smallest
eigenpair of the block-diagonal gradient, and moves toward the rank-one
atom a vv* placed in the block that owns the smallest eigenvalue; the trace
constraint is therefore maintained exactly by construction, and every
iterate is a convex combination of psd matrices.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.linalg import eigh_tridiagonal

from .standard_form import SQRT2, StandardSdp


class CgalError(Exception):
    """Raised when an iterate violates a maintained invariant."""


@dataclass
class CgalConfig:
    eps: float = 1e-4
    max_iters: int = 200_000
    beta0: float = 1.0
    dual_cap: float = 1e9
    window: int = 50
    seed: int = 0
    dense_cutoff: int = 64
    lanczos_dim: int = 100
    trace_tol: float = 1e-9
    check_psd: bool = False  # per-iteration psd audit; costs an eigh per block
    track_residuals: bool = False  # record the relative residual at every iteration


@dataclass
class SolveReport:
    objective: float
    residual: float
    iterations: int
    converged: bool
    x: np.ndarray
    z: np.ndarray
    runtime: float
    min_iterate_eig: float  # most negative block eigenvalue seen (0 unless audited)
    residual_history: np.ndarray | None = None  # per-iteration relative residuals


def _lanczos_smallest(
    matvec,
    size: int,
    v0: np.ndarray,
    tol: float,
    max_restarts: int,
    m: int,
) -> tuple[float, np.ndarray]:
    v = v0
    theta = 0.0
    y = v0
    for _ in range(max_restarts):
        q = v / np.linalg.norm(v)
        big_q = np.zeros((size, m))
        alpha = np.zeros(m)
        beta = np.zeros(m)
        big_q[:, 0] = q
        k = m
        for j in range(m):
            w = matvec(big_q[:, j])
            alpha[j] = float(big_q[:, j] @ w)
            w = w - alpha[j] * big_q[:, j]
            if j > 0:
                w = w - beta[j - 1] * big_q[:, j - 1]
            # full reorthogonalization keeps the basis honest at this scale
            w = w - big_q[:, : j + 1] @ (big_q[:, : j + 1].T @ w)
            beta[j] = float(np.linalg.norm(w))
            if beta[j] <= 1e-13 * max(1.0, abs(alpha[j])):
                k = j + 1
                break
            if j + 1 < m:
                big_q[:, j + 1] = w / beta[j]
        theta_arr, s = eigh_tridiagonal(
            alpha[:k], beta[: k - 1], select="i", select_range=(0, 0)
        )
        theta = float(theta_arr[0])
        ritz = s[:, 0]
        y = big_q[:, :k] @ ritz
        y = y / np.linalg.norm(y)
        resid = abs(beta[k - 1] * ritz[-1])
        if resid <= tol * max(1.0, abs(theta)):
            return theta, y
        v = y
    return theta, y


def min_eigpair(
    a,
    size: int | None = None,
    tol: float = 1e-10,
    rng: Generator | None = None,
    dense_cutoff: int = 64,
    max_restarts: int = 16,
    lanczos_dim: int = 100,
) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of a symmetric matrix or matvec callable.

    Dense matrices at or under the cutoff go straight to eigh. Larger
    matrices and callables run restarted Lanczos with full
    reorthogonalization; convergence is declared when the residual bound
    |beta_m s_m| falls under tol * max(1, |theta|).
    """
    if isinstance(a, np.ndarray):
        size = a.shape[0]
        if size <= dense_cutoff:
            w, v = np.linalg.eigh(a)
            return float(w[0]), v[:, 0]
        matvec = a.__matmul__
    else:
        if size is None:
            raise ValueError("size is required for a matvec callable")
        matvec = a
    if size == 1:
        e1 = np.ones(1)
        return float(matvec(e1)[0]), e1
    if rng is None:
        rng = Generator(Philox(0x5EED))
    v0 = rng.standard_normal(size)
    v0 /= np.linalg.norm(v0)
    m = min(size, lanczos_dim)
    return _lanczos_smallest(matvec, size, v0, tol, max_restarts, m)


def _operator_norm(a_mat) -> float:
    """Largest singular value of a sparse matrix by deterministic power iteration.

    Used only to precondition the solver, so a few correct digits are enough;
    the start vector is fixed to keep solves reproducible.
    """
    m, n = a_mat.shape
    if m == 0 or n == 0:
        return 1.0
    at = a_mat.T.tocsr()
    v = np.ones(n) + 1e-3 * np.arange(n) / max(n - 1, 1)
    v /= np.linalg.norm(v)
    sig = 0.0
    for _ in range(200):
        u = a_mat @ v
        nu = float(np.linalg.norm(u))
        if nu == 0.0:
            return 1.0
        w = at @ (u / nu)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return max(nu, 1e-12)
        v = w / new
        if abs(new - sig) <= 1e-6 * max(1.0, new):
            return new
        sig = new
    return max(sig, 1e-12)


class _BlockView:
    """Scatter/gather between the svec vector and dense symmetric blocks."""

    def __init__(self, sizes: list[int], offsets: list[int]):
        self.sizes = sizes
        self.slices = [slice(offsets[i], offsets[i + 1]) for i in range(len(sizes))]
        self.iu = []
        self.ju = []
        self.scale = []
        self.diag_index = np.zeros(sum(s * (s + 1) // 2 for s in sizes), dtype=bool)
        for i, s in enumerate(sizes):
            iu, ju = np.triu_indices(s)
            self.iu.append(iu)
            self.ju.append(ju)
            sc = np.where(iu == ju, 1.0, SQRT2)
            self.scale.append(sc)
            base = offsets[i]
            self.diag_index[base + np.flatnonzero(iu == ju)] = True

    def matrix(self, x: np.ndarray, i: int) -> np.ndarray:
        s = self.sizes[i]
        m = np.zeros((s, s))
        vals = x[self.slices[i]] / self.scale[i]
        m[self.iu[i], self.ju[i]] = vals
        m[self.ju[i], self.iu[i]] = vals
        return m

    def add_outer(self, x: np.ndarray, i: int, v: np.ndarray, weight: float) -> None:
        x[self.slices[i]] += weight * self.scale[i] * v[self.iu[i]] * v[self.ju[i]]

    def trace(self, x: np.ndarray) -> float:
        return float(x[self.diag_index].sum())


def solve(sdp: StandardSdp, cfg: CgalConfig | None = None) -> SolveReport:
    """Run the solver until the feasibility and objective-plateau tests pass.

    The dynamics are run on a normalized copy of the data (objective divided
    by its norm, constraint operator by its largest singular value, trace
    budget 1) so that the penalty weight beta0 = 1 sits in the right regime
    regardless of instance scale; iterates, objective values, and residuals
    are kept and reported in original units throughout.

    Stops when ||A svec(X) - b|| / (1 + ||b||) <= eps and the objective has
    settled: the change over the trailing window must be at most
    eps (1 + |obj|), and so must its extrapolation to the remaining tail.
    The objective approaches its limit like C / t, so a drift of d over the
    last w iterations at iteration t projects to a further change of about
    d t / w; without that projection the plateau test fires while the value
    is still many multiples of eps away from its limit. The trace of every
    iterate is checked against the constant; psd is audited per block when
    check_psd is set (iterates are psd by construction, the audit guards
    the arithmetic).
    """
    cfg = cfg or CgalConfig()
    t0 = time.perf_counter()
    a = float(sdp.trace)
    sizes = sdp.block_sizes
    view = _BlockView(sizes, sdp.offsets)
    a_mat = sdp.a_mat
    at_mat = a_mat.T.tocsr()
    b = sdp.b
    c = sdp.c
    rng = Generator(Philox(cfg.seed))

    c_norm = float(np.linalg.norm(c)) or 1.0
    sigma = _operator_norm(a_mat)
    c_scaled = c / c_norm
    res_scale = sigma * a

    total = sum(sizes)
    x = np.zeros(sdp.dim)
    x[view.diag_index] = a / total
    z = np.zeros(a_mat.shape[0])
    ax = a_mat @ x
    b_norm = float(np.linalg.norm(b))

    window: deque[float] = deque(maxlen=cfg.window + 1)
    obj = float(c @ x)
    resid_rel = float(np.linalg.norm(ax - b)) / (1.0 + b_norm)
    converged = False
    min_seen = 0.0
    iters = 0
    resid_hist: list[float] | None = [] if cfg.track_residuals else None

    for t in range(1, cfg.max_iters + 1):
        iters = t
        beta = cfg.beta0 * math.sqrt(t + 1.0)
        r = (ax - b) / res_scale
        g = c_scaled + at_mat @ ((z + beta * r) / sigma)
        eig_tol = max(1e-10, 1.0 / (t + 1.0) ** 2)
        lam_best = math.inf
        blk_best = 0
        v_best: np.ndarray | None = None
        for i in range(len(sizes)):
            lam, v = min_eigpair(
                view.matrix(g, i),
                tol=eig_tol,
                rng=rng,
                dense_cutoff=cfg.dense_cutoff,
                lanczos_dim=cfg.lanczos_dim,
            )
            if lam < lam_best:
                lam_best, blk_best, v_best = lam, i, v

        eta = 2.0 / (t + 1.0)
        x *= 1.0 - eta
        view.add_outer(x, blk_best, v_best, eta * a)
        ax = a_mat @ x
        obj = float(c @ x)

        r_new = (ax - b) / res_scale
        rn_scaled = float(np.linalg.norm(r_new))
        # in normalized units the trace budget is 1, so a drops out of the clip
        gamma = (
            cfg.beta0
            if rn_scaled == 0.0
            else min(cfg.beta0, 4.0 * beta * eta * eta / (rn_scaled * rn_scaled))
        )
        z_new = z + gamma * r_new
        if float(np.linalg.norm(z_new)) <= cfg.dual_cap:
            z = z_new
        rn = rn_scaled * res_scale

        tr = view.trace(x)
        if abs(tr - a) > cfg.trace_tol * max(1.0, a):
            raise CgalError(f"trace drifted to {tr!r} against constant {a!r} at iteration {t}")
        if cfg.check_psd:
            for i in range(len(sizes)):
                w = np.linalg.eigvalsh(view.matrix(x, i))
                min_seen = min(min_seen, float(w[0]))
                if w[0] < -1e-9 * max(1.0, a):
                    raise CgalError(f"iterate lost psd in block {i} at iteration {t}")

        window.append(obj)
        resid_rel = rn / (1.0 + b_norm)
        if resid_hist is not None:
            resid_hist.append(resid_rel)
        if resid_rel <= cfg.eps and len(window) == cfg.window + 1:
            drift = abs(window[-1] - window[0])
            budget = cfg.eps * (1.0 + abs(obj))
            if drift <= budget and drift * (t / cfg.window) <= budget:
                converged = True
                break

    return SolveReport(
        objective=obj,
        residual=resid_rel,
        iterations=iters,
        converged=converged,
        x=x,
        z=z,
        runtime=time.perf_counter() - t0,
        min_iterate_eig=min_seen,
        residual_history=None if resid_hist is None else np.array(resid_hist),
    )
