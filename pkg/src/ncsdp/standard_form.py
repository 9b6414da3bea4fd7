"""Rescaled standard form of a certified relaxation.

With a constant trace certificate in hand, the relaxation variable becomes
the single block-diagonal matrix X = P D_k(y) P, P = blockdiag(G_i^{1/2}),
which satisfies tr(X) = a on the whole feasible set. The affine constraints
A(X) = b then say exactly that X comes from a moment vector:

  * one pin row fixes the entry carrying y_1 to 1,
  * sharing rows tie every repeated moment entry to the first entry that
    realized its canonical word,
  * localizing rows expand each localizing entry through the moment entries
    that represent its words,
  * equality rows force the entries of equality blocks to vanish,
  * one trace row per clique group beyond the first pins that group's
    partial trace (the total is maintained by the solver itself).

Everything is expressed in svec coordinates: each block's upper triangle,
row-major, with off-diagonal entries scaled by sqrt(2), so that inner
products of symmetric matrices become dot products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .ctp import CtpCertificate
from .relaxation import Relaxation

SQRT2 = math.sqrt(2.0)


@dataclass
class CountStats:
    """Structural statistics of a certified relaxation."""

    omega: int  # number of psd blocks
    smax: int  # largest block size
    zeta: int  # constraint rows excluding per-group trace rows
    amax: float  # largest group trace constant

    def as_dict(self) -> dict:
        return {"omega": self.omega, "smax": self.smax, "zeta": self.zeta, "amax": self.amax}


@dataclass
class StandardSdp:
    """min <C, X> s.t. A svec(X) = b, X psd block-diagonal, tr(X) = trace."""

    block_sizes: list[int]
    c: np.ndarray
    a_mat: sp.csr_matrix
    b: np.ndarray
    trace: float
    zeta: int
    scales: tuple[np.ndarray, ...] | None = None
    rel: Relaxation | None = None
    rep_entry: dict[int, tuple[int, int, int]] | None = None
    offsets: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.offsets:
            off = [0]
            for s in self.block_sizes:
                off.append(off[-1] + s * (s + 1) // 2)
            self.offsets = off

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    @property
    def n_rows(self) -> int:
        return self.a_mat.shape[0]


def svec_index(offsets: list[int], sizes: list[int], block: int, r: int, c: int) -> int:
    """Position of entry (r, c), r <= c, in the stacked svec layout."""
    s = sizes[block]
    return offsets[block] + r * s - r * (r - 1) // 2 + (c - r)


def _entry_scale(r: int, c: int) -> float:
    return 1.0 if r == c else SQRT2


def moment_representatives(rel: Relaxation) -> tuple[dict[int, tuple[int, int, int]], list[tuple[int, int, int, int]]]:
    """First-encounter representative entry of every moment key.

    Returns (rep, dup) where rep maps key -> (block, r, c) and dup lists the
    repeated entries as (block, r, c, key), in the scan order used when the
    relaxation assigned its keys.
    """
    rep: dict[int, tuple[int, int, int]] = {}
    dup: list[tuple[int, int, int, int]] = []
    for i, block in enumerate(rel.blocks):
        if not block.is_moment:
            continue
        size = block.size
        for r in range(size):
            for c in range(r, size):
                key = rel.moment_entry_key(i, r, c)
                if key in rep:
                    dup.append((i, r, c, key))
                else:
                    rep[key] = (i, r, c)
    return rep, dup


def count_stats(rel: Relaxation, cert: CtpCertificate) -> CountStats:
    """Structural counts without materializing the constraint matrix.

    Every word a localizing or equality entry references factors through a
    moment block of its clique, so the distinct-key count is just
    len(rel.keys) and the sharing-row count follows by subtraction.
    """
    moment_ut = sum(b.size * (b.size + 1) // 2 for b in rel.blocks if b.is_moment)
    loc_ut = sum(b.size * (b.size + 1) // 2 for b in rel.blocks if not b.is_moment)
    eq_ut = sum(e.size * (e.size + 1) // 2 for e in rel.eq_blocks)
    zeta = 1 + (moment_ut - len(rel.keys)) + loc_ut + eq_ut
    return CountStats(
        omega=len(rel.blocks),
        smax=max(b.size for b in rel.blocks),
        zeta=zeta,
        amax=cert.a_max,
    )


def assemble(rel: Relaxation, cert: CtpCertificate) -> StandardSdp:
    """Materialize the standard form of a certified relaxation."""
    sizes = [b.size for b in rel.blocks]
    offsets = [0]
    for s in sizes:
        offsets.append(offsets[-1] + s * (s + 1) // 2)
    scales = cert.block_scales
    rep, dup = moment_representatives(rel)

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b_vals: list[float] = []
    nrow = 0

    def put(block: int, r: int, c: int, coeff: float) -> None:
        rows.append(nrow)
        cols.append(svec_index(offsets, sizes, block, r, c))
        vals.append(coeff / _entry_scale(r, c))

    def rep_coeff(key: int) -> tuple[int, int, int, float]:
        bi, r, c = rep[key]
        return bi, r, c, 1.0 / (scales[bi][r] * scales[bi][c])

    # pin: the representative of the empty word equals 1 in moment scale
    bi, r, c = rep[0]
    put(bi, r, c, 1.0 / (scales[bi][r] * scales[bi][c]))
    b_vals.append(1.0)
    nrow += 1

    # sharing rows
    for bi, r, c, key in dup:
        put(bi, r, c, 1.0 / (scales[bi][r] * scales[bi][c]))
        bj, u, v, coeff = rep_coeff(key)
        put(bj, u, v, -coeff)
        b_vals.append(0.0)
        nrow += 1

    # localizing rows
    for i, block in enumerate(rel.blocks):
        if block.is_moment:
            continue
        for r in range(block.size):
            for c in range(r, block.size):
                put(i, r, c, 1.0 / (scales[i][r] * scales[i][c]))
                for key, coeff in rel.entry_form(i, r, c).items():
                    bj, u, v, s = rep_coeff(key)
                    put(bj, u, v, -coeff * s)
                b_vals.append(0.0)
                nrow += 1

    # equality rows
    for j, eqb in enumerate(rel.eq_blocks):
        for r in range(eqb.size):
            for c in range(r, eqb.size):
                form = rel.eq_entry_form(j, r, c)
                if not form:
                    continue
                for key, coeff in form.items():
                    bj, u, v, s = rep_coeff(key)
                    put(bj, u, v, coeff * s)
                b_vals.append(0.0)
                nrow += 1

    zeta = nrow

    # per-group partial traces (all groups but the first; the solver keeps
    # the total trace at its constant)
    for g in range(1, rel.n_groups):
        for i, block in enumerate(rel.blocks):
            if block.group != g:
                continue
            for r in range(block.size):
                put(i, r, r, 1.0)
        b_vals.append(cert.group_traces[g])
        nrow += 1

    dim = offsets[-1]
    a_mat = sp.csr_matrix(
        sp.coo_matrix((vals, (rows, cols)), shape=(nrow, dim))
    )
    a_mat.sum_duplicates()

    c_vec = np.zeros(dim)
    for key, coeff in rel.objective.items():
        bj, u, v = rep[key]
        idx = svec_index(offsets, sizes, bj, u, v)
        c_vec[idx] += coeff / (scales[bj][u] * scales[bj][v]) / _entry_scale(u, v)

    return StandardSdp(
        block_sizes=sizes,
        c=c_vec,
        a_mat=a_mat,
        b=np.array(b_vals),
        trace=cert.trace_constant,
        zeta=zeta,
        scales=scales,
        rel=rel,
        rep_entry=rep,
        offsets=offsets,
    )


def recover_moments(sdp: StandardSdp, x: np.ndarray) -> np.ndarray:
    """Moment vector read off the representative entries of an svec iterate."""
    if sdp.rel is None or sdp.rep_entry is None or sdp.scales is None:
        raise ValueError("moment recovery requires an assembled standard form")
    y = np.zeros(len(sdp.rel.keys))
    for key, (bi, r, c) in sdp.rep_entry.items():
        idx = svec_index(sdp.offsets, sdp.block_sizes, bi, r, c)
        y[key] = x[idx] / _entry_scale(r, c) / (sdp.scales[bi][r] * sdp.scales[bi][c])
    return y


def x_from_moments(sdp: StandardSdp, y: np.ndarray) -> np.ndarray:
    """svec of P D_k(y) P; the exact feasible image of a moment vector."""
    if sdp.rel is None or sdp.scales is None:
        raise ValueError("requires an assembled standard form")
    rel = sdp.rel
    x = np.zeros(sdp.dim)
    for i, block in enumerate(rel.blocks):
        for r in range(block.size):
            for c in range(r, block.size):
                form = rel.entry_form(i, r, c)
                val = sum(coeff * y[key] for key, coeff in form.items())
                val *= sdp.scales[i][r] * sdp.scales[i][c]
                x[svec_index(sdp.offsets, sdp.block_sizes, i, r, c)] = val * _entry_scale(r, c)
    return x


def write_sdp(sdp: StandardSdp, path: str) -> None:
    """Write the standard form in sparse block text format.

    Layout follows the usual sparse SDP convention: a comment line, the
    number of constraints, the number of blocks, the block sizes, the right
    hand side, then quintuples `t blk i j value` with matrix entries of the
    objective (t = 0) and each constraint (t >= 1), upper triangle only,
    1-based indices. The trace constant and the structural row count ride
    in the comment line so a round trip preserves them.
    """
    m = sdp.n_rows
    lines = [f'"trace={sdp.trace!r} zeta={sdp.zeta}']
    lines.append(str(m))
    lines.append(str(len(sdp.block_sizes)))
    lines.append(" ".join(str(s) for s in sdp.block_sizes))
    lines.append(" ".join(f"{v:.17g}" for v in sdp.b))

    def emit(t: int, vec_idx: int, val: float) -> list[str]:
        blk = 0
        while sdp.offsets[blk + 1] <= vec_idx:
            blk += 1
        rel_idx = vec_idx - sdp.offsets[blk]
        s = sdp.block_sizes[blk]
        r = 0
        row_len = s
        while rel_idx >= row_len:
            rel_idx -= row_len
            r += 1
            row_len -= 1
        c = r + rel_idx
        mat_val = val / _entry_scale(r, c)
        return [f"{t} {blk + 1} {r + 1} {c + 1} {mat_val:.17g}"]

    for idx in np.nonzero(sdp.c)[0]:
        lines.extend(emit(0, int(idx), float(sdp.c[idx])))
    coo = sdp.a_mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for t in order:
        lines.extend(emit(int(coo.row[t]) + 1, int(coo.col[t]), float(coo.data[t])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sdp(path: str) -> StandardSdp:
    """Read a standard form written by write_sdp. Solvable but anonymous:
    the moment-recovery maps are not part of the text format."""
    trace = 0.0
    zeta = 0
    header: list[str] = []
    entries: list[tuple[int, int, int, int, float]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith('"') or line.startswith("*"):
                for tok in line[1:].split():
                    if tok.startswith("trace="):
                        trace = float(tok[6:])
                    elif tok.startswith("zeta="):
                        zeta = int(tok[5:])
                continue
            if len(header) < 4:
                header.append(line)
                continue
            t, blk, i, j, val = line.split()
            entries.append((int(t), int(blk) - 1, int(i) - 1, int(j) - 1, float(val)))
    m = int(header[0])
    nblocks = int(header[1])
    sizes = [int(s) for s in header[2].split()]
    if len(sizes) != nblocks:
        raise ValueError("block size list does not match block count")
    b = np.array([float(v) for v in header[3].split()])
    if b.shape != (m,):
        raise ValueError("right hand side length does not match constraint count")
    offsets = [0]
    for s in sizes:
        offsets.append(offsets[-1] + s * (s + 1) // 2)
    dim = offsets[-1]
    c_vec = np.zeros(dim)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for t, blk, r, c, val in entries:
        idx = svec_index(offsets, sizes, blk, r, c)
        sval = val * _entry_scale(r, c)
        if t == 0:
            c_vec[idx] += sval
        else:
            rows.append(t - 1)
            cols.append(idx)
            vals.append(sval)
    a_mat = sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(m, dim)))
    return StandardSdp(
        block_sizes=sizes,
        c=c_vec,
        a_mat=a_mat,
        b=b,
        trace=trace,
        zeta=zeta,
        offsets=offsets,
    )
