"""Binary symplectic sum-product belief propagation on the Chamon Tanner graph.

Variables are the ``2n`` error bits: index ``q`` is the x-bit of qubit ``q`` and
``n + q`` its z-bit. Check ``i`` sees the bits whose flip toggles syndrome bit
``i``: x-bits on the qubits where the stabilizer acts as Y or Z, z-bits where it
acts as X or Y.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chamon import _kernels
from chamon.lattice import ChamonLattice
from chamon.pauli import PauliOp

# Bound on every log-likelihood ratio, messages and posteriors alike.
LLR_CLIP = 30.0


@dataclass(frozen=True)
class TannerGraph:
    n: int
    check_vars: np.ndarray  # (n, 8) variable ids per check
    var_edges: np.ndarray  # (2n, 4) edge ids (check * 8 + slot) per variable
    var_checks: np.ndarray  # (2n, 4) check ids per variable

    @classmethod
    def from_lattice(cls, lattice: ChamonLattice) -> TannerGraph:
        n = lattice.n
        xs, zs = lattice.stab_xz_support
        check_vars = np.concatenate([zs, xs + n], axis=1).astype(np.int32)
        deg = check_vars.shape[1]
        flat = check_vars.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=2 * n)
        if not (counts == counts[0]).all():
            raise RuntimeError("irregular variable degree")
        var_edges = order.reshape(2 * n, counts[0]).astype(np.int32)
        return cls(n, check_vars, var_edges, (var_edges // deg).astype(np.int32))


def tanner_graph(lattice: ChamonLattice) -> TannerGraph:
    cached = lattice.__dict__.get("_tanner")
    if cached is None:
        cached = TannerGraph.from_lattice(lattice)
        lattice.__dict__["_tanner"] = cached
    return cached


@dataclass(frozen=True)
class BPResult:
    soft: np.ndarray  # (n, 4) columns p_I, p_X, p_Y, p_Z
    hard: PauliOp
    converged: bool
    iterations: int
    llr: np.ndarray  # posterior LLRs of the 2n bits

    def dump(self, path: str | Path) -> None:
        """Final LLRs, one qubit per line: ``qubit llr_x llr_z``."""
        n = self.hard.n
        with open(path, "w") as fh:
            for q in range(n):
                fh.write(f"{q} {self.llr[q]:.6f} {self.llr[n + q]:.6f}\n")


def depolarizing_prior(p: float) -> float:
    """Marginal probability that an x-bit (or z-bit) is set: ``P(X) + P(Y)``."""
    return 2.0 * p / 3.0


def soft_output(llr: np.ndarray, n: int) -> np.ndarray:
    """Per-qubit ``(p_I, p_X, p_Y, p_Z)`` treating x- and z-bits as independent."""
    m = 1.0 / (1.0 + np.exp(np.asarray(llr, dtype=np.float64)))
    mx, mz = m[:n], m[n:]
    soft = np.empty((n, 4))
    soft[:, 1] = mx * (1.0 - mz)
    soft[:, 3] = mz * (1.0 - mx)
    soft[:, 2] = mx * mz
    soft[:, 0] = (1.0 - mx) * (1.0 - mz)
    return soft


def bp_decode(
    graph: TannerGraph,
    syndrome: np.ndarray,
    priors: float | np.ndarray,
    max_iters: int,
) -> BPResult:
    """Flooding sum-product BP; stops as soon as the hard decision reproduces the syndrome.

    ``priors`` is the per-bit error probability (scalar or length ``2n``).
    """
    if max_iters <= 0:
        raise ValueError("max_iters must be positive")
    pr = np.broadcast_to(np.asarray(priors, dtype=np.float64), (2 * graph.n,))
    if not ((pr > 0) & (pr < 1)).all():
        raise ValueError("bit priors must lie strictly inside (0, 1)")
    prior_llr = np.log((1.0 - pr) / pr)
    llr, hard, converged, iters = _kernels.bp_flood(
        graph.check_vars, graph.var_edges, np.asarray(syndrome, dtype=np.uint8), prior_llr, max_iters
    )
    n = graph.n
    hard = np.asarray(hard, dtype=bool)
    # clipping keeps the sign, so the hard decision is unaffected
    llr = np.clip(np.asarray(llr, dtype=np.float64), -LLR_CLIP, LLR_CLIP)
    return BPResult(soft_output(llr, n), PauliOp(hard[:n], hard[n:]), converged, iters, llr)
