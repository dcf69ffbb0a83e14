"""Phase data: sampled exponents and weights, the integrand, growth checks.

A PhaseStructure holds the exponent p and k >= 1 weight-exponent pairs
(mu_j, q_j), all sampled at cell centers.  The integrand evaluated at a
cell with argument t >= 0 is

    (1/p) t^p + sum_j (mu_j / q_j) t^{q_j}

Double-phase is k = 1; a vanishing mu recovers the single-phase case.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import Grid, _readonly

# Guard against float dust: the convexity modulus degenerates as the smallest
# exponent approaches 1, so sampled exponents must clear 1 by this margin.
MIN_EXPONENT_MARGIN = 1e-9


@dataclass(frozen=True, eq=False)
class PhasePair:
    """One weight-exponent pair (mu_j, q_j), sampled per cell."""

    q_cells: np.ndarray
    mu_cells: np.ndarray


@dataclass(frozen=True)
class ExponentSummary:
    p_minus: float
    p_plus: float
    q_minus: tuple[float, ...]
    q_plus: tuple[float, ...]
    q_minus_global: float
    q_plus_global: float
    m: float
    M: float


@dataclass(frozen=True, eq=False)
class PhaseStructure:
    grid: Grid
    p_cells: np.ndarray
    phases: tuple[PhasePair, ...]

    def __post_init__(self):
        n = self.grid.n_cells
        p = np.asarray(self.p_cells, dtype=float).reshape(-1).copy()
        if p.size != n:
            raise ValueError(f"p has {p.size} samples, expected {n} cells")
        if not np.all(np.isfinite(p)):
            raise ValueError("p contains non-finite samples")
        object.__setattr__(self, "p_cells", _readonly(p))
        if len(self.phases) < 1:
            raise ValueError("at least one (q, mu) phase is required")
        pairs = []
        for j, pair in enumerate(self.phases):
            q = np.asarray(pair.q_cells, dtype=float).reshape(-1).copy()
            mu = np.asarray(pair.mu_cells, dtype=float).reshape(-1).copy()
            if q.size != n or mu.size != n:
                raise ValueError(f"phase {j} field size does not match {n} cells")
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(mu))):
                raise ValueError(f"phase {j} contains non-finite samples")
            if np.any(mu < 0):
                raise ValueError(
                    f"weight mu_{j} must be nonnegative, sampled minimum {mu.min()}"
                )
            pairs.append(PhasePair(_readonly(q), _readonly(mu)))
        object.__setattr__(self, "phases", tuple(pairs))
        m = min(float(p.min()), *(float(pr.q_cells.min()) for pr in pairs))
        if m < 1.0 + MIN_EXPONENT_MARGIN:
            raise ValueError(
                f"all exponents must exceed 1: sampled minimum {m} <= 1 + {MIN_EXPONENT_MARGIN}"
            )

    @property
    def k(self) -> int:
        return len(self.phases)

    @cached_property
    def summary(self) -> ExponentSummary:
        q_minus = tuple(float(pr.q_cells.min()) for pr in self.phases)
        q_plus = tuple(float(pr.q_cells.max()) for pr in self.phases)
        p_minus = float(self.p_cells.min())
        p_plus = float(self.p_cells.max())
        return ExponentSummary(
            p_minus=p_minus,
            p_plus=p_plus,
            q_minus=q_minus,
            q_plus=q_plus,
            q_minus_global=min(q_minus),
            q_plus_global=max(q_plus),
            m=min(p_minus, *q_minus),
            M=max(p_plus, *q_plus),
        )

    def terms(self, bar: bool = False) -> list[tuple[np.ndarray, np.ndarray]]:
        """The integrand as (exponent, coefficient) per-cell array pairs.

        With ``bar`` the coefficients are 1 and mu_j instead of 1/p and mu_j/q_j.
        """
        if bar:
            out = [(self.p_cells, np.ones_like(self.p_cells))]
            out += [(pr.q_cells, pr.mu_cells) for pr in self.phases]
        else:
            out = [(self.p_cells, 1.0 / self.p_cells)]
            out += [(pr.q_cells, pr.mu_cells / pr.q_cells) for pr in self.phases]
        return out

    def h_of(self, t: np.ndarray, bar: bool = False) -> np.ndarray:
        """Integrand values per cell for nonnegative per-cell arguments t."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for r, c in self.terms(bar=bar):
            out += c * t**r
        return out

    def flux_coefficient(self, t: np.ndarray) -> np.ndarray:
        """Per-cell scalar c(t) with flux(g) = c(|g|) g; zero extended at t = 0.

        c(t) = t^{p-2} + sum_j mu_j t^{q_j-2}; the product c(t) t -> 0 as
        t -> 0 because every exponent exceeds 1.
        """
        t = np.asarray(t, dtype=float)
        pos = t > 0.0
        safe = np.where(pos, t, 1.0)
        out = np.where(pos, safe ** (self.p_cells - 2.0), 0.0)
        for pr in self.phases:
            out += np.where(pos, pr.mu_cells * safe ** (pr.q_cells - 2.0), 0.0)
        return out

def eval_H(phase: PhaseStructure, cell: int, t: float) -> float:
    """Integrand value at one cell: (1/p) t^p + sum_j (mu_j/q_j) t^{q_j}."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    p = phase.p_cells[cell]
    val = t**p / p
    for pr in phase.phases:
        q = pr.q_cells[cell]
        val += pr.mu_cells[cell] / q * t**q
    return float(val)


def growth_envelope_check(phase: PhaseStructure, cell: int, t: float) -> bool:
    """Check alpha * min(t^p, t^q) <= H <= beta * max(t^p, t^q) at one cell.

    alpha = 1/p_+ + mu/q_+ and beta = 1/p_- + mu/q_- use the grid-global
    exponent extremes; stated for the double-phase structure only.
    """
    if phase.k != 1:
        raise ValueError("growth envelope is defined for double-phase (k = 1) only")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    s = phase.summary
    mu = phase.phases[0].mu_cells[cell]
    alpha = 1.0 / s.p_plus + mu / s.q_plus_global
    beta = 1.0 / s.p_minus + mu / s.q_minus_global
    tp = t ** phase.p_cells[cell]
    tq = t ** phase.phases[0].q_cells[cell]
    h = eval_H(phase, cell, t)
    slack = 1e-12 * (1.0 + tp + tq)
    return bool(alpha * min(tp, tq) <= h + slack and h <= beta * max(tp, tq) + slack)


def exponent_summary(phase: PhaseStructure) -> ExponentSummary:
    """Exact extremes of the sampled exponents; m > 1 is enforced at build time."""
    return phase.summary


def matuszewska_index(phase: PhaseStructure, cell: int) -> float:
    """Growth index of the integrand in t at one cell.

    Closed form max(p, q) where the weight is active; where mu vanishes the
    integrand is t^p/p and the index is p.  Double-phase only.
    """
    if phase.k != 1:
        raise ValueError("matuszewska_index is defined for double-phase (k = 1) only")
    p = float(phase.p_cells[cell])
    q = float(phase.phases[0].q_cells[cell])
    mu = float(phase.phases[0].mu_cells[cell])
    return max(p, q) if mu > 0.0 else p
