"""
Fisher information of circuits and designs under multinomial sampling.

For one circuit with ``N`` shots and outcome probabilities ``p_i(theta)``,
the expected negative Hessian of the log-likelihood is

    N sum_i (grad p_i)(grad p_i)^T / p_i  -  N sum_i Hess p_i.

The second sum vanishes because ``sum_i p_i = 1`` for every ``theta``, so
only the outer-product term is computed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError
from .linalg import RANK_TOL, pmap
from .ptm import Circuit, GateSet, circuit_jacobian, circuit_probabilities

PROB_CLIP = 1e-10
PERCENTILES = (25, 50, 75, 90)


def circuit_log_likelihood(counts, probs, eps: float = PROB_CLIP) -> float:
    """Multinomial log-likelihood, combinatorial constant included."""
    counts = np.asarray(counts)
    if np.any(counts < 0):
        raise ValidationError("counts must be nonnegative")
    p = np.maximum(np.asarray(probs, dtype=float), eps)
    n = float(counts.sum())
    return float(gammaln(n + 1) - np.sum(gammaln(counts + 1.0)) + np.sum(counts * np.log(p)))


@dataclass
class FisherResult:
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = 0.5 * (self.matrix + self.matrix.T)
        self.matrix = m
        self.eigenvalues = np.linalg.eigvalsh(m)[::-1] if m.size else np.zeros(0)

    def amplifiable_spectrum(self, tol: float = RANK_TOL) -> np.ndarray:
        """Eigenvalues above ``tol * lambda_max`` (gauge and blind directions dropped)."""
        ev = self.eigenvalues
        if ev.size == 0 or ev[0] <= 0:
            return np.zeros(0)
        return ev[ev > tol * ev[0]]


def _circuit_term(gs: GateSet, c: Circuit, eps: float) -> np.ndarray:
    p = np.maximum(circuit_probabilities(gs, c), eps)
    g = circuit_jacobian(gs, c)
    return (g.T / p) @ g


def circuit_fisher(gs: GateSet, c: Circuit, shots: int, eps: float = PROB_CLIP) -> FisherResult:
    if shots < 0:
        raise ValidationError("shots must be nonnegative")
    if shots == 0:
        return FisherResult(np.zeros((gs.num_params, gs.num_params)))
    return FisherResult(shots * _circuit_term(gs, c, eps))


def _sum_terms(gs, circuits, eps, workers):
    total = np.zeros((gs.num_params, gs.num_params))
    if not circuits:
        return total
    chunks = [circuits[i::max(1, workers or 1)] for i in range(max(1, workers or 1))]

    def part(chunk):
        acc = np.zeros_like(total)
        for c in chunk:
            acc += _circuit_term(gs, c, eps)
        return acc

    for acc in pmap(part, chunks, workers):
        total += acc
    return total


def design_fisher(gs: GateSet, design, shots: int = 1000, max_length: int | None = None,
                  eps: float = PROB_CLIP, workers: int | None = None) -> FisherResult:
    """Sum of per-circuit Fisher matrices, optionally only over circuits with ``L <= max_length``."""
    circuits = list(design.circuits if hasattr(design, "circuits") else design)
    if max_length is not None:
        circuits = [c for c in circuits if c.max_length is not None and c.max_length <= max_length]
    return FisherResult(shots * _sum_terms(gs, circuits, eps, workers))


@dataclass
class SpectrumRow:
    L: int
    num_circuits: int
    rank: int
    minimum: float
    percentiles: dict  # percentile -> value
    maximum: float
    local_slope: float | None


@dataclass
class ScalingReport:
    rows: list[SpectrumRow]
    slope: float | None  # fit of log(p90) vs log(L)
    median_slope: float | None

    def medians(self) -> list[float]:
        return [r.percentiles[50] for r in self.rows]

    def top_decile(self) -> list[float]:
        return [r.percentiles[90] for r in self.rows]


def _fit_slope(Ls, vals) -> float | None:
    if len(Ls) < 2:
        return None
    return float(np.polyfit(np.log(Ls), np.log(vals), 1)[0])


def scaling_report(gs: GateSet, design, Ls=None, shots: int = 1000, eps: float = PROB_CLIP,
                   tol: float = RANK_TOL, workers: int | None = None) -> ScalingReport:
    """Spectrum percentiles of the cumulative design Fisher at each max depth.

    Only the part of the spectrum above ``tol * lambda_max`` enters the
    percentiles.  With two or more depths the 90th percentile is fitted by
    a line in log-log space.
    """
    Ls = list(design.Ls if Ls is None else Ls)
    if not Ls:
        raise ValidationError("no max depths")
    total = np.zeros((gs.num_params, gs.num_params))
    prev_L = 0
    rows = []
    for L in Ls:
        stratum = [c for c in design.circuits if prev_L < c.max_length <= L]
        total = total + _sum_terms(gs, stratum, eps, workers)
        prev_L = L
        spec = FisherResult(shots * total).amplifiable_spectrum(tol)
        n = sum(1 for c in design.circuits if c.max_length <= L)
        if spec.size == 0:
            pct = {q: 0.0 for q in PERCENTILES}
            lo = hi = 0.0
        else:
            pct = {q: float(np.percentile(spec, q)) for q in PERCENTILES}
            lo, hi = float(spec.min()), float(spec.max())
        local = None
        if rows and rows[-1].percentiles[90] > 0 and pct[90] > 0:
            local = float(np.log(pct[90] / rows[-1].percentiles[90]) / np.log(L / rows[-1].L))
        rows.append(SpectrumRow(L, n, int(spec.size), lo, pct, hi, local))
    Lv = [r.L for r in rows]
    return ScalingReport(rows, _fit_slope(Lv, [r.percentiles[90] for r in rows]),
                         _fit_slope(Lv, [r.percentiles[50] for r in rows]))


def format_scaling_report(rep: ScalingReport, header: dict | None = None) -> str:
    """Tab-separated spectrum table; ``slope`` is the local log-log slope of p90."""
    out = [f"# {k}={v}" for k, v in (header or {}).items()]
    out.append("L\tcircuits\trank\tmin\tp25\tmedian\tp75\tp90\tmax\tslope")
    for r in rep.rows:
        p = r.percentiles
        slope = "-" if r.local_slope is None else f"{r.local_slope:.6g}"
        out.append(f"{r.L}\t{r.num_circuits}\t{r.rank}\t{r.minimum:.6g}\t{p[25]:.6g}\t"
                   f"{p[50]:.6g}\t{p[75]:.6g}\t{p[90]:.6g}\t{r.maximum:.6g}\t{slope}")
    fit = "-" if rep.slope is None else f"{rep.slope:.6g}"
    med = "-" if rep.median_slope is None else f"{rep.median_slope:.6g}"
    out.append(f"# fit_p90_slope={fit} fit_median_slope={med}")
    return "\n".join(out) + "\n"


def write_scaling_report(rep: ScalingReport, path, header: dict | None = None) -> None:
    Path(path).write_text(format_scaling_report(rep, header), encoding="utf-8")
