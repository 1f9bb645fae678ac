import logging
import math

import numpy as np

from idealsim.exceptions import GossipError
from idealsim.models.blocks import BlockVector
from idealsim.models.graphs import MixingMatrix, SpectralSummary
from idealsim.models.records import ChebyshevPlan
from idealsim.services.blockspace import MetricOperator, _require_rows, mix
from idealsim.services.topology import TOL, spectrum

logger = logging.getLogger(__name__)

# kappa_W within this of 1 counts as already optimal.
DEGENERATE_KAPPA = 1e-9


def chebyshev_t(j: int, x):
    """T_j(x) by the three-term recurrence; works on scalars and arrays"""
    if j < 0:
        raise ValueError(f"Chebyshev index must be >= 0, got {j}")
    previous, current = np.ones_like(x, dtype=float), np.asarray(x, float)
    if j == 0:
        return previous if np.ndim(x) else float(previous)
    for _ in range(j - 1):
        previous, current = current, 2.0 * x * current - previous
    return current if np.ndim(x) else float(current)


def plan(summary: SpectralSummary) -> ChebyshevPlan:
    kappa = summary.kappa
    if kappa < 1.0 - 1e-12:
        raise GossipError(f"kappa_W must be >= 1, got {kappa}")
    if kappa - 1.0 <= DEGENERATE_KAPPA:
        return ChebyshevPlan(
            enabled=False,
            j_w=1,
            coefficients=[1.0],
            kappa_w=kappa,
            lambda_min_plus=summary.lambda_min_plus,
        )
    j_w = max(1, int(math.floor(math.sqrt(kappa) + 1e-12)))
    # Shift and scale the spectrum of W into [-1, 1]
    c2 = (kappa + 1.0) / (kappa - 1.0)
    c3 = 2.0 / ((kappa + 1.0) * summary.lambda_min_plus)
    coefficients = [1.0, c2]
    for _ in range(j_w - 1):
        coefficients.append(2.0 * c2 * coefficients[-1] - coefficients[-2])
    return ChebyshevPlan(
        enabled=True,
        j_w=j_w,
        c2=c2,
        c3=c3,
        coefficients=coefficients[: j_w + 1],
        kappa_w=kappa,
        lambda_min_plus=summary.lambda_min_plus,
    )


def q_polynomial(chebyshev: ChebyshevPlan, lam):
    """Scalar map lambda -> Q(lambda) = 1 - T_J(c2(1 - c3 lambda)) / a_J"""
    lam = np.asarray(lam, dtype=float)
    if not chebyshev.enabled:
        return lam
    argument = chebyshev.c2 * (1.0 - chebyshev.c3 * lam)
    a_j = chebyshev.coefficients[chebyshev.j_w]
    return 1.0 - chebyshev_t(chebyshev.j_w, argument) / a_j


def _gossip(
    entries: np.ndarray, chebyshev: ChebyshevPlan, x: np.ndarray
) -> np.ndarray:
    if not chebyshev.enabled:
        return entries @ x
    c2, c3 = chebyshev.c2, chebyshev.c3

    def contract(v):
        return c2 * (v - c3 * (entries @ v))

    # T_J(c2 (I - c3 W)) x by the three-term recurrence
    previous, current = x, contract(x)
    for _ in range(chebyshev.j_w - 1):
        previous, current = current, 2.0 * contract(current) - previous
    return x - current / chebyshev.coefficients[chebyshev.j_w]


def accelerated_gossip(
    w: MixingMatrix, chebyshev: ChebyshevPlan, x: BlockVector
) -> BlockVector:
    """Q(W) X using exactly j_W neighbor-averaging rounds"""
    if not chebyshev.enabled:
        return mix(w, x)
    _require_rows(w, x)
    return BlockVector(_gossip(w.entries, chebyshev, x.data))


def effective_spectrum(
    w: MixingMatrix, chebyshev: ChebyshevPlan
) -> SpectralSummary:
    """Spectrum of Q(W), obtained by mapping the eigenvalues of W"""
    base = spectrum(w)
    if not chebyshev.enabled:
        return base
    eigenvalues = np.asarray(base.eigenvalues)
    mapped = q_polynomial(chebyshev, eigenvalues)
    positive = eigenvalues > TOL * base.lambda_max
    if np.any(mapped[positive] < -TOL):
        raise GossipError(
            f"Q(W) has a negative eigenvalue {mapped[positive].min():.3e}; "
            "the Chebyshev constants do not match this matrix"
        )
    lambda_max = float(mapped.max())
    lambda_min_plus = float(mapped[positive].min())
    return SpectralSummary(
        lambda_max=lambda_max,
        lambda_min_plus=lambda_min_plus,
        kappa=lambda_max / lambda_min_plus,
        eigenvalues=np.sort(mapped).tolist(),
    )


class ChebyshevOperator(MetricOperator):
    """M = Q(W); falls back to W when kappa_W is 1"""

    label = "Q(W)"

    def __init__(self, mixing: MixingMatrix):
        super().__init__(mixing)
        self.plan = plan(spectrum(mixing))
        self._summary = effective_spectrum(mixing, self.plan)
        if not self.plan.enabled:
            self.label = "W"
            logger.info("kappa_W is 1, Chebyshev acceleration disabled")

    @property
    def summary(self) -> SpectralSummary:
        return self._summary

    @property
    def rounds(self) -> int:
        return self.plan.rounds

    def apply(self, x: np.ndarray) -> np.ndarray:
        return _gossip(self.mixing.entries, self.plan, x)
