"""Composite Gauss-Legendre quadrature with per-panel two-level refinement."""
import logging
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..dynamics import config as C

logger = logging.getLogger(__name__)

MAX_REFINE_LEVELS = 12


def _panel_sums(func, left, width, x, w):
    nodes = left[:, None] + 0.5 * width[:, None] * (x[None, :] + 1.0)
    values = func(nodes.ravel()).reshape(nodes.shape)
    return 0.5 * width * (values @ w)


def composite_gauss(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                    panels: int = C.J_PANELS, nodes: int = C.GAUSS_NODES, tol: float = C.QUADRATURE_TOL) -> float:
    """
    Mean value of `func` over [lo, hi].

    Each panel is compared with the sum over its two halves; panels whose estimates
    differ by more than `tol` (on the mean scale) are split, level by level.

    :param func: Vectorised integrand.
    """
    x, w = leggauss(nodes)
    span = hi - lo
    left = lo + span * np.arange(panels) / panels
    width = np.full(panels, span / panels)
    total = 0.0
    for level in range(MAX_REFINE_LEVELS):
        coarse = _panel_sums(func, left, width, x, w)
        half = 0.5 * width
        fine = _panel_sums(func, left, half, x, w) + _panel_sums(func, left + half, half, x, w)
        done = np.abs(fine - coarse) <= tol * span
        total += fine[done].sum()
        if done.all():
            break
        logger.debug("Quadrature level %d: refining %d panels", level, (~done).sum())
        left = np.concatenate([left[~done], left[~done] + half[~done]])
        width = np.concatenate([half[~done], half[~done]])
        order = np.argsort(left, kind='stable')
        left, width = left[order], width[order]
    else:
        total += fine[~done].sum()
    return total / span


def gauss_grid(lo: float, hi: float, panels: int, nodes: int = C.GAUSS_NODES):
    """Nodes and weights of a composite Gauss-Legendre rule on [lo, hi]; weights sum to hi - lo."""
    x, w = leggauss(nodes)
    width = (hi - lo) / panels
    left = lo + width * np.arange(panels)
    grid = (left[:, None] + 0.5 * width * (x[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * width * w, panels)
    return grid, weights
