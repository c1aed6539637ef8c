"""Output-controllability predicates for the lifted layer-domain system.

All checks are pure diagnostics on the lifted matrices; nothing in the
control loop gates on them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError
from .lifted import FORWARD, power_lookup_matrix, spatial_gain_matrix, state_transition, voxel_average_matrix
from .paths import SampleSets


def triangular_full_rank(gain: np.ndarray, rtol: float | None = None) -> tuple[float, bool]:
    """Determinant (product of the diagonal) and full-rank flag of a
    lower-triangular gain matrix.

    A diagonal entry counts as zero when its magnitude falls below
    rtol * max |diagonal| (default rtol = n * machine eps).
    """
    gain = np.asarray(gain)
    if gain.ndim != 2 or gain.shape[0] != gain.shape[1]:
        raise DimensionError(f"gain must be square, got {gain.shape}")
    diag = np.diag(gain)
    det = float(np.prod(diag))
    if rtol is None:
        rtol = gain.shape[0] * np.finfo(float).eps
    ref = float(np.max(np.abs(diag))) if gain.size else 0.0
    full_rank = ref > 0.0 and bool(np.all(np.abs(diag) > rtol * ref))
    return det, full_rank


def matrix_rank(m: np.ndarray, rtol: float | None = None) -> int:
    """Numerical rank with the standard SVD threshold."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if rtol is None:
        rtol = max(m.shape) * np.finfo(float).eps
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def output_controllability_matrix(
    output_map: np.ndarray, state_maps, input_maps, gain: np.ndarray, l1: int
) -> tuple[np.ndarray, int]:
    """Stacked reachability blocks of the layer-recursive output equation.

    Blocks r = 0..l1-1 are output_map @ transition(l1, r+1) @ input_maps[r],
    followed by the within-layer gain; returns the matrix and its rank.
    """
    output_map = np.asarray(output_map)
    blocks = []
    for r in range(l1):
        phi = state_transition(state_maps, l1, r + 1)
        b = input_maps[r]
        b = b.toarray() if hasattr(b, "toarray") else np.asarray(b)
        blocks.append(output_map @ phi @ b)
    blocks.append(np.asarray(gain))
    m = np.hstack(blocks)
    return m, matrix_rank(m)


def is_strictly_diag_dominant(m: np.ndarray) -> tuple[bool, float]:
    """Strict row diagonal dominance plus the minimum row margin."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"dominance needs a square matrix, got {m.shape}")
    a = np.abs(m)
    margins = 2 * np.diag(a) - a.sum(axis=1)
    return bool(np.all(margins > 0)), float(margins.min())


def worst_decay_ratio(gain: np.ndarray) -> float:
    """Largest ratio between row-adjacent entries d[i, j-1] / d[i, j].

    Only pairs with a nonzero denominator count.  A value below 1/2 means
    every row is bounded by a geometric series and the gain is strictly
    diagonally dominant.
    """
    gain = np.asarray(gain)
    n = gain.shape[0]
    worst = 0.0
    for i in range(n):
        row = gain[i, : i + 1]
        denom = row[1:]
        num = row[:-1]
        ok = denom != 0
        if ok.any():
            worst = max(worst, float(np.max(num[ok] / denom[ok])))
    return worst


def spatial_dominance_check(
    gain: np.ndarray, sets: SampleSets, lookup_mode: str = FORWARD
) -> tuple[bool, np.ndarray]:
    """Sufficient spatial output-controllability condition.

    With the one-step-forward look-up and voxel averaging, a nonnegative,
    strictly diagonally dominant temporal gain guarantees the spatial gain
    is strictly diagonally dominant (hence invertible).  Returns the
    verdict on the hypothesis and the constructed spatial gain; when the
    verdict holds, the conclusion is asserted as a runtime cross-check.
    """
    if lookup_mode != FORWARD:
        raise ValueError("the dominance condition is stated for the one-step-forward look-up")
    gain = np.asarray(gain)
    n = gain.shape[0]
    nonneg = bool(np.all(gain >= 0))
    dominant, _ = is_strictly_diag_dominant(gain)
    verdict = nonneg and dominant
    averaging = voxel_average_matrix(sets, n)
    lookup = power_lookup_matrix(sets, n, mode=FORWARD)
    spatial = spatial_gain_matrix(averaging, gain, lookup)
    if verdict:
        spatial_dominant, margin = is_strictly_diag_dominant(spatial)
        assert spatial_dominant, (
            f"dominance transfer violated: spatial margin {margin:.3g} with a dominant nonnegative gain"
        )
    return verdict, spatial


@dataclass
class ControllabilityReport:
    """Flat record of every controllability diagnostic for one layer."""

    det_temporal: float
    temporal_full_rank: bool
    temporal_nonnegative: bool
    temporal_diag_dominant: bool
    spatial_full_row_rank: bool
    spatial_diag_dominant: bool
    worst_decay_ratio: float
    dominance_condition_met: bool

    def lines(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                out.append(f"{f.name}={'true' if v else 'false'}")
            else:
                out.append(f"{f.name}={v:.17g}")
        return "\n".join(out) + "\n"


def build_report(gain: np.ndarray, sets: SampleSets, lookup_mode: str = FORWARD) -> ControllabilityReport:
    """Run every diagnostic and assert the implication chain between them."""
    det, full_rank = triangular_full_rank(gain)
    nonneg = bool(np.all(np.asarray(gain) >= 0))
    dominant, _ = is_strictly_diag_dominant(gain)
    verdict, spatial = spatial_dominance_check(gain, sets, lookup_mode)
    sp_dom, _ = is_strictly_diag_dominant(spatial)
    sp_rank = matrix_rank(spatial) == spatial.shape[0]
    report = ControllabilityReport(
        det_temporal=det,
        temporal_full_rank=full_rank,
        temporal_nonnegative=nonneg,
        temporal_diag_dominant=dominant,
        spatial_full_row_rank=sp_rank,
        spatial_diag_dominant=sp_dom,
        worst_decay_ratio=worst_decay_ratio(gain),
        dominance_condition_met=verdict,
    )
    # sufficient-condition chain must never be violated by the numbers
    assert not report.dominance_condition_met or report.spatial_diag_dominant
    assert not report.spatial_diag_dominant or report.spatial_full_row_rank
    return report
