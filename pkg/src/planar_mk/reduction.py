"""Conditional-quantile reduction of the planar coupling problem.

Given the source density f of (X1, X2), the target density f~ of (Y1, Y2)
and a coupling density p of (X1, Y2), the maps

    g(x, y) = G(x, F_{Y2|X1}(y|x)),   G(x,.)  = inverse of F_{X2|X1}(.|x)
    h(x, y) = G~(F_{X1|Y2}(x|y), y),  G~(.,y) = inverse of F_{Y1|Y2}(.|y)

reconstruct the full coupling: (X1, g(X1,Y2)) is distributed like (X1, X2)
and (h(X1,Y2), Y2) like (Y1, Y2). Everything here is evaluated at cell
centers with exact piecewise-linear CDF/quantile composition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import CouplingDensity, MarginalMismatchError, as_density
from .measures import CDF1D, DiscreteDensity2D, QuantileTable

# Maps are built only when the coupling's fixed marginal agrees with the
# conditioned density's marginal to this tolerance (max cell-mass deviation).
MARGINAL_MATCH_TOL = 1e-9


class DegenerateSliceError(ValueError):
    pass


def conditional_cdf(d: DiscreteDensity2D, condition_axis: str, cell_index: int) -> CDF1D:
    """CDF of one variable given that the other lies in a fixed cell.

    condition_axis='x' conditions on an x-cell and returns the CDF along y;
    'y' the transpose. The slice is normalized by its own mass.
    """
    if condition_axis == "x":
        if not 0 <= cell_index < d.grid_x.n_cells:
            raise IndexError(f"x-cell {cell_index} out of range")
        masses = d.values[cell_index, :] * d.grid_y.cell_widths
        grid = d.grid_y
    elif condition_axis == "y":
        if not 0 <= cell_index < d.grid_y.n_cells:
            raise IndexError(f"y-cell {cell_index} out of range")
        masses = d.values[:, cell_index] * d.grid_x.cell_widths
        grid = d.grid_x
    else:
        raise ValueError("condition_axis must be 'x' or 'y'")
    total = masses.sum()
    if total <= 0:
        raise DegenerateSliceError(f"slice {cell_index} carries no mass")
    cum = np.concatenate([[0.0], np.cumsum(masses) / total])
    cum[-1] = 1.0
    return CDF1D(grid, cum, kind="linear")


@dataclass(frozen=True)
class ConditionalQuantileField:
    """One quantile table per conditioning cell.

    axis='x': tables[i] inverts the conditional CDF along y given x-cell i;
    axis='y': tables[j] inverts the conditional CDF along x given y-cell j.
    """

    axis: str
    tables: tuple[QuantileTable, ...]


def conditional_quantile_field(d: DiscreteDensity2D, condition_axis: str) -> ConditionalQuantileField:
    n = d.grid_x.n_cells if condition_axis == "x" else d.grid_y.n_cells
    tables = tuple(
        QuantileTable.from_cdf(conditional_cdf(d, condition_axis, i)) for i in range(n)
    )
    return ConditionalQuantileField(condition_axis, tables)


def center_levels(masses: np.ndarray) -> np.ndarray:
    """Cumulative-mass levels at cell centers, normalized by the slice mass."""
    cum = np.cumsum(masses)
    v = (cum - 0.5 * masses) / cum[-1]
    return np.clip(v, 1e-15, 1.0)


def _check_marginal_match(p_masses: np.ndarray, target_masses: np.ndarray, label: str) -> None:
    dev = float(np.max(np.abs(p_masses - target_masses)))
    if dev > MARGINAL_MATCH_TOL:
        raise MarginalMismatchError(
            f"{label} marginal of p deviates from the density's by {dev:.3e} "
            f"(tolerance {MARGINAL_MATCH_TOL})"
        )


def map_values_from_field(field: ConditionalQuantileField, p_masses: np.ndarray) -> np.ndarray:
    """Evaluate the conditional-quantile composition slice by slice.

    For axis='x' returns g with g[i, j] = tables[i](levels of p-row i at
    centers); for axis='y' returns h with h[i, j] = tables[j](levels of
    p-column j). Monotone along the free axis by construction.
    """
    if field.axis == "x":
        out = np.empty_like(p_masses)
        for i, table in enumerate(field.tables):
            out[i, :] = table(center_levels(p_masses[i, :]))
    else:
        out = np.empty_like(p_masses)
        for j, table in enumerate(field.tables):
            out[:, j] = table(center_levels(p_masses[:, j]))
    return out


def build_g_map(f: DiscreteDensity2D, p: CouplingDensity | DiscreteDensity2D) -> np.ndarray:
    """g(x, y) on the p-grid; g[i, j] lives on f's second axis."""
    pd = as_density(p)
    if not np.array_equal(pd.grid_x.nodes, f.grid_x.nodes):
        raise ValueError("p and f must share the x-grid")
    _check_marginal_match(pd.cell_masses.sum(axis=1), f.cell_masses.sum(axis=1), "x")
    return map_values_from_field(conditional_quantile_field(f, "x"), pd.cell_masses)


def build_h_map(f_tilde: DiscreteDensity2D, p: CouplingDensity | DiscreteDensity2D) -> np.ndarray:
    """h(x, y) on the p-grid; h[i, j] lives on f~'s first axis."""
    pd = as_density(p)
    if not np.array_equal(pd.grid_y.nodes, f_tilde.grid_y.nodes):
        raise ValueError("p and f~ must share the y-grid")
    _check_marginal_match(pd.cell_masses.sum(axis=0), f_tilde.cell_masses.sum(axis=0), "y")
    return map_values_from_field(conditional_quantile_field(f_tilde, "y"), pd.cell_masses)


@dataclass(frozen=True)
class TransportMapPair:
    g_values: np.ndarray
    h_values: np.ndarray
    source_coupling: CouplingDensity | DiscreteDensity2D


def build_map_pair(
    f: DiscreteDensity2D,
    f_tilde: DiscreteDensity2D,
    p: CouplingDensity | DiscreteDensity2D,
) -> TransportMapPair:
    return TransportMapPair(build_g_map(f, p), build_h_map(f_tilde, p), p)


@dataclass(frozen=True)
class PushforwardReport:
    l1_deviation: float
    max_deviation: float
    binned_masses: np.ndarray
    reference_masses: np.ndarray


def _edge_levels(masses: np.ndarray) -> np.ndarray:
    """Cumulative-mass levels at the cell edges (0 excluded, 1 included)."""
    cum = np.cumsum(masses) / masses.sum()
    return np.clip(cum, 1e-15, 1.0)


def _deposit_slice(
    interval_lo: np.ndarray,
    interval_hi: np.ndarray,
    masses: np.ndarray,
    edges: np.ndarray,
) -> np.ndarray:
    """Spread each mass uniformly over its image interval across the bins."""
    n_bins = edges.size - 1
    out = np.zeros(n_bins)
    for lo, hi, m in zip(interval_lo, interval_hi, masses):
        if hi - lo <= 1e-300:  # degenerate image: whole mass to one cell
            k = min(max(int(np.searchsorted(edges, lo, side="right")) - 1, 0), n_bins - 1)
            out[k] += m
            continue
        k0 = min(max(int(np.searchsorted(edges, lo, side="right")) - 1, 0), n_bins - 1)
        k1 = min(max(int(np.searchsorted(edges, hi, side="left")) - 1, 0), n_bins - 1)
        if k0 == k1:
            out[k0] += m
            continue
        width = hi - lo
        for k in range(k0, k1 + 1):
            overlap = min(hi, edges[k + 1]) - max(lo, edges[k])
            out[k] += m * max(overlap, 0.0) / width
    return out


def pushforward_check(
    f: DiscreteDensity2D,
    p: CouplingDensity | DiscreteDensity2D,
    g: np.ndarray,
) -> PushforwardReport:
    """Law of (X1, g(X1, Y2)) under p, binned onto f's grid, against f.

    Per x-slice, each p-cell's mass is spread uniformly over the image of its
    cell under the map (edge images recomputed from f and p, against which
    the passed g must be consistent). The deposition error vanishes under
    refinement; identically zero when p matches f's conditional structure.
    """
    pd = as_density(p)
    masses = pd.cell_masses
    field = conditional_quantile_field(f, "x")
    binned = np.zeros((f.grid_x.n_cells, f.grid_y.n_cells))
    for i in range(masses.shape[0]):
        levels = _edge_levels(masses[i, :])
        hi = field.tables[i](levels)
        lo = np.concatenate([[field.tables[i].values[0]], hi[:-1]])
        if np.any(g[i, :] < lo - 1e-9) or np.any(g[i, :] > hi + 1e-9):
            raise ValueError("g is inconsistent with (f, p); rebuild it with build_g_map")
        binned[i, :] = _deposit_slice(lo, hi, masses[i, :], f.grid_y.nodes)
    ref = f.cell_masses
    return PushforwardReport(
        l1_deviation=float(np.sum(np.abs(binned - ref))),
        max_deviation=float(np.max(np.abs(binned - ref))),
        binned_masses=binned,
        reference_masses=ref,
    )


def pushforward_check_h(
    f_tilde: DiscreteDensity2D,
    p: CouplingDensity | DiscreteDensity2D,
    h: np.ndarray,
) -> PushforwardReport:
    """Law of (h(X1, Y2), Y2) under p against f~ (transpose of the g check)."""
    pd = as_density(p)
    masses = pd.cell_masses
    field = conditional_quantile_field(f_tilde, "y")
    binned = np.zeros((f_tilde.grid_x.n_cells, f_tilde.grid_y.n_cells))
    for j in range(masses.shape[1]):
        levels = _edge_levels(masses[:, j])
        hi = field.tables[j](levels)
        lo = np.concatenate([[field.tables[j].values[0]], hi[:-1]])
        if np.any(h[:, j] < lo - 1e-9) or np.any(h[:, j] > hi + 1e-9):
            raise ValueError("h is inconsistent with (f~, p); rebuild it with build_h_map")
        binned[:, j] = _deposit_slice(lo, hi, masses[:, j], f_tilde.grid_x.nodes)
    ref = f_tilde.cell_masses
    return PushforwardReport(
        l1_deviation=float(np.sum(np.abs(binned - ref))),
        max_deviation=float(np.max(np.abs(binned - ref))),
        binned_masses=binned,
        reference_masses=ref,
    )


@dataclass(frozen=True)
class CouplingCost:
    total: float
    term_x: float
    term_y: float


def coupling_cost(
    f: DiscreteDensity2D,
    f_tilde: DiscreteDensity2D,
    p: CouplingDensity | DiscreteDensity2D,
    g: np.ndarray,
    h: np.ndarray,
) -> CouplingCost:
    """Expected squared distance of the reconstructed coupling.

    term_y integrates (y - g)^2 against p, term_x integrates (x - h)^2; the
    total equals the reduced objective evaluated at p.
    """
    pd = as_density(p)
    masses = pd.cell_masses
    if g.shape != masses.shape or h.shape != masses.shape:
        raise ValueError("maps must live on p's grid")
    yc = pd.grid_y.centers[None, :]
    xc = pd.grid_x.centers[:, None]
    term_y = float(np.sum(masses * (yc - g) ** 2))
    term_x = float(np.sum(masses * (xc - h) ** 2))
    return CouplingCost(total=term_x + term_y, term_x=term_x, term_y=term_y)
