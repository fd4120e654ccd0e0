"""Threshold scattering matrix and polarization matrix of the junction.

The threshold problem is solved on ``Omega^R`` with Robin conditions on the
six cuts; reflection/transmission coefficients are read off the cut faces
and assembled into the symmetric 6x6 matrix ``S``.  The polarization matrix
is its Cayley transform ``M = i (I + S)^{-1} (I - S)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .mesh import JunctionGrid, build_junction_grid
from .nearfield import observed_order
from .operators import assemble_robin_scattering, incoming_wave
from .solvers import solve_linear_complex

__all__ = [
    "ScatteringField",
    "ScatteringData",
    "solve_scattering",
    "extract_coefficients",
    "build_S",
    "cayley_transform",
    "cayley_to_M",
    "inverse_cayley",
    "reduce_M",
    "pattern_masks",
    "scattering_matrix_full",
    "compute_scattering_data",
    "scattering_convergence",
    "NearResonanceWarning",
]

RESONANCE_NORM = 1e3
OPPOSITE = (3, 4, 5, 0, 1, 2)


class NearResonanceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class ScatteringField:
    grid: JunctionGrid
    values: np.ndarray
    source_branch: int
    spectral_parameter: float
    residual: float

    @property
    def R(self) -> float:
        return self.grid.R


def solve_scattering(
    R: float = 2.5,
    h: float = 1 / 12,
    spectral_parameter: float | None = None,
    source_branch: int = 1,
    tol: float = 1e-8,
    grid: JunctionGrid | None = None,
) -> ScatteringField:
    """Field ``v_j`` excited by the incoming wave ``w_j^-`` of one branch."""
    grid = build_junction_grid(R, h) if grid is None else grid
    op, rhs = assemble_robin_scattering(grid, spectral_parameter=spectral_parameter, source_branch=source_branch)
    v = solve_linear_complex(op, rhs, tol=tol)
    residual = float(np.linalg.norm(op.matrix @ v - rhs) / np.linalg.norm(rhs))
    return ScatteringField(grid, v, source_branch, op.meta["spectral_parameter"], residual)


def _face_integral(grid: JunctionGrid, values: np.ndarray, face: int, weight: np.ndarray) -> complex:
    nodes = grid.face_nodes[face - 1]
    return complex(grid.h**2 * np.sum(values[nodes] * weight))


def _coefficient(field: ScatteringField, target: int) -> complex:
    grid = field.grid
    R = grid.R
    nodes = grid.face_nodes[target - 1]
    w = incoming_wave(grid.points[nodes], target)
    v = field.values[nodes]
    if target == field.source_branch:
        v = v - w
    return 2.0 / (R**2 + 1) * complex(grid.h**2 * np.sum(v * w))


def extract_coefficients(field: ScatteringField) -> tuple[complex, complex, complex]:
    """``(r, t, t_perp)`` from face integrals against the incoming waves.

    With source branch ``j``, ``r`` is read on ``Gamma_j``, ``t`` on the
    opposite face and ``t_perp`` on the next perpendicular face.
    """
    j = field.source_branch
    opposite = OPPOSITE[j - 1] + 1
    perpendicular = (j % 3) + 1
    return _coefficient(field, j), _coefficient(field, opposite), _coefficient(field, perpendicular)


def pattern_masks() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean masks of the diagonal, opposite-branch and perpendicular entries."""
    diag = np.eye(6, dtype=bool)
    opp = np.zeros((6, 6), dtype=bool)
    for j in range(6):
        opp[j, OPPOSITE[j]] = True
    perp = ~(diag | opp)
    return diag, opp, perp


def build_S(r: complex, t: complex, t_perp: complex) -> np.ndarray:
    diag, opp, perp = pattern_masks()
    S = np.zeros((6, 6), dtype=complex)
    S[diag] = r
    S[opp] = t
    S[perp] = t_perp
    return S


def cayley_transform(S: np.ndarray) -> np.ndarray:
    """Complex ``i (I + S)^{-1} (I - S)`` without taking the real part."""
    I = np.eye(S.shape[0])
    return 1j * np.linalg.solve(I + S, I - S)


def cayley_to_M(S: np.ndarray, imag_tol: float = 0.02) -> np.ndarray:
    """Real polarization matrix from ``S``.

    Warns with :class:`NearResonanceWarning` when ``||(I + S)^{-1}|| > 1e3``
    and when the discarded imaginary part exceeds ``imag_tol``.
    """
    I = np.eye(S.shape[0])
    inv_norm = np.linalg.norm(np.linalg.inv(I + S), 2)
    if inv_norm > RESONANCE_NORM:
        warnings.warn(
            f"||(I + S)^-1|| = {inv_norm:.3e}: S is close to a threshold resonance",
            NearResonanceWarning,
            stacklevel=2,
        )
    M = cayley_transform(S)
    imag = np.abs(M.imag).max()
    if imag > imag_tol:
        warnings.warn(f"Cayley transform has imaginary part {imag:.3e} > {imag_tol}", stacklevel=2)
    return M.real.copy()


def inverse_cayley(M: np.ndarray) -> np.ndarray:
    """``S = (iI - M)(iI + M)^{-1}``, the inverse of :func:`cayley_transform`."""
    I = np.eye(M.shape[0])
    return np.linalg.solve((1j * I + M).T, (1j * I - M).T).T


def reduce_M(M: np.ndarray) -> tuple[float, float, float, float]:
    """Class averages ``(r_m, t_m, t_perp_m)`` and the worst deviation from them."""
    out = []
    defect = 0.0
    for mask in pattern_masks():
        avg = M[mask].mean()
        defect = max(defect, float(np.abs(M[mask] - avg).max()))
        out.append(avg)
    r_m, t_m, tp_m = (float(np.real(x)) for x in out)
    return r_m, t_m, tp_m, defect


def scattering_matrix_full(
    R: float = 2.5, h: float = 1 / 12, spectral_parameter: float | None = None, tol: float = 1e-8
) -> np.ndarray:
    """All 36 entries ``s_jk`` from six solves sharing one factorisation."""
    grid = build_junction_grid(R, h)
    op, _ = assemble_robin_scattering(grid, spectral_parameter=spectral_parameter)
    rhs = np.stack(
        [assemble_robin_scattering(grid, spectral_parameter=spectral_parameter, source_branch=j)[1]
         for j in range(1, 7)],
        axis=1,
    )
    V = solve_linear_complex(op, rhs, tol=tol)
    S = np.zeros((6, 6), dtype=complex)
    for j in range(6):
        f = ScatteringField(grid, V[:, j], j + 1, op.meta["spectral_parameter"], 0.0)
        for k in range(6):
            S[j, k] = _coefficient(f, k + 1)
    return S


@dataclass
class ScatteringData:
    """Coefficients, matrices and their diagnostics for one (R, h) run."""

    R: float
    h: float
    r: complex
    t: complex
    t_perp: complex
    S: np.ndarray
    M: np.ndarray
    r_m: float
    t_m: float
    t_perp_m: float
    pattern_defect: float
    unitarity_defect: float
    symmetry_defect: float
    max_imag_M: float
    roundtrip_error: float
    inverse_norm: float
    field_residual: float
    spectral_parameter: float
    meta: dict = field(default_factory=dict)

    @property
    def S_eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(self.S)
        return ev[np.lexsort((ev.imag, ev.real))]

    def to_record(self) -> dict:
        c = lambda z: [float(np.real(z)), float(np.imag(z))]  # noqa: E731
        return {
            "R": self.R,
            "h": self.h,
            "spectral_parameter": self.spectral_parameter,
            "r": c(self.r),
            "t": c(self.t),
            "t_perp": c(self.t_perp),
            "r_m": self.r_m,
            "t_m": self.t_m,
            "t_perp_m": self.t_perp_m,
            "S_eigenvalues": [c(z) for z in self.S_eigenvalues],
            "diagnostics": {
                "unitarity_defect": self.unitarity_defect,
                "symmetry_defect": self.symmetry_defect,
                "max_imag_M": self.max_imag_M,
                "pattern_defect": self.pattern_defect,
                "cayley_roundtrip_error": self.roundtrip_error,
                "inverse_norm_I_plus_S": self.inverse_norm,
                "field_residual": self.field_residual,
            },
            **self.meta,
        }


def scattering_data_from_S(S: np.ndarray, R: float, h: float, spectral_parameter: float = float("nan"),
                           field_residual: float = 0.0) -> ScatteringData:
    I = np.eye(6)
    Mc = cayley_transform(S)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        M = cayley_to_M(S)
    r_m, t_m, tp_m, defect = reduce_M(M)
    return ScatteringData(
        R=R, h=h, r=complex(S[0, 0]), t=complex(S[0, 3]), t_perp=complex(S[0, 1]), S=S, M=M,
        r_m=r_m, t_m=t_m, t_perp_m=tp_m, pattern_defect=defect,
        unitarity_defect=float(np.abs(S @ S.conj().T - I).max()),
        symmetry_defect=float(np.abs(S - S.T).max()),
        max_imag_M=float(np.abs(Mc.imag).max()),
        roundtrip_error=float(np.abs(inverse_cayley(Mc) - S).max()),
        inverse_norm=float(np.linalg.norm(np.linalg.inv(I + S), 2)),
        field_residual=field_residual,
        spectral_parameter=spectral_parameter,
    )


def compute_scattering_data(
    R: float = 2.5,
    h: float = 1 / 12,
    spectral_parameter: float | None = None,
    full: bool = False,
    tol: float = 1e-8,
) -> ScatteringData:
    """Scattering pipeline: solve, extract, build ``S``, Cayley, reduce.

    With ``full=True`` every column of ``S`` is computed and the symmetry
    pattern is measured instead of assumed.
    """
    if full:
        S = scattering_matrix_full(R, h, spectral_parameter, tol)
        grid = build_junction_grid(R, h)
        lam = assemble_robin_scattering(grid, spectral_parameter=spectral_parameter)[0].meta["spectral_parameter"]
        data = scattering_data_from_S(S, R, h, lam)
        data.meta["full"] = True
        return data
    f = solve_scattering(R, h, spectral_parameter=spectral_parameter, tol=tol)
    r, t, tp = extract_coefficients(f)
    data = scattering_data_from_S(build_S(r, t, tp), R, h, f.spectral_parameter, f.residual)
    data.meta["full"] = False
    return data


def scattering_convergence(runs: list[ScatteringData]) -> dict:
    """Observed order and Richardson estimate of ``(r, t, t_perp)`` from three runs."""
    runs = sorted(runs, key=lambda d: -d.h)
    if len(runs) < 3:
        raise ValueError("need three spacings")
    hs = [d.h for d in runs]
    out = {"spacings": hs}
    for name in ("r", "t", "t_perp"):
        vals = [getattr(d, name) for d in runs]
        p = observed_order(hs, vals)
        h1, h2 = hs[-2], hs[-1]
        v1, v2 = vals[-2], vals[-1]
        est = v2 + (v2 - v1) * h2**p / (h1**p - h2**p)
        out[name] = {"order": p, "extrapolated": [float(est.real), float(est.imag)]}
    return out
