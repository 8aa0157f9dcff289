"""Data conditioning: truncated-SVD denoising of snapshots, rank reduction
of regression systems, and the complex/real system mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .grid import GridError, SnapshotGrid

__all__ = [
    "PODResult",
    "ComplexSystem",
    "pod_denoise",
    "svd_reduce",
    "complex_to_real",
    "real_to_complex",
]

# Relative singular-value cutoff defining the numerical rank for "full".
FULL_RANK_CUTOFF = 1e-12


@dataclass(frozen=True)
class PODResult:
    """Orthonormal spatial modes, their singular values, and the temporal
    coefficients of a truncated snapshot decomposition."""

    modes: np.ndarray
    singular_values: np.ndarray
    coefficients: np.ndarray
    energy_ratio: float
    rank: int


def pod_denoise(
    grid: SnapshotGrid, threshold: float = 0.9999
) -> tuple[SnapshotGrid, PODResult]:
    """Project the snapshot matrix onto its leading modes.

    The rank is the smallest r whose cumulative squared-singular-value
    energy reaches ``threshold``. Returns the filtered grid and the
    decomposition. The projection discards directions with little variance,
    which is where uncorrelated noise lives.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    values = np.asarray(grid.values)
    modes, sing, _ = np.linalg.svd(values, full_matrices=False)
    energy = sing**2
    total = float(energy.sum())
    if total == 0:
        raise GridError("cannot decompose an identically zero snapshot")
    cumulative = np.cumsum(energy) / total
    rank = int(np.searchsorted(cumulative, threshold - 1e-15) + 1)
    rank = min(rank, sing.size)
    psi = modes[:, :rank]
    coeffs = psi.conj().T @ values
    denoised = psi @ coeffs
    result = PODResult(
        modes=psi,
        singular_values=sing[:rank].copy(),
        coefficients=coeffs,
        energy_ratio=float(cumulative[rank - 1]),
        rank=rank,
    )
    return grid.with_values(denoised), result


def svd_reduce(dictionary: Dictionary, rank: int | str = "full") -> Dictionary:
    """Project the regression system onto the leading left singular vectors
    of phi.

    With ``rank="full"`` (the numerical rank) least-squares solutions of the
    reduced and original systems agree; smaller ranks trade fidelity for
    size and are the caller's responsibility. Row/grid provenance is lost.
    """
    phi = np.asarray(dictionary.phi)
    y = np.asarray(dictionary.y)
    u, sing, _ = np.linalg.svd(phi, full_matrices=False)
    if isinstance(rank, str):
        if rank != "full":
            raise ValueError(f"rank must be an integer or 'full', got {rank!r}")
        r = int(np.sum(sing > FULL_RANK_CUTOFF * sing[0])) if sing.size else 0
    else:
        r = int(rank)
        if not 1 <= r <= min(phi.shape):
            raise ValueError(f"rank must be in 1..{min(phi.shape)}, got {rank}")
    psi = u[:, :r]
    return Dictionary(
        phi=psi.conj().T @ phi,
        y=psi.conj().T @ y,
        column_names=dictionary.column_names,
        output_name=dictionary.output_name,
        sample_coords=None,
    )


@dataclass(frozen=True)
class ComplexSystem:
    """A complex regression pair, optionally with column names."""

    phi_c: np.ndarray
    y_c: np.ndarray
    column_names: tuple[str, ...] = ()
    output_name: str = "y"

    def __post_init__(self) -> None:
        phi = np.atleast_2d(np.asarray(self.phi_c, dtype=complex))
        y = np.asarray(self.y_c, dtype=complex)
        if phi.shape[0] != y.shape[0]:
            raise ValueError(f"phi_c has {phi.shape[0]} rows but y_c has {y.shape[0]}")
        names = tuple(self.column_names)
        if names and len(names) != phi.shape[1]:
            raise ValueError(
                f"{len(names)} column names for {phi.shape[1]} columns"
            )
        if not names:
            names = tuple(f"c{j}" for j in range(phi.shape[1]))
        object.__setattr__(self, "phi_c", phi)
        object.__setattr__(self, "y_c", y)
        object.__setattr__(self, "column_names", names)

    @classmethod
    def from_dictionary(cls, dictionary: Dictionary) -> "ComplexSystem":
        return cls(
            phi_c=np.asarray(dictionary.phi, dtype=complex),
            y_c=np.asarray(dictionary.y, dtype=complex),
            column_names=dictionary.column_names,
            output_name=dictionary.output_name,
        )


def complex_to_real(system: ComplexSystem) -> Dictionary:
    """One-to-one real embedding of a complex system.

    ``y = [Re y~; Im y~]`` and ``phi = [[Re, -Im], [Im, Re]]`` so that
    real solutions stack the real parts of the complex coefficients on top
    of their imaginary parts, and residual norms are preserved.
    """
    p, q = system.phi_c.real, system.phi_c.imag
    phi = np.block([[p, -q], [q, p]])
    y = np.concatenate([system.y_c.real, system.y_c.imag])
    names = tuple(f"Re({name})" for name in system.column_names) + tuple(
        f"Im({name})" for name in system.column_names
    )
    return Dictionary(
        phi=phi,
        y=y,
        column_names=names,
        output_name=system.output_name,
        sample_coords=None,
    )


def real_to_complex(theta: np.ndarray) -> np.ndarray:
    """Fold a stacked real coefficient vector back into complex form."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size % 2 != 0:
        raise ValueError(f"theta must be a 1-D vector of even length, got {theta.shape}")
    half = theta.size // 2
    return theta[:half] + 1j * theta[half:]
