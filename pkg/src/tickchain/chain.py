"""Model definitions: chain specifications, disorder, and the effective
non-Hermitian single-excitation Hamiltonian.

Conventions: hbar = 1, on-site energy rotated away, boundary rate Gamma = 1
fixes the units unless stated otherwise.  Occupations f_L, f_R are the lead
Fermi factors at the chain's transition energy; the entropy-per-tick
parametrization f_L = 1/(1+e^{-Sigma}) = 1 - f_R covers the symmetric-bias
case.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidSpecError

__all__ = [
    "ChainSpec",
    "EffectiveHamiltonian",
    "stream",
    "build_effective_hamiltonian",
    "apply_onsite_disorder",
    "apply_coupling_disorder",
]


def stream(master_seed: int, *indices: int) -> np.random.Generator:
    """Independent counter-based RNG stream keyed by (master_seed, indices).

    Philox streams derived this way are reproducible independently of
    execution order or thread count.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(master_seed),) + tuple(int(i) for i in indices))))


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """A chain instance: the single source of truth for one model.

    Attributes
    ----------
    n_sites : int
        Number of sites N >= 1.
    couplings : array of float, shape (N-1,)
        Nearest-neighbour couplings g_i > 0 (energy units).
    boundary_rate : float
        Lead coupling Gamma > 0; default 1 (unit fix).
    occ_left, occ_right : float
        Lead occupations f_L, f_R in [0, 1]; default full bias (1, 0).
    entropy : float or None
        Dissipated entropy per tick Sigma >= 0.  When given, it must be
        consistent with f_L = 1/(1+e^{-Sigma}) and f_R = 1 - f_L.
    seed : int or None
        Optional bookkeeping seed carried through (de)serialization.
    """

    n_sites: int
    couplings: np.ndarray
    boundary_rate: float = 1.0
    occ_left: float = 1.0
    occ_right: float = 0.0
    entropy: float | None = None
    seed: int | None = None

    def __post_init__(self):
        n = int(self.n_sites)
        if n < 1:
            raise InvalidSpecError(f"n_sites must be positive, got {n}")
        g = np.atleast_1d(np.asarray(self.couplings, dtype=float)).copy()
        if g.shape != (n - 1,):
            raise InvalidSpecError(f"expected {n - 1} couplings, got shape {g.shape}")
        if g.size and (not np.all(np.isfinite(g)) or np.any(g < 0.0)):
            raise InvalidSpecError("couplings must be finite and nonnegative")
        if not (self.boundary_rate > 0.0 and math.isfinite(self.boundary_rate)):
            raise InvalidSpecError(f"boundary_rate must be > 0, got {self.boundary_rate}")
        for name, f in (("occ_left", self.occ_left), ("occ_right", self.occ_right)):
            if not (0.0 <= f <= 1.0):
                raise InvalidSpecError(f"{name} must lie in [0, 1], got {f}")
        if self.entropy is not None:
            if self.entropy < 0.0:
                raise InvalidSpecError("entropy must be >= 0")
            f_l = 1.0 / (1.0 + math.exp(-self.entropy))
            if abs(self.occ_left - f_l) > 1e-12 or abs(self.occ_left + self.occ_right - 1.0) > 1e-12:
                raise InvalidSpecError("entropy inconsistent with occupations: need f_L = 1/(1+e^-Sigma), f_R = 1-f_L")
        g.setflags(write=False)
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "couplings", g)

    @classmethod
    def from_entropy(cls, n_sites: int, couplings, sigma: float, boundary_rate: float = 1.0, seed: int | None = None) -> "ChainSpec":
        """Symmetric finite-bias spec with f_L = 1/(1+e^-Sigma), f_R = 1-f_L."""
        if math.isinf(sigma):
            return cls(n_sites, couplings, boundary_rate, 1.0, 0.0, None, seed)
        f_l = 1.0 / (1.0 + math.exp(-sigma))
        return cls(n_sites, couplings, boundary_rate, f_l, 1.0 - f_l, sigma, seed)

    def with_couplings(self, couplings) -> "ChainSpec":
        return ChainSpec(self.n_sites, couplings, self.boundary_rate, self.occ_left, self.occ_right, self.entropy, self.seed)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["couplings"] = [float(x) for x in self.couplings]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        return cls(
            n_sites=d["n_sites"],
            couplings=np.asarray(d["couplings"], dtype=float),
            boundary_rate=d.get("boundary_rate", 1.0),
            occ_left=d.get("occ_left", 1.0),
            occ_right=d.get("occ_right", 0.0),
            entropy=d.get("entropy"),
            seed=d.get("seed"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ChainSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """Tridiagonal non-Hermitian single-excitation Hamiltonian.

    The diagonal carries the on-site shifts (real) plus -i*Gamma/2 at the
    two boundary sites (-i*Gamma for N = 1, where both leads attach).
    """

    matrix: np.ndarray
    onsite_shifts: np.ndarray
    gamma_left: float
    gamma_right: float

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]

    @property
    def couplings(self) -> np.ndarray:
        return np.diag(self.matrix, 1).real

    @property
    def hermitian_part(self) -> np.ndarray:
        """The Hermitian hopping matrix h (couplings plus real shifts)."""
        return self.matrix.real.copy()

    def validate(self, atol: float = 1e-12) -> None:
        m = self.matrix
        n = m.shape[0]
        sym = m - np.diag(np.diag(m))
        if not np.allclose(sym, sym.real, atol=atol) or not np.allclose(sym, sym.T, atol=atol):
            raise InvalidSpecError("off-diagonal part must be real symmetric")
        if np.count_nonzero(sym - np.diag(np.diag(sym, 1), 1) - np.diag(np.diag(sym, -1), -1)):
            raise InvalidSpecError("matrix must be tridiagonal")
        im = np.diag(m).imag
        expect = np.zeros(n)
        if n == 1:
            expect[0] = -(self.gamma_left + self.gamma_right) / 2.0
        else:
            expect[0] = -self.gamma_left / 2.0
            expect[-1] = -self.gamma_right / 2.0
        if not np.allclose(im, expect, atol=atol):
            raise InvalidSpecError("diagonal imaginary parts must be -Gamma/2 at the corners and 0 elsewhere")
        if not np.allclose(np.diag(m).real, self.onsite_shifts, atol=atol):
            raise InvalidSpecError("diagonal real parts must equal the on-site shifts")


def build_effective_hamiltonian(spec: ChainSpec, shifts=None) -> EffectiveHamiltonian:
    """Assemble h_eff: couplings on the off-diagonals, -i*Gamma/2 on the
    corner diagonal entries (summed to -i*Gamma when N = 1), real shifts on
    the diagonal."""
    n = spec.n_sites
    if shifts is None:
        shifts = np.zeros(n)
    shifts = np.asarray(shifts, dtype=float)
    if shifts.shape != (n,):
        raise InvalidSpecError(f"expected {n} on-site shifts, got shape {shifts.shape}")
    gam = spec.boundary_rate
    m = np.zeros((n, n), dtype=complex)
    idx = np.arange(n - 1)
    m[idx, idx + 1] = spec.couplings
    m[idx + 1, idx] = spec.couplings
    m[np.arange(n), np.arange(n)] = shifts
    if n == 1:
        m[0, 0] += -1j * gam
    else:
        m[0, 0] += -0.5j * gam
        m[-1, -1] += -0.5j * gam
    m.setflags(write=False)
    shifts = shifts.copy()
    shifts.setflags(write=False)
    return EffectiveHamiltonian(m, shifts, gam, gam)


def apply_onsite_disorder(spec: ChainSpec, strength: float, rng: np.random.Generator):
    """Draw i.i.d. uniform on-site shifts on [-W/2, W/2] (N draws).

    Returns (spec, shifts); the spec itself is unchanged since shifts live
    on the Hamiltonian diagonal.
    """
    if strength < 0.0:
        raise InvalidSpecError("disorder strength W must be >= 0")
    shifts = rng.uniform(-strength / 2.0, strength / 2.0, size=spec.n_sites)
    return spec, shifts


def apply_coupling_disorder(spec: ChainSpec, strength: float, rng: np.random.Generator) -> ChainSpec:
    """Perturb each coupling by i.i.d. uniform noise on [-Delta/2, Delta/2].

    Rejects strengths that could produce non-positive couplings rather than
    clipping them.
    """
    if strength < 0.0:
        raise InvalidSpecError("disorder strength Delta must be >= 0")
    if spec.n_sites > 1 and strength >= 2.0 * float(np.min(spec.couplings)):
        raise InvalidSpecError("coupling disorder too large: Delta must be < 2*min(g) to keep couplings positive")
    noise = rng.uniform(-strength / 2.0, strength / 2.0, size=spec.n_sites - 1)
    return spec.with_couplings(spec.couplings + noise)
