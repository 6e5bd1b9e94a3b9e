"""Scenario description, candidate position grid and field-response channels."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np


class ChannelError(ValueError):
    pass


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt * 1000.0)


@dataclass(frozen=True)
class Scenario:
    """Link-level constants, all in linear SI units (W, m, s)."""

    wavelength: float = 0.06
    array_length: float = 0.36
    num_antennas: int = 6
    num_users: int = 2
    num_paths: int = 10
    pathloss_exponent: float = 2.8
    ref_pathloss: float = 1e-4  # -40 dB at 1 m
    user_distance_range: tuple[float, float] = (20.0, 100.0)
    noise_power: float = 1e-11  # -80 dBm
    p_max: float = 1.0  # 30 dBm
    p_static: float = 1.0  # 30 dBm
    coherence_time: float = 0.25
    d_min: float = 0.03
    d_th: float = 0.03

    def __post_init__(self):
        positive = ("wavelength", "array_length", "pathloss_exponent", "ref_pathloss",
                    "noise_power", "p_max", "p_static", "coherence_time", "d_min")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ChannelError(f"{name} must be positive")
        if self.num_antennas < 1 or self.num_users < 1 or self.num_paths < 1:
            raise ChannelError("num_antennas, num_users and num_paths must be >= 1")
        if self.num_antennas * self.d_min > self.array_length * (1 + 1e-12):
            raise ChannelError(
                f"{self.num_antennas} antennas at spacing {self.d_min} do not fit in "
                f"an array of length {self.array_length}")
        if self.d_th < self.d_min:
            raise ChannelError("d_th must be >= d_min")
        lo, hi = self.user_distance_range
        if not 0 < lo <= hi:
            raise ChannelError("invalid user_distance_range")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class CandidateGrid:
    """Uniform grid ``{0, d_s, ..., (M-1) d_s}`` of reachable antenna positions."""

    step: float
    count: int

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.count) * self.step

    def steps_for(self, distance: float) -> int:
        """Smallest number of grid steps covering at least ``distance``."""
        return int(math.ceil(distance / self.step - 1e-9))

    def steps_within(self, distance: float) -> int:
        """Largest number of grid steps not exceeding ``distance``."""
        return int(math.floor(distance / self.step + 1e-9))


def candidate_grid(scenario: Scenario, d_s: float) -> CandidateGrid:
    if not d_s > 0:
        raise ChannelError("step size must be positive")
    count = int(math.floor(scenario.array_length / d_s + 1e-9))
    if count < 1:
        raise ChannelError("empty grid: array shorter than one step")
    return CandidateGrid(step=d_s, count=count)


def initial_indices(scenario: Scenario, grid: CandidateGrid) -> np.ndarray:
    """Grid indices of the initial positions.

    Antennas sit symmetrically about the grid centre at half-wavelength spacing,
    rounded up to whole steps so the minimum spacing still holds.
    """
    n = scenario.num_antennas
    gap = max(grid.steps_for(scenario.wavelength / 2), grid.steps_for(scenario.d_min))
    span = gap * (n - 1)
    if span > grid.count - 1:
        gap = grid.steps_for(scenario.d_min)
        span = gap * (n - 1)
        if span > grid.count - 1:
            raise ChannelError("initial positions do not fit on the grid")
    start = (grid.count - 1 - span) // 2
    return start + gap * np.arange(n)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Per-user multipath parameters of one channel draw.

    ``gains`` and ``angles`` have shape (K, L_p); ``distances`` has shape (K,).
    """

    gains: np.ndarray
    angles: np.ndarray
    distances: np.ndarray
    wavelength: float
    array_length: float
    seed: object = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_users(self) -> int:
        return self.gains.shape[0]

    @property
    def num_paths(self) -> int:
        return self.gains.shape[1]

    def response(self, positions) -> np.ndarray:
        """Channel matrix of shape ``positions.shape + (K,)``.

        Entry ``[..., k]`` is ``sum_l g_kl exp(j 2 pi x sin(theta_kl) / lambda)``.
        """
        x = np.asarray(positions, dtype=float)
        if np.any(x < -1e-12) or np.any(x > self.array_length * (1 + 1e-12)):
            raise ChannelError("antenna position outside the array")
        wavenumber = 2.0 * np.pi / self.wavelength
        phase = wavenumber * x[..., None, None] * np.sin(self.angles)
        return np.sum(self.gains * np.exp(1j * phase), axis=-1)

    def grid_table(self, grid: CandidateGrid) -> np.ndarray:
        """Channel at every grid point, shape (M, K); cached per grid."""
        key = (grid.step, grid.count)
        if key not in self._cache:
            self._cache[key] = self.response(grid.positions)
        return self._cache[key]

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.seed if isinstance(self.seed, (int, list, type(None))) else str(self.seed),
            "wavelength": self.wavelength,
            "array_length": self.array_length,
            "distances": self.distances.tolist(),
            "angles": self.angles.tolist(),
            "gains_re": self.gains.real.tolist(),
            "gains_im": self.gains.imag.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        d = json.loads(text)
        return cls(gains=np.array(d["gains_re"]) + 1j * np.array(d["gains_im"]),
                   angles=np.array(d["angles"]), distances=np.array(d["distances"]),
                   wavelength=d["wavelength"], array_length=d["array_length"], seed=d["seed"])


def sample_channel(scenario: Scenario, seed) -> ChannelRealization:
    """Draw user distances, departure angles and CSCG path gains.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`; the same
    seed always yields the same realization.
    """
    rng = np.random.default_rng(seed)
    K, L = scenario.num_users, scenario.num_paths
    lo, hi = scenario.user_distance_range
    distances = rng.uniform(lo, hi, size=K)
    angles = rng.uniform(-np.pi / 2, np.pi / 2, size=(K, L))
    var = scenario.ref_pathloss * distances ** (-scenario.pathloss_exponent) / L
    gains = (rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L))) \
        * np.sqrt(var[:, None] / 2.0)
    if isinstance(seed, np.random.SeedSequence):
        seed = list(seed.entropy) if isinstance(seed.entropy, (list, tuple)) else seed.entropy
    return ChannelRealization(gains=gains, angles=angles, distances=distances,
                              wavelength=scenario.wavelength,
                              array_length=scenario.array_length, seed=seed)


def channel_vector(real: ChannelRealization, positions, k: int) -> np.ndarray:
    """Channel from the antennas at ``positions`` to user ``k``, length N."""
    return real.response(positions)[:, k]
