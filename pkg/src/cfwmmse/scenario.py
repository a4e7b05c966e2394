"""Network geometry and large-scale fading on a wrap-around square."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PathLossModel:
    """Three-slope path loss with a COST-231 Hata constant term.

    Distances are in meters; the slope law is evaluated in kilometers as in
    the usual cell-free setup (0, 20 and 35 dB/decade for the three regions).
    """

    d0: float = 10.0
    d1: float = 50.0
    carrier_mhz: float = 1900.0
    ap_height: float = 15.0
    user_height: float = 1.65
    exponents: tuple[float, float, float] = (0.0, 2.0, 3.5)

    def __post_init__(self):
        if not 0 < self.d0 < self.d1:
            raise ValueError(f"need 0 < d0 < d1, got d0={self.d0}, d1={self.d1}")

    @property
    def fixed_loss_db(self) -> float:
        f = np.log10(self.carrier_mhz)
        return float(
            46.3
            + 33.9 * f
            - 13.82 * np.log10(self.ap_height)
            - (1.1 * f - 0.7) * self.user_height
            + (1.56 * f - 0.8)
        )

    def path_loss_db(self, distance):
        """Path gain in dB (negative numbers) for distances in meters."""
        d = np.asarray(distance, dtype=float) / 1000.0
        d0, d1 = self.d0 / 1000.0, self.d1 / 1000.0
        _, n1, n2 = self.exponents
        # the innermost region is flat, so its exponent only matters at d0
        near = -self.fixed_loss_db - 10 * (n2 - n1) * np.log10(d1) - 10 * n1 * np.log10(d0)
        mid = -self.fixed_loss_db - 10 * (n2 - n1) * np.log10(d1) - 10 * n1 * np.log10(np.maximum(d, d0))
        far = -self.fixed_loss_db - 10 * n2 * np.log10(np.maximum(d, d1))
        return np.where(d <= d0, near, np.where(d <= d1, mid, far))


@dataclass(frozen=True, eq=False)
class Scenario:
    area_side: float
    ap_positions: np.ndarray
    user_positions: np.ndarray
    antennas_per_ap: int
    beta: np.ndarray
    shadow_sigma_db: float = 4.0
    rng_seed: int = 0
    path_loss: PathLossModel = field(default_factory=PathLossModel)

    @property
    def M(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def K(self) -> int:
        return self.user_positions.shape[0]

    @property
    def L(self) -> int:
        return self.antennas_per_ap

    def distances(self) -> np.ndarray:
        return wrap_distance(
            self.ap_positions[:, None, :], self.user_positions[None, :, :], self.area_side
        )

    def to_dict(self) -> dict:
        pl = asdict(self.path_loss)
        pl["exponents"] = list(pl["exponents"])
        return {
            "area_side": self.area_side,
            "ap_positions": self.ap_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "antennas_per_ap": self.antennas_per_ap,
            "beta": self.beta.tolist(),
            "shadow_sigma_db": self.shadow_sigma_db,
            "rng_seed": self.rng_seed,
            "path_loss": pl,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        pl = dict(d.get("path_loss", {}))
        if "exponents" in pl:
            pl["exponents"] = tuple(pl["exponents"])
        return cls(
            area_side=float(d["area_side"]),
            ap_positions=np.asarray(d["ap_positions"], dtype=float).reshape(-1, 2),
            user_positions=np.asarray(d["user_positions"], dtype=float).reshape(-1, 2),
            antennas_per_ap=int(d["antennas_per_ap"]),
            beta=np.asarray(d["beta"], dtype=float),
            shadow_sigma_db=float(d["shadow_sigma_db"]),
            rng_seed=int(d["rng_seed"]),
            path_loss=PathLossModel(**pl),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


def wrap_distance(a, b, area_side: float):
    """Toroidal Euclidean distance between points on a square of side `area_side`.

    Broadcasts over leading dimensions; the last axis holds (x, y).
    """
    delta = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    delta = np.minimum(delta, area_side - delta)
    return np.sqrt(np.sum(delta**2, axis=-1))


def large_scale_fading(pl_db, shadow_draw, shadow_sigma_db: float):
    """Linear large-scale coefficient PL * 10^(sigma*y/10)."""
    if np.any(np.asarray(shadow_sigma_db) < 0):
        raise ValueError("shadow_sigma_db must be non-negative")
    return 10 ** (np.asarray(pl_db) / 10) * 10 ** (shadow_sigma_db * np.asarray(shadow_draw) / 10)


def scenario_from_positions(
    ap_positions,
    user_positions,
    L: int,
    area_side: float,
    shadow_draws,
    shadow_sigma_db: float = 4.0,
    path_loss: PathLossModel | None = None,
    seed: int = 0,
) -> Scenario:
    path_loss = path_loss or PathLossModel()
    ap_positions = np.asarray(ap_positions, dtype=float).reshape(-1, 2)
    user_positions = np.asarray(user_positions, dtype=float).reshape(-1, 2)
    dist = wrap_distance(ap_positions[:, None, :], user_positions[None, :, :], area_side)
    pl_db = path_loss.path_loss_db(dist)
    # shadowing only beyond the second breakpoint
    y = np.where(dist > path_loss.d1, np.asarray(shadow_draws, dtype=float), 0.0)
    beta = large_scale_fading(pl_db, y, shadow_sigma_db)
    beta.setflags(write=False)
    return Scenario(
        area_side=float(area_side),
        ap_positions=ap_positions,
        user_positions=user_positions,
        antennas_per_ap=int(L),
        beta=beta,
        shadow_sigma_db=float(shadow_sigma_db),
        rng_seed=int(seed),
        path_loss=path_loss,
    )


def generate_scenario(
    M: int,
    K: int,
    L: int,
    area_side: float = 1000.0,
    seed: int = 0,
    shadow_sigma_db: float = 4.0,
    path_loss: PathLossModel | None = None,
) -> Scenario:
    """Drop M APs and K users uniformly on the square and compute beta."""
    if min(M, K, L) < 1:
        raise ValueError(f"M, K, L must be >= 1, got {(M, K, L)}")
    if area_side <= 0:
        raise ValueError("area_side must be positive")
    rng = np.random.default_rng(seed)
    aps = rng.uniform(0, area_side, size=(M, 2))
    users = rng.uniform(0, area_side, size=(K, 2))
    y = rng.standard_normal((M, K))
    return scenario_from_positions(
        aps, users, L, area_side, y, shadow_sigma_db=shadow_sigma_db, path_loss=path_loss, seed=seed
    )
