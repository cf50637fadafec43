"""Step-size and local-update-count schedules.

Two regimes: constant (eta_t = eta, H_t = H) and polynomial decay
(eta_t = eta (1+t)^(-gamma_eta), H_t = ceil(H (1+t)^gamma_h)).  Rounds are
1-indexed; the initial iterate is theta_0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRange, InvalidRound


@dataclass(frozen=True)
class Schedule:
    kind: str  # "constant" | "polynomial"
    eta: float
    h_base: int
    gamma_eta: float = 0.0
    gamma_h: float = 0.0
    eta_h_cap: float | None = None  # optional guard eta*H < 1/a; warning only

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial"):
            raise ValueError(f"unknown schedule kind: {self.kind!r}")
        if not (self.eta > 0.0):
            raise ValueError("eta must be positive")
        if not (int(self.h_base) == self.h_base and self.h_base >= 1):
            raise ValueError("h_base must be a positive integer")
        if self.kind == "polynomial":
            if not (0.5 <= self.gamma_eta < 1.0):
                raise ValueError("gamma_eta must lie in [1/2, 1)")
            if self.gamma_h < 0.0:
                raise ValueError("gamma_h must be nonnegative")
            if self.gamma_eta < self.gamma_h:
                raise ValueError("gamma_eta must be >= gamma_h")
        if self.eta_h_cap is not None and self.eta * self.h_base >= self.eta_h_cap:
            # experiments legitimately probe the stability boundary
            warnings.warn(
                f"eta*H = {self.eta * self.h_base:.4g} exceeds the cap "
                f"{self.eta_h_cap:.4g}; the run may be unstable",
                stacklevel=2,
            )

    @property
    def gamma(self) -> float:
        """Effective decay exponent gamma_eta - gamma_h (0 for constant)."""
        if self.kind == "constant":
            return 0.0
        return self.gamma_eta - self.gamma_h

    def step_size(self, t: int) -> float:
        if t < 1:
            raise InvalidRound(f"round index must be >= 1, got {t}")
        if self.kind == "constant":
            return self.eta
        return self.eta * (1.0 + t) ** (-self.gamma_eta)

    def local_steps(self, t: int) -> int:
        if t < 1:
            raise InvalidRound(f"round index must be >= 1, got {t}")
        if self.kind == "constant" or self.gamma_h == 0.0:
            return int(self.h_base)
        return int(math.ceil(self.h_base * (1.0 + t) ** self.gamma_h))

    def cumulative_eta_h(self, start: int, stop: int) -> float:
        """Sum of eta_i * H_i over rounds i in [start, stop], inclusive."""
        if start < 1:
            raise InvalidRound(f"round index must be >= 1, got {start}")
        if start > stop:
            raise InvalidRange(f"empty round range [{start}, {stop}]")
        if self.kind == "constant":
            return self.eta * self.h_base * (stop - start + 1)
        t = np.arange(start, stop + 1, dtype=float)
        eta = self.eta * (1.0 + t) ** (-self.gamma_eta)
        h = np.ceil(self.h_base * (1.0 + t) ** self.gamma_h)
        return float(np.sum(eta * h))

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "eta": self.eta, "H": int(self.h_base)}
        if self.kind == "polynomial":
            cfg["gamma_eta"] = self.gamma_eta
            cfg["gamma_h"] = self.gamma_h
        return cfg


def schedule_from_config(cfg: dict, eta_h_cap=None) -> Schedule:
    """Parse the experiment-config schedule block {kind, eta, H, gamma_eta, gamma_h}."""
    return Schedule(
        kind=cfg["kind"],
        eta=float(cfg["eta"]),
        h_base=int(cfg["H"]),
        gamma_eta=float(cfg.get("gamma_eta", 0.0)),
        gamma_h=float(cfg.get("gamma_h", 0.0)),
        eta_h_cap=eta_h_cap,
    )
