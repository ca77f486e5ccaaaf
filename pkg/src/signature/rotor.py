"""
Rotating-blade point-scatterer model for rotor micro-Doppler.

Each blade contributes a single scatterer at its tip. Blade length
integration and blade shadowing are not modeled.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..core.errors import ConfigurationError


@dataclass(frozen=True)
class RotorSpec:
    """A rotor with identical, equally spaced blades."""

    n_blades: int
    blade_radius_m: float
    rotation_hz: float
    plane_normal: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    tip_amplitude: complex = 1.0
    phase0_rad: float = 0.0

    def __post_init__(self):
        """Validate rotor parameters."""
        if int(self.n_blades) != self.n_blades or self.n_blades < 1:
            raise ConfigurationError("n_blades must be an integer >= 1", "rotor.n_blades")
        if not self.blade_radius_m > 0:
            raise ConfigurationError("blade_radius_m must be positive", "rotor.blade_radius_m")
        normal = np.asarray(self.plane_normal, dtype=float)
        if normal.shape != (3,) or abs(np.linalg.norm(normal) - 1.0) > 1e-9:
            raise ConfigurationError("plane_normal must be a unit 3-vector", "rotor.plane_normal")
        if not np.isfinite(complex(self.tip_amplitude)):
            raise ConfigurationError("tip_amplitude must be finite", "rotor.tip_amplitude")

    @property
    def reference_direction(self) -> np.ndarray:
        """Fixed unit vector in the rotation plane (blade 0 at zero angle)."""
        normal = np.asarray(self.plane_normal, dtype=float)
        helper = np.array([1.0, 0.0, 0.0])
        if abs(normal @ helper) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        direction = np.cross(normal, helper)
        return direction / np.linalg.norm(direction)

    def blade_angles(self, t) -> np.ndarray:
        """Blade rotation angles, shape t.shape + (n_blades,)."""
        t = np.asarray(t, dtype=float)
        offsets = 2.0 * np.pi * np.arange(self.n_blades) / self.n_blades
        base = 2.0 * np.pi * self.rotation_hz * t + self.phase0_rad
        return base[..., None] + offsets

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary representation."""
        amplitude = complex(self.tip_amplitude)
        return {
            'n_blades': self.n_blades,
            'blade_radius_m': self.blade_radius_m,
            'rotation_hz': self.rotation_hz,
            'plane_normal': list(self.plane_normal),
            'tip_amplitude': [amplitude.real, amplitude.imag],
            'phase0_rad': self.phase0_rad,
        }


def rotor_tip_positions(rotor: RotorSpec, hub_pos, t) -> np.ndarray:
    """
    Blade tip positions for hub positions and times.

    hub_pos has shape (..., 3) and t shape (...); the result has shape
    (..., n_blades, 3).
    """
    angles = rotor.blade_angles(t)
    rotvecs = angles[..., None] * np.asarray(rotor.plane_normal, dtype=float)
    arm = rotor.blade_radius_m * rotor.reference_direction
    tips = Rotation.from_rotvec(rotvecs.reshape(-1, 3)).apply(arm)
    return np.asarray(hub_pos, dtype=float)[..., None, :] + tips.reshape(angles.shape + (3,))


def rotor_scatterers(rotor: RotorSpec, hub_pos, t: float) -> List[Tuple[np.ndarray, complex]]:
    """One (position, complex gain) pair per blade tip at time t."""
    tips = rotor_tip_positions(rotor, np.asarray(hub_pos, dtype=float), float(t))
    gain = complex(rotor.tip_amplitude)
    return [(tip, gain) for tip in tips]
