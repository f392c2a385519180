"""Factory pattern for creating the adversary's deviation signals."""
from abc import ABC, abstractmethod
from typing import Dict, Type

import numpy as np

from robust_game.schemas.scenario import DeviationConfig, DeviationType


class DeviationSignal(ABC):
    """Abstract base class for bounded deviation signals t -> u_tilde(t)."""

    def __init__(self, amplitude: float = 0.0, omega: float = 0.0, decay: float = 0.0, nu2: int = 1):
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        self.decay = float(decay)
        self.nu2 = int(nu2)

    @abstractmethod
    def __call__(self, t: float) -> np.ndarray:
        """
        Evaluate the deviation.

        Args:
            t: Time in seconds

        Returns:
            Deviation vector of length nu2
        """

    @abstractmethod
    def envelope(self) -> float:
        """Upper bound on |u_tilde(t)| over t >= 0."""


class CosineDecaySignal(DeviationSignal):
    """amplitude * cos(omega t) * exp(-decay t) on every adversary channel."""

    def __call__(self, t: float) -> np.ndarray:
        value = self.amplitude * np.cos(self.omega * t) * np.exp(-self.decay * t)
        return np.full(self.nu2, value)

    def envelope(self) -> float:
        return abs(self.amplitude)


class ZeroSignal(DeviationSignal):
    """Pure equilibrium play."""

    def __call__(self, t: float) -> np.ndarray:
        return np.zeros(self.nu2)

    def envelope(self) -> float:
        return 0.0


class DeviationFactory:
    """
    Factory class for creating deviation signals.

    Maps a DeviationType to the signal class implementing it.
    """

    _signals: Dict[DeviationType, Type[DeviationSignal]] = {
        DeviationType.COSINE_DECAY: CosineDecaySignal,
        DeviationType.ZERO: ZeroSignal,
    }

    @classmethod
    def create_signal(cls, config: DeviationConfig, nu2: int = 1) -> DeviationSignal:
        """
        Create a signal instance from its configuration.

        Raises:
            ValueError: If the signal type is not supported
        """
        signal_class = cls._signals.get(config.kind)
        if signal_class is None:
            supported = ", ".join(cls.get_supported_signals())
            raise ValueError(f"Unsupported deviation type: {config.kind}; supported: {supported}")
        return signal_class(amplitude=config.amplitude, omega=config.omega, decay=config.decay, nu2=nu2)

    @classmethod
    def get_supported_signals(cls) -> list[str]:
        """Names of the supported deviation types."""
        return [kind.value for kind in cls._signals.keys()]
