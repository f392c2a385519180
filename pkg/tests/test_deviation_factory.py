"""Unit tests for the deviation signal factory."""
import numpy as np
import pytest

from robust_game.schemas.scenario import DeviationConfig, DeviationType
from robust_game.utils.deviation_factory import CosineDecaySignal, DeviationFactory, ZeroSignal


class TestSignals:
    """Test suite for individual signal classes."""

    def test_cosine_decay_at_zero(self):
        """Test that 2 cos(2 pi t) exp(-0.2 t) starts at 2."""
        signal = CosineDecaySignal(amplitude=2.0, omega=2 * np.pi, decay=0.2)
        assert signal(0.0) == pytest.approx([2.0])

    def test_cosine_decay_half_period(self):
        """Test the sign flip and decay after half a period."""
        signal = CosineDecaySignal(amplitude=2.0, omega=2 * np.pi, decay=0.2)
        assert signal(0.5)[0] == pytest.approx(-2.0 * np.exp(-0.1))

    def test_envelope_bounds_signal(self):
        """Test that the envelope bounds the signal on a long grid."""
        signal = CosineDecaySignal(amplitude=-0.5, omega=2 * np.pi, decay=0.4, nu2=2)
        values = np.array([signal(t) for t in np.linspace(0, 20, 2001)])
        assert values.shape == (2001, 2)
        assert np.abs(values).max() <= signal.envelope() + 1e-12
        assert signal.envelope() == 0.5

    def test_zero_signal(self):
        """Test that the zero signal is identically zero."""
        signal = ZeroSignal(nu2=3)
        assert np.array_equal(signal(1.7), np.zeros(3))
        assert signal.envelope() == 0.0


class TestDeviationFactory:
    """Test suite for DeviationFactory."""

    def test_create_cosine_decay(self):
        """Test factory creates CosineDecaySignal from its config."""
        config = DeviationConfig(kind=DeviationType.COSINE_DECAY, amplitude=2.0, omega=2 * np.pi, decay=0.2)
        signal = DeviationFactory.create_signal(config)
        assert isinstance(signal, CosineDecaySignal)
        assert signal.amplitude == 2.0

    def test_create_zero(self):
        """Test factory creates ZeroSignal with the requested width."""
        signal = DeviationFactory.create_signal(DeviationConfig(kind=DeviationType.ZERO), nu2=2)
        assert isinstance(signal, ZeroSignal)
        assert signal(0.0).shape == (2,)

    def test_kind_from_string(self):
        """Test that string kinds are parsed into the enum."""
        config = DeviationConfig.model_validate({"kind": "zero"})
        assert config.kind == DeviationType.ZERO

    def test_unsupported_kind(self, monkeypatch):
        """Test factory rejects a kind without a registered class."""
        monkeypatch.setattr(DeviationFactory, "_signals", {DeviationType.ZERO: ZeroSignal})
        with pytest.raises(ValueError, match="Unsupported deviation type.*supported: zero"):
            DeviationFactory.create_signal(DeviationConfig(kind=DeviationType.COSINE_DECAY))

    def test_get_supported_signals(self):
        """Test getting list of supported signal kinds."""
        kinds = DeviationFactory.get_supported_signals()
        assert "cosine_decay" in kinds
        assert "zero" in kinds
        assert len(kinds) == 2
