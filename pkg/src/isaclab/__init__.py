"""isaclab: constellation selection and power shaping for OFDM sensing and communication."""

__version__ = "0.1.0"
