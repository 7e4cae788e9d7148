"""Pulse shaping and coherent-error analysis for exchange-coupled spin qubits."""

__version__ = "0.1.0"
