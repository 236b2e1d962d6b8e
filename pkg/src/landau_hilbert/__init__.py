"""Landau and Vlasov-Maxwell-Landau operators with a constructive Hilbert expansion."""

__version__ = "0.1.0"
