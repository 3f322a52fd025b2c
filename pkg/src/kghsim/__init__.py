"""Klein-Gordon-Hartree frequency-splitting simulator and inequality probes."""

__version__ = "0.1.0"
