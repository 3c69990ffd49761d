"""Terminal iterative learning control for probe-drogue aerial refueling."""
__version__ = "0.1.0"
