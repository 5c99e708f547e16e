"""Rate-induced tipping in a plant-herbivore model and in normal forms."""

__version__ = "0.1.0"
