"""American, Bermudan and European swaptions in the one-factor linear-rational model."""

__version__ = "0.1.0"
