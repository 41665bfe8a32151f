"""Sharp-interface limit of periodic monostable reaction-diffusion fronts."""

__version__ = "0.1.0"
