"""hypdet: dynamical Fredholm determinants, Ruelle resonances and spectral
bounds for concrete hyperbolic diffeomorphisms at desk scale."""

__version__ = "0.1.0"

__all__ = [
    "aniso",
    "bounds",
    "collocation",
    "determinant",
    "errors",
    "maps",
    "orbits",
]
