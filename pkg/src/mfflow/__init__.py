"""Mean-field phi^4 flow numerics: exact Taylor data, the renormalization
fixed point, perturbative amplitudes, remainders and Borel certificates."""

__version__ = "0.1.0"
