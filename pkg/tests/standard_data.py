"""The standard run data shared by the tests."""
from mfflow.numerics import mpq

MU_MAX = mpq(8)
G40 = mpq(1, 300)
C_STANDARD = mpq(1, 4)

# Fixed points of the renormalization map at (mu_max, g40) = (8, 1/300), frozen
# from a 256-bit Picard run; test_ansatz re-verifies both as fixed points.
B1_STAR = "0.18395959465217691002003740"
B1_STAR_BPHZ = "-0.002023042535504548688451179"
