"""Multi-party timed commitments over discrete-log time-lock puzzles.

Participants commit to messages through an untrusted coordinator.  The
messages become readable only after someone brute-forces a discrete log
whose difficulty is set by ``lambda_m``; anyone can then check the result.
"""

from .crypto_suite import DEFAULT_SUITE, CryptoSuite, KeyPair, PkiRegistry, SuiteConfig
from .dl_solver import SolveReport, SolverConfig, solve
from .puzzle import DifficultyTable, Puzzle, PuzzleSolution, build_difficulty_table, gen_puz, pcr_gen_puz

__version__ = "0.1.0"
