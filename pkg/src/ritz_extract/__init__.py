"""Rayleigh-Ritz, refined and least-squares-plus-line-search eigenvector extraction."""
from .bounds import (AlphaContext, AlphaRoots, CheckResult, DivisionCase, SuiteResult,
                     alpha3_internal_closed_form, alpha_roots, f_eval, g_eval, identity_suite,
                     j_matrix)
from .dense import (hermitian_eig, general_eig_small, mgs_against, orthonormalize,
                    smallest_singular_right, solve_hpd)
from .errors import *  # noqa: F401,F403
from .extraction import (ExtractionReport, Flag, extract, extract_from_products, gram_matrix,
                         lls_least_squares, lls_line_search, rayleigh_ritz, refined_vector,
                         residual_bounds, tau_crosscheck)
from .krylov import (ArnoldiFactorization, SolverConfig, SolverResult, arnoldi_expand, gmres,
                     jd_outer, restarted_arnoldi, run_solver)
from .sparse import (CsrMatrix, matvec, parse_matrix_market, read_matrix_market,
                     shifted_block_apply, write_matrix_market)

__version__ = "0.1.0"
