"""Functional-inequality checks: super Poincare harness, localisation and
perturbation quantities, and the infinite-support counterexample."""
from .counterexample import CounterexampleScan, analytic_limit, counterexample_scan
from .localization import (CheegerScan, boundary_flux, cheeger_scan, cheeger_test_function,
                           edge_profile, h_estimate, rayleigh_outside)
from .perturbation import (PerturbationFit, PowerLaw, PsiEstimate, beta_perturbation_explicit,
                           bump_function, ibp_residual, psi_estimate)
from .rates import (RateFunction, rate_exponent_localization, rate_exponent_perturbation,
                    rate_exponent_proof)
from .search import SearchResult, loglog_slope, search
from .superpoincare import (InequalityReport, check_super_poincare, default_family,
                            fit_rate_constant, monomial_family, random_cubic_family)
