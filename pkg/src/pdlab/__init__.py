"""Numerical lab for two-parameter Poisson-Dirichlet projections and their
reversible simplex diffusions."""
from .errors import (AccuracyError, AssemblyError, DomainError, NumericError, RegimeError,
                     SingularityError)
from .numerics import QuadratureSpec, RngStream, integrate_1d, log_beta, log_gamma, sample_beta
from .simplex import (ChainConfig, DirichletParams, ModelParams, SimplexPoint, expect_mu,
                      log_density_dirichlet, log_density_mu, log_perturbation_W, phi,
                      sample_mu_mcmc)
from .stick_breaking import (BasePmf, GemParams, project, sample_dirichlet_process, sample_gem,
                             sample_projection, to_descending)

__version__ = "0.1.0"
