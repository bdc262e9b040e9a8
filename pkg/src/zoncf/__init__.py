"""Zeroth-order negative curvature finding and second-order stationary point solvers."""

from .estimators import (GradEstimate, HvCache, HvEstimate, Verdict, coord_grad_central,
                         coord_grad_forward, hv_estimate, make_hv_cache, rand_grad_central,
                         verify_gradient_norm)
from .ncf import (Bottom, Direction, NcfOutcome, NcfParams, chebyshev_scalar, ncf_deterministic,
                  ncf_online, ncf_online_weak, rayleigh_probe)
from .oracle import (BlackBoxProblem, LibsvmDataset, QueryLedger, SmoothnessProfile, make_cubic_reg,
                     make_octopus, make_reg_nls, parse_libsvm, sample_cubic_reg,
                     sample_cubic_reg_stochastic)
from .solvers import (SOLVERS, SolverParams, SolverReport, Termination, negative_curvature_step,
                      zo_gd_ncf, zo_scsg_epoch, zo_scsg_ncf, zo_sgd_ncf, zo_spider_coord,
                      zo_spider_ncf)
from .baselines import BASELINES, BaselineParams, dfpi, pagd_run, rspi_run, zpsgd_run, zpsgd_step

__version__ = "0.1.0"
