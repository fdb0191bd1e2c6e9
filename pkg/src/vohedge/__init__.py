"""Variance-optimal hedging for exponential and arithmetic additive-process models."""
from .cumulants import (NIG, BrownianDrift, DomainStrip, LevyCumulantModel, Poisson, VarianceGamma,
                        cumulant_derivatives_at_zero, evaluate_cumulant, excess_kurtosis,
                        reparametrize_moment_matched, validate_exponential_assumptions)
from .errors import (ConfigError, DegenerateModel, DomainViolation, InsufficientSamples,
                     InvalidAbscissa, NoSolution, QuadratureFailure, TailDivergence, VoHedgeError)
from .pii import (LevyHomogeneous, PiiCumulant, Table, TimeChangedBrownian, TwoFactor,
                  WienerIntegral, build_pii, densities, kappa, rho, validate_model)
from .payoff import (FourierMeasure, PayoffMeasure, QuadSettings, atom_measure, call_representation,
                     digital_asset_or_nothing, put_representation, reconstruct, self_quanto_put)
from .fs_engine import (build_coefficients, initial_capital, price_process, pure_hedge,
                        quadratic_error)
from .arithmetic import arith_price_process, arith_pure_hedge, build_arith
from .montecarlo import BacktestConfig, BacktestReport, error_statistics, run_backtest

__version__ = "0.1.0"
