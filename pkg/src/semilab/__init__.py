"""Finite-dimensional numerics for operator semigroups, resolvents and Markov chains."""
from .core import Element, Operator, SingularOperator, log_norm, op_norm, sup_norm
from .semigroup import SemigroupHandle, TypeBound, cesaro_average, exp_series
from .resolvent import ResolventHandle, SpectrumHit, hille_yosida_check, resolvent_quadrature
from .yosida import YosidaScheme, yosida_approximant, yosida_limit
from .markov import QMatrix, martingale_check, simulate, transition_mc

__version__ = "0.1.0"
