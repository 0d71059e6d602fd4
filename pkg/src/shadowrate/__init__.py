"""Option pricing with a shadow riskless rate and deflated cumulative returns."""

from .closed_form import (LrClosedFormInputs, black_scholes_call, lr_call_price,
                          lr_call_price_quadrature, solve_y_star)
from .companion import (PerpetualSpec, XiPoint, deflator_pi, perpetual_dynamics, perpetual_pde_residual,
                        perpetual_price, s_minus_delta_dynamics, xi_curve)
from .errors import PricingError
from .estimation import PriceSeries, RollingEstimate, load_series, rolling_estimates, synthesize_series
from .lattice import LatticeConfig, build_pi_tree, price_lr_tree, price_pi_tree
from .market import (DualAssetParams, OptionSpec, SingleAssetParams, market_price_of_risk, q_dynamics,
                     shadow_rate, sharpe_consistency_check)
from .monte_carlo import (McEstimate, PathBatch, compare_bsm_vs_pi, mc_price_deflated_numeraire, mc_price_lr,
                          mc_price_pi, simulate_p_single, simulate_q_pair)
from .schedule import Schedule

__version__ = "0.1.0"

__all__ = [
    "DualAssetParams",
    "LatticeConfig",
    "LrClosedFormInputs",
    "McEstimate",
    "OptionSpec",
    "PathBatch",
    "PerpetualSpec",
    "PriceSeries",
    "PricingError",
    "RollingEstimate",
    "Schedule",
    "SingleAssetParams",
    "XiPoint",
    "black_scholes_call",
    "build_pi_tree",
    "compare_bsm_vs_pi",
    "deflator_pi",
    "load_series",
    "lr_call_price",
    "lr_call_price_quadrature",
    "market_price_of_risk",
    "mc_price_deflated_numeraire",
    "mc_price_lr",
    "mc_price_pi",
    "perpetual_dynamics",
    "perpetual_pde_residual",
    "perpetual_price",
    "price_lr_tree",
    "price_pi_tree",
    "q_dynamics",
    "rolling_estimates",
    "s_minus_delta_dynamics",
    "shadow_rate",
    "sharpe_consistency_check",
    "simulate_p_single",
    "simulate_q_pair",
    "solve_y_star",
    "synthesize_series",
    "xi_curve",
]
