"""Superhedging and arbitrage tests for markets with polyhedral trading costs on finite event trees."""

__version__ = "0.1.0"

from .errors import IlliqError, InputError, NumericalError  # noqa: E402,F401
from .event_tree import AdaptedVectorProcess, EventTree, is_martingale, tree_from_branching, validate_tree  # noqa: E402,F401
from .geometry import HPolyhedron, VCone  # noqa: E402,F401
from .markets import (  # noqa: E402,F401
    MarketModel,
    from_bid_ask,
    from_cost_process,
    from_currency_costs,
    from_polyhedra,
    recession_model,
)
from .arbitrage import check_dominance, check_na, check_robust_na, check_robust_no_scalable_arbitrage  # noqa: E402,F401
from .pricing import (  # noqa: E402,F401
    PriceSystem,
    claim_in_A,
    claim_in_AT,
    dual_bound,
    find_consistent_price_system,
    superhedge_check,
    superhedge_premium,
)
