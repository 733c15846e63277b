"""Weyl connections on conformal products: curvature, holonomy algebras and
Einstein-Weyl structures, computed pointwise in a gauge."""

__version__ = "0.1.0"

from .expr import DomainError, ExprError, ParseError, ScalarField, parse, var
from .tensor import (
    EndoAtPoint,
    MetricAtPoint,
    PointTensor,
    TwoFormAtPoint,
    WeightError,
    eq_expansion,
    form_inner,
    form_to_endo,
    raise_lower,
    two_form_commutator,
    wedge_as_endo,
)
from .chart import (
    DEFAULT_GAUGE,
    ChartError,
    ConformalProductChart,
    GaugeChoice,
    adapted_lee_form_at,
    faraday_at,
    gauge_metric_at,
    load_chart,
    make_chart,
    weyl_christoffels_at,
)
from .curvature import (
    CurvatureAtPoint,
    RicciAtPoint,
    curvature_action_on_form,
    ricci_weyl_at,
    symmetry_failure_residual,
    weyl_curvature_at,
)
from .holonomy import (
    HolonomyClass,
    LieAlgebraBasis,
    bracket_closure,
    classify_holonomy,
    curvature_generators,
    holonomy_algebra,
    parallel_transport,
)
from .einstein import (
    EinsteinReport,
    SymmetrizedFaraday,
    einstein_residual_at,
    no_go_scan,
    ricci_decomposition_at,
    toda_residual,
)
from .toda import GridField, TodaGrid, TodaResult, toda_solve

__all__ = [
    "__version__",
    "DomainError",
    "ExprError",
    "ParseError",
    "ScalarField",
    "parse",
    "var",
    "EndoAtPoint",
    "MetricAtPoint",
    "PointTensor",
    "TwoFormAtPoint",
    "WeightError",
    "eq_expansion",
    "form_inner",
    "form_to_endo",
    "raise_lower",
    "two_form_commutator",
    "wedge_as_endo",
    "DEFAULT_GAUGE",
    "ChartError",
    "ConformalProductChart",
    "GaugeChoice",
    "adapted_lee_form_at",
    "faraday_at",
    "gauge_metric_at",
    "load_chart",
    "make_chart",
    "weyl_christoffels_at",
    "CurvatureAtPoint",
    "RicciAtPoint",
    "curvature_action_on_form",
    "ricci_weyl_at",
    "symmetry_failure_residual",
    "weyl_curvature_at",
    "HolonomyClass",
    "LieAlgebraBasis",
    "bracket_closure",
    "classify_holonomy",
    "curvature_generators",
    "holonomy_algebra",
    "parallel_transport",
    "EinsteinReport",
    "SymmetrizedFaraday",
    "einstein_residual_at",
    "no_go_scan",
    "ricci_decomposition_at",
    "toda_residual",
    "GridField",
    "TodaGrid",
    "TodaResult",
    "toda_solve",
]
