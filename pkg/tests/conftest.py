import numpy as np
import pytest

from weylprod.chart import make_chart


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# analytic charts shared by several modules: (n1, n2, f, extra chart keys)
CHARTS = {
    "bilinear22": (2, 2, "x1*x3", {}),
    "mixed23": (2, 3, "exp(x1)*sin(x4) + x2*x5", {}),
    "mixed33": (3, 3, "sin(x1 + x5) + x2*x6 - 0.3*x3*x4^2", {}),
    "curved22": (
        2,
        2,
        "0.5*x1*x3 + cos(x2)*x4",
        {"g1": [["1 + x1^2", "0.1*x2"], ["0.1*x2", "2"]], "g2": [["exp(x3)", "0"], ["0", "1 + 0.5*x4^2"]]},
    ),
}


def chart_of(name, gauge=None):
    n1, n2, f, kw = CHARTS[name]
    return make_chart(n1, n2, f, gauge=gauge, **kw)


@pytest.fixture(params=sorted(CHARTS))
def named_chart(request):
    return request.param, chart_of(request.param)
