import numpy as np
import pytest

from geotool import scenarios as sc


@pytest.fixture(scope="session")
def flat_box():
    return sc.make_data("flat", {}, sc.box_chart([(-1.5, 1.5)] * 3, [9, 9, 9]))


@pytest.fixture(scope="session")
def schwarzschild_shell():
    chart = sc.shell_chart(0.7, 3.0, [9, 12, 16])
    return sc.make_data("schwarzschild", {"mass": 1.0}, chart)


def convergence_order(errors):
    """Least log2 ratio of consecutive errors (halved step each level)."""
    errors = [float(e) for e in errors]
    return min(np.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1))


def order_or_floor(errors, floor=1e-12, min_order=1.7):
    """True when errors are at rounding level or decay at the required order."""
    if max(errors) < floor:
        return True
    return convergence_order(errors) >= min_order
