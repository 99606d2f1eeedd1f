import numpy as np
import pytest

from hele_shaw_lab.schedule import SlopeSchedule


def test_integral_piecewise():
    s = SlopeSchedule.from_pairs([[0.0, 1.0], [0.5, 2.0]])
    assert s.integral(0.25) == pytest.approx(0.25)
    assert s.integral(1.0) == pytest.approx(1.5)
    assert s.integral(1.0, 0.5) == pytest.approx(1.0)
    assert np.allclose(s.integral(np.array([0.0, 0.5, 0.75])), [0.0, 0.5, 1.0])
    assert s.max_on(0.2, 0.7) == 2.0


def test_validation():
    with pytest.raises(ValueError):
        SlopeSchedule((0.0, 0.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        SlopeSchedule((0.0,), (-1.0,))
    assert SlopeSchedule.from_pairs(SlopeSchedule.constant(2.0).to_pairs()).values == (2.0,)
