import numpy as np
import pytest
from hypothesis import strategies as st

from mergecoord.model import Movement, Params, Scenario


@pytest.fixture
def params():
    return Params()


@pytest.fixture
def special4():
    """Main A,B,D and ramp C, with headways inside the special-case region."""
    p = Params(dt1=1.5, dt2=2.5)
    return Scenario.from_tmins([0.0, 1.6, 4.5], [1.2], p)


def random_scenario(rng, n_max=8, anchored=False, params=None):
    """Random two-lane scenario with mixed tight and loose headways."""
    params = params or Params()
    n = int(rng.integers(1, n_max + 1))
    n1 = int(rng.integers(0, n + 1))
    lanes = []
    for k in (n1, n - n1):
        gaps = rng.choice([0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 6.0], size=k) + rng.uniform(0, 1, k)
        lanes.append(list(np.cumsum(gaps) + rng.uniform(0, 3)))
    anchor = None
    if anchored and rng.random() < 0.5:
        from mergecoord.model import Anchor
        anchor = Anchor(float(rng.uniform(-2, 1)), Movement(int(rng.integers(0, 2))))
    return Scenario.from_tmins(lanes[0], lanes[1], params, anchor)


def scenario_maps(sc):
    t_min = {v.id: v.t_min for v in sc.vehicles}
    lane = {v.id: int(v.movement) for v in sc.vehicles}
    return t_min, lane


@st.composite
def scenarios(draw, max_per_lane=5, min_total=0):
    """Hypothesis strategy over small scenarios with rounded t_min values."""
    gap = st.floats(0.0, 5.0, allow_nan=False).map(lambda x: round(x, 2))
    main = draw(st.lists(gap, max_size=max_per_lane))
    ramp = draw(st.lists(gap, max_size=max_per_lane,
                         min_size=max(0, min_total - len(main))))
    start = draw(st.floats(0.0, 3.0).map(lambda x: round(x, 2)))
    return Scenario.from_tmins(np.cumsum(main) + start if main else [],
                               np.cumsum(ramp) + start if ramp else [], Params())
