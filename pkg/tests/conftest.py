from __future__ import annotations

import random

from hypothesis import settings, strategies as st

from artifact.graph import random_general, random_matchings_3regular

settings.register_profile("artifact", max_examples=60, deadline=None)
settings.load_profile("artifact")


@st.composite
def cubic_graphs(draw, max_n: int = 40):
    """Edge-symmetric cubic graphs: unions of three disjoint perfect matchings."""
    n = draw(st.integers(2, max_n // 2)) * 2
    n = max(n, 4)
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_matchings_3regular(n, random.Random(seed))


@st.composite
def general_graphs(draw, max_n: int = 30):
    n = draw(st.integers(3, max_n))
    extra = draw(st.integers(0, min(n, n * (n - 1) // 2 - n)))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_general(n, extra, random.Random(seed))
