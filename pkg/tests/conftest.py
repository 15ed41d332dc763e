import numpy as np
import pytest

from ffrsim.simulator import Fading, build_scenario


class ReplayRng:
    """Stand-in for ``np.random.Generator`` that hands out scripted values."""

    def __init__(self, uniforms=(), exponentials=()):
        self.uniforms = list(uniforms)
        self.exponentials = list(exponentials)

    def random(self, size=None):
        if size is None:
            return self.uniforms.pop(0)
        return np.array([self.uniforms.pop(0) for _ in range(int(np.prod(size)))]).reshape(size)

    def exponential(self, scale=1.0, size=None):
        if size is None:
            return self.exponentials.pop(0)
        return np.array([self.exponentials.pop(0) for _ in range(int(np.prod(size)))]).reshape(size)


# Three BSs and four users (user 0 is the typical user at the origin).
#   BS0 (3, 0) serves the typical user: r1 = 3, r2 = 4 (BS1)
#   BS1 (-4, 0) serves users 1 and 2; user 2 at (-4, 1): r1 = 1, r2 = sqrt(50)
#   BS2 (0, 10) serves user 3 at (0, 9): r1 = 1, r2 = sqrt(90)
PINNED_BSS = np.array([[3.0, 0.0], [-4.0, 0.0], [0.0, 10.0]])
PINNED_USERS = np.array([[0.0, 0.0], [-5.0, 0.0], [-4.0, 1.0], [0.0, 9.0]])


@pytest.fixture
def pinned_scenario():
    fading = Fading(
        typical_broadcast=np.array([0.5, 1.0]),
        typical_data=2.0,
        interferer=np.array([1.0, 0.5, 1.5]),
        selected=np.array([[1.0, 1.0], [1.0, 1.0], [0.01, 1.0]]),
        occupancy_u=np.array([0.9, 0.1, 0.05]),
        selection_u=np.array([0.5, 0.7, 0.3]),
    )
    return build_scenario(PINNED_BSS, PINNED_USERS, fading)


@pytest.fixture
def pinned_rng():
    """Draws that make the loop engine reproduce ``pinned_scenario``'s fading."""
    return ReplayRng(
        # occupancy BS1, selection BS1, occupancy BS2, selection BS2
        uniforms=[0.1, 0.7, 0.05, 0.3],
        # data fade, BS1 user (g1, g2), BS1 link, BS2 user (g1, g2), BS2 link
        exponentials=[2.0, 1.0, 1.0, 0.5, 0.01, 1.0, 1.5],
    )
