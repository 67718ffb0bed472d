import numpy as np

from utils.dynamics import State


def generate_initial_conditions(count=1, y_range=(-2.0, 2.0), k_range=(-2.0, 2.0), seed=None):
    """Draw ``count`` initial states uniformly from the given ranges.

    y0 = 0 is redrawn, since every point of that line is an equilibrium.
    """
    rng = np.random.default_rng(seed)
    states = []
    while len(states) < count:
        y = float(rng.uniform(*y_range))
        k = float(rng.uniform(*k_range))
        if y == 0.0:
            continue
        states.append(State(y=y, k=k))
    return states


def resolve_initial_states(initial, seed=None):
    """Explicit states from the config followed by the seeded random batch."""
    states = [State(y=y, k=k) for y, k in initial.states]
    if initial.random_count:
        seed = initial.seed if seed is None else seed
        states.extend(
            generate_initial_conditions(initial.random_count, initial.y_range, initial.k_range, seed)
        )
    return states


if __name__ == "__main__":
    for state in generate_initial_conditions(count=3, seed=7):
        print(state)
