import numpy as np
import pytest

from psokit.swarm import step_rng


class ScriptedRng:
    """Stands in for a Generator: hands out pre-recorded uniforms and counts draws."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.drawn = 0

    def random(self, size=None):
        shape = () if size is None else size
        count = int(np.prod(shape))
        out = self.values.ravel()[self.drawn:self.drawn + count]
        if out.size != count:
            raise AssertionError("scripted rng ran out of numbers")
        self.drawn += count
        return out.reshape(shape)


class CountingRng:
    def __init__(self, rng):
        self.rng = rng
        self.drawn = 0

    def random(self, size=None):
        out = self.rng.random(size)
        self.drawn += np.size(out)
        return out


@pytest.fixture
def scripted():
    return ScriptedRng


def reference_pso(conflict, feasible, lower, upper, size, coeffs, steps, seed, k=None):
    """Plain scalar-loop PSO with death-penalty semantics, written independently
    of the vectorised engine but sharing its random stream layout.

    ``feasible(x)`` decides whether a move is taken; ``k`` is the ring half-width
    (``None`` for a global neighbourhood). Returns the gbest conflict per step.
    """
    w, iw, sw = coeffs
    n = len(lower)
    rng = step_rng(seed, 0)
    x = rng.uniform(lower, upper, size=(size, n))
    while True:
        bad = [i for i in range(size) if not feasible(x[i])]
        if not bad:
            break
        for i in bad:
            x[i] = rng.uniform(lower, upper, size=(1, n))[0]
    x = [list(map(float, row)) for row in x]
    v = [[0.0] * n for _ in range(size)]
    p = [row[:] for row in x]
    pc = [float(conflict(np.array(row))) for row in x]
    history = [min(pc)]
    for t in range(1, steps + 1):
        r = step_rng(seed, t).random((size, 2, n))
        nbest = []
        for i in range(size):
            if k is None or 2 * k + 1 >= size:
                window = range(size)
            else:
                window = sorted({(i + o) % size for o in range(-k, k + 1)})
            nbest.append(min(window, key=lambda j: (pc[j], j)))
        moved = []
        for i in range(size):
            g = p[nbest[i]]
            for j in range(n):
                v[i][j] = (w * v[i][j] + iw * float(r[i, 0, j]) * (p[i][j] - x[i][j])
                           + sw * float(r[i, 1, j]) * (g[j] - x[i][j]))
            cand = [x[i][j] + v[i][j] for j in range(n)]
            moved.append(cand if feasible(np.array(cand)) else x[i])
        for i in range(size):
            x[i] = moved[i]
            c = float(conflict(np.array(x[i]))) if feasible(np.array(x[i])) else np.inf
            if c < pc[i]:
                pc[i], p[i] = c, x[i][:]
        history.append(min(pc))
    return np.array(history), np.array(p), np.array(pc)
