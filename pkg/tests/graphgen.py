"""Random computation-graph generator for gradient verification.

Graphs are generated once as a frozen instruction list: ops whose gradient
has kinks (relu, clamp, minimum) are only recorded when every input
component sits a safe margin away from the kink, so replays at finite-
difference-perturbed points follow the identical op sequence and stay
smooth. ``build(params)`` replays the instructions on fresh tensors.
"""

import numpy as np

from rlbricks.autodiff import Tensor, matmul, minimum, reduce

KINK_MARGIN = 1e-3  # >> the finite-difference step, so perturbations never cross


def _away_from(values: np.ndarray, point: float) -> bool:
    return bool(np.all(np.abs(values - point) > KINK_MARGIN))


def random_graph(seed: int):
    """Returns (build_fn, leaves): build_fn replays a frozen random graph."""
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    shape_menu = [(n, d), (n, d), (d,), (d, n)]
    n_leaves = int(rng.integers(2, 5))
    leaves = []
    for _ in range(n_leaves):
        shape = shape_menu[rng.integers(len(shape_menu))]
        vals = rng.uniform(0.2, 1.8, shape) * rng.choice([-1.0, 1.0], shape)
        leaves.append(Tensor(vals, requires_grad=True))

    # phase 1: record a valid instruction sequence against live values
    pool = [Tensor(l.values.copy()) for l in leaves]
    ops = []  # each: (name, *indices) or (name, index, lo, hi)
    for _ in range(int(rng.integers(6, 16))):
        i = int(rng.integers(len(pool)))
        t = pool[i]
        kind = int(rng.integers(11))
        if kind == 0:
            ops.append(("neg", i))
            pool.append(-t)
        elif kind == 1 and np.max(t.values) < 2.5:
            ops.append(("exp", i))
            pool.append(t.exp())
        elif kind == 2 and _away_from(t.values, 0.2) and _away_from(t.values, 5.0):
            ops.append(("clamp_log", i))
            pool.append(t.clamp(0.2, 5.0).log())
        elif kind == 3:
            ops.append(("tanh", i))
            pool.append(t.tanh())
        elif kind == 4 and _away_from(t.values, 0.0):
            ops.append(("relu", i))
            pool.append(t.relu())
        elif kind == 5:
            ops.append(("softplus", i))
            pool.append(t.softplus())
        elif kind == 6 and np.max(np.abs(t.values)) < 2.5:
            ops.append(("square", i))
            pool.append(t.square())
        elif kind == 7 and _away_from(t.values, -1.5) and _away_from(t.values, 1.5):
            ops.append(("clamp", i))
            pool.append(t.clamp(-1.5, 1.5))
        elif kind == 8:
            mates = [j for j, u in enumerate(pool) if u.shape == t.shape]
            j = mates[int(rng.integers(len(mates)))]
            u = pool[j]
            choice = int(rng.integers(4))
            if choice == 0:
                ops.append(("add", i, j))
                pool.append(t + u)
            elif choice == 1:
                ops.append(("sub", i, j))
                pool.append(t - u)
            elif choice == 2 and np.max(np.abs(t.values * u.values)) < 6.0:
                ops.append(("mul", i, j))
                pool.append(t * u)
            elif np.all(np.abs(t.values - u.values) > KINK_MARGIN):
                ops.append(("minimum", i, j))
                pool.append(minimum(t, u))
        elif kind == 9 and t.values.ndim == 2 and t.shape[1] >= 1:
            mates = [j for j, u in enumerate(pool)
                     if u.values.ndim == 2 and u.shape[0] == t.shape[1]]
            if mates:
                j = mates[int(rng.integers(len(mates)))]
                prod = t.values @ pool[j].values
                if np.max(np.abs(prod)) < 6.0:
                    ops.append(("matmul", i, j))
                    pool.append(matmul(t, pool[j]))
        elif kind == 10 and t.values.ndim == 2:
            axis = int(rng.integers(2))
            red = "sum" if rng.integers(2) else "mean"
            ops.append(("reduce", i, red, axis))
            pool.append(reduce(red, t, axis))

    def build(params):
        replay = list(params)
        for op in ops:
            name, i = op[0], op[1]
            t = replay[i]
            if name == "neg":
                replay.append(-t)
            elif name == "exp":
                replay.append(t.exp())
            elif name == "clamp_log":
                replay.append(t.clamp(0.2, 5.0).log())
            elif name == "tanh":
                replay.append(t.tanh())
            elif name == "relu":
                replay.append(t.relu())
            elif name == "softplus":
                replay.append(t.softplus())
            elif name == "square":
                replay.append(t.square())
            elif name == "clamp":
                replay.append(t.clamp(-1.5, 1.5))
            elif name == "add":
                replay.append(t + replay[op[2]])
            elif name == "sub":
                replay.append(t - replay[op[2]])
            elif name == "mul":
                replay.append(t * replay[op[2]])
            elif name == "minimum":
                replay.append(minimum(t, replay[op[2]]))
            elif name == "matmul":
                replay.append(matmul(t, replay[op[2]]))
            elif name == "reduce":
                replay.append(reduce(op[2], t, op[3]))
        total = None
        for t in replay:
            term = t.mean()
            total = term if total is None else total + term
        return total

    return build, leaves
