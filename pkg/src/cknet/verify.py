"""Numerical verification battery.

Runs the cross-form equivalence checks (direct recurrence vs first-order
state space, for both the smooth order-k and additive dense families), the
order-1 collapse, the dense difference identity, the binomial-inversion
roundtrip, and the exact integer identities. The CLI exposes this battery;
the test suite asserts the same properties independently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .architectures import (
    ForcingFunction,
    LayerHistory,
    c1_step,
    ck_direct_step,
    ck_state_step,
    dense_difference_identity_check,
    dense_direct_step,
    dense_state_step,
    initialize_state,
)
from .dynamics import (
    BlockMatrix,
    alternating_binomial_sum,
    backward_diff_power,
    binomial_invert,
    build_ck_matrices,
    build_dense_matrices,
)
from .tensor import Parameter, Tensor

__all__ = ["CheckResult", "run_battery", "sign_flipped_dense_forcing"]

_ACTIVATION_CYCLE = ("tanh", "sigmoid", "leaky_relu")
_DL_CYCLE = (1.0, 0.5)


@dataclass
class CheckResult:
    name: str
    tolerance: float
    max_deviation: float = 0.0
    passed: bool = True
    detail: str = ""

    def absorb(self, deviation: float, detail: str) -> None:
        if deviation > self.max_deviation:
            self.max_deviation = deviation
            if deviation > self.tolerance:
                self.detail = detail
        self.passed = self.max_deviation <= self.tolerance


def _random_forcing(d: int, activation: str, rng: np.random.Generator, name: str) -> ForcingFunction:
    bound = np.sqrt(6.0 / (2 * d))
    weight = Parameter(rng.uniform(-bound, bound, size=(d, d)), name=f"{name}.weight")
    bias = Parameter(rng.uniform(-0.5, 0.5, size=d), name=f"{name}.bias")
    return ForcingFunction(weight, bias, activation)


def _window(fs, layer: int, k: int):
    return [fs[layer - j] if layer - j >= 0 else None for j in range(k)]


def run_ck_direct(fs, x0: np.ndarray, k: int, dl: float):
    """Activations x_0..x_L of the direct order-k recurrence (ghost start)."""
    x = Tensor(x0)
    history = LayerHistory.ghost(x, k)
    xs = [x.data.copy()]
    for f in fs:
        x = ck_direct_step(f, history, k, dl)
        history = history.advanced(x)
        xs.append(x.data.copy())
    return xs


def run_ck_state(fs, x0: np.ndarray, k: int, dl: float):
    """Activations and state stacks of the first-order form, layer 0..L."""
    q = initialize_state(Tensor(x0), k)
    states = [q.values()]
    for f in fs:
        q = ck_state_step(f, q, k, dl)
        states.append(q.values())
    xs = [s[0] for s in states]
    return xs, states


def run_dense_direct(fs, x0: np.ndarray, k: int, dl: float):
    """Activations and per-layer forcing outputs of the dense recurrence."""
    x = Tensor(x0)
    history = LayerHistory.ghost(x, k)
    xs = [x.data.copy()]
    forcing_values = []
    for layer, f in enumerate(fs):
        forcing_values.append(f(x).data.copy())
        x, history = dense_direct_step(_window(fs, layer, k), history, dl)
        xs.append(x.data.copy())
    return xs, forcing_values


def run_dense_state(fs, x0: np.ndarray, k: int, dl: float, forcing_matrix: BlockMatrix | None = None):
    q = initialize_state(Tensor(x0), k)
    states = [q.values()]
    for layer in range(len(fs)):
        q = dense_state_step(_window(fs, layer, k), q, k, dl, forcing_matrix=forcing_matrix)
        states.append(q.values())
    xs = [s[0] for s in states]
    return xs, states


def sign_flipped_dense_forcing(k: int, d: int) -> BlockMatrix:
    """Dense forcing matrix with one corrupted sign; fault-injection hook.

    The corrupted entry sits in the leading row: later rows only drive the
    higher difference states, which the activation trajectory never reads
    back, so only a leading-row fault is visible to the trajectory-level
    equivalence check.
    """
    _, forcing = build_dense_matrices(k, d)
    grid = [list(row) for row in forcing.block]
    grid[0][0] = -grid[0][0]
    return BlockMatrix(k, d, tuple(tuple(row) for row in grid))


def _extraction_deviation(xs, states, k: int) -> float:
    """Max gap between recorded states and differences of the trajectory."""
    extended = [xs[0]] * (k - 1) + list(xs)
    worst = 0.0
    for l, parts in enumerate(states):
        for n in range(1, k + 1):
            expected = backward_diff_power(extended, l + k - 1, n)
            worst = max(worst, float(np.max(np.abs(parts[n - 1] - expected))))
    return worst


def _case_rng(base_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, *key]))


def run_battery(
    orders=(1, 2, 3, 4),
    widths=(1, 2, 8),
    depths=(3, 10),
    seeds: int = 50,
    tolerance: float = 1e-9,
    dense_forcing_matrix=None,
) -> list[CheckResult]:
    """Run every check over the given grid; returns one result per check.

    ``dense_forcing_matrix`` is a fault-injection hook: when given a
    callable (k, d) -> BlockMatrix, the dense state evaluation uses that
    matrix instead of the correct one, which a healthy battery must flag.
    """
    if not orders or not widths or not depths or seeds < 1:
        raise ValueError("verification grid must be non-empty")
    ck_equiv = CheckResult("ck equivalence", tolerance)
    ck_extract = CheckResult("ck state extraction", tolerance)
    dense_equiv = CheckResult("dense equivalence", tolerance)
    dense_extract = CheckResult("dense state extraction", tolerance)
    collapse = CheckResult("k=1 collapse", 0.0)
    identity = CheckResult("dense difference identity", 1e-10)
    roundtrip = CheckResult("binomial inversion roundtrip", 1e-12)
    alternating = CheckResult("alternating binomial sums", 0.0)
    unimodular = CheckResult("unimodular block matrices", 0.0)

    for k in orders:
        for d in widths:
            for depth in depths:
                for i in range(seeds):
                    rng = _case_rng(0xC0FFEE, k, d, depth, i)
                    activation = _ACTIVATION_CYCLE[i % len(_ACTIVATION_CYCLE)]
                    dl = _DL_CYCLE[i % len(_DL_CYCLE)]
                    case = f"k={k} d={d} L={depth} dl={dl} act={activation} seed#{i}"
                    fs = [
                        _random_forcing(d, activation, rng, f"f{layer}")
                        for layer in range(depth)
                    ]
                    x0 = rng.standard_normal(d)

                    xs_direct = run_ck_direct(fs, x0, k, dl)
                    xs_state, states = run_ck_state(fs, x0, k, dl)
                    dev = max(
                        float(np.max(np.abs(a - b)))
                        for a, b in zip(xs_direct, xs_state)
                    )
                    ck_equiv.absorb(dev, case)
                    ck_extract.absorb(_extraction_deviation(xs_direct, states, k), case)

                    injected = (
                        dense_forcing_matrix(k, d) if dense_forcing_matrix else None
                    )
                    xs_dd, forcing_values = run_dense_direct(fs, x0, k, dl)
                    xs_ds, dstates = run_dense_state(
                        fs, x0, k, dl, forcing_matrix=injected
                    )
                    dev = max(
                        float(np.max(np.abs(a - b))) for a, b in zip(xs_dd, xs_ds)
                    )
                    dense_equiv.absorb(dev, case)
                    dense_extract.absorb(_extraction_deviation(xs_dd, dstates, k), case)

                    # an order-n identity needs at least one admissible layer
                    for n in range(min(k, len(xs_dd) - 1)):
                        ok = dense_difference_identity_check(
                            xs_dd, forcing_values, n, dl, tol=identity.tolerance
                        )
                        identity.absorb(0.0 if ok else np.inf, f"{case} order n={n}")

                    if k == 1:
                        x = Tensor(x0)
                        xs_c1 = [x.data.copy()]
                        for f in fs:
                            x = c1_step(f, x, dl)
                            xs_c1.append(x.data.copy())
                        same = all(
                            a.tobytes() == b.tobytes() == c.tobytes() == e.tobytes()
                            for a, b, c, e in zip(xs_c1, xs_direct, xs_dd, xs_ds)
                        ) and all(
                            a.tobytes() == b.tobytes() for a, b in zip(xs_c1, xs_state)
                        )
                        collapse.absorb(0.0 if same else np.inf, case)

    rng = np.random.default_rng(np.random.SeedSequence([0xC0FFEE, 99]))
    for n in range(1, 9):
        for trial in range(25):
            states = [rng.standard_normal(4) for _ in range(n)]
            lags = binomial_invert(states)
            seq = list(reversed(lags))
            dev = max(
                float(np.max(np.abs(backward_diff_power(seq, n - 1, m) - states[m - 1])))
                for m in range(1, n + 1)
            )
            roundtrip.absorb(dev, f"n={n} trial={trial} (float)")
        int_states = [rng.integers(-50, 50, size=4) for _ in range(n)]
        lags = binomial_invert(int_states)
        seq = list(reversed(lags))
        exact = all(
            np.array_equal(backward_diff_power(seq, n - 1, m), int_states[m - 1])
            for m in range(1, n + 1)
        )
        roundtrip.absorb(0.0 if exact else np.inf, f"n={n} (integer, exactness lost)")

    for n in range(1, 65):
        alternating.absorb(abs(alternating_binomial_sum(n)), f"n={n}")

    for k in range(1, 9):
        for matrix in (*build_ck_matrices(k, 3), *build_dense_matrices(k, 3)):
            det = matrix.determinant()
            unimodular.absorb(0.0 if det in (1, -1) else abs(det), f"k={k} det={det}")

    return [
        ck_equiv,
        ck_extract,
        dense_equiv,
        dense_extract,
        collapse,
        identity,
        roundtrip,
        alternating,
        unimodular,
    ]
