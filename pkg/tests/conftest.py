import numpy as np
import pytest

from codemix import tensor as T

FD_EPS = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-6


def numeric_grad(fn, arrays, eps=FD_EPS):
    """Central differences of the scalar ``fn(*arrays)`` w.r.t. every array.

    Only forward values are used, so this never touches the backward rules
    it is checking.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + eps
            up = fn(*arrays)
            arr[idx] = orig - eps
            down = fn(*arrays)
            arr[idx] = orig
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric, floor=ABS_FLOOR):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_op_grad(build, arrays):
    """Compare autodiff and finite differences for ``build(*tensors) -> scalar Tensor``.

    Returns the worst relative error over all inputs.
    """
    tensors = [T.Tensor(a.copy(), requires_grad=True) for a in arrays]
    T.backward(build(*tensors))
    analytic = [t.grad for t in tensors]
    work = [a.copy() for a in arrays]
    numeric = numeric_grad(lambda *xs: build(*[T.Tensor(x) for x in xs]).item(), work)
    return max(max_rel_error(a, n) for a, n in zip(analytic, numeric))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
