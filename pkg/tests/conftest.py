import numpy as np
import pytest

from halodeconv import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = [kernels.numpy_backend]
if kernels.numba_backend is not None:
    BACKENDS.append(kernels.numba_backend)


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit("_", 1)[-1])
def backend(request):
    return request.param


def brute_convolve(a, b):
    """Quadruple-loop aperiodic convolution cropped to the frame, centred."""
    ny, nx = a.shape
    cy, cx = ny // 2, nx // 2
    out = np.zeros_like(a)
    for y in range(ny):
        for x in range(nx):
            acc = 0.0
            for v in range(ny):
                for u in range(nx):
                    ky, kx = y - v + cy, x - u + cx
                    if 0 <= ky < ny and 0 <= kx < nx:
                        acc += a[v, u] * b[ky, kx]
            out[y, x] = acc
    return out


def central_diff_grad(fun, x, step=1e-6):
    """Central finite-difference gradient of a scalar function of an array."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        hstep = step * max(1.0, abs(x[idx]))
        xp[idx] += hstep
        xm[idx] -= hstep
        g[idx] = (fun(xp) - fun(xm)) / (2.0 * hstep)
    return g


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
