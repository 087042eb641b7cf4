"""Compare the compiled and numpy kernel backends.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Prints the
best-of-N wall time per kernel and backend, the speed-up, and the largest
difference between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from coboundary import _kernels
from coboundary.families import make_coboundary_family, make_random_phi
from coboundary.field import DomainSpec, conjugate, EpsSeriesField


def best_time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_cases(rng):
    J, P, n = 17, 34 * 33, 2
    u = rng.standard_normal((J, P, n, n)) + 1j * rng.standard_normal((J, P, n, n))
    v = rng.standard_normal((J, P, n, n)) + 1j * rng.standard_normal((J, P, n, n))
    u[0] += 4 * np.eye(n)
    u[1:] *= 0.1
    w0 = np.linalg.inv(u[0])
    vals = np.eye(n) + 0.1 * (rng.standard_normal((5000, 12, n, n)) + 0j)
    return {
        "cauchy_matmul J=17 P=1122 n=2": lambda b: _kernels.cauchy_matmul(u, v, backend=b),
        "series_inverse J=17 P=1122 n=2": lambda b: _kernels.series_inverse(u, w0, backend=b),
        "orbit_product B=5000 N=12 n=2": lambda b: _kernels.orbit_product(vals, backend=b),
    }


def pipeline_case():
    spec = DomainSpec(d=1, rho0=0.5, K=8, M=33, Lmax=16, eps_radius=1.0)
    phi = make_random_phi(spec, seed=0, amplitude=0.05)
    eta = make_coboundary_family(phi)

    def run(backend):
        _kernels.set_backend(backend)
        return conjugate(eta, phi).coeffs

    return {"conjugate (K=8, M=33, Lmax=16)": run}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = _kernels.available_backends()
    default = _kernels.BACKEND
    print(f"backends: {', '.join(backends)}")
    cases = {**kernel_cases(np.random.default_rng(0)), **pipeline_case()}
    print(f"{'case':36s} " + " ".join(f"{b:>10s}" for b in backends) + "   speed-up   max|diff|")
    for name, fn in cases.items():
        results = {b: best_time(lambda b=b: fn(b), args.repeat) for b in backends}
        line = f"{name:36s} " + " ".join(f"{results[b][0]:10.4f}" for b in backends)
        if len(backends) == 2:
            speed = results["python"][0] / results["cython"][0]
            diff = float(np.max(np.abs(results["python"][1] - results["cython"][1])))
            line += f"   {speed:8.2f}x   {diff:.1e}"
        print(line)
    _kernels.set_backend(default)


if __name__ == "__main__":
    main()
