"""Compare the numba and numpy kernels of the interior-point solver.

Two measurements per backend:

* the Schur complement kernel alone, on one LMI block built like a
  reduced Choi block (size n = d*r, n^2 sparse constraint matrices);
* end-to-end ``disturbance_measure`` on random instances.

Usage: python benchmarks/bench_schur.py [--repeat N] [--sizes 4 9 16]
"""

import argparse
import time

import numpy as np

from qdisturb import _accel
from qdisturb import disturbance as dm
from qdisturb import linalg as la
from qdisturb import rand
from qdisturb import sdp


def schur_inputs(n, rng):
    e = la.elementary_hermitian_basis(n)
    block = sdp.Block.from_dense(np.zeros((n, n)), {l: e[l] for l in range(n * n)})
    x = rand.ginibre(n, seed=rng)
    sinv = np.linalg.inv(x @ x.conj().T + np.eye(n))
    y = rand.ginibre(n, seed=rng)
    cmat = y @ y.conj().T + np.eye(n)
    return block, sinv, cmat


def time_schur(block, sinv, cmat, repeat):
    n = block.size
    m = np.zeros((n * n, n * n))
    _accel.schur_block(m, block.bvars, block.ptr, block.rows, block.cols, block.vals, sinv, cmat)  # warm up / JIT
    best = np.inf
    for _ in range(repeat):
        m[:] = 0
        t = time.perf_counter()
        _accel.schur_block(m, block.bvars, block.ptr, block.rows, block.cols, block.vals, sinv, cmat)
        best = min(best, time.perf_counter() - t)
    return best, m


def time_solve(pairs, repeat):
    dm.disturbance_measure(*pairs[0])  # warm up
    best = np.inf
    values = None
    for _ in range(repeat):
        t = time.perf_counter()
        values = [dm.disturbance_measure(a, b).value for a, b in pairs]
        best = min(best, time.perf_counter() - t)
    return best, np.array(values)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 9, 16])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not _accel.HAVE_NUMBA:
        print("numba not installed; only the numpy backend is available")
    backends = ["numba", "numpy"] if _accel.HAVE_NUMBA else ["numpy"]
    rng = np.random.default_rng(args.seed)
    prev = _accel.USE_NUMBA

    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    try:
        for n in args.sizes:
            block, sinv, cmat = schur_inputs(n, rng)
            times, mats = [], []
            for b in backends:
                _accel.use_numba(b == "numba")
                t, m = time_schur(block, sinv, cmat, args.repeat)
                times.append(t)
                mats.append(m)
            if len(mats) == 2:
                assert np.allclose(mats[0], mats[1], atol=1e-9), "backends disagree"
            speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) == 2 else ""
            print(f"{f'schur block n={n}':<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + speed)

        for d, count in ((2, 10), (3, 5), (4, 2)):
            pairs = [(rand.povm(d, 3, seed=rng), rand.povm(d, 3, seed=rng)) for _ in range(count)]
            times, vals = [], []
            for b in backends:
                _accel.use_numba(b == "numba")
                t, v = time_solve(pairs, max(1, args.repeat // 2))
                times.append(t)
                vals.append(v)
            if len(vals) == 2:
                assert np.allclose(vals[0], vals[1], atol=1e-7), "backends disagree"
            speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) == 2 else ""
            print(f"{f'D_A(B) d={d} x{count}':<28}" + "".join(f"{t:>11.3f}s" for t in times) + speed)
    finally:
        _accel.use_numba(prev)


if __name__ == "__main__":
    main()
