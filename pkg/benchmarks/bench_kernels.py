"""Compare the numba and pure-numpy kernel backends.

Times the MLP forward pass, the vector-Jacobian product, the full
per-sample Jacobian, the thin QR of the regressor matrix, and one complete
loss-and-gradient evaluation of the orthogonal model.  Run with

    python benchmarks/bench_kernels.py --sizes 1024 16384
"""
import argparse
import time

import numpy as np

from orthoaugm import _kernels
from orthoaugm.augmentation import TrainingContext, loss_and_grad
from orthoaugm.experiments import make_dataset, nfir_basis
from orthoaugm.mlp import MlpSpec, xavier_init


def best_ms(fn, repeat: int) -> float:
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return 1e3 * min(times)


def bench(n: int, backend: str, repeat: int) -> dict:
    spec = MlpSpec((1, 16, 1))
    mlp = xavier_init(spec, 0)
    sizes = spec.sizes_array
    theta = mlp.theta_a
    ds, _ = make_dataset("D2", n, 0, 30.0)
    ctx = TrainingContext.from_dataset(ds, nfir_basis())
    x = np.ascontiguousarray(ctx.states)
    up = np.random.default_rng(0).standard_normal((n, 1))
    with _kernels.use_backend(backend):
        return {
            "forward": best_ms(lambda: _kernels.mlp_forward(theta, sizes, x), repeat),
            "vjp": best_ms(lambda: _kernels.mlp_vjp(theta, sizes, x, up), repeat),
            "jacobian": best_ms(lambda: _kernels.mlp_jacobian(theta, sizes, x), repeat),
            "qr": best_ms(lambda: _kernels.householder_qr(ctx.phi), repeat),
            "loss_grad": best_ms(lambda: loss_and_grad(ctx, [0.8, 0.03], mlp, "orthogonal"), repeat),
        }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1024, 16384])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = ["numba", "numpy"] if _kernels.NUMBA_AVAILABLE else ["numpy"]
    cols = ["forward", "vjp", "jacobian", "qr", "loss_grad"]
    print(f"{'N':>6} {'backend':>8} " + " ".join(f"{c:>10}" for c in cols) + "   (best of, ms)")
    for n in args.sizes:
        for b in backends:
            r = bench(n, b, args.repeat)
            print(f"{n:>6} {b:>8} " + " ".join(f"{r[c]:>10.3f}" for c in cols))


if __name__ == "__main__":
    main()
