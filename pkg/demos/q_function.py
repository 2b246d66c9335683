"""Tabulate the Feller function of a user-defined diffusion and test its boundaries.

Run with ``python demos/q_function.py``. The diffusion
``dX = sqrt(1 + X^2) dW`` is already a local martingale with
``q(x) = 2 x arctan(x) - log(1 + x^2)``. Infinite endpoints are never reached
and ``int |x| / (1 + x^2) dx`` diverges, so it is a true martingale.
"""

import numpy as np

from sepembed import DiffusionSpec, build_scale, classify_boundaries, make_q, to_martingale


def main():
    spec = DiffusionSpec(drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                         volatility=lambda x: np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2),
                         start=0.0)
    model = to_martingale(spec, build_scale(spec))
    q = make_q(model)
    xs = np.array([-100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0])
    exact = 2.0 * xs * np.arctan(xs) - np.log1p(xs * xs)
    print("      x          q(x)      closed form")
    for x, got, want in zip(xs, q(xs), exact):
        print(f"{x:8.1f}  {got:12.8f}  {want:12.8f}")
    rep = classify_boundaries(model)
    print(f"left reachable {rep.l_reachable}, right reachable {rep.r_reachable}, "
          f"true martingale {rep.is_true_martingale}")


if __name__ == "__main__":
    main()
