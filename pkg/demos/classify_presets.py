"""Walk the classifier over the built-in diffusions and a few target laws.

Run with ``python demos/classify_presets.py``. For each pair it prints whether
an embedding exists, whether finite and integrable stopping times are
possible, the predicted mean duration and the bounded-time verdict.
"""

import math

from sepembed import classify, get_preset, targets

HALF_LN2 = math.log(2.0) / 2.0

PAIRS = [
    ("bm", {}, targets.uniform(-1.0, 1.0)),
    ("bm", {}, targets.two_point(1.0)),
    ("bm", {}, targets.student_t(1.0)),
    ("bessel3", {}, targets.atoms([(0.5, 1 / 3), (2.0, 2 / 3)])),
    ("bm_drift", {"gamma": 1.0, "theta": 1.0},
     targets.atoms([(-HALF_LN2, 1 / 3), (HALF_LN2, 2 / 3)])),
    ("ou", {"xi": 1.0, "sigma": 1.0}, targets.gaussian(0.0, 0.5)),
]


def main():
    for name, params, rho in PAIRS:
        preset = get_preset(name, **params)
        v = classify(preset.spec, rho, {"preset": preset})
        mean = "n/a" if v.predicted_E_tau is None else f"{v.predicted_E_tau:.6g}"
        print(f"{name:10s} {rho.name:12s} exists={v.exists:8s} finite={v.finite_possible:8s} "
              f"integrable={v.integrable_possible:8s} E[tau]={mean:10s} bounded={v.bounded}")
        for reason in v.reasons:
            print(f"    - {reason}")


if __name__ == "__main__":
    main()
