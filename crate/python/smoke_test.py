"""Smoke test for the wstar_py extension module.

Build the module first (see README), then run:  python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import wstar_py as w


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    alg = w.BlockAlgebra([2, 3])
    assert alg.dims == [2, 3] and alg.ambient_dim == 5 and alg.real_dim == 26, alg

    u, h, rank = w.polar([[0, 1], [0, 0]])
    assert rank == 1
    assert close(u[0][1], 1) and close(u[0][0], 0) and close(h[1][1], 1) and close(h[0][0], 0)

    try:
        w.partial_inverse([[1, 0], [0, 5e-9]])
    except w.WstarError as e:
        assert "ambiguous rank" in str(e)
    else:
        raise AssertionError("ambiguous rank was accepted")

    spectra, ranks, stab = w.orbit(w.BlockAlgebra([2]), [[0, 0], [0, 3]])
    assert ranks == [1] and stab == 1 and close(spectra[0][0], 3.0)
    _, _, stab = w.orbit(w.BlockAlgebra([2]), [[1, 0], [0, 1]])
    assert stab == 4

    r = 1 / math.sqrt(2)
    amp, prob = w.feynman_amplitude([[1, 0], [r, r], [0, 1]])
    assert close(amp, 0.5) and close(prob, 0.25)
    try:
        w.feynman_amplitude([[1, 0], [2, 0]])
    except ValueError:
        pass
    else:
        raise AssertionError("non-unit vector was accepted")

    # FS(i·ψ⊥-direction, ψ⊥-direction) for ψ = e1 is 2r·Im⟨i e2|e2⟩ = -2r
    fs = w.fubini_study_form([1, 0], [0, 1j], [0, 1], 0.5)
    assert close(fs, -1.0), fs

    kappa, ratio = w.calibrate_kappa()
    assert kappa == -1.0 and close(ratio, 0.5), (kappa, ratio)

    names = w.suite_names()
    assert "groupoid-axioms" in names and "multiplicativity" in names
    for name, dims, trials in [("groupoid-axioms", [2], 50), ("multiplicativity", [3], 100), ("kks", [2, 1], 50)]:
        out = w.run_suite(name, dims, trials=trials, seed=7)
        print(out)
        assert out.passed and out.max_residual <= out.tolerance
    failing = w.run_suite("kks", [2], trials=5, seed=1, threshold=1e-30)
    assert not failing.passed
    try:
        w.run_suite("nosuch", [2])
    except w.WstarError:
        pass
    else:
        raise AssertionError("unknown suite was accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
