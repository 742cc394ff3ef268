"""Regenerate the Chebyshev table used by ``wellspec.kernels`` for x > 2.

The tabulated function is g(x) = exp(x) * sqrt(x) * K0(x) expanded in
T_k(t) with t = 4/x - 1, which maps [2, inf) onto (-1, 1].

    python scripts/gen_k0_chebyshev.py
"""
import mpmath as mp

mp.mp.dps = 50
M = 80


def g(t):
    x = 4 / (t + 1)
    return mp.exp(x) * mp.sqrt(x) * mp.besselk(0, x)


def main():
    nodes = [mp.cos(mp.pi * (j + mp.mpf(1) / 2) / M) for j in range(M)]
    vals = [g(t) for t in nodes]
    coeffs = []
    for k in range(M):
        s = mp.fsum(v * mp.cos(mp.pi * k * (j + mp.mpf(1) / 2) / M) for j, v in enumerate(vals))
        coeffs.append(2 * s / M)
    coeffs[0] /= 2
    keep = [c for c in coeffs]
    while abs(keep[-1]) < mp.mpf("1e-18"):
        keep.pop()
    for c in keep:
        print(f"    {mp.nstr(c, 20, min_fixed=-1, max_fixed=1)},")
    print(len(keep), "terms")


if __name__ == "__main__":
    main()
