"""Where the magic constants come from.

Everything downstream hangs on one number: the ratio t between the optimal
derivative-filter sigma and the width of the feature it responds to. This
script derives t for a few normalization exponents, checks the closed form
against a brute-force search, and shows the ring geometry built on top.

Run: python3 demos/01_scale_selection_basics.py
"""

import numpy as np

import tensorscale as ts


def main():
    print("filter-to-feature ratio t(gamma)")
    print(f"{'gamma':>8} {'t':>10} {'sigma* for a 20 px bar':>24}")
    for gamma in (1.05, 1.1, 1.2, 1.3, 1.5, 2.0):
        t = ts.gamma_to_t(gamma)
        print(f"{gamma:>8.2f} {t:>10.5f} {20.0 * t:>20.2f} px")
    print()

    # the closed form sits on the lower Lambert branch; show the root quality
    x = -np.logspace(np.log10(1.0 / np.e), -6.0, 5)
    w = ts.lambert_w_m1(x)
    print("Lambert W_-1 spot checks (w e^w should reproduce x):")
    for xi, wi in zip(x, w):
        print(f"  x={xi:+.6e}  w={wi:+.6f}  residual={wi * np.exp(wi) - xi:+.1e}")
    print()

    # brute force: slide a derivative filter over a 20 px bar and find the
    # sigma that maximizes the normalized edge response
    gamma = 1.2
    sigmas = np.arange(2.0, 16.0, 0.01)
    best = sigmas[int(np.argmax(ts.rect_response(20.0, sigmas, gamma)))]
    print(f"brute-force argmax for a 20 px bar at gamma={gamma}: "
          f"sigma*={best:.2f} vs t*20={ts.gamma_to_t(gamma) * 20:.2f}")
    print()

    t = ts.gamma_to_t(1.2)
    sigma_star = t * 20.0
    sigma_r = ts.sigma_r_from_scale(sigma_star, 0.999, t)
    print("ring filter matched to that bar:")
    print(f"  sigma_R = {sigma_r:.3f} ({sigma_r / sigma_star:.4f} sigma*)")
    print(f"  peak radius = {ts.ring_peak_radius(sigma_r, 0.999):.2f} px "
          f"(half the bar width is 10)")
    print(f"  round trip t_to_gamma(t) = {ts.t_to_gamma(t):.6f}")


if __name__ == "__main__":
    main()
