"""Why sweeping scales beats picking one, on bars the noise tries to mimic.

The phantom is six bands of parallel bars, 4 px wide on the left growing to
24 px on the right. The noise is smoothed along the bar direction, so at
the wrong filter scale it looks like more bars. A fixed (sigma, rho) pair
always sacrifices some band; the per-pixel sweep holds anisotropy high on
every skeleton.

Run: python3 demos/03_noise_robustness.py
"""

import numpy as np

import tensorscale as ts


def band_table(phantom, anisotropy):
    bands = sorted(b for b in np.unique(phantom.labels) if b > 0)
    return [float(anisotropy[phantom.skeleton & (phantom.labels == b)].mean())
            for b in bands]


def main():
    spec = ts.PhantomSpec(ts.PhantomKind.INCREASING_LINES_2D, width=4.0,
                          shape=(256, 288), width_max=24.0, bands=6)
    phantom = ts.generate(spec)
    noisy = ts.add_noise(phantom.field, ts.NoiseKind.ANISOTROPIC, 0.25,
                         axis=0, smoothing_sigma=2.0, seed=0)

    swept = ts.sweep(noisy, ts.ScaleGrid.linear(1.0, 12.0, 0.5))
    rows = {"sweep": band_table(phantom, swept.measures.anisotropy)}
    for sigma in (2.0, 6.0, 12.0):
        single = ts.single_scale_analyze(noisy, sigma, rho=2.0 * sigma)
        rows[f"sigma={sigma:g}"] = band_table(phantom,
                                              single.measures.anisotropy)

    print("mean anisotropy over each band skeleton (bands thin -> wide)")
    header = "".join(f"{f'band {b}':>9}" for b in range(1, 7))
    print(f"{'run':>10} {header}  {'floor':>6}")
    for name, values in rows.items():
        cells = "".join(f"{v:>9.3f}" for v in values)
        print(f"{name:>10} {cells}  {min(values):>6.3f}")

    sweep_floor = min(rows["sweep"])
    best_fixed = max(min(v) for n, v in rows.items() if n != "sweep")
    print(f"\nsweep floor {sweep_floor:.3f} vs best fixed-scale floor "
          f"{best_fixed:.3f}")


if __name__ == "__main__":
    main()
