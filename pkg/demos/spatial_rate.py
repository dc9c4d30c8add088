"""Strong convergence in space, for both Galerkin realizations.

Coarse spaces are compared with a fine reference run at a small shared
time step; coarse solutions embed exactly into the reference space, so
the measured error includes what the coarse space cannot represent.
For noise regularity gamma = 1 the sine spectral basis converges like
h^1 (h = 1/((J+1) pi)), while piecewise-linear elements are limited to
h^(2/3) by the low-regularity noise, a visibly flatter line.

Run:  python3 demos/spatial_rate.py       (about a minute)
"""

from pathlib import Path

from stochwave import ExperimentConfig, spatial_study
from stochwave.harness import write_rates_csv

out = Path(__file__).resolve().parent / "out"
out.mkdir(exist_ok=True)

print("spectral levels J in {4, 8, 16, 32} vs reference J = 256")
spectral = spatial_study(ExperimentConfig(samples=100, batch_size=50))
print(f"{'h':>10} {'err_u':>12} {'err_v':>12}")
for h, eu, ev in zip(spectral.scales, spectral.err_u, spectral.err_v):
    print(f"{h:>10.5f} {eu:>12.3e} {ev:>12.3e}")
print(f"fitted slope {spectral.slope:.3f} +/- {spectral.half_width:.3f}  (theory: 1)\n")
write_rates_csv(out / "rates_space_spectral.csv", spectral)

print("element meshes h in {2^-2..2^-5} vs reference h = 2^-8")
fem = spatial_study(ExperimentConfig(backend="fem", samples=60, batch_size=30))
print(f"{'h':>10} {'err_u':>12} {'err_v':>12}")
for h, eu, ev in zip(fem.scales, fem.err_u, fem.err_v):
    print(f"{h:>10.5f} {eu:>12.3e} {ev:>12.3e}")
print(f"fitted slope {fem.slope:.3f} +/- {fem.half_width:.3f}  (theory: 2/3)")
write_rates_csv(out / "rates_space_fem.csv", fem)
print(f"\nwrote CSVs under {out}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(spectral.scales, spectral.total_error, "o-", label="spectral")
    ax.loglog(fem.scales, fem.total_error, "s-", label="finite elements")
    ax.set_xlabel("h")
    ax.set_ylabel("terminal mean-square error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "rates_space.png", dpi=150)
    print(f"wrote {out / 'rates_space.png'}")
except ImportError:
    print("matplotlib not available; skipped the plot")
