"""Field exports: CSV grids (canonical) and 8-bit PGM heatmaps.

CSV grids carry full-precision floats, one grid row per line. PGM images are
binary P5 with a linear min-max normalization to 0..255; the normalization
bounds land in a sidecar text file next to each image so the grayscale can be
mapped back to field values.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .problem import HelmholtzProblem, evaluation_grid


def write_grid_csv(path, grid: np.ndarray) -> None:
    grid = np.asarray(grid, dtype=np.float64)
    with open(path, "w") as fh:
        for row in grid:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_grid_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_pgm(path, grid: np.ndarray) -> None:
    """Binary P5 PGM with linear min-max scaling plus a sidecar with the bounds."""
    grid = np.asarray(grid, dtype=np.float64)
    lo = float(grid.min())
    hi = float(grid.max())
    if hi > lo:
        scaled = np.rint((grid - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        scaled = np.zeros(grid.shape, dtype=np.uint8)
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(scaled.tobytes())
    with open(str(path) + ".scale.txt", "w") as fh:
        fh.write(f"min {lo!r}\nmax {hi!r}\n")


def export_fields(predict, resolution: int, out_dir,
                  problem: HelmholtzProblem | None = None) -> dict[str, np.ndarray]:
    """Evaluate prediction/truth/|error| on the grid and write CSV + PGM files.

    `predict` maps an (N, 2) point array to N predicted values.
    """
    problem = problem or HelmholtzProblem()
    points, gx, gy = evaluation_grid(resolution)
    pred = np.asarray(predict(points), dtype=np.float64).reshape(resolution, resolution)
    truth = problem.exact(gx, gy)
    fields = {"pred": pred, "truth": truth, "abserr": np.abs(pred - truth)}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, grid in fields.items():
        write_grid_csv(out / f"{name}.csv", grid)
        write_pgm(out / f"{name}.pgm", grid)
    return fields
