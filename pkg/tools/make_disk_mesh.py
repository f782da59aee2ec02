#!/usr/bin/env python3
"""Generate an unstructured unit-disk mesh by spring relaxation.

Hex-seeded points relax under repulsive edge forces with Delaunay
retriangulation each sweep; points pushed past the circle project back
onto it, which is where the boundary ring forms.  Deterministic (no
randomness), so regenerating a mesh reproduces it bit for bit.

Usage: python3 tools/make_disk_mesh.py --h 0.05 --out disk.txt
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qflow.mesh import load_mesh  # noqa: E402

FSCALE = 1.2    # rest-length overshoot so bars push outward
DELTAT = 0.2    # pseudo-time step for point movement
DPTOL = 1e-3    # interior-movement fraction of h that counts as converged


def hex_seed(h: float) -> np.ndarray:
    """Equilateral-lattice points covering the closed unit disk."""
    dy = h * math.sqrt(3.0) / 2.0
    ys = np.arange(-1.0, 1.0 + dy, dy)
    rows = []
    for r, y in enumerate(ys):
        xs = np.arange(-1.0, 1.0 + h, h)
        if r % 2:
            xs = xs + h / 2.0
        rows.append(np.column_stack([xs, np.full(xs.size, y)]))
    p = np.vstack(rows)
    return p[np.hypot(p[:, 0], p[:, 1]) < 1.0 - 1e-3 * h]


def _tri_inside(p: np.ndarray) -> np.ndarray:
    tri = Delaunay(p).simplices
    c = p[tri].mean(axis=1)
    return tri[np.hypot(c[:, 0], c[:, 1]) < 1.0]


def relax(p: np.ndarray, h: float, iters: int) -> np.ndarray:
    for it in range(iters):
        tri = _tri_inside(p)
        bars = np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
        bars = np.unique(bars, axis=0)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        length = np.hypot(vec[:, 0], vec[:, 1])
        rest = FSCALE * math.sqrt(float(length @ length) / length.size)
        force = np.maximum(rest - length, 0.0) / length
        fvec = force[:, None] * vec
        move = np.zeros_like(p)
        np.add.at(move, bars[:, 0], fvec)
        np.add.at(move, bars[:, 1], -fvec)
        p = p + DELTAT * move
        r = np.hypot(p[:, 0], p[:, 1])
        outside = r > 1.0
        p[outside] /= r[outside, None]
        interior = r < 1.0 - 1e-3 * h
        if interior.any():
            step = DELTAT * np.hypot(move[interior, 0], move[interior, 1]).max()
            if step < DPTOL * h:
                break
    return p


def triangle_quality(p: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """2 r_in / r_circ per triangle: 1 for equilateral, 0 for degenerate."""
    a = np.hypot(*(p[tri[:, 1]] - p[tri[:, 0]]).T)
    b = np.hypot(*(p[tri[:, 2]] - p[tri[:, 1]]).T)
    c = np.hypot(*(p[tri[:, 0]] - p[tri[:, 2]]).T)
    return (b + c - a) * (c + a - b) * (a + b - c) / (a * b * c)


def finalize(p: np.ndarray, h: float):
    """Orient CCW, find the boundary ring, snap it onto the circle."""
    tri = _tri_inside(p)
    v0, v1, v2 = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    cross = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) \
        - (v1[:, 1] - v0[:, 1]) * (v2[:, 0] - v0[:, 0])
    flip = cross < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]

    edges = np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if counts.max() > 2:
        raise RuntimeError("non-manifold edge in relaxed mesh; adjust h or iterations")
    boundary = np.unique(uniq[counts == 1])
    r = np.hypot(p[boundary, 0], p[boundary, 1])
    if (np.abs(r - 1.0) > 0.2 * h).any():
        raise RuntimeError("boundary node far from the circle; relaxation did not settle")
    p[boundary] /= r[:, None]

    quality = triangle_quality(p, tri)
    if quality.min() < 0.2:
        raise RuntimeError(f"sliver triangle (quality {quality.min():.3f}); adjust h or iterations")
    return p, tri, boundary, quality


def write_mesh(path: str, p: np.ndarray, tri: np.ndarray, boundary: np.ndarray,
               comment: str) -> None:
    with open(path, "w") as f:
        for line in comment.splitlines():
            f.write(f"# {line}\n")
        f.write(f"{len(p)} {len(tri)} {len(boundary)}\n")
        for x, y in p:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in tri:
            f.write(f"{i} {j} {k}\n")
        for i in np.sort(boundary):
            f.write(f"{i}\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, required=True, help="target edge length")
    ap.add_argument("--out", required=True, help="output mesh file")
    ap.add_argument("--iters", type=int, default=500, help="relaxation sweep cap")
    args = ap.parse_args(argv)

    p = hex_seed(args.h)
    p = relax(p, args.h, args.iters)
    p, tri, boundary, quality = finalize(p, args.h)
    write_mesh(args.out, p, tri, boundary,
               f"unit disk, target edge length h = {args.h:g}\n"
               f"generated by tools/make_disk_mesh.py (deterministic)")

    mesh = load_mesh(args.out)
    print(f"{args.out}: V={mesh.n_nodes} L={mesh.n_elements} B={len(mesh.boundary_ids)} "
          f"mean_edge={mesh.mean_edge_length():.4f} "
          f"quality min={quality.min():.3f} mean={quality.mean():.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
