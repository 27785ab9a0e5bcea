#!/usr/bin/env python3
"""Regenerate triangulation fixtures from SnapPy.

Exports the gluing tables (edge rows, meridian row, longitude row) and
high-precision geometric shapes for the shipped fixture manifolds. The
matrices are stored verbatim; all derived data (Neumann-Zagier matrices,
flattenings) is recomputed by the engine at ingest time.

Usage: python3 tools/gen_fixtures.py [outdir]
"""

import json
import sys

import snappy


def rows_of(mat):
    return [[int(x) for x in row] for row in mat.data]


def export(name, path, bits=400, digits=100):
    M = snappy.Manifold(name)
    sol = M.solution_type()
    if sol != "all tetrahedra positively oriented":
        raise RuntimeError(f"{name}: not a geometric solution: {sol}")
    N = M.num_tetrahedra()
    eqs = M.gluing_equations()
    rows = rows_of(eqs)
    if len(rows) != N + 2:
        raise RuntimeError(f"{name}: expected {N + 2} gluing rows, got {len(rows)}")

    g = [[r[3 * i] for i in range(N)] for r in rows]
    gp = [[r[3 * i + 1] for i in range(N)] for r in rows]
    gpp = [[r[3 * i + 2] for i in range(N)] for r in rows]

    # Edge-row sanity: entries in {0,1,2}, columns sum to 2.
    for tab in (g, gp, gpp):
        for r in tab[:N]:
            assert all(e in (0, 1, 2) for e in r), (name, r)
        for j in range(N):
            assert sum(tab[i][j] for i in range(N)) == 2

    # Orient the longitude so that A_N . D - B_N . C = +1, where row N+1
    # is the meridian and row N+2 the longitude.
    am = [g[N][j] - gp[N][j] for j in range(N)]
    bm = [gpp[N][j] - gp[N][j] for j in range(N)]
    two_c = [g[N + 1][j] - gp[N + 1][j] for j in range(N)]
    two_d = [gpp[N + 1][j] - gp[N + 1][j] for j in range(N)]
    pairing2 = sum(am[j] * two_d[j] - bm[j] * two_c[j] for j in range(N))
    if pairing2 == -2:
        for tab in (g, gp, gpp):
            tab[N + 1] = [-e for e in tab[N + 1]]
    elif pairing2 != 2:
        raise RuntimeError(f"{name}: meridian-longitude pairing {pairing2 / 2}")

    shapes = M.tetrahedra_shapes(part="rect", bits_prec=bits)
    shape_list = []
    for z in shapes:
        re = z.real()
        im = z.imag()
        shape_list.append({"re": str(re), "im": str(im)})

    doc = {
        "schema": "nzdatum-v1",
        "n": N,
        "gluing": {"g": g, "gp": gp, "gpp": gpp},
        "shapes": shape_list,
        "meta": {
            "manifold": name,
            "source": f"SnapPy {snappy.__version__} gluing_equations()",
            "solution_type": sol,
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"{name}: N={N} -> {path}")


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
    export("4_1", f"{outdir}/fig8_snappy.json")
    export("9_12", f"{outdir}/k9_12.json")


if __name__ == "__main__":
    main()
