"""Wall fluxes, conserved quantities and file output."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dg_core import Grid1D, NodalField, reference_basis
from .poisson import FieldPair, density

FLUX_COLUMNS = (
    "t", "je_plus", "je_minus", "ji_plus", "ji_minus", "je_naive", "ji_naive",
    "mass_e", "mass_i", "E_energy", "vmax_e", "vmax_i",
)
SNAPSHOT_MAGIC = b"SOLKIN01"


@dataclass(frozen=True)
class FluxSample:
    t: float
    species: str
    plus: float
    minus: float
    naive: float


def wall_trace(f: NodalField, side: str) -> np.ndarray:
    """f at x = +-L as nodal values in v, shape (Nv, K)."""
    b = reference_basis(f.k)
    if side == "right":
        return np.einsum("a,ajb->jb", b.right_trace, f.values[-1])
    if side == "left":
        return np.einsum("a,ajb->jb", b.left_trace, f.values[0])
    raise ValueError("side must be 'left' or 'right'")


def _moment(g: np.ndarray, v: Grid1D, lo: float, hi: float, k: int, absolute: bool) -> float:
    """int_lo^hi v g(v) dv (or |v| g) with exact sub-cell quadrature."""
    b = reference_basis(k)
    a, w = v.lefts, v.widths
    s = np.clip(a, lo, hi)
    e = np.clip(a + w, lo, hi)
    vq = s[:, None] + (e - s)[:, None] * b.nodes
    gq = np.einsum("jqn,jn->jq", b.at((vq - a[:, None]) / w[:, None]), g)
    vv = np.abs(vq) if absolute else vq
    return float(np.sum((e - s)[:, None] * b.weights * vv * gq))


def wall_flux(f: NodalField, side: str = "right", sqrt_mu: float = 1.0) -> tuple[float, float]:
    """(outflow flux, naive full-velocity flux) through one wall.

    The outflow flux integrates only the velocities leaving the domain
    (v >= 0 at the right wall, v <= 0 at the left, counted positive).
    Both are particle fluxes: the x speed of the species is v / sqrt_mu.
    """
    g = wall_trace(f, side)
    naive = _moment(g, f.v, f.v.left, f.v.right, f.k, absolute=False) / sqrt_mu
    if side == "right":
        return _moment(g, f.v, 0.0, f.v.right, f.k, absolute=False) / sqrt_mu, naive
    return _moment(g, f.v, f.v.left, 0.0, f.k, absolute=True) / sqrt_mu, naive


def flux_sample(f: NodalField, t: float, sqrt_mu: float = 1.0) -> FluxSample:
    plus, naive = wall_flux(f, "right", sqrt_mu)
    minus, _ = wall_flux(f, "left", sqrt_mu)
    return FluxSample(t, f.species, plus, minus, naive)


def electric_energy(E: FieldPair) -> float:
    w = reference_basis(E.k).weights
    return 0.5 * float(np.sum(E.grid.widths[:, None] * w * E.E**2))


def summary(fields: dict, E: FieldPair | None) -> dict:
    w = None
    out = {}
    for name, f in fields.items():
        w = reference_basis(f.k).weights
        wx = f.x.widths[:, None] * w
        wv = f.v.widths[:, None] * w
        out[f"mass_{name}"] = f.mass()
        out[f"l2_{name}"] = float(np.sqrt(np.einsum("ia,jb,iajb->", wx, wv, f.values**2)))
        out[f"vmax_{name}"] = f.vmax
    if "e" in fields and "i" in fields:
        rho = density(fields["i"]) - density(fields["e"])
        f = fields["e"]
        out["charge"] = float(np.sum(f.x.widths[:, None] * reference_basis(f.k).weights * rho))
    out["E_energy"] = 0.0 if E is None else electric_energy(E)
    return out


def flux_row(fields: dict, E: FieldPair | None, t: float, sqrt_mu_i: float = 1.0) -> list[float]:
    """One flux.csv row; ion fluxes are divided by sqrt(mu)."""
    fe, fi = fields["e"], fields["i"]
    se, si = flux_sample(fe, t), flux_sample(fi, t, sqrt_mu_i)
    s = summary(fields, E)
    return [t, se.plus, se.minus, si.plus, si.minus, se.naive, si.naive,
            s["mass_e"], s["mass_i"], s["E_energy"], fe.vmax, fi.vmax]


class FluxWriter:
    """Appends rows to flux.csv; the header is written once."""

    def __init__(self, path: Path):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise OSError(f"cannot open flux file {self.path}: {exc}") from exc
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(FLUX_COLUMNS)
        self.rows = 0

    def write(self, row):
        self._w.writerow([format(float(x), ".17g") for x in row])
        self.rows += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_flux(path) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(FLUX_COLUMNS)}


def write_snapshot(path, fields: dict, step: int, t: float):
    """Flat binary dump of both species plus a .meta text descriptor.

    Layout (little endian): magic, int64 [k, Nx, Nv_e, Nv_i], float64 x
    edges, v edges (electrons, ions), then f_e and f_i row-major with
    indices (x cell, x node, v cell, v node).
    """
    path = Path(path)
    fe, fi = fields["e"], fields["i"]
    header = np.array([fe.k, fe.x.n_cells, fe.v.n_cells, fi.v.n_cells], dtype="<i8")
    try:
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(header.tobytes())
            for arr in (fe.x.edges, fe.v.edges, fi.v.edges, fe.values, fi.values):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        meta = path.with_suffix(".meta")
        meta.write_text(
            "\n".join([
                "format=solkin-snapshot-1",
                f"step={step}",
                f"t={t!r}",
                f"k={fe.k}",
                f"nx_cells={fe.x.n_cells}",
                f"nv_cells_e={fe.v.n_cells}",
                f"nv_cells_i={fi.v.n_cells}",
                f"vmax_e={fe.vmax!r}",
                f"vmax_i={fi.vmax!r}",
                "layout=magic[8] int64[4] x_edges v_edges_e v_edges_i f_e f_i",
                "index_order=x_cell,x_node,v_cell,v_node",
                "dtype=float64 little-endian",
            ]) + "\n"
        )
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path} is not a snapshot file")
    k, nx, nve, nvi = np.frombuffer(raw, "<i8", 4, 8)
    K = k + 1
    data = np.frombuffer(raw, "<f8", offset=40)
    out, pos = {"k": int(k)}, 0
    for name, size, shape in (
        ("x_edges", nx + 1, (nx + 1,)),
        ("v_edges_e", nve + 1, (nve + 1,)),
        ("v_edges_i", nvi + 1, (nvi + 1,)),
        ("f_e", nx * K * nve * K, (nx, K, nve, K)),
        ("f_i", nx * K * nvi * K, (nx, K, nvi, K)),
    ):
        out[name] = data[pos:pos + size].reshape(shape)
        pos += size
    return out


def write_profiles(path, fields: dict, E: FieldPair):
    """x, rho, phi and E at the x nodes."""
    fe = fields["e"]
    x = fe.x.nodes(fe.k).ravel()
    rho = (density(fields["i"]) - density(fe)).ravel()
    b2 = reference_basis(fe.k + 1)
    phi = (E.phi @ b2.at(reference_basis(fe.k).nodes).T).ravel()
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "rho", "phi", "E"])
            for row in zip(x, rho, phi, E.E.ravel()):
                w.writerow([format(float(v), ".17g") for v in row])
    except OSError as exc:
        raise OSError(f"cannot write profiles {path}: {exc}") from exc
