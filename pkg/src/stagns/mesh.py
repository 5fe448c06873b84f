"""Quadrilateral staggered meshes: primal cells, faces and diamond dual cells.

A mesh is built from vertices and counter-clockwise cell connectivity.  All
derived geometry (face normals, dual-cell volumes, regularity metrics) is
computed once at construction; instances are immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


class MeshError(ValueError):
    """Invalid mesh input or construction failure."""


def _polygon_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _polygon_centroid(pts):
    """Area centroid of a simple polygon (CCW)."""
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return np.array([cx, cy])


def _polygon_diameter(pts):
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def inscribed_ball_diameter(pts):
    """Diameter of the largest ball inscribed in the convex polygon `pts` (CCW).

    Solved as a small LP: maximize r subject to the point staying at distance
    at least r inside every edge half-plane.
    """
    m = len(pts)
    a_ub = np.zeros((m, 3))
    b_ub = np.zeros(m)
    for i in range(m):
        a, b = pts[i], pts[(i + 1) % m]
        t = b - a
        n_in = np.array([-t[1], t[0]]) / np.linalg.norm(t)  # inward for CCW
        a_ub[i, :2] = -n_in
        a_ub[i, 2] = 1.0
        b_ub[i] = -n_in @ a
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=a_ub, b_ub=b_ub,
                  bounds=[(None, None), (None, None), (0, None)],
                  method="highs")
    if not res.success:
        raise MeshError("inscribed-ball LP failed for polygon")
    return 2.0 * res.x[2]


def _is_convex_ccw(pts, tol=1e-12):
    m = len(pts)
    scale = _polygon_diameter(pts) ** 2
    for i in range(m):
        a = pts[i]
        b = pts[(i + 1) % m]
        c = pts[(i + 2) % m]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross <= tol * scale:
            return False
    return True


class Mesh:
    """Staggered quadrilateral discretization.

    Local conventions per cell (vertices v0..v3 counter-clockwise):
      - local face j joins v_j and v_{j+1};
      - the interior dual face at corner j (segment mass-center -> v_j)
        separates the half-diamonds of local faces (j+3)%4 and j.

    Faces are stored once; `face_cells[f] = (owner, neighbor)` with
    neighbor = -1 on the boundary.  `face_normals[f]` is the unit normal
    outward from the owner; `cell_face_signs` gives n_{K,sigma} per cell.
    """

    def __init__(self, vertices, cells):
        vertices = np.asarray(vertices, dtype=float)
        cells = np.asarray(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if cells.ndim != 2 or cells.shape[1] != 4:
            raise MeshError("cells must be an (nc, 4) array")
        self.vertices = vertices
        self.cells = cells
        self.n_cells = len(cells)

        self._build_cell_geometry()
        self._build_faces()
        self._build_dual_geometry()
        self._validate()
        for arr in (self.vertices, self.cells, self.cell_volumes,
                    self.cell_centers, self.face_normals, self.face_measures):
            arr.flags.writeable = False

    # -- construction -----------------------------------------------------

    def _build_cell_geometry(self):
        nc = self.n_cells
        self.cell_volumes = np.zeros(nc)
        self.cell_centers = np.zeros((nc, 2))
        self.cell_diameters = np.zeros(nc)
        for c in range(nc):
            pts = self.vertices[self.cells[c]]
            area = _polygon_area(pts)
            if area <= 0:
                raise MeshError(f"cell {c} is not counter-clockwise or degenerate")
            if not _is_convex_ccw(pts):
                raise MeshError(f"cell {c} is not convex")
            self.cell_volumes[c] = area
            self.cell_centers[c] = _polygon_centroid(pts)
            self.cell_diameters[c] = _polygon_diameter(pts)

    def _build_faces(self):
        face_of = {}
        fv, f_owner, f_neigh = [], [], []
        nc = self.n_cells
        self.cell_faces = np.zeros((nc, 4), dtype=np.int64)
        self.cell_face_signs = np.zeros((nc, 4), dtype=np.int64)
        for c in range(nc):
            for j in range(4):
                a = self.cells[c, j]
                b = self.cells[c, (j + 1) % 4]
                key = (min(a, b), max(a, b))
                if key not in face_of:
                    face_of[key] = len(fv)
                    fv.append((a, b))
                    f_owner.append(c)
                    f_neigh.append(-1)
                    self.cell_faces[c, j] = face_of[key]
                    self.cell_face_signs[c, j] = 1
                else:
                    f = face_of[key]
                    if f_neigh[f] != -1:
                        raise MeshError(f"face {key} shared by more than two cells")
                    f_neigh[f] = c
                    self.cell_faces[c, j] = f
                    self.cell_face_signs[c, j] = -1
        self.n_faces = len(fv)
        self.face_vertices = np.array(fv, dtype=np.int64)
        self.face_cells = np.stack([np.array(f_owner), np.array(f_neigh)], axis=1)

        a = self.vertices[self.face_vertices[:, 0]]
        b = self.vertices[self.face_vertices[:, 1]]
        t = b - a
        self.face_measures = np.linalg.norm(t, axis=1)
        self.face_midpoints = 0.5 * (a + b)
        # owner traverses a->b counter-clockwise, so outward is to the right
        self.face_normals = np.stack([t[:, 1], -t[:, 0]], axis=1) / self.face_measures[:, None]

        self.external = self.face_cells[:, 1] < 0
        self.internal_faces = np.nonzero(~self.external)[0]
        self.n_internal = len(self.internal_faces)
        self.face_int_index = -np.ones(self.n_faces, dtype=np.int64)
        self.face_int_index[self.internal_faces] = np.arange(self.n_internal)

    def _build_dual_geometry(self):
        # |D_{K,sigma}| = |K|/4 by definition; geometry of the diamond is the
        # cone fan from the mass centers, used for diagnostics only.
        quarter = self.cell_volumes / 4.0
        self.dual_volumes = quarter[self.face_cells[:, 0]].copy()
        inter = ~self.external
        self.dual_volumes[inter] += quarter[self.face_cells[inter, 1]]

        self.dual_diameters = np.zeros(self.n_faces)
        for f in range(self.n_faces):
            self.dual_diameters[f] = _polygon_diameter(self.dual_polygon(f))

    def dual_polygon(self, f):
        """CCW vertex list of the diamond cell D_sigma (diagnostic geometry)."""
        a = self.vertices[self.face_vertices[f, 0]]
        b = self.vertices[self.face_vertices[f, 1]]
        xk = self.cell_centers[self.face_cells[f, 0]]
        if self.external[f]:
            return np.array([a, b, xk])
        xl = self.cell_centers[self.face_cells[f, 1]]
        return np.array([a, xl, b, xk])

    def _validate(self):
        for c in range(self.n_cells):
            faces = self.cell_faces[c]
            signs = self.cell_face_signs[c]
            closure = (self.face_measures[faces, None]
                       * self.face_normals[faces] * signs[:, None]).sum(axis=0)
            perim = self.face_measures[faces].sum()
            if np.linalg.norm(closure) > 1e-13 * perim:
                raise MeshError(f"cell {c}: face normals do not close")
        total = self.dual_volumes.sum() - self.cell_volumes.sum()
        if abs(total) > 1e-13 * self.cell_volumes.sum():
            raise MeshError("dual volumes do not partition the domain")

    # -- queries ----------------------------------------------------------

    @property
    def h(self):
        """Mesh size: largest cell diameter."""
        return float(self.cell_diameters.max())

    def cell_vertices(self, c):
        return self.vertices[self.cells[c]]

    def other_cell(self, f, c):
        k, l = self.face_cells[f]
        return l if c == k else k


@dataclass(frozen=True)
class RegularityReport:
    h: float
    alpha: float
    theta_mesh: float
    theta_e1: float
    theta_e2: float
    theta_e3: float

    @property
    def theta(self):
        return max(self.theta_mesh, self.theta_e1, self.theta_e2, self.theta_e3)


def build_cartesian(nx, ny, domain=(0.0, 0.0, 1.0, 1.0)):
    """Uniform nx-by-ny mesh of the axis-aligned rectangle `domain`."""
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be positive")
    x0, y0, x1, y1 = map(float, domain)
    if x1 <= x0 or y1 <= y0:
        raise MeshError("degenerate domain")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.stack([xx.ravel(), yy.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return Mesh(vertices, np.array(cells))


def refine(mesh):
    """Split every quadrangle in four along the mid-lines of opposite faces."""
    verts = [tuple(v) for v in mesh.vertices]
    new_pts = list(mesh.vertices)
    edge_mid = {}

    def midpoint_id(a, b):
        key = (min(a, b), max(a, b))
        if key not in edge_mid:
            edge_mid[key] = len(new_pts)
            new_pts.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
        return edge_mid[key]

    cells = []
    for c in range(mesh.n_cells):
        v = mesh.cells[c]
        m = [midpoint_id(v[j], v[(j + 1) % 4]) for j in range(4)]
        center = len(new_pts)
        new_pts.append(mesh.vertices[v].mean(axis=0))
        cells.append([v[0], m[0], center, m[3]])
        cells.append([m[0], v[1], m[1], center])
        cells.append([center, m[1], v[2], m[2]])
        cells.append([m[3], center, m[2], v[3]])
    del verts
    return Mesh(np.array(new_pts), np.array(cells))


def perturb(mesh, magnitude, seed):
    """Displace interior vertices by up to `magnitude` times the local face size.

    Deterministic for a fixed seed.  Raises MeshError (with the offending cell)
    if a displaced cell stops being convex.
    """
    rng = np.random.default_rng(seed)
    disp = rng.uniform(-1.0, 1.0, size=mesh.vertices.shape)
    boundary = np.zeros(len(mesh.vertices), dtype=bool)
    boundary[mesh.face_vertices[mesh.external].ravel()] = True

    h_local = np.full(len(mesh.vertices), np.inf)
    for f in range(mesh.n_faces):
        a, b = mesh.face_vertices[f]
        h_local[a] = min(h_local[a], mesh.face_measures[f])
        h_local[b] = min(h_local[b], mesh.face_measures[f])

    new_verts = mesh.vertices.copy()
    move = ~boundary
    new_verts[move] += magnitude * h_local[move, None] * disp[move]
    return Mesh(new_verts, mesh.cells.copy())


def regularity(mesh):
    """Mesh-regularity metrics: size, parallelogram deviation and the thetas."""
    h = mesh.h

    alpha = 0.0
    for c in range(mesh.n_cells):
        faces = mesh.cell_faces[c]
        signs = mesh.cell_face_signs[c]
        normals = mesh.face_normals[faces] * signs[:, None]
        for i, j in ((0, 2), (1, 3)):
            cosang = np.clip(-(normals[i] @ normals[j]), -1.0, 1.0)
            alpha = max(alpha, float(np.arccos(cosang)))

    theta_mesh = 0.0
    for c in range(mesh.n_cells):
        r = inscribed_ball_diameter(mesh.cell_vertices(c))
        theta_mesh = max(theta_mesh, mesh.cell_diameters[c] / r)

    r_dual = np.array([inscribed_ball_diameter(mesh.dual_polygon(f))
                       for f in range(mesh.n_faces)])

    # diamonds touch if their faces share a vertex or a cell
    pairs = set()
    vert_faces = {}
    for f in range(mesh.n_faces):
        for v in mesh.face_vertices[f]:
            vert_faces.setdefault(int(v), []).append(f)
    for group in vert_faces.values():
        for i in group:
            for j in group:
                if i != j:
                    pairs.add((i, j))
    for c in range(mesh.n_cells):
        for i in mesh.cell_faces[c]:
            for j in mesh.cell_faces[c]:
                if i != j:
                    pairs.add((int(i), int(j)))
    theta_e1 = max(r_dual[i] / mesh.dual_diameters[j] for i, j in pairs)

    theta_e2 = 0.0
    for c in range(mesh.n_cells):
        xk = mesh.cell_centers[c]
        perim = mesh.face_measures[mesh.cell_faces[c]].sum()
        for f in mesh.cell_faces[c]:
            a = mesh.vertices[mesh.face_vertices[f, 0]]
            b = mesh.vertices[mesh.face_vertices[f, 1]]
            bnd = mesh.face_measures[f] + np.linalg.norm(xk - a) + np.linalg.norm(xk - b)
            theta_e2 = max(theta_e2, bnd / perim)

    theta_e3 = float((h / r_dual).max())
    return RegularityReport(h=h, alpha=alpha, theta_mesh=float(theta_mesh),
                            theta_e1=float(theta_e1), theta_e2=float(theta_e2),
                            theta_e3=theta_e3)


def write_mesh(mesh, path):
    """Write the text mesh format: `quadmesh 2`, vertices, then cells."""
    with open(path, "w") as fh:
        fh.write("quadmesh 2\n")
        fh.write(f"V {len(mesh.vertices)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x!r} {y!r}\n")
        fh.write(f"C {mesh.n_cells}\n")
        for row in mesh.cells:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_mesh(path):
    with open(path) as fh:
        tokens = fh.read().split()
    it = iter(tokens)
    if next(it) != "quadmesh" or next(it) != "2":
        raise MeshError("not a quadmesh 2 file")
    if next(it) != "V":
        raise MeshError("expected vertex block")
    nv = int(next(it))
    vertices = np.array([[float(next(it)), float(next(it))] for _ in range(nv)])
    if next(it) != "C":
        raise MeshError("expected cell block")
    nc = int(next(it))
    cells = np.array([[int(next(it)) for _ in range(4)] for _ in range(nc)])
    return Mesh(vertices, cells)
