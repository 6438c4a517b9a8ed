//! Uniform Cartesian grid, level-set classification, ghost-point projection
//! and boundary-condition interpolation weights.
//!
//! The porosity field doubles as the level set: phi(x) = n(x) - n_max is
//! negative inside the intact material, zero on the erosion front and
//! positive in the lost region. Grid nodes split into internal points
//! (phi < 0), ghost points (phi >= 0 with an internal axis neighbor) and
//! outside points (everything else). Boundary conditions are imposed at each
//! ghost's projection onto the zero level set through quadratic Lagrange
//! interpolation over a 3 (1D) or 3x3 (2D) stencil anchored at the ghost.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    One,
    Two,
}

/// Uniform grid with `cells` intervals per axis, so `cells + 1` nodes per axis.
#[derive(Debug, Clone)]
pub struct Grid<T> {
    pub dim: Dim,
    pub cells: usize,
    pub h: T,
    pub origin: [T; 2],
}

impl<T: Real> Grid<T> {
    pub fn line(cells: usize, h: T, origin: T) -> Self {
        assert!(cells >= 2 && h > T::zero());
        Grid {
            dim: Dim::One,
            cells,
            h,
            origin: [origin, T::zero()],
        }
    }

    pub fn square(cells: usize, h: T, origin: [T; 2]) -> Self {
        assert!(cells >= 2 && h > T::zero());
        Grid {
            dim: Dim::Two,
            cells,
            h,
            origin,
        }
    }

    #[inline]
    pub fn nodes_per_axis(&self) -> usize {
        self.cells + 1
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        match self.dim {
            Dim::One => self.nodes_per_axis(),
            Dim::Two => self.nodes_per_axis() * self.nodes_per_axis(),
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        match self.dim {
            Dim::One => i,
            Dim::Two => j * self.nodes_per_axis() + i,
        }
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        match self.dim {
            Dim::One => (idx, 0),
            Dim::Two => (idx % self.nodes_per_axis(), idx / self.nodes_per_axis()),
        }
    }

    #[inline]
    pub fn pos(&self, idx: usize) -> [T; 2] {
        let (i, j) = self.coords(idx);
        [
            self.origin[0] + self.h * lit::<T>(i as f64),
            self.origin[1] + self.h * lit::<T>(j as f64),
        ]
    }

    /// Axis neighbors in the order -x, +x, -y, +y; None past the grid edge.
    pub fn neighbors(&self, idx: usize) -> [Option<usize>; 4] {
        let (i, j) = self.coords(idx);
        let np = self.nodes_per_axis();
        let mut out = [None; 4];
        if i > 0 {
            out[0] = Some(self.index(i - 1, j));
        }
        if i + 1 < np {
            out[1] = Some(self.index(i + 1, j));
        }
        if self.dim == Dim::Two {
            if j > 0 {
                out[2] = Some(self.index(i, j - 1));
            }
            if j + 1 < np {
                out[3] = Some(self.index(i, j + 1));
            }
        }
        out
    }
}

/// Porosity field interpreted as a level set against the loss threshold.
#[derive(Debug, Clone)]
pub struct PorosityLevelSet<T> {
    pub values: Vec<T>,
    pub n_max: T,
}

impl<T: Real> PorosityLevelSet<T> {
    pub fn new(values: Vec<T>, n_max: T) -> Self {
        PorosityLevelSet { values, n_max }
    }

    #[inline]
    pub fn phi(&self, idx: usize) -> T {
        self.values[idx] - self.n_max
    }

    /// Bilinear (linear in 1D) interpolation of phi at an arbitrary point.
    pub fn phi_at(&self, grid: &Grid<T>, p: [T; 2]) -> T {
        let np = grid.nodes_per_axis();
        let locate = |x: T, o: T| -> (usize, T) {
            let t = (x - o) / grid.h;
            let mut i = t.floor().to_f64().unwrap_or(0.0) as i64;
            i = i.clamp(0, np as i64 - 2);
            let frac = t - lit::<T>(i as f64);
            (i as usize, frac)
        };
        let (i, fx) = locate(p[0], grid.origin[0]);
        match grid.dim {
            Dim::One => {
                let a = self.phi(grid.index(i, 0));
                let b = self.phi(grid.index(i + 1, 0));
                a + (b - a) * fx
            }
            Dim::Two => {
                let (j, fy) = locate(p[1], grid.origin[1]);
                let p00 = self.phi(grid.index(i, j));
                let p10 = self.phi(grid.index(i + 1, j));
                let p01 = self.phi(grid.index(i, j + 1));
                let p11 = self.phi(grid.index(i + 1, j + 1));
                let one = T::one();
                p00 * (one - fx) * (one - fy)
                    + p10 * fx * (one - fy)
                    + p01 * (one - fx) * fy
                    + p11 * fx * fy
            }
        }
    }

    fn max_abs_phi(&self) -> T {
        self.values
            .iter()
            .map(|&v| (v - self.n_max).abs())
            .fold(T::zero(), T::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Internal,
    Ghost,
    Outside,
}

/// Interpolation stencil with the Dirichlet (value at the boundary point)
/// and Neumann (outward normal derivative) weights over its nodes.
#[derive(Debug, Clone)]
pub struct StencilWeights<T> {
    pub nodes: Vec<usize>,
    pub dirichlet: Vec<T>,
    pub neumann: Vec<T>,
    pub least_squares: bool,
}

/// Projection geometry of one ghost point.
#[derive(Debug, Clone)]
pub struct GhostGeometry<T> {
    pub node: usize,
    pub boundary_point: [T; 2],
    pub normal: [T; 2],
    pub xi: [T; 2],
    /// Stencil march direction per axis (+1/-1), from ghost toward the interior.
    pub axis_sign: [i64; 2],
    /// Per-axis anchor shift: the stencil starts one node before the ghost on
    /// axes where the boundary point coincides with the ghost coordinate.
    pub anchor: [i64; 2],
    pub stencil: StencilWeights<T>,
    /// Internal node whose porosity stands in for the boundary porosity n*.
    pub ref_internal: usize,
}

/// Grid partition plus per-ghost geometry.
#[derive(Debug, Clone)]
pub struct GridClassification<T> {
    pub class: Vec<PointClass>,
    pub internal: Vec<usize>,
    pub outside: Vec<usize>,
    pub ghosts: Vec<GhostGeometry<T>>,
    /// Active (internal + ghost) nodes in index order.
    pub active: Vec<usize>,
    /// Position of each node in `active`; usize::MAX for outside nodes.
    pub active_of_node: Vec<usize>,
    /// Position of each node in `ghosts`; usize::MAX for non-ghost nodes.
    pub ghost_of_node: Vec<usize>,
}

impl<T: Real> GridClassification<T> {
    pub fn is_internal(&self, idx: usize) -> bool {
        self.class[idx] == PointClass::Internal
    }
}

/// Second-order Lagrange value weights for offset xi in [0, 1).
///
/// The stencil marches from the anchor in the axis direction; the target
/// point sits 1 - xi nodes along it. Weights sum to one.
pub fn dirichlet_weights<T: Real>(xi: T) -> [T; 3] {
    let one = T::one();
    let two = lit::<T>(2.0);
    [
        xi * (xi + one) / two,
        one - xi * xi,
        xi * (xi - one) / two,
    ]
}

/// Second-order Lagrange derivative weights (per grid spacing h); sum to zero.
pub fn neumann_weights<T: Real>(xi: T, h: T) -> [T; 3] {
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    [
        (-half - xi) / h,
        two * xi / h,
        (half - xi) / h,
    ]
}

/// Tensor-product weights over a 3x3 box (or 3-node line in 1D).
///
/// Returns (dirichlet, neumann) in stencil order p = b*3 + a, where a runs
/// along x and b along y. The Neumann weights approximate the outward normal
/// derivative n.grad at the boundary point.
pub fn tensor_weights<T: Real>(
    dim: Dim,
    xi: [T; 2],
    normal: [T; 2],
    axis_sign: [i64; 2],
    h: T,
) -> (Vec<T>, Vec<T>) {
    let ax = dirichlet_weights(xi[0]);
    let wx = neumann_weights(xi[0], h);
    let sx = lit::<T>(axis_sign[0] as f64);
    match dim {
        Dim::One => {
            let dir = ax.to_vec();
            let neu = wx.iter().map(|&w| normal[0] * sx * w).collect();
            (dir, neu)
        }
        Dim::Two => {
            let ay = dirichlet_weights(xi[1]);
            let wy = neumann_weights(xi[1], h);
            let sy = lit::<T>(axis_sign[1] as f64);
            let mut dir = Vec::with_capacity(9);
            let mut neu = Vec::with_capacity(9);
            for b in 0..3 {
                for a in 0..3 {
                    dir.push(ax[a] * ay[b]);
                    neu.push(normal[0] * sx * wx[a] * ay[b] + normal[1] * sy * ax[a] * wy[b]);
                }
            }
            (dir, neu)
        }
    }
}

fn grad_phi<T: Real>(grid: &Grid<T>, lsf: &PorosityLevelSet<T>, idx: usize) -> [T; 2] {
    let (i, j) = grid.coords(idx);
    let np = grid.nodes_per_axis();
    let two_h = grid.h * lit::<T>(2.0);
    let d_axis = |lo: Option<usize>, hi: Option<usize>, c: usize| -> T {
        match (lo, hi) {
            (Some(l), Some(r)) => (lsf.phi(r) - lsf.phi(l)) / two_h,
            (None, Some(r)) => (lsf.phi(r) - lsf.phi(c)) / grid.h,
            (Some(l), None) => (lsf.phi(c) - lsf.phi(l)) / grid.h,
            (None, None) => T::zero(),
        }
    };
    let gx = d_axis(
        (i > 0).then(|| grid.index(i - 1, j)),
        (i + 1 < np).then(|| grid.index(i + 1, j)),
        idx,
    );
    let gy = if grid.dim == Dim::Two {
        d_axis(
            (j > 0).then(|| grid.index(i, j - 1)),
            (j + 1 < np).then(|| grid.index(i, j + 1)),
            idx,
        )
    } else {
        T::zero()
    };
    [gx, gy]
}

/// Projects a ghost node onto the zero level set along the normal direction
/// and builds its interpolation geometry.
pub fn project_ghost<T: Real>(
    grid: &Grid<T>,
    lsf: &PorosityLevelSet<T>,
    class: &[PointClass],
    node: usize,
) -> Result<GhostGeometry<T>> {
    let g = grad_phi(grid, lsf, node);
    let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    if norm < lit(1e-14) {
        return Err(Error::DegenerateNormal { node });
    }
    let normal = [g[0] / norm, g[1] / norm];
    let xg = grid.pos(node);

    // March down the gradient until phi changes sign, then bisect.
    let reach = grid.h * lit::<T>(2.0);
    let step = grid.h / lit::<T>(8.0);
    let phi_along = |s: T| -> T {
        lsf.phi_at(grid, [xg[0] - s * normal[0], xg[1] - s * normal[1]])
    };
    let mut s_lo = T::zero();
    let mut phi_lo = phi_along(s_lo);
    let mut s_hi = None;
    let mut s = step;
    while s <= reach + step * lit::<T>(0.5) {
        let p = phi_along(s);
        if p < T::zero() {
            s_hi = Some(s);
            break;
        }
        s_lo = s;
        phi_lo = p;
        s = s + step;
    }
    let s_dist = if phi_lo == T::zero() && s_lo == T::zero() {
        T::zero()
    } else {
        let mut hi = s_hi.ok_or(Error::ProjectionFailure { node })?;
        let mut lo = s_lo;
        let width_tol = grid.h * lit::<T>(1e-13);
        for _ in 0..200 {
            if hi - lo <= width_tol {
                break;
            }
            let mid = (lo + hi) / lit::<T>(2.0);
            if phi_along(mid) < T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) / lit::<T>(2.0)
    };
    let xb = [xg[0] - s_dist * normal[0], xg[1] - s_dist * normal[1]];

    // Per-axis offsets, march directions and anchors.
    let naxes = if grid.dim == Dim::Two { 2 } else { 1 };
    let np = grid.nodes_per_axis() as i64;
    let (gi, gj) = grid.coords(node);
    let gidx = [gi as i64, gj as i64];
    let mut xi = [T::zero(); 2];
    let mut axis_sign = [1i64; 2];
    let mut anchor = [gidx[0], gidx[1]];
    let coincide_tol = grid.h * lit::<T>(1e-12);
    for k in 0..naxes {
        let dk = xb[k] - xg[k];
        if dk.abs() < coincide_tol {
            // Boundary point sits on the ghost coordinate along this axis:
            // center the three nodes on the ghost and take xi = 0.
            xi[k] = T::zero();
            let s_pref = if normal[k] > lit(1e-14) {
                -1
            } else if normal[k] < lit(-1e-14) {
                1
            } else {
                1
            };
            axis_sign[k] = s_pref;
            anchor[k] = gidx[k] - s_pref;
            if anchor[k] < 0 || anchor[k] >= np || gidx[k] + s_pref < 0 || gidx[k] + s_pref >= np {
                axis_sign[k] = -s_pref;
                anchor[k] = gidx[k] + s_pref;
            }
        } else {
            axis_sign[k] = if dk > T::zero() { 1 } else { -1 };
            let frac = dk.abs() / grid.h;
            xi[k] = (T::one() - frac).max(T::zero());
            anchor[k] = gidx[k];
        }
    }

    // Try the tensor box; fall back to least squares if it leaves the grid
    // or touches outside points.
    let box_nodes = gather_box(grid, anchor, axis_sign, naxes);
    let stencil = match box_nodes {
        Some(nodes)
            if nodes
                .iter()
                .all(|&n| class[n] != PointClass::Outside) =>
        {
            let (dir, neu) = tensor_weights(grid.dim, xi, normal, axis_sign, grid.h);
            StencilWeights {
                nodes,
                dirichlet: dir,
                neumann: neu,
                least_squares: false,
            }
        }
        _ => least_squares_stencil(grid, class, node, xb, normal)?,
    };

    let ref_internal = pick_reference_internal(grid, class, node, xb, &stencil)
        .ok_or(Error::StencilConstruction { node })?;

    Ok(GhostGeometry {
        node,
        boundary_point: xb,
        normal,
        xi,
        axis_sign,
        anchor,
        stencil,
        ref_internal,
    })
}

fn gather_box<T: Real>(
    grid: &Grid<T>,
    anchor: [i64; 2],
    axis_sign: [i64; 2],
    naxes: usize,
) -> Option<Vec<usize>> {
    let np = grid.nodes_per_axis() as i64;
    let mut nodes = Vec::with_capacity(if naxes == 2 { 9 } else { 3 });
    if naxes == 1 {
        for a in 0..3i64 {
            let i = anchor[0] + a * axis_sign[0];
            if i < 0 || i >= np {
                return None;
            }
            nodes.push(grid.index(i as usize, 0));
        }
    } else {
        for b in 0..3i64 {
            for a in 0..3i64 {
                let i = anchor[0] + a * axis_sign[0];
                let j = anchor[1] + b * axis_sign[1];
                if i < 0 || i >= np || j < 0 || j >= np {
                    return None;
                }
                nodes.push(grid.index(i as usize, j as usize));
            }
        }
    }
    Some(nodes)
}

fn least_squares_stencil<T: Real>(
    grid: &Grid<T>,
    class: &[PointClass],
    node: usize,
    xb: [T; 2],
    normal: [T; 2],
) -> Result<StencilWeights<T>> {
    let np = grid.nodes_per_axis() as i64;
    let (gi, gj) = grid.coords(node);
    let naxes = if grid.dim == Dim::Two { 2 } else { 1 };
    let mut cands: Vec<(usize, T)> = Vec::new();
    let jrange = if naxes == 2 { -2..=2i64 } else { 0..=0i64 };
    for dj in jrange {
        for di in -2..=2i64 {
            let i = gi as i64 + di;
            let j = gj as i64 + dj;
            if i < 0 || i >= np || j < 0 || (naxes == 2 && j >= np) {
                continue;
            }
            let idx = grid.index(i as usize, j as usize);
            if class[idx] == PointClass::Outside {
                continue;
            }
            let p = grid.pos(idx);
            let dx = p[0] - xb[0];
            let dy = p[1] - xb[1];
            cands.push((idx, dx * dx + dy * dy));
        }
    }
    cands.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let m = if naxes == 2 { 6 } else { 3 };
    let take = cands.len().min(if naxes == 2 { 9 } else { 5 });
    if take < m {
        return Err(Error::StencilConstruction { node });
    }
    let nodes: Vec<usize> = cands[..take].iter().map(|c| c.0).collect();

    // Quadratic fit in coordinates scaled by h around the boundary point.
    let basis = |u: T, v: T| -> Vec<T> {
        if naxes == 2 {
            vec![T::one(), u, v, u * u, u * v, v * v]
        } else {
            vec![T::one(), u, u * u]
        }
    };
    let rows: Vec<Vec<T>> = nodes
        .iter()
        .map(|&idx| {
            let p = grid.pos(idx);
            basis((p[0] - xb[0]) / grid.h, (p[1] - xb[1]) / grid.h)
        })
        .collect();
    let mut ata = vec![T::zero(); m * m];
    for r in &rows {
        for a in 0..m {
            for b in 0..m {
                ata[a * m + b] = ata[a * m + b] + r[a] * r[b];
            }
        }
    }
    let solve_normal = |rhs: &[T]| -> Result<Vec<T>> {
        let mut mat = ata.clone();
        let mut y = rhs.to_vec();
        crate::linalg::solve_dense(&mut mat, m, &mut y)
            .map_err(|_| Error::StencilConstruction { node })?;
        Ok(y)
    };
    // Value functional at xb: basis(0); normal derivative: n.grad of the basis.
    let mut e_val = vec![T::zero(); m];
    e_val[0] = T::one();
    let mut e_der = vec![T::zero(); m];
    e_der[1] = normal[0] / grid.h;
    if naxes == 2 {
        e_der[2] = normal[1] / grid.h;
    }
    let y_val = solve_normal(&e_val)?;
    let y_der = solve_normal(&e_der)?;
    let dirichlet: Vec<T> = rows
        .iter()
        .map(|r| r.iter().zip(&y_val).map(|(&a, &b)| a * b).sum())
        .collect();
    let neumann: Vec<T> = rows
        .iter()
        .map(|r| r.iter().zip(&y_der).map(|(&a, &b)| a * b).sum())
        .collect();
    Ok(StencilWeights {
        nodes,
        dirichlet,
        neumann,
        least_squares: true,
    })
}

fn pick_reference_internal<T: Real>(
    grid: &Grid<T>,
    class: &[PointClass],
    node: usize,
    xb: [T; 2],
    stencil: &StencilWeights<T>,
) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for &n in &stencil.nodes {
        if class[n] == PointClass::Internal {
            let p = grid.pos(n);
            let dx = p[0] - xb[0];
            let dy = p[1] - xb[1];
            let d = dx * dx + dy * dy;
            match best {
                Some((bn, bd)) if bd < d || (bd == d && bn < n) => {}
                _ => best = Some((n, d)),
            }
        }
    }
    if best.is_none() {
        for nb in grid.neighbors(node).into_iter().flatten() {
            if class[nb] == PointClass::Internal {
                return Some(nb);
            }
        }
    }
    best.map(|(n, _)| n)
}

/// Partitions the grid against the level set and builds ghost geometry.
pub fn classify<T: Real>(grid: &Grid<T>, lsf: &PorosityLevelSet<T>) -> Result<GridClassification<T>> {
    let n = grid.num_nodes();
    assert_eq!(lsf.values.len(), n);
    let mut class = vec![PointClass::Outside; n];
    let mut internal = Vec::new();
    for idx in 0..n {
        if lsf.phi(idx) < T::zero() {
            class[idx] = PointClass::Internal;
            internal.push(idx);
        }
    }
    if internal.is_empty() {
        return Err(Error::FullyEroded);
    }
    let mut ghost_nodes = Vec::new();
    for idx in 0..n {
        if class[idx] == PointClass::Internal {
            continue;
        }
        let has_internal_neighbor = grid
            .neighbors(idx)
            .into_iter()
            .flatten()
            .any(|nb| class[nb] == PointClass::Internal);
        if has_internal_neighbor {
            class[idx] = PointClass::Ghost;
            ghost_nodes.push(idx);
        }
    }
    let outside: Vec<usize> = (0..n).filter(|&i| class[i] == PointClass::Outside).collect();
    let mut ghosts = Vec::with_capacity(ghost_nodes.len());
    for &gnode in &ghost_nodes {
        ghosts.push(project_ghost(grid, lsf, &class, gnode)?);
    }
    let mut active: Vec<usize> = Vec::with_capacity(internal.len() + ghost_nodes.len());
    active.extend((0..n).filter(|&i| class[i] != PointClass::Outside));
    let mut active_of_node = vec![usize::MAX; n];
    for (k, &idx) in active.iter().enumerate() {
        active_of_node[idx] = k;
    }
    let mut ghost_of_node = vec![usize::MAX; n];
    for (k, g) in ghosts.iter().enumerate() {
        ghost_of_node[g.node] = k;
    }
    Ok(GridClassification {
        class,
        internal,
        outside,
        ghosts,
        active,
        active_of_node,
        ghost_of_node,
    })
}

/// Residual of the projection: |phi(x_B)| should be tiny for every ghost.
pub fn projection_residual<T: Real>(
    grid: &Grid<T>,
    lsf: &PorosityLevelSet<T>,
    cls: &GridClassification<T>,
) -> T {
    let scale = lsf.max_abs_phi();
    let mut worst = T::zero();
    for g in &cls.ghosts {
        let r = lsf.phi_at(grid, g.boundary_point).abs();
        if r > worst {
            worst = r;
        }
    }
    if scale > T::zero() {
        worst / scale
    } else {
        worst
    }
}
