//! Uniform tensor grids on `[-L, L]^d` with homogeneous Dirichlet boundary,
//! vector-valued grid functions and the finite-difference operators on them.
//!
//! Interior nodes sit at `x_i = -L + (i+1)h - δ` with `h = 2L/(n+1)`. The
//! offset `δ` is chosen from the parity of `n` so that no node lands on the
//! origin: every coordinate of every node is at least `h/2` away from zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Fixed-size point storage for `d ≤ 3`.
pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: usize,
    half_width: f64,
    n: usize,
    h: f64,
    offset: f64,
}

impl Grid {
    pub fn new(d: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::Input(format!(
                "grid dimension must be 1..=3, got {d}"
            )));
        }
        if n < 2 {
            return Err(Error::Input(format!(
                "need at least 2 nodes per axis, got {n}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Input("grid half-width must be positive".into()));
        }
        let h = 2.0 * half_width / (n as f64 + 1.0);
        // the unshifted lattice contains the origin exactly when n is odd
        let offset = if n % 2 == 1 { 0.5 * h } else { 0.0 };
        Ok(Self {
            d,
            half_width,
            n,
            h,
            offset,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Interior node count `n^d`.
    pub fn node_count(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Flat-index stride of `axis` (axis 0 slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 1.0) * self.h - self.offset
    }

    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rem = flat;
        for axis in (0..self.d).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, flat: usize) -> Point {
        let idx = self.unravel(flat);
        let mut p = [0.0; MAX_DIM];
        for axis in 0..self.d {
            p[axis] = self.coord(idx[axis]);
        }
        p
    }

    /// Nearest node index along one axis (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x + self.half_width + self.offset) / self.h - 1.0).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Same box refined to `n` nodes per axis.
    pub fn with_nodes(&self, n: usize) -> Result<Self> {
        Self::new(self.d, self.half_width, n)
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.grid != *self {
            return Err(Error::Input("field does not live on this grid".into()));
        }
        Ok(())
    }
}

/// `L^p` exponent, `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            other => other
                .parse::<f64>()
                .map(Exponent::Finite)
                .map_err(|_| Error::Input(format!("bad exponent {other:?}"))),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Exponent::Finite(p) => *p,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

/// Vector-valued grid function with `m` components.
///
/// Storage is component-major: component `c` occupies
/// `data[c·n^d .. (c+1)·n^d]`, row-major within the block.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    m: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        Self {
            grid,
            m,
            data: vec![0.0; grid.node_count() * m],
        }
    }

    pub fn from_vec(grid: Grid, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.node_count() * m {
            return Err(Error::Input(format!(
                "field data has {} values, expected {}",
                data.len(),
                grid.node_count() * m
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("field values must be finite".into()));
        }
        Ok(Self { grid, m, data })
    }

    /// Fills component `c` at each node with `f(x)[c]`.
    pub fn from_fn(grid: Grid, m: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let nodes = grid.node_count();
        let mut out = Self::zeros(grid, m);
        let mut val = vec![0.0; m];
        for node in 0..nodes {
            let p = grid.point(node);
            f(&p[..grid.d], &mut val);
            for (c, v) in val.iter().enumerate() {
                out.data[c * nodes + node] = *v;
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.node_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, node: usize, c: usize) -> f64 {
        self.data[c * self.grid.node_count() + node]
    }

    /// Copies the `m`-vector at `node` into `out`.
    pub fn vector_at(&self, node: usize, out: &mut [f64]) {
        let n = self.grid.node_count();
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.data[c * n + node];
        }
    }

    pub fn node_norm(&self, node: usize) -> f64 {
        let n = self.grid.node_count();
        (0..self.m)
            .map(|c| self.data[c * n + node].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Scalar field `‖u(x)‖` (Euclidean norm over components).
    pub fn pointwise_norm(&self) -> Field {
        let nodes = self.grid.node_count();
        let data = (0..nodes).map(|k| self.node_norm(k)).collect();
        Field {
            grid: self.grid,
            m: 1,
            data,
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Plain Euclidean dot product of the value vectors.
    pub fn dot(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// `h^d`-weighted inner product, the discrete `∫⟨u, v⟩`.
    pub fn inner(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * self.dot(other)
    }

    /// Euclidean norm of the value vector (no `h^d` weight).
    pub fn l2_vec(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.grid == other.grid && self.m == other.m
    }
}

/// `Δ_h u`, componentwise (2d+1)-point stencil with zero Dirichlet ghosts.
pub fn laplacian_apply(g: &Grid, u: &Field) -> Result<Field> {
    g.check(u)?;
    let mut out = Field::zeros(*g, u.m);
    for c in 0..u.m {
        laplacian_block(g, u.component(c), out.component_mut(c));
    }
    Ok(out)
}

/// `out = Δ_h u` on one scalar block.
pub(crate) fn laplacian_block(g: &Grid, u: &[f64], out: &mut [f64]) {
    let inv_h2 = 1.0 / (g.h * g.h);
    let diag = -2.0 * g.d as f64 * inv_h2;
    for (o, v) in out.iter_mut().zip(u) {
        *o = diag * v;
    }
    for axis in 0..g.d {
        let s = g.stride(axis);
        let n = g.n;
        let outer = u.len() / (n * s);
        for o in 0..outer {
            let base = o * n * s;
            for i in 0..n {
                let row = base + i * s;
                for j in 0..s {
                    let k = row + j;
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += u[k - s];
                    }
                    if i + 1 < n {
                        acc += u[k + s];
                    }
                    out[k] += acc * inv_h2;
                }
            }
        }
    }
}

/// Forward differences `(u(x+he_k) − u(x))/h`, one field per axis, with zero
/// Dirichlet ghosts past the last node.
pub fn gradient_forward(g: &Grid, u: &Field) -> Result<Vec<Field>> {
    g.check(u)?;
    let nodes = g.node_count();
    let mut out = Vec::with_capacity(g.d);
    for axis in 0..g.d {
        let s = g.stride(axis);
        let mut du = Field::zeros(*g, u.m);
        for c in 0..u.m {
            let src = u.component(c);
            let dst = du.component_mut(c);
            for k in 0..nodes {
                let i = (k / s) % g.n;
                let next = if i + 1 < g.n { src[k + s] } else { 0.0 };
                dst[k] = (next - src[k]) / g.h;
            }
        }
        out.push(du);
    }
    Ok(out)
}

/// Backward-difference divergence `Σ_k (v_k(x) − v_k(x−he_k))/h` with zero
/// ghosts before the first node; the negative adjoint of [`gradient_forward`].
pub fn divergence_backward(g: &Grid, v: &[Field]) -> Result<Field> {
    if v.len() != g.d {
        return Err(Error::Input("divergence needs one field per axis".into()));
    }
    let m = v[0].m;
    let nodes = g.node_count();
    let mut out = Field::zeros(*g, m);
    for (axis, vk) in v.iter().enumerate() {
        g.check(vk)?;
        let s = g.stride(axis);
        for c in 0..m {
            let src = vk.component(c);
            let dst = out.component_mut(c);
            for k in 0..nodes {
                let i = (k / s) % g.n;
                let prev = if i > 0 { src[k - s] } else { 0.0 };
                dst[k] += (src[k] - prev) / g.h;
            }
        }
    }
    Ok(out)
}

/// Discrete `L^p` norm `(h^d Σ ‖u(x)‖^p)^{1/p}`; the node maximum of `‖u(x)‖`
/// for `p = ∞`.
pub fn lp_norm(g: &Grid, u: &Field, p: Exponent) -> Result<f64> {
    g.check(u)?;
    lp_norm_unchecked(u, p)
}

pub(crate) fn lp_norm_unchecked(u: &Field, p: Exponent) -> Result<f64> {
    let nodes = u.grid.node_count();
    match p {
        Exponent::Infinity => Ok((0..nodes).map(|k| u.node_norm(k)).fold(0.0, f64::max)),
        Exponent::Finite(p) if p >= 1.0 => {
            let sum: f64 = (0..nodes).map(|k| u.node_norm(k).powf(p)).sum();
            Ok((u.grid.cell_volume() * sum).powf(1.0 / p))
        }
        Exponent::Finite(p) => Err(Error::Input(format!("p must be >= 1, got {p}"))),
    }
}

/// Smooth bump `a·exp(1 − 1/(1 − ‖(x−c)/r‖²))` inside the ball, zero outside.
pub fn bump(g: &Grid, center: &[f64], radius: f64, amplitude: &[f64]) -> Result<Field> {
    if center.len() != g.d {
        return Err(Error::Input("bump center has wrong dimension".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Input("bump radius must be positive".into()));
    }
    if center.iter().any(|c| c.abs() + radius > g.half_width) {
        return Err(Error::Input("bump support leaves the box".into()));
    }
    let m = amplitude.len();
    Ok(Field::from_fn(*g, m, |x, out| {
        let s2: f64 = x
            .iter()
            .zip(center)
            .map(|(a, b)| ((a - b) / radius).powi(2))
            .sum();
        let profile = bump_profile(s2);
        for (o, a) in out.iter_mut().zip(amplitude) {
            *o = a * profile;
        }
    }))
}

/// `exp(1 − 1/(1 − s²))` for `s² < 1`, else 0. Equals 1 at the center.
pub fn bump_profile(s2: f64) -> f64 {
    if s2 < 1.0 {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    } else {
        0.0
    }
}

/// Axis-aligned cube given by center and side length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Self {
        Self { center, side }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let r = 0.5 * self.side;
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= r)
    }

    /// Concentric cube with side multiplied by `factor`.
    pub fn dilate(&self, factor: f64) -> Cube {
        Cube::new(self.center.clone(), self.side * factor)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.center.len() as i32)
    }

    /// Flat indices of the grid nodes lying in the (closed) cube.
    pub fn nodes(&self, g: &Grid) -> Vec<usize> {
        (0..g.node_count())
            .filter(|&k| self.contains(&g.point(k)[..g.d]))
            .collect()
    }
}

/// Mean of the node values of a scalar field over the nodes lying in `q`.
pub fn cube_average(g: &Grid, w: &Field, q: &Cube) -> Result<f64> {
    g.check(w)?;
    if w.m != 1 {
        return Err(Error::Input("cube_average expects a scalar field".into()));
    }
    if q.center.len() != g.d {
        return Err(Error::Input("cube has wrong dimension".into()));
    }
    let nodes = q.nodes(g);
    if nodes.is_empty() {
        return Err(Error::Input("cube contains no grid node".into()));
    }
    Ok(nodes.iter().map(|&k| w.data[k]).sum::<f64>() / nodes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(g: Grid, m: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..g.node_count() * m)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        Field::from_vec(g, m, data).unwrap()
    }

    #[test]
    fn no_node_at_origin() {
        for d in 1..=3 {
            for n in [7, 8, 15, 16, 33] {
                let g = Grid::new(d, 1.5, n).unwrap();
                for i in 0..n {
                    assert!(g.coord(i).abs() >= 0.5 * g.spacing() - 1e-12, "n={n} i={i}");
                }
                assert_eq!(g.node_count(), n.pow(d as u32));
            }
        }
    }

    #[test]
    fn even_grids_are_symmetric() {
        let g = Grid::new(1, 2.0, 16).unwrap();
        for i in 0..16 {
            assert!((g.coord(i) + g.coord(15 - i)).abs() < 1e-14);
        }
    }

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::new(3, 1.0, 5).unwrap();
        for k in 0..g.node_count() {
            assert_eq!(g.ravel(&g.unravel(k)), k);
        }
        assert_eq!(g.stride(0), 25);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn laplacian_of_affine_vanishes_inside() {
        let g = Grid::new(2, 1.0, 12).unwrap();
        let u = Field::from_fn(g, 2, |x, out| {
            out[0] = 3.0 * x[0] - 1.0;
            out[1] = -0.5 * x[1];
        });
        let lap = laplacian_apply(&g, &u).unwrap();
        for k in 0..g.node_count() {
            let idx = g.unravel(k);
            if idx[..2].iter().all(|&i| i > 0 && i + 1 < 12) {
                assert!(lap.at(k, 0).abs() < 1e-9 && lap.at(k, 1).abs() < 1e-9);
            }
        }
        let zero = Field::zeros(g, 3);
        assert_eq!(laplacian_apply(&g, &zero).unwrap(), zero);
    }

    #[test]
    fn discrete_sine_is_eigenvector() {
        // sin(π(x+L)/(2L)) vanishes at both ghost nodes when δ = 0 (n even).
        let l = 1.0;
        let g = Grid::new(1, l, 40).unwrap();
        let h = g.spacing();
        let u = Field::from_fn(g, 1, |x, out| {
            out[0] = (std::f64::consts::PI * (x[0] + l) / (2.0 * l)).sin()
        });
        let lam = -(2.0 / (h * h)) * (1.0 - (std::f64::consts::PI * h / (2.0 * l)).cos());
        let lap = laplacian_apply(&g, &u).unwrap();
        for k in 0..40 {
            assert!((lap.at(k, 0) - lam * u.at(k, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_of_linear_and_constant() {
        let g = Grid::new(2, 1.0, 10).unwrap();
        let u = Field::from_fn(g, 1, |x, out| out[0] = 2.5 * x[0] + 4.0);
        let grad = gradient_forward(&g, &u).unwrap();
        for k in 0..g.node_count() {
            let idx = g.unravel(k);
            if idx[0] + 1 < 10 {
                assert!((grad[0].at(k, 0) - 2.5).abs() < 1e-10);
            }
            if idx[1] + 1 < 10 {
                assert!(grad[1].at(k, 0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn summation_by_parts() {
        let g = Grid::new(3, 1.0, 9).unwrap();
        let u = random_field(g, 2, 1);
        let v: Vec<Field> = (0..3).map(|k| random_field(g, 2, 10 + k)).collect();
        let grad = gradient_forward(&g, &u).unwrap();
        let lhs: f64 = grad.iter().zip(&v).map(|(a, b)| a.dot(b)).sum();
        let rhs = -u.dot(&divergence_backward(&g, &v).unwrap());
        assert!(
            (lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0) * 100.0,
            "{lhs} {rhs}"
        );
    }

    #[test]
    fn laplacian_symmetric_and_negative_definite() {
        let g = Grid::new(2, 1.0, 11).unwrap();
        for seed in 0..100 {
            let u = random_field(g, 2, seed);
            let v = random_field(g, 2, seed + 1000);
            let lu = laplacian_apply(&g, &u).unwrap();
            let lv = laplacian_apply(&g, &v).unwrap();
            let (a, b) = (lu.dot(&v), u.dot(&lv));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            assert!(-lu.dot(&u) > 0.0);
        }
    }

    #[test]
    fn norms() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let z = Field::zeros(g, 2);
        assert_eq!(lp_norm(&g, &z, Exponent::Finite(1.0)).unwrap(), 0.0);
        let mut one = Field::zeros(g, 3);
        one.data_mut()[17] = 1.0;
        let l1 = lp_norm(&g, &one, Exponent::Finite(1.0)).unwrap();
        assert!((l1 - g.cell_volume()).abs() < 1e-15);
        let u = random_field(g, 2, 4);
        let l2 = lp_norm(&g, &u, Exponent::Finite(2.0)).unwrap();
        assert!((l2 - u.inner(&u).sqrt()).abs() < 1e-14);
        let linf = lp_norm(&g, &u, Exponent::Infinity).unwrap();
        assert!(linf <= 2f64.sqrt());
        assert!(lp_norm(&g, &u, Exponent::Finite(0.5)).is_err());
    }

    #[test]
    fn bump_properties() {
        let g = Grid::new(2, 2.0, 16).unwrap();
        let p = g.point(g.ravel(&[8, 8]));
        let b = bump(&g, &[p[0], p[1]], 0.8, &[2.0, -1.0]).unwrap();
        let k = g.ravel(&[8, 8]);
        assert_eq!(b.at(k, 0), 2.0);
        assert_eq!(b.at(k, 1), -1.0);
        assert_eq!(b.at(0, 0), 0.0);
        let c = bump(&g, &[0.0, 0.0], 0.9, &[1.0]).unwrap();
        for k in 0..g.node_count() {
            let idx = g.unravel(k);
            let mirror = g.ravel(&[15 - idx[0], 15 - idx[1]]);
            assert!((c.at(k, 0) - c.at(mirror, 0)).abs() <= 1e-14);
        }
        assert!(bump(&g, &[1.5, 0.0], 0.8, &[1.0]).is_err());
    }

    #[test]
    fn cube_averages() {
        let g = Grid::new(2, 1.0, 20).unwrap();
        let w = Field::from_fn(g, 1, |_, o| o[0] = 3.25);
        let q = Cube::new(vec![0.1, -0.2], 0.5);
        assert!((cube_average(&g, &w, &q).unwrap() - 3.25).abs() < 1e-14);
        // linear field over a cube centered on a node: exact center value
        let lin = Field::from_fn(g, 1, |x, o| o[0] = 2.0 * x[0] - x[1]);
        let c = g.point(g.ravel(&[7, 12]));
        let q = Cube::new(vec![c[0], c[1]], 4.0 * g.spacing() + 1e-9);
        let avg = cube_average(&g, &lin, &q).unwrap();
        assert!((avg - (2.0 * c[0] - c[1])).abs() < 1e-12);
        let single = Cube::new(vec![c[0], c[1]], 0.5 * g.spacing());
        let k = g.ravel(&[7, 12]);
        assert_eq!(cube_average(&g, &lin, &single).unwrap(), lin.at(k, 0));
        let empty = Cube::new(vec![c[0] + 0.5 * g.spacing(), c[1]], 0.1 * g.spacing());
        assert!(cube_average(&g, &lin, &empty).is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = Grid::new(1, 1.0, 10).unwrap();
        let other = Grid::new(1, 1.0, 12).unwrap();
        assert!(laplacian_apply(&g, &Field::zeros(other, 1)).is_err());
    }

    /// Second-order convergence of Δ_h on the smooth bump.
    #[test]
    fn laplacian_converges_at_second_order() {
        for d in 1..=2usize {
            let mut errs = Vec::new();
            for n in [64, 128, 256] {
                let g = Grid::new(d, 1.0, n).unwrap();
                let r = 0.9;
                let center = vec![0.05; d];
                let u = bump(&g, &center, r, &[1.0]).unwrap();
                let lap = laplacian_apply(&g, &u).unwrap();
                let mut err = 0.0f64;
                for k in 0..g.node_count() {
                    let p = g.point(k);
                    let s2: f64 = (0..d).map(|a| ((p[a] - center[a]) / r).powi(2)).sum();
                    err = err.max((lap.at(k, 0) - exact_bump_laplacian(s2, r, d)).abs());
                }
                errs.push(err);
            }
            assert!(
                errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0,
                "d={d} {errs:?}"
            );
        }
    }

    /// Δ of φ(s²) with s = |x−c|/r: φ(t) = exp(1 − 1/(1−t)).
    fn exact_bump_laplacian(t: f64, r: f64, d: usize) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        let phi = (1.0 - 1.0 / (1.0 - t)).exp();
        let g1 = -1.0 / (1.0 - t).powi(2); // d/dt of the exponent
        let g2 = -2.0 / (1.0 - t).powi(3);
        let dphi = phi * g1;
        let ddphi = phi * (g1 * g1 + g2);
        // Δ φ(|y|²/r²) = (2d/r²) φ' + (4|y|²/r⁴) φ''
        (2.0 * d as f64 / (r * r)) * dphi + (4.0 * t / (r * r)) * ddphi
    }
}
