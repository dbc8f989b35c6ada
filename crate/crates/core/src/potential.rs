//! Matrix-valued potentials `x ↦ V(x)`, symmetric `m × m` and possibly
//! singular at the origin.
//!
//! Potentials are declared through [`PotentialConfig`] (JSON, unknown keys
//! rejected) and validated into an immutable [`MatrixPotential`]. Singular
//! factors `‖x‖^{-α}` are evaluated at `max(‖x‖, ρ_min)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};

/// Fallback regularization radius when `rho_min` is `"auto"` and no grid is
/// attached to the potential.
pub const DEFAULT_RHO_MIN: f64 = 1e-9;

/// Symmetric matrix stored as its packed upper triangle (row by row).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixValue {
    dim: usize,
    upper: Vec<f64>,
}

impl SymMatrixValue {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut v = Self::zeros(dim);
        for i in 0..dim {
            v.set(i, i, 1.0);
        }
        v
    }

    /// Builds from a dense row-major matrix, keeping the upper triangle.
    pub fn from_upper_of(dense: &[f64], dim: usize) -> Self {
        let mut v = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                v.set(i, j, dense[i * dim + j]);
            }
        }
        v
    }

    pub fn from_packed(dim: usize, upper: Vec<f64>) -> Self {
        assert_eq!(upper.len(), dim * (dim + 1) / 2);
        Self { dim, upper }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.upper
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * (2 * self.dim - i + 1) / 2 + (j - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.index(i, j);
        self.upper[k] = value;
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }

    /// `out = self · x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.get(i, j) * x[j];
            }
            out[i] = s;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += x[i] * self.get(i, j) * x[j];
            }
        }
        s
    }

    pub fn max_offdiag(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max(self.get(i, j));
            }
        }
        worst
    }

    pub fn eigen(&self) -> Result<SymEigen> {
        linalg::jacobi_eigen(&self.to_dense(), self.dim)
    }

    /// `(λ_min, λ_max)`. Closed form for `m ≤ 2`, Jacobi otherwise.
    pub fn eigen_range(&self) -> Result<(f64, f64)> {
        match self.dim {
            0 => Err(Error::Input("empty matrix".into())),
            1 => Ok((self.upper[0], self.upper[0])),
            2 => {
                let (a, b, c) = (self.upper[0], self.upper[1], self.upper[2]);
                if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                    return Err(Error::Numeric("non-finite matrix entry".into()));
                }
                let mean = 0.5 * (a + c);
                let rad = (0.5 * (a - c)).hypot(b);
                Ok((mean - rad, mean + rad))
            }
            _ => {
                let e = self.eigen()?;
                Ok((e.min(), e.max()))
            }
        }
    }
}

/// `rho_min` as written in a config: a length or `"auto"` (a quarter of the
/// grid spacing once a grid is known).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RhoMin {
    #[default]
    Auto,
    Value(f64),
}

impl Serialize for RhoMin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RhoMin::Auto => s.serialize_str("auto"),
            RhoMin::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for RhoMin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(RhoMin::Value(v)),
            Raw::Str(s) if s == "auto" => Ok(RhoMin::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "rho_min must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

/// JSON declaration of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// Two-component potential with eigenvalues `‖x‖^{-α} + k‖x‖^β` and
    /// `c₁‖x‖^{-α} + k₁‖x‖^β`, rotating eigenvectors.
    Example1 {
        d: usize,
        #[serde(default = "two")]
        m: usize,
        alpha: f64,
        beta: f64,
        c1: f64,
        k: f64,
        k1: f64,
        /// Declared reverse-Hölder exponent; when present `α < d/q` is enforced.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
        #[serde(default)]
        rho_min: RhoMin,
    },
    /// Polynomially growing coupled potential plus `‖x‖^{-α}·Id`.
    Example2 {
        d: usize,
        m: usize,
        eta: f64,
        eta_offdiag: Vec<Vec<f64>>,
        c: Vec<f64>,
        #[serde(rename = "C")]
        c_upper: Vec<f64>,
        #[serde(rename = "C_offdiag")]
        c_offdiag: Vec<Vec<f64>>,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
        #[serde(default)]
        rho_min: RhoMin,
    },
    /// `diag(a_i ‖x‖^{-α})`, `a_i = 1` unless given.
    DiagonalPower {
        d: usize,
        m: usize,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeffs: Option<Vec<f64>>,
        #[serde(default)]
        rho_min: RhoMin,
    },
    Constant {
        d: usize,
        m: usize,
        matrix: Vec<Vec<f64>>,
    },
    /// `V_{ε,M}` (and `V_{ε,M,N}` when `N` is set) of an inner potential.
    Truncated {
        inner: Box<PotentialConfig>,
        eps: f64,
        #[serde(rename = "M")]
        m_cap: u32,
        #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
        n_cap: Option<u64>,
    },
}

impl PotentialConfig {
    pub fn dim(&self) -> usize {
        match self {
            PotentialConfig::Example1 { d, .. }
            | PotentialConfig::Example2 { d, .. }
            | PotentialConfig::DiagonalPower { d, .. }
            | PotentialConfig::Constant { d, .. } => *d,
            PotentialConfig::Truncated { inner, .. } => inner.dim(),
        }
    }

    /// Declared reverse-Hölder exponent of `λ_V`, if any.
    pub fn declared_q(&self) -> Option<f64> {
        match self {
            PotentialConfig::Example1 { q, .. } | PotentialConfig::Example2 { q, .. } => *q,
            PotentialConfig::Truncated { inner, .. } => inner.declared_q(),
            _ => None,
        }
    }
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example1 {
    pub alpha: f64,
    pub beta: f64,
    pub c1: f64,
    pub k: f64,
    pub k1: f64,
}

impl Example1 {
    /// The eigenvalue pair `(λ₁, λ₂)` at radius `r`.
    pub fn eigenvalues_at(&self, r: f64) -> (f64, f64) {
        let s = r.powf(-self.alpha);
        let g = r.powf(self.beta);
        (s + self.k * g, self.c1 * s + self.k1 * g)
    }

    /// Comparability constant `max{c₁, k₁/k}`.
    pub fn comparability_bound(&self) -> f64 {
        self.c1.max(self.k1 / self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example2 {
    pub eta: f64,
    pub eta_offdiag: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub c_upper: Vec<f64>,
    pub c_offdiag: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl Example2 {
    /// Lower growth constant `min c_i · (1 − 2^{max η_ij − η})` valid on `‖x‖ ≥ 1`.
    pub fn lower_growth_constant(&self) -> f64 {
        let m = self.c.len();
        let mut eta_max = f64::NEG_INFINITY;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    eta_max = eta_max.max(self.eta_offdiag[i][j]);
                }
            }
        }
        let c_min = self.c.iter().copied().fold(f64::INFINITY, f64::min);
        if eta_max == f64::NEG_INFINITY {
            return c_min;
        }
        c_min * (1.0 - 2f64.powf(eta_max - self.eta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Example1(Example1),
    Example2(Example2),
    DiagonalPower {
        alpha: f64,
        coeffs: Vec<f64>,
    },
    Constant(SymMatrixValue),
    Truncated {
        inner: Box<MatrixPotential>,
        eps: f64,
        m_cap: u32,
        n_cap: Option<u64>,
    },
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Example1(_) => "example1",
            PotentialKind::Example2(_) => "example2",
            PotentialKind::DiagonalPower { .. } => "diagonal-power",
            PotentialKind::Constant(_) => "constant",
            PotentialKind::Truncated { .. } => "truncated",
        }
    }
}

/// A validated, immutable matrix potential.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPotential {
    d: usize,
    m: usize,
    rho_min: f64,
    kind: PotentialKind,
}

impl MatrixPotential {
    /// Validates a config. `grid_spacing` resolves `rho_min: "auto"` to `h/4`.
    pub fn from_config(cfg: &PotentialConfig, grid_spacing: Option<f64>) -> Result<Self> {
        let resolve = |r: RhoMin| -> Result<f64> {
            let v = match r {
                RhoMin::Auto => grid_spacing.map_or(DEFAULT_RHO_MIN, |h| h / 4.0),
                RhoMin::Value(v) => v,
            };
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("rho_min must be positive, got {v}")));
            }
            Ok(v)
        };
        match cfg {
            PotentialConfig::Example1 {
                d,
                m,
                alpha,
                beta,
                c1,
                k,
                k1,
                q,
                rho_min,
            } => {
                check_dims(*d, *m)?;
                if *m != 2 {
                    return Err(Error::Config(format!("example1 has m = 2, got {m}")));
                }
                let p = Example1 {
                    alpha: *alpha,
                    beta: *beta,
                    c1: *c1,
                    k: *k,
                    k1: *k1,
                };
                if !(p.c1 > 1.0) {
                    return Err(Error::Config("example1 requires c1 > 1".into()));
                }
                if !(p.k > 0.0 && p.k1 > p.k) {
                    return Err(Error::Config("example1 requires k1 > k > 0".into()));
                }
                if !(p.beta > 0.0) {
                    return Err(Error::Config("example1 requires beta > 0".into()));
                }
                check_alpha(p.alpha, *d, *q)?;
                Ok(Self {
                    d: *d,
                    m: 2,
                    rho_min: resolve(*rho_min)?,
                    kind: PotentialKind::Example1(p),
                })
            }
            PotentialConfig::Example2 {
                d,
                m,
                eta,
                eta_offdiag,
                c,
                c_upper,
                c_offdiag,
                alpha,
                q,
                rho_min,
            } => {
                check_dims(*d, *m)?;
                let p = Example2 {
                    eta: *eta,
                    eta_offdiag: eta_offdiag.clone(),
                    c: c.clone(),
                    c_upper: c_upper.clone(),
                    c_offdiag: c_offdiag.clone(),
                    alpha: *alpha,
                };
                validate_example2(&p, *m)?;
                check_alpha(p.alpha, *d, *q)?;
                Ok(Self {
                    d: *d,
                    m: *m,
                    rho_min: resolve(*rho_min)?,
                    kind: PotentialKind::Example2(p),
                })
            }
            PotentialConfig::DiagonalPower {
                d,
                m,
                alpha,
                coeffs,
                rho_min,
            } => {
                check_dims(*d, *m)?;
                if !(*alpha >= 0.0 && *alpha < *d as f64) {
                    return Err(Error::Config(format!(
                        "diagonal-power requires 0 <= alpha < d, got {alpha}"
                    )));
                }
                let coeffs = coeffs.clone().unwrap_or_else(|| vec![1.0; *m]);
                if coeffs.len() != *m || coeffs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                    return Err(Error::Config(
                        "diagonal-power coeffs must be m nonnegative numbers".into(),
                    ));
                }
                Ok(Self {
                    d: *d,
                    m: *m,
                    rho_min: resolve(*rho_min)?,
                    kind: PotentialKind::DiagonalPower {
                        alpha: *alpha,
                        coeffs,
                    },
                })
            }
            PotentialConfig::Constant { d, m, matrix } => {
                check_dims(*d, *m)?;
                let dense = square(matrix, *m, "matrix")?;
                for i in 0..*m {
                    for j in 0..*m {
                        if dense[i * m + j] != dense[j * m + i] {
                            return Err(Error::Config("constant matrix is not symmetric".into()));
                        }
                    }
                }
                Ok(Self::constant(
                    *d,
                    SymMatrixValue::from_upper_of(&dense, *m),
                ))
            }
            PotentialConfig::Truncated {
                inner,
                eps,
                m_cap,
                n_cap,
            } => {
                let inner = Self::from_config(inner, grid_spacing)?;
                let t = inner.truncate_eps_m(*eps, *m_cap)?;
                match n_cap {
                    Some(n) => inner.truncate_eps_m_n(*eps, *m_cap, *n),
                    None => Ok(t),
                }
            }
        }
    }

    /// Constant potential `V(x) ≡ value`.
    pub fn constant(d: usize, value: SymMatrixValue) -> Self {
        Self {
            d,
            m: value.dim(),
            rho_min: DEFAULT_RHO_MIN,
            kind: PotentialKind::Constant(value),
        }
    }

    pub fn zero(d: usize, m: usize) -> Self {
        Self::constant(d, SymMatrixValue::zeros(m))
    }

    pub fn example1(d: usize, params: Example1, rho_min: f64) -> Result<Self> {
        Self::from_config(
            &PotentialConfig::Example1 {
                d,
                m: 2,
                alpha: params.alpha,
                beta: params.beta,
                c1: params.c1,
                k: params.k,
                k1: params.k1,
                q: None,
                rho_min: RhoMin::Value(rho_min),
            },
            None,
        )
    }

    pub fn diagonal_power(d: usize, m: usize, alpha: f64, rho_min: f64) -> Result<Self> {
        Self::from_config(
            &PotentialConfig::DiagonalPower {
                d,
                m,
                alpha,
                coeffs: None,
                rho_min: RhoMin::Value(rho_min),
            },
            None,
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// Same potential with a different regularization radius (propagated to
    /// truncation wrappers).
    pub fn with_rho_min(&self, rho_min: f64) -> Self {
        let mut out = self.clone();
        out.rho_min = rho_min;
        if let PotentialKind::Truncated { inner, .. } = &mut out.kind {
            **inner = inner.with_rho_min(rho_min);
        }
        out
    }

    /// `V(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<SymMatrixValue> {
        if x.len() != self.d {
            return Err(Error::Input(format!(
                "point has dimension {}, potential has d = {}",
                x.len(),
                self.d
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite point".into()));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> SymMatrixValue {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = norm.max(self.rho_min);
        match &self.kind {
            PotentialKind::Example1(p) => {
                let s = r.powf(-p.alpha);
                let g = r.powf(p.beta);
                let (sn, cs) = r.sin_cos();
                let (c2, s2) = (cs * cs, sn * sn);
                let v11 = s * (c2 + p.c1 * s2) + g * (p.k * c2 + p.k1 * s2);
                let v12 = (sn * cs).abs() * ((1.0 - p.c1) * s + (p.k - p.k1) * g);
                let v22 = s * (p.c1 * c2 + s2) + g * (p.k1 * c2 + p.k * s2);
                SymMatrixValue::from_packed(2, vec![v11, v12, v22])
            }
            PotentialKind::Example2(p) => {
                let m = self.m;
                let base = 1.0 + norm * norm;
                let singular = r.powf(-p.alpha);
                let mut v = SymMatrixValue::zeros(m);
                for i in 0..m {
                    let diag = 0.5 * (p.c[i] + p.c_upper[i]) * base.powf(p.eta);
                    v.set(i, i, diag + singular);
                    for j in (i + 1)..m {
                        v.set(i, j, -p.c_offdiag[i][j] * base.powf(p.eta_offdiag[i][j]));
                    }
                }
                v
            }
            PotentialKind::DiagonalPower { alpha, coeffs } => {
                let s = r.powf(-alpha);
                let mut v = SymMatrixValue::zeros(self.m);
                for (i, c) in coeffs.iter().enumerate() {
                    v.set(i, i, c * s);
                }
                v
            }
            PotentialKind::Constant(value) => value.clone(),
            PotentialKind::Truncated {
                inner,
                eps,
                m_cap,
                n_cap,
            } => {
                let mut v = inner.eval_unchecked(x);
                let cap = -(*m_cap as f64);
                for i in 0..self.m {
                    let mut diag = v.get(i, i) + eps;
                    if let Some(n) = n_cap {
                        diag = diag.min(*n as f64);
                    }
                    v.set(i, i, diag);
                    for j in (i + 1)..self.m {
                        v.set(i, j, v.get(i, j).max(cap));
                    }
                }
                v
            }
        }
    }

    /// `(λ_V(x), Λ_V(x))`.
    pub fn eigen_range(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.evaluate(x)?.eigen_range()
    }

    /// Minimal eigenvalue `λ_V(x)`, the scalar weight of the theory.
    pub fn lambda_min(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eigen_range(x)?.0)
    }

    /// `V_{ε,M}`: diagonal shifted by `ε`, off-diagonal floored at `−M`.
    pub fn truncate_eps_m(&self, eps: f64, m_cap: u32) -> Result<Self> {
        check_truncation(eps, m_cap)?;
        Ok(self.wrap(eps, m_cap, None))
    }

    /// `V_{ε,M,N}`: as [`truncate_eps_m`](Self::truncate_eps_m) with the
    /// diagonal additionally capped at `N`.
    pub fn truncate_eps_m_n(&self, eps: f64, m_cap: u32, n_cap: u64) -> Result<Self> {
        check_truncation(eps, m_cap)?;
        if n_cap == 0 {
            return Err(Error::Input("N must be a positive integer".into()));
        }
        Ok(self.wrap(eps, m_cap, Some(n_cap)))
    }

    fn wrap(&self, eps: f64, m_cap: u32, n_cap: Option<u64>) -> Self {
        Self {
            d: self.d,
            m: self.m,
            rho_min: self.rho_min,
            kind: PotentialKind::Truncated {
                inner: Box::new(self.clone()),
                eps,
                m_cap,
                n_cap,
            },
        }
    }

    /// Verifies symmetry, nonpositive off-diagonals and positive
    /// semi-definiteness at every sampled point, and measures the
    /// comparability constant `max Λ_V/λ_V`.
    pub fn check_hypotheses(&self, sampler: &PointSampler) -> Result<HypothesisReport> {
        let points = sampler.points(self.d, self.rho_min)?;
        let mut report = HypothesisReport {
            symmetric_ok: true,
            offdiag_nonpositive_ok: true,
            psd_ok: true,
            comparability: 1.0,
            comparability_bound: match &self.kind {
                PotentialKind::Example1(p) => Some(p.comparability_bound()),
                _ => None,
            },
            worst_point: points[0].clone(),
            witness: None,
            min_lambda: f64::INFINITY,
            sample_count: points.len(),
        };
        for x in &points {
            let v = self.evaluate(x)?;
            let (lo, hi) = v.eigen_range()?;
            let tol = 1e-10 * (1.0 + hi.abs());
            report.min_lambda = report.min_lambda.min(lo);
            for i in 0..self.m {
                for j in 0..self.m {
                    if v.get(i, j) != v.get(j, i) && report.symmetric_ok {
                        report.symmetric_ok = false;
                        report.note(x, format!("v[{i}][{j}] != v[{j}][{i}]"));
                    }
                    if i != j && v.get(i, j) > tol && report.offdiag_nonpositive_ok {
                        report.offdiag_nonpositive_ok = false;
                        report.note(x, format!("v[{i}][{j}] = {:e} > 0", v.get(i, j)));
                    }
                }
            }
            if lo < -tol && report.psd_ok {
                report.psd_ok = false;
                report.note(x, format!("lambda_min = {lo:e} < 0"));
            }
            let ratio = if lo > 0.0 {
                hi / lo
            } else if hi <= 0.0 && lo >= -tol {
                // the zero matrix: all eigenvalues equal
                1.0
            } else {
                f64::INFINITY
            };
            if ratio > report.comparability {
                report.comparability = ratio;
                report.worst_point = x.clone();
            }
        }
        Ok(report)
    }

    /// Fits `D̂_m ≤ λ_V(x)/(1+‖x‖²)^η` and `Λ_V(x)/(1+‖x‖²)^η ≤ D̂_M` over the
    /// points with `‖x‖ ≥ 1`.
    pub fn growth_envelope(&self, points: &[Vec<f64>], eta: f64) -> Result<(f64, f64)> {
        let mut lo_c = f64::INFINITY;
        let mut hi_c = 0.0f64;
        for x in points {
            let norm2: f64 = x.iter().map(|v| v * v).sum();
            if norm2 < 1.0 {
                continue;
            }
            let w = (1.0 + norm2).powf(eta);
            let (lo, hi) = self.eigen_range(x)?;
            lo_c = lo_c.min(lo / w);
            hi_c = hi_c.max(hi / w);
        }
        if lo_c == f64::INFINITY {
            return Err(Error::Input("no sample with |x| >= 1".into()));
        }
        Ok((lo_c, hi_c))
    }
}

/// `N(ε, M, m) = ⌊mM + 2m²M²/ε + ε/2⌋ + 2`, the diagonal cap above which
/// `V_{ε,M,N} ≥ ε/2` in the sense of forms.
pub fn n_threshold(eps: f64, m_cap: u32, m: usize) -> Result<u64> {
    check_truncation(eps, m_cap)?;
    if m == 0 {
        return Err(Error::Input("component count must be positive".into()));
    }
    let (mf, big_m) = (m as f64, m_cap as f64);
    let value = mf * big_m + 2.0 * mf * mf * big_m * big_m / eps + eps / 2.0;
    Ok(value.floor() as u64 + 2)
}

fn check_truncation(eps: f64, m_cap: u32) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    if m_cap == 0 {
        return Err(Error::Input("M must be a positive integer".into()));
    }
    Ok(())
}

fn check_dims(d: usize, m: usize) -> Result<()> {
    if !(1..=3).contains(&d) {
        return Err(Error::Config(format!("d must be 1, 2 or 3, got {d}")));
    }
    if m == 0 {
        return Err(Error::Config("m must be positive".into()));
    }
    Ok(())
}

fn check_alpha(alpha: f64, d: usize, q: Option<f64>) -> Result<()> {
    let upper = match q {
        Some(q) if q > 1.0 => d as f64 / q,
        Some(q) => return Err(Error::Config(format!("q must exceed 1, got {q}"))),
        None => d as f64,
    };
    if !(alpha > 0.0 && alpha < upper) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, {upper}), got {alpha}"
        )));
    }
    Ok(())
}

fn square(rows: &[Vec<f64>], m: usize, what: &str) -> Result<Vec<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Config(format!("{what} must be {m}x{m}")));
    }
    let dense: Vec<f64> = rows.iter().flatten().copied().collect();
    if dense.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} has non-finite entries")));
    }
    Ok(dense)
}

fn validate_example2(p: &Example2, m: usize) -> Result<()> {
    if p.c.len() != m || p.c_upper.len() != m {
        return Err(Error::Config("example2: c and C need m entries".into()));
    }
    let eta_off = square(&p.eta_offdiag, m, "eta_offdiag")?;
    let c_off = square(&p.c_offdiag, m, "C_offdiag")?;
    for i in 0..m {
        if !(p.c[i] > 0.0 && p.c[i] < p.c_upper[i]) {
            return Err(Error::Config(format!(
                "example2 requires 0 < c_{i} < C_{i}"
            )));
        }
        for j in 0..m {
            if i == j {
                continue;
            }
            if c_off[i * m + j] != c_off[j * m + i] || c_off[i * m + j] < 0.0 {
                return Err(Error::Config("example2 requires C_ij = C_ji >= 0".into()));
            }
            if eta_off[i * m + j] != eta_off[j * m + i] || !(eta_off[i * m + j] < p.eta) {
                return Err(Error::Config(
                    "example2 requires eta_ij = eta_ji < eta".into(),
                ));
            }
        }
    }
    // Σ_i (c_i ξ_i² − Σ_{j≠i} C_ij ξ_i ξ_j) ≥ 0 on sampled unit directions.
    let mut rng = ChaCha8Rng::seed_from_u64(0xE2);
    let form = |xi: &[f64]| {
        let mut s = 0.0;
        for i in 0..m {
            s += p.c[i] * xi[i] * xi[i];
            for j in 0..m {
                if j != i {
                    s -= c_off[i * m + j] * xi[i] * xi[j];
                }
            }
        }
        s
    };
    let mut xi = vec![0.0; m];
    for sample in 0..4096 {
        if sample < m {
            xi.iter_mut().for_each(|v| *v = 0.0);
            xi[sample] = 1.0;
        } else {
            for v in xi.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                continue;
            }
            xi.iter_mut().for_each(|v| *v /= n);
        }
        if form(&xi) < -1e-12 {
            return Err(Error::Config(format!(
                "example2 coupling form is negative at xi = {xi:?}"
            )));
        }
    }
    Ok(())
}

/// Outcome of [`MatrixPotential::check_hypotheses`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub symmetric_ok: bool,
    pub offdiag_nonpositive_ok: bool,
    pub psd_ok: bool,
    /// `max Λ_V/λ_V` over the samples (`null` in JSON when unbounded).
    #[serde(with = "crate::serde_ext::finite_or_null")]
    pub comparability: f64,
    /// Closed-form comparability constant when the potential kind has one.
    pub comparability_bound: Option<f64>,
    pub worst_point: Vec<f64>,
    /// First violation found, if any.
    pub witness: Option<Witness>,
    pub min_lambda: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Witness {
    pub point: Vec<f64>,
    pub reason: String,
}

impl HypothesisReport {
    fn note(&mut self, x: &[f64], reason: String) {
        if self.witness.is_none() {
            self.witness = Some(Witness {
                point: x.to_vec(),
                reason,
            });
        }
    }

    pub fn all_ok(&self) -> bool {
        self.symmetric_ok
            && self.offdiag_nonpositive_ok
            && self.psd_ok
            && self.comparability.is_finite()
            && self
                .comparability_bound
                .is_none_or(|b| self.comparability <= b + 1e-9)
    }
}

/// Sample points for hypothesis checks: half uniform in the box
/// `[-L, L]^d`, half with log-uniform radius in `[ρ_min, L]` to stress the
/// singularity, plus any explicitly included points.
#[derive(Debug, Clone)]
pub struct PointSampler {
    pub half_width: f64,
    pub count: usize,
    pub seed: u64,
    pub extra: Vec<Vec<f64>>,
}

impl PointSampler {
    pub const MIN_COUNT: usize = 1000;

    pub fn new(half_width: f64, count: usize, seed: u64) -> Self {
        Self {
            half_width,
            count,
            seed,
            extra: Vec::new(),
        }
    }

    pub fn points(&self, d: usize, rho_min: f64) -> Result<Vec<Vec<f64>>> {
        if self.count < Self::MIN_COUNT {
            return Err(Error::Input(format!(
                "sampler needs at least {} points, got {}",
                Self::MIN_COUNT,
                self.count
            )));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::Input("sampler half-width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let l = self.half_width;
        let mut pts = Vec::with_capacity(self.count + self.extra.len());
        let uniform = self.count / 2;
        for _ in 0..uniform {
            pts.push((0..d).map(|_| rng.gen_range(-l..l)).collect());
        }
        let (lo, hi) = (rho_min.min(l).ln(), l.ln());
        for _ in uniform..self.count {
            let r = if hi > lo {
                rng.gen_range(lo..hi).exp()
            } else {
                l
            };
            pts.push(
                random_direction(&mut rng, d)
                    .into_iter()
                    .map(|u| u * r)
                    .collect(),
            );
        }
        pts.extend(self.extra.iter().cloned());
        Ok(pts)
    }
}

pub(crate) fn random_direction(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ex1() -> Example1 {
        Example1 {
            alpha: 1.0,
            beta: 1.0,
            c1: 2.0,
            k: 1.0,
            k1: 3.0,
        }
    }

    fn ex1_pot(d: usize) -> MatrixPotential {
        MatrixPotential::example1(d, ex1(), 1e-9).unwrap()
    }

    /// Independent 2x2 eigensolver: roots of the characteristic polynomial.
    fn char_poly_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
        let tr = a + c;
        let det = a * c - b * b;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        ((tr - disc) / 2.0, (tr + disc) / 2.0)
    }

    #[test]
    fn packed_storage_is_symmetric() {
        let mut v = SymMatrixValue::zeros(3);
        v.set(2, 0, 7.0);
        assert_eq!(v.get(0, 2), 7.0);
        assert_eq!(v.get(2, 0), 7.0);
        assert_eq!(v.packed().len(), 6);
    }

    #[test]
    fn example1_at_half_pi() {
        let x = [PI / 2.0, 0.0];
        let v = ex1_pot(2).evaluate(&x).unwrap();
        assert!((v.get(0, 0) - (4.0 / PI + 3.0 * PI / 2.0)).abs() < 1e-12);
        assert!(v.get(0, 1).abs() < 1e-15);
        assert!((v.get(1, 1) - (2.0 / PI + PI / 2.0)).abs() < 1e-12);
        // cross-check with the characteristic polynomial
        let (lo, hi) = char_poly_roots(v.get(0, 0), v.get(0, 1), v.get(1, 1));
        let (l1, l2) = ex1().eigenvalues_at(PI / 2.0);
        assert!((lo - l1).abs() < 1e-12 && (hi - l2).abs() < 1e-12);
    }

    #[test]
    fn example1_eigen_range_at_radius_two() {
        let (lo, hi) = ex1_pot(3).eigen_range(&[0.0, 2.0, 0.0]).unwrap();
        assert!((lo - 2.5).abs() < 1e-12, "{lo}");
        assert!((hi - 7.0).abs() < 1e-12, "{hi}");
        let v = ex1_pot(3).evaluate(&[0.0, 2.0, 0.0]).unwrap();
        let e = v.eigen().unwrap();
        assert!((e.min() - 2.5).abs() < 1e-12 && (e.max() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_matrices() {
        assert_eq!(SymMatrixValue::zeros(2).eigen_range().unwrap(), (0.0, 0.0));
        assert_eq!(
            SymMatrixValue::identity(2).eigen_range().unwrap(),
            (1.0, 1.0)
        );
        let (lo, hi) = SymMatrixValue::identity(4).eigen_range().unwrap();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        let z = MatrixPotential::zero(2, 3);
        assert_eq!(z.evaluate(&[0.3, -0.2]).unwrap(), SymMatrixValue::zeros(3));
    }

    #[test]
    fn diagonal_power_at_unit_radius() {
        let p = MatrixPotential::diagonal_power(2, 3, 1.5, 1e-6).unwrap();
        let v = p.evaluate(&[0.6, 0.8]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn singular_factor_is_floored() {
        let p = MatrixPotential::diagonal_power(2, 1, 1.0, 0.25).unwrap();
        assert_eq!(p.evaluate(&[0.0, 0.0]).unwrap().get(0, 0), 4.0);
        assert_eq!(p.evaluate(&[0.1, 0.0]).unwrap().get(0, 0), 4.0);
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        assert!(matches!(ex1_pot(2).evaluate(&[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn unknown_kind_and_keys_are_config_errors() {
        let bad_kind = r#"{"kind": "example9", "d": 2, "m": 2}"#;
        assert!(serde_json::from_str::<PotentialConfig>(bad_kind).is_err());
        let extra = r#"{"kind": "example1", "d": 2, "m": 2, "alpha": 1.0, "beta": 1.0,
            "c1": 2.0, "k": 1.0, "k1": 3.0, "rho_min": "auto", "gamma": 3}"#;
        assert!(serde_json::from_str::<PotentialConfig>(extra).is_err());
    }

    #[test]
    fn parses_documented_example1_config() {
        let s = r#"{"kind": "example1", "d": 2, "m": 2, "alpha": 1.0, "beta": 1.0,
            "c1": 2.0, "k": 1.0, "k1": 3.0, "rho_min": "auto"}"#;
        let cfg: PotentialConfig = serde_json::from_str(s).unwrap();
        let p = MatrixPotential::from_config(&cfg, Some(0.1)).unwrap();
        assert_eq!(p.rho_min(), 0.025);
        assert_eq!(p.kind().name(), "example1");
    }

    #[test]
    fn example1_constraints() {
        let mk = |c1: f64, k: f64, k1: f64, alpha: f64, q: Option<f64>| PotentialConfig::Example1 {
            d: 2,
            m: 2,
            alpha,
            beta: 1.0,
            c1,
            k,
            k1,
            q,
            rho_min: RhoMin::Auto,
        };
        assert!(MatrixPotential::from_config(&mk(2.0, 1.0, 3.0, 1.0, None), None).is_ok());
        assert!(MatrixPotential::from_config(&mk(1.0, 1.0, 3.0, 1.0, None), None).is_err());
        assert!(MatrixPotential::from_config(&mk(2.0, 3.0, 1.0, 1.0, None), None).is_err());
        // alpha < d/q
        assert!(MatrixPotential::from_config(&mk(2.0, 1.0, 3.0, 1.0, Some(2.0)), None).is_err());
        assert!(MatrixPotential::from_config(&mk(2.0, 1.0, 3.0, 0.5, Some(2.0)), None).is_ok());
    }

    #[test]
    fn hypotheses_for_example1() {
        let sampler = PointSampler::new(4.0, 2000, 7);
        let r = ex1_pot(2).check_hypotheses(&sampler).unwrap();
        assert!(r.all_ok(), "{r:?}");
        assert!(r.comparability <= 3.0 + 1e-9);
        assert!(r.comparability > 1.0);
        assert_eq!(r.sample_count, 2000);
    }

    #[test]
    fn positive_offdiag_is_reported_with_witness() {
        let v = SymMatrixValue::from_upper_of(&[2.0, 0.5, 0.5, 2.0], 2);
        let r = MatrixPotential::constant(2, v)
            .check_hypotheses(&PointSampler::new(1.0, 1000, 1))
            .unwrap();
        assert!(!r.offdiag_nonpositive_ok);
        assert!(r.psd_ok);
        assert!(r.witness.unwrap().reason.contains("> 0"));
    }

    #[test]
    fn identity_has_unit_comparability() {
        let r = MatrixPotential::constant(3, SymMatrixValue::identity(2))
            .check_hypotheses(&PointSampler::new(1.0, 1000, 1))
            .unwrap();
        assert_eq!(r.comparability, 1.0);
        assert!(r.all_ok());
    }

    #[test]
    fn sampler_rejects_small_counts() {
        assert!(PointSampler::new(1.0, 10, 0).points(2, 1e-3).is_err());
    }

    #[test]
    fn truncation_caps_offdiagonal() {
        let v = SymMatrixValue::from_upper_of(&[0.0, -5.0, -5.0, 0.0], 2);
        let t = MatrixPotential::constant(1, v)
            .truncate_eps_m(1.0, 2)
            .unwrap();
        let w = t.evaluate(&[0.0]).unwrap();
        assert_eq!(w.to_dense(), vec![1.0, -2.0, -2.0, 1.0]);
    }

    #[test]
    fn inactive_cap_shifts_spectrum() {
        let p = ex1_pot(2);
        let t = p.truncate_eps_m(1.0, 1_000_000).unwrap();
        for x in [[0.3, 0.1], [1.0, -2.0], [0.01, 0.0]] {
            let (a, _) = p.eigen_range(&x).unwrap();
            let (b, _) = t.eigen_range(&x).unwrap();
            assert!((b - a - 1.0).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn diagonal_cap_active() {
        let v = SymMatrixValue::from_upper_of(&[100.0, 0.0, 0.0, 100.0], 2);
        let t = MatrixPotential::constant(1, v)
            .truncate_eps_m_n(1.0, 1, 10)
            .unwrap();
        assert_eq!(
            t.evaluate(&[0.0]).unwrap().to_dense(),
            vec![10.0, 0.0, 0.0, 10.0]
        );
    }

    #[test]
    fn large_n_matches_eps_m() {
        let p = ex1_pot(2);
        let a = p.truncate_eps_m(0.5, 2).unwrap();
        let b = p.truncate_eps_m_n(0.5, 2, u64::MAX / 4).unwrap();
        for x in [[0.3, 0.1], [1.0, -2.0]] {
            assert_eq!(a.evaluate(&x).unwrap(), b.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn truncation_rejects_bad_eps() {
        assert!(matches!(
            ex1_pot(2).truncate_eps_m(0.0, 1),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            ex1_pot(2).truncate_eps_m(-1.0, 1),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn n_threshold_values() {
        assert_eq!(n_threshold(1.0, 1, 2).unwrap(), 12);
        assert_eq!(n_threshold(2.0, 1, 1).unwrap(), 5);
        assert!(n_threshold(0.0, 1, 1).is_err());
        for m in 1..5 {
            for big_m in 1..6u32 {
                let base = n_threshold(0.7, big_m, m).unwrap();
                assert!(n_threshold(0.7, big_m + 1, m).unwrap() >= base);
                assert!(n_threshold(0.7, big_m, m + 1).unwrap() >= base);
            }
        }
    }

    fn example2_3x3() -> PotentialConfig {
        PotentialConfig::Example2 {
            d: 2,
            m: 3,
            eta: 1.0,
            eta_offdiag: vec![
                vec![0.0, 0.5, 0.25],
                vec![0.5, 0.0, 0.5],
                vec![0.25, 0.5, 0.0],
            ],
            c: vec![2.0, 2.0, 2.0],
            c_upper: vec![3.0, 4.0, 3.0],
            c_offdiag: vec![
                vec![0.0, 0.8, 0.5],
                vec![0.8, 0.0, 0.8],
                vec![0.5, 0.8, 0.0],
            ],
            alpha: 0.5,
            q: Some(2.0),
            rho_min: RhoMin::Value(1e-6),
        }
    }

    #[test]
    fn example2_two_sided_growth_bound() {
        let p = MatrixPotential::from_config(&example2_3x3(), None).unwrap();
        let sampler = PointSampler::new(20.0, 4000, 3);
        let rep = p.check_hypotheses(&sampler).unwrap();
        assert!(rep.all_ok(), "{rep:?}");
        let pts = sampler.points(2, 1e-6).unwrap();
        let (lo, hi) = p.growth_envelope(&pts, 1.0).unwrap();
        assert!(0.0 < lo && lo <= hi);
        if let PotentialKind::Example2(e) = p.kind() {
            assert!(lo >= e.lower_growth_constant() - 1e-12);
        }
    }

    #[test]
    fn example2_rejects_indefinite_coupling() {
        let mut cfg = example2_3x3();
        if let PotentialConfig::Example2 { c_offdiag, .. } = &mut cfg {
            *c_offdiag = vec![
                vec![0.0, 3.0, 3.0],
                vec![3.0, 0.0, 3.0],
                vec![3.0, 3.0, 0.0],
            ];
        }
        assert!(matches!(
            MatrixPotential::from_config(&cfg, None),
            Err(Error::Config(_))
        ));
    }
}
