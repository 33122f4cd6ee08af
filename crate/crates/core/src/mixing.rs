//! Evaluators for the posterior mixing density of the product-form Laplace prior.
//!
//! With `Â = AᵀΣ_obs⁻¹A`, `b̂ = AᵀΣ_obs⁻¹y` and exponential mixing rates `λ`,
//!
//! ```text
//! log π(w|y) = −λᵀw − ½ log det B_w + ½ ‖L_B⁻¹ Λ_w^{1/2} b̂‖² + c,   B_w = Λ_w^{1/2} Â Λ_w^{1/2} + I.
//! ```
//!
//! Gradients and Hessians need `K = (Â⁻¹ + Λ_w)⁻¹` and `z = K Â⁻¹ b̂`. Both are evaluated
//! through the Woodbury identities
//!
//! ```text
//! K = Â − Â Λ_w^{1/2} B_w⁻¹ Λ_w^{1/2} Â,      z = b̂ − Â Λ_w^{1/2} B_w⁻¹ Λ_w^{1/2} b̂,
//! ```
//!
//! which never invert `Â` and remain valid when some `wᵢ = 0`. Coordinates with `wᵢ = 0` drop
//! out of `B_w`, so every evaluation only factors an `r × r` matrix, `r = #{i : wᵢ > 0}`.
//!
//! When `Â` is kept in factored form and the support is large, the same quantities come from
//! the `m × m` data-space matrix `Σ_w = I + ÃΛ_wÃᵀ` instead: `det B_w = det Σ_w`,
//! `K = ÃᵀΣ_w⁻¹Ã` and `z = ÃᵀΣ_w⁻¹ỹ`.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_len, symmetrize, SpdFactor};
use crate::model::LinearGaussianModel;
use crate::reduction::CoordinateSplit;

/// Above this dimension the Gram matrix is not formed densely.
pub const DENSE_GRAM_LIMIT: usize = 4096;

/// Log-scale bound on `v = log w` accepted by the v-space evaluators.
pub const V_BOUND: f64 = 45.0;

/// Identifies the additive constant an evaluator drops.
///
/// Two log-density values can only be compared through their difference when their tokens
/// are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConstantToken {
    kind: ConstantKind,
    fingerprint: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstantKind {
    /// Constant of `log π(w|y)` in w-space.
    MixingW,
    /// Constant of `log π(v|y)` in v-space.
    MixingV,
    /// Constant of the reduced v-space density; depends on the split.
    ReducedV,
}

impl ConstantToken {
    pub fn kind(&self) -> ConstantKind {
        self.kind
    }
}

/// Compressed sparse storage (rows or columns) of a matrix.
#[derive(Clone, Debug)]
struct Compressed {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Compressed {
    fn lane(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.ptr[k], self.ptr[k + 1]);
        self.idx[a..b].iter().copied().zip(self.val[a..b].iter().copied())
    }
}

/// The Gram matrix `Â`, dense for moderate dimension and column-on-demand otherwise.
#[derive(Clone, Debug)]
pub enum Gram {
    Dense(DMatrix<f64>),
    /// `Â = ÃᵀÃ` with `Ã` stored sparsely by columns and rows.
    Factored { dim: usize, cols: CompressedPair },
}

/// Column- and row-compressed copies of the same sparse matrix.
#[derive(Clone, Debug)]
pub struct CompressedPair {
    cols: Compressed,
    rows: Compressed,
}

impl CompressedPair {
    fn from_dense(a: &DMatrix<f64>) -> Self {
        let (m, d) = a.shape();
        let mut cols = Compressed { ptr: vec![0], idx: Vec::new(), val: Vec::new() };
        let mut row_count = vec![0usize; m + 1];
        for j in 0..d {
            for (i, &v) in a.column(j).iter().enumerate() {
                if v != 0.0 {
                    cols.idx.push(i);
                    cols.val.push(v);
                    row_count[i + 1] += 1;
                }
            }
            cols.ptr.push(cols.idx.len());
        }
        for i in 0..m {
            row_count[i + 1] += row_count[i];
        }
        let nnz = cols.idx.len();
        let mut rows = Compressed { ptr: row_count.clone(), idx: vec![0; nnz], val: vec![0.0; nnz] };
        let mut next = row_count;
        for j in 0..d {
            for (i, v) in cols.lane(j).collect::<Vec<_>>() {
                rows.idx[next[i]] = j;
                rows.val[next[i]] = v;
                next[i] += 1;
            }
        }
        Self { cols, rows }
    }
}

impl Gram {
    /// Builds `ÃᵀÃ` from a whitened forward matrix.
    pub fn from_whitened(a: &DMatrix<f64>) -> Self {
        if a.ncols() <= DENSE_GRAM_LIMIT {
            let mut g = a.tr_mul(a);
            symmetrize(&mut g);
            Gram::Dense(g)
        } else {
            Gram::Factored { dim: a.ncols(), cols: CompressedPair::from_dense(a) }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Gram::Dense(g) => g.nrows(),
            Gram::Factored { dim, .. } => *dim,
        }
    }

    /// Column `j` of `Â`.
    pub fn column(&self, j: usize) -> DVector<f64> {
        match self {
            Gram::Dense(g) => g.column(j).into_owned(),
            Gram::Factored { dim, cols } => {
                let mut out = DVector::zeros(*dim);
                for (k, akj) in cols.cols.lane(j) {
                    for (l, akl) in cols.rows.lane(k) {
                        out[l] += akj * akl;
                    }
                }
                out
            }
        }
    }

    /// Columns `Â_{:,idx}` as a `d × |idx|` matrix.
    pub fn columns(&self, idx: &[usize]) -> DMatrix<f64> {
        match self {
            Gram::Dense(g) => g.select_columns(idx),
            Gram::Factored { dim, .. } => {
                let mut out = DMatrix::zeros(*dim, idx.len());
                for (c, &j) in idx.iter().enumerate() {
                    out.set_column(c, &self.column(j));
                }
                out
            }
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        match self {
            Gram::Dense(g) => g.diagonal(),
            Gram::Factored { dim, cols } => {
                DVector::from_iterator(*dim, (0..*dim).map(|j| cols.cols.lane(j).map(|(_, v)| v * v).sum()))
            }
        }
    }

    /// Dense `Â`; assembled on the fly for the column-on-demand representation.
    pub fn dense(&self) -> Cow<'_, DMatrix<f64>> {
        match self {
            Gram::Dense(g) => Cow::Borrowed(g),
            Gram::Factored { dim, .. } => {
                let all: Vec<usize> = (0..*dim).collect();
                let mut g = self.columns(&all);
                symmetrize(&mut g);
                Cow::Owned(g)
            }
        }
    }
}

/// Quantities shared by value, gradient and Hessian at one `w`.
struct Woodbury {
    support: Vec<usize>,
    /// `Â_{:,I}`, `d × r`.
    cols: DMatrix<f64>,
    factor: SpdFactor,
    /// `L_B⁻¹ Λ_I^{1/2} Â_{I,:}`, `r × d`.
    g: DMatrix<f64>,
    /// `L_B⁻¹ Λ_I^{1/2} b̂_I`.
    t: DVector<f64>,
}

/// Value, `diag K` and `z` from the data-space form.
struct DataSpace {
    value: f64,
    kdiag: DVector<f64>,
    z: DVector<f64>,
}

/// Log posterior mixing density in w-space for exponential mixing rates `λ`.
#[derive(Clone, Debug)]
pub struct WSpaceEvaluator {
    gram: Gram,
    gram_diag: DVector<f64>,
    b_hat: DVector<f64>,
    /// Whitened data `ỹ`, kept for the data-space path of a factored Gram matrix.
    data: Option<DVector<f64>>,
    rates: DVector<f64>,
    fingerprint: u64,
}

impl WSpaceEvaluator {
    pub fn new(model: &LinearGaussianModel, rates: DVector<f64>) -> Result<Self> {
        check_len("mixing rates", &rates, model.param_dim())?;
        let gram = Gram::from_whitened(model.whitened_forward());
        let b_hat = model.data_projection();
        let mut ev = Self::assemble(gram, b_hat, rates, model.fingerprint())?;
        if matches!(ev.gram, Gram::Factored { .. }) {
            ev.data = Some(model.whitened_data().clone());
        }
        Ok(ev)
    }

    /// Builds an evaluator directly from `Â` and `b̂`.
    pub fn from_gram(gram: DMatrix<f64>, b_hat: DVector<f64>, rates: DVector<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() != b_hat.len() {
            return Err(Error::shape("Gram matrix and projected data sizes differ"));
        }
        check_len("mixing rates", &rates, b_hat.len())?;
        let fingerprint = {
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            for v in gram.iter().chain(b_hat.iter()) {
                v.to_bits().hash(&mut h);
            }
            h.finish()
        };
        let mut gram = gram;
        symmetrize(&mut gram);
        Self::assemble(Gram::Dense(gram), b_hat, rates, fingerprint)
    }

    fn assemble(gram: Gram, b_hat: DVector<f64>, rates: DVector<f64>, fingerprint: u64) -> Result<Self> {
        if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Domain("mixing rates must be strictly positive".into()));
        }
        let gram_diag = gram.diagonal();
        Ok(Self { gram, gram_diag, b_hat, data: None, rates, fingerprint })
    }

    pub fn dim(&self) -> usize {
        self.b_hat.len()
    }

    pub fn rates(&self) -> &DVector<f64> {
        &self.rates
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    pub fn b_hat(&self) -> &DVector<f64> {
        &self.b_hat
    }

    pub fn constant_token(&self) -> ConstantToken {
        ConstantToken { kind: ConstantKind::MixingW, fingerprint: self.fingerprint }
    }

    fn check_w(&self, w: &DVector<f64>) -> Result<()> {
        check_len("mixing variable", w, self.dim())?;
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::support(format!("w[{i}] = {v}; the mixing variable must be nonnegative")));
        }
        Ok(())
    }

    fn woodbury(&self, w: &DVector<f64>, support: Vec<usize>, need_g: bool) -> Result<Woodbury> {
        let r = support.len();
        let cols = self.gram.columns(&support);
        let s = DVector::from_iterator(r, support.iter().map(|&i| w[i].sqrt()));
        let mut b = DMatrix::identity(r, r);
        for q in 0..r {
            for (p, &i) in support.iter().enumerate() {
                b[(p, q)] += s[p] * cols[(i, q)] * s[q];
            }
        }
        symmetrize(&mut b);
        let factor = SpdFactor::new(b)?;
        let sb = DVector::from_iterator(r, support.iter().zip(s.iter()).map(|(&i, si)| si * self.b_hat[i]));
        let t = factor.solve_lower(&sb);
        let g = if need_g {
            let mut scaled = cols.transpose();
            for p in 0..r {
                scaled.row_mut(p).scale_mut(s[p]);
            }
            factor.solve_lower_mat(&scaled)
        } else {
            DMatrix::zeros(0, 0)
        };
        Ok(Woodbury { support, cols, factor, g, t })
    }

    fn value_from(&self, w: &DVector<f64>, wb: &Woodbury) -> Result<f64> {
        let v = -self.rates.dot(w) - 0.5 * wb.factor.log_det() + 0.5 * wb.t.norm_squared();
        if !v.is_finite() {
            return Err(Error::numerical("mixing log density is not finite"));
        }
        Ok(v)
    }

    /// `(diag K, z)` for the data part of the gradient.
    fn k_diag_and_z(&self, wb: &Woodbury) -> (DVector<f64>, DVector<f64>) {
        let mut kdiag = self.gram_diag.clone();
        for j in 0..kdiag.len() {
            kdiag[j] -= wb.g.column(j).norm_squared();
        }
        let z = &self.b_hat - wb.g.tr_mul(&wb.t);
        (kdiag, z)
    }

    /// Data-space evaluation for a factored Gram matrix, used when `r² d > m³`.
    fn data_space(&self, w: &DVector<f64>, support: &[usize]) -> Result<Option<DataSpace>> {
        let (Gram::Factored { dim, cols }, Some(y)) = (&self.gram, &self.data) else {
            return Ok(None);
        };
        let (m, d, r) = (y.len() as f64, *dim as f64, support.len() as f64);
        if r * r * d <= m * m * m {
            return Ok(None);
        }
        let mut sigma = DMatrix::identity(y.len(), y.len());
        for &j in support {
            let lane: Vec<(usize, f64)> = cols.cols.lane(j).collect();
            for &(q, aq) in &lane {
                for &(p, ap) in &lane {
                    sigma[(p, q)] += w[j] * ap * aq;
                }
            }
        }
        let factor = SpdFactor::new(sigma)?;
        let u = factor.solve(y);
        let s_inv = factor.inverse();
        let value = -self.rates.dot(w) - 0.5 * factor.log_det() + 0.5 * (y.norm_squared() - y.dot(&u));
        if !value.is_finite() {
            return Err(Error::numerical("mixing log density is not finite"));
        }
        let mut kdiag = DVector::zeros(*dim);
        let mut z = DVector::zeros(*dim);
        for i in 0..*dim {
            let mut k = 0.0;
            let mut zi = 0.0;
            for (q, aq) in cols.cols.lane(i) {
                zi += aq * u[q];
                for (p, ap) in cols.cols.lane(i) {
                    k += ap * s_inv[(p, q)] * aq;
                }
            }
            kdiag[i] = k;
            z[i] = zi;
        }
        Ok(Some(DataSpace { value, kdiag, z }))
    }

    fn support_of(w: &DVector<f64>) -> Vec<usize> {
        (0..w.len()).filter(|&i| w[i] > 0.0).collect()
    }

    /// `log π(w|y)` up to a constant, factoring the full `d × d` matrix `B_w`.
    pub fn log_density_w(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_w(w)?;
        let wb = self.woodbury(w, (0..self.dim()).collect(), false)?;
        self.value_from(w, &wb)
    }

    /// Gradient of `log π(w|y)` over all `d` coordinates.
    pub fn grad_log_density_w(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.grad_log_likelihood_w(w)? - &self.rates)
    }

    /// Gradient of `log π(y|w)`, i.e. the mixing-density gradient with the prior term removed.
    pub fn grad_log_likelihood_w(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_w(w)?;
        let support = Self::support_of(w);
        let (kdiag, z) = match self.data_space(w, &support)? {
            Some(ds) => (ds.kdiag, ds.z),
            None => self.k_diag_and_z(&self.woodbury(w, support, true)?),
        };
        Ok(0.5 * (z.component_mul(&z) - kdiag))
    }

    /// Hessian `½K^{⊙2} − Λ_z K Λ_z` of `log π(w|y)`.
    pub fn hessian_log_density_w(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.hessian_block(w, &all)
    }

    /// Rows and columns `idx` of the Hessian, using only the support of `w`.
    pub fn hessian_block(&self, w: &DVector<f64>, idx: &[usize]) -> Result<DMatrix<f64>> {
        self.check_w(w)?;
        let wb = self.woodbury(w, Self::support_of(w), true)?;
        let (_, z) = self.k_diag_and_z(&wb);
        let q = idx.len();
        let a_cols = self.gram.columns(idx);
        let gq = wb.g.select_columns(idx);
        let mut k = DMatrix::zeros(q, q);
        for b in 0..q {
            for a in 0..q {
                k[(a, b)] = a_cols[(idx[a], b)];
            }
        }
        k -= gq.tr_mul(&gq);
        symmetrize(&mut k);
        let mut h = DMatrix::zeros(q, q);
        for b in 0..q {
            for a in 0..q {
                let kab = k[(a, b)];
                h[(a, b)] = 0.5 * kab * kab - z[idx[a]] * kab * z[idx[b]];
            }
        }
        symmetrize(&mut h);
        Ok(h)
    }

    /// `(−log π(w|y), −∇log π(w|y))` computed from the support `I = {i : wᵢ > 0}` only.
    ///
    /// Costs one `r × r` factorization plus `O(r² d)` work for the gradient.
    pub fn sparse_map_objective(&self, w: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_w(w)?;
        let support = Self::support_of(w);
        let (value, kdiag, z) = match self.data_space(w, &support)? {
            Some(ds) => (ds.value, ds.kdiag, ds.z),
            None => {
                let wb = self.woodbury(w, support, true)?;
                let value = self.value_from(w, &wb)?;
                let (kdiag, z) = self.k_diag_and_z(&wb);
                (value, kdiag, z)
            }
        };
        let grad = &self.rates + 0.5 * (kdiag - z.component_mul(&z));
        Ok((-value, grad))
    }

    /// Value-only variant of [`Self::sparse_map_objective`].
    pub fn sparse_map_value(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_w(w)?;
        let support = Self::support_of(w);
        if let Some(ds) = self.data_space(w, &support)? {
            return Ok(-ds.value);
        }
        let wb = self.woodbury(w, support, false)?;
        Ok(-self.value_from(w, &wb)?)
    }

    /// `Â_{:,I}` for the current support; exposed for reuse by callers that cache columns.
    pub fn support_columns(&self, w: &DVector<f64>) -> Result<(Vec<usize>, DMatrix<f64>)> {
        self.check_w(w)?;
        let wb = self.woodbury(w, Self::support_of(w), false)?;
        Ok((wb.support, wb.cols))
    }
}

fn exp_checked(v: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(x.abs() <= V_BOUND)) {
        return Err(Error::support(format!(
            "v[{i}] = {x} is outside [-{V_BOUND}, {V_BOUND}]; such a log mixing variable has negligible \
             posterior mass, reduce the step size or restart from the prior mean"
        )));
    }
    Ok(v.map(f64::exp))
}

/// Log posterior density of `v = log w`, including the log-Jacobian `Σvᵢ`.
#[derive(Clone, Debug)]
pub struct VSpaceEvaluator {
    inner: WSpaceEvaluator,
}

impl VSpaceEvaluator {
    pub fn new(inner: WSpaceEvaluator) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &WSpaceEvaluator {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn constant_token(&self) -> ConstantToken {
        ConstantToken { kind: ConstantKind::MixingV, fingerprint: self.inner.fingerprint }
    }

    /// `−Σλᵢe^{vᵢ} − ½ log det(Â + Λ_{e^v}⁻¹) + ½ b̂ᵀ(Â + Λ_{e^v}⁻¹)⁻¹b̂ + ½Σvᵢ`.
    ///
    /// Evaluated through `log det(Â + Λ⁻¹) = log det B_w − Σvᵢ`, which stays well conditioned
    /// when `Â` is singular.
    pub fn log_density_v(&self, v: &DVector<f64>) -> Result<f64> {
        check_len("log mixing variable", v, self.dim())?;
        let w = exp_checked(v)?;
        Ok(self.inner.log_density_w(&w)? + v.sum())
    }

    pub fn grad_log_density_v(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("log mixing variable", v, self.dim())?;
        let w = exp_checked(v)?;
        let g = self.inner.grad_log_density_w(&w)?;
        Ok(w.component_mul(&g).add_scalar(1.0))
    }
}

/// Log density of `v_I` with `v_J` fixed at the prior mean `−log λ_J`.
///
/// Writes `Â + Λ_{e^v}⁻¹` in `(I, J)` blocks `[[B + Λ_{e^{v_I}}⁻¹, C], [Cᵀ, D]]` with
/// `D = Â_JJ + Λ_{λ_J}` and uses the Schur complement `Z = Λ_{e^{v_I}}⁻¹ + B − CD⁻¹Cᵀ`.
/// Everything involving `J` is precomputed, so each call factors one `r × r` matrix.
#[derive(Clone, Debug)]
pub struct ReducedVEvaluator {
    split: CoordinateSplit,
    rates_sel: DVector<f64>,
    fixed_v_comp: DVector<f64>,
    /// `B − CD⁻¹Cᵀ`.
    schur_const: DMatrix<f64>,
    /// `D⁻¹Cᵀ`.
    d_inv_ct: DMatrix<f64>,
    log_det_d: f64,
    /// `b̂_I − CD⁻¹b̂_J`.
    u: DVector<f64>,
    fingerprint: u64,
}

impl ReducedVEvaluator {
    pub fn new(ev: &WSpaceEvaluator, split: CoordinateSplit) -> Result<Self> {
        if split.dim() != ev.dim() {
            return Err(Error::shape(format!(
                "split dimension {} does not match evaluator dimension {}",
                split.dim(),
                ev.dim()
            )));
        }
        if split.rank() == 0 {
            return Err(Error::arg("reduced evaluator needs at least one selected coordinate"));
        }
        let sel = split.selected();
        let comp = split.complement();
        let cols_sel = ev.gram.columns(sel);
        let b = cols_sel.select_rows(sel);
        // Â_{J,I} = Cᵀ
        let ct = cols_sel.select_rows(comp);
        let rates_sel = split.gather_selected(&ev.rates);
        let rates_comp = split.gather_complement(&ev.rates);
        let b_sel = split.gather_selected(&ev.b_hat);
        let b_comp = split.gather_complement(&ev.b_hat);
        let (schur_const, d_inv_ct, log_det_d, u) = if comp.is_empty() {
            (b, DMatrix::zeros(0, sel.len()), 0.0, b_sel)
        } else {
            let gram = ev.gram.dense();
            let mut d = gram.select_rows(comp).select_columns(comp);
            for (k, lam) in rates_comp.iter().enumerate() {
                d[(k, k)] += lam;
            }
            let fd = SpdFactor::new(d)?;
            let d_inv_ct = fd.solve_mat(&ct);
            let half = fd.solve_lower_mat(&ct);
            let mut s = b - half.tr_mul(&half);
            symmetrize(&mut s);
            let u = b_sel - d_inv_ct.tr_mul(&b_comp);
            (s, d_inv_ct, fd.log_det(), u)
        };
        let fixed_v_comp = rates_comp.map(|l| -l.ln());
        let fingerprint = {
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            ev.fingerprint.hash(&mut h);
            split.selected().hash(&mut h);
            h.finish()
        };
        Ok(Self { split, rates_sel, fixed_v_comp, schur_const, d_inv_ct, log_det_d, u, fingerprint })
    }

    pub fn split(&self) -> &CoordinateSplit {
        &self.split
    }

    pub fn rank(&self) -> usize {
        self.split.rank()
    }

    /// The fixed `v_J = −log λ_J`.
    pub fn fixed_complement(&self) -> &DVector<f64> {
        &self.fixed_v_comp
    }

    /// `D⁻¹Cᵀ`, the coupling of `J` to `I`.
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.d_inv_ct
    }

    /// `log det D`, the dropped `J`-only part of the log determinant.
    pub fn log_det_complement(&self) -> f64 {
        self.log_det_d
    }

    pub fn constant_token(&self) -> ConstantToken {
        ConstantToken { kind: ConstantKind::ReducedV, fingerprint: self.fingerprint }
    }

    fn factor_z(&self, v_sel: &DVector<f64>) -> Result<(DVector<f64>, SpdFactor)> {
        check_len("reduced log mixing variable", v_sel, self.rank())?;
        let w = exp_checked(v_sel)?;
        let mut z = self.schur_const.clone();
        for i in 0..w.len() {
            z[(i, i)] += 1.0 / w[i];
        }
        let f = SpdFactor::new(z)?;
        Ok((w, f))
    }

    pub fn log_density(&self, v_sel: &DVector<f64>) -> Result<f64> {
        let (w, f) = self.factor_z(v_sel)?;
        let v = -self.rates_sel.dot(&w) - 0.5 * f.log_det() + 0.5 * f.inv_quad(&self.u) + 0.5 * v_sel.sum();
        if !v.is_finite() {
            return Err(Error::numerical("reduced log density is not finite"));
        }
        Ok(v)
    }

    pub fn grad(&self, v_sel: &DVector<f64>) -> Result<DVector<f64>> {
        let (w, f) = self.factor_z(v_sel)?;
        let zinv = f.inverse();
        let zu = f.solve(&self.u);
        Ok(DVector::from_iterator(
            w.len(),
            (0..w.len()).map(|i| {
                -self.rates_sel[i] * w[i] + 0.5 + 0.5 / w[i] * (zinv[(i, i)] + zu[i] * zu[i])
            }),
        ))
    }

    /// Value and gradient sharing one factorization.
    pub fn value_and_grad(&self, v_sel: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (w, f) = self.factor_z(v_sel)?;
        let zinv = f.inverse();
        let zu = f.solve(&self.u);
        let value = -self.rates_sel.dot(&w) - 0.5 * f.log_det() + 0.5 * self.u.dot(&zu) + 0.5 * v_sel.sum();
        if !value.is_finite() {
            return Err(Error::numerical("reduced log density is not finite"));
        }
        let grad = DVector::from_iterator(
            w.len(),
            (0..w.len()).map(|i| -self.rates_sel[i] * w[i] + 0.5 + 0.5 / w[i] * (zinv[(i, i)] + zu[i] * zu[i])),
        );
        Ok((value, grad))
    }

    /// Full `v` with the complement filled in at its fixed value.
    pub fn assemble(&self, v_sel: &DVector<f64>) -> Result<DVector<f64>> {
        self.split.scatter(v_sel, &self.fixed_v_comp)
    }
}
