//! Regular inducing grids and local cubic convolution interpolation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, MsgpError, Result};
use crate::linalg::unravel;

/// Rectilinear grid with `sizes[p]` equally spaced nodes on `[lower[p], upper[p]]`.
/// Flat node indices are row-major (last dimension fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducingGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    sizes: Vec<usize>,
}

impl InducingGrid {
    pub fn new(lower: &[f64], upper: &[f64], sizes: &[usize]) -> Result<Self> {
        check_len(lower.len(), upper.len())?;
        check_len(lower.len(), sizes.len())?;
        if lower.is_empty() {
            return Err(MsgpError::InvalidArgument("grid needs at least one dimension".into()));
        }
        for p in 0..lower.len() {
            if !(lower[p].is_finite() && upper[p].is_finite() && lower[p] < upper[p]) {
                return Err(MsgpError::InvalidArgument(format!(
                    "grid dimension {p}: need lower < upper, got [{}, {}]",
                    lower[p], upper[p]
                )));
            }
            if sizes[p] < 4 {
                return Err(MsgpError::InvalidArgument(format!(
                    "grid dimension {p} has {} nodes; cubic interpolation needs at least 4",
                    sizes[p]
                )));
            }
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            sizes: sizes.to_vec(),
        })
    }

    /// Grid over the bounding box of `points` (rows), padded by `margin`
    /// spacings on every side.
    pub fn covering(points: &DMatrix<f64>, sizes: &[usize], margin: f64) -> Result<Self> {
        let d = points.ncols();
        check_len(d, sizes.len())?;
        if points.nrows() == 0 {
            return Err(MsgpError::InvalidArgument("cannot cover an empty point set".into()));
        }
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        for p in 0..d {
            let col = points.column(p);
            let (lo, hi) = (col.min(), col.max());
            let width = if hi > lo { hi - lo } else { 1.0 };
            if sizes[p] as f64 <= 2.0 * margin + 1.0 {
                return Err(MsgpError::InvalidArgument(format!(
                    "grid dimension {p}: {} nodes too few for a margin of {margin} spacings",
                    sizes[p]
                )));
            }
            // Solve h = (width + 2 margin h) / (m - 1) for the spacing.
            let h = width / (sizes[p] as f64 - 1.0 - 2.0 * margin);
            lower.push(lo - margin * h);
            upper.push(hi + margin * h);
        }
        Self::new(&lower, &upper, sizes)
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, p: usize) -> usize {
        self.sizes[p]
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn spacing(&self, p: usize) -> f64 {
        (self.upper[p] - self.lower[p]) / (self.sizes[p] - 1) as f64
    }

    pub fn nodes(&self, p: usize) -> Vec<f64> {
        let h = self.spacing(p);
        (0..self.sizes[p]).map(|j| self.lower[p] + j as f64 * h).collect()
    }

    /// All grid points, row-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let nodes: Vec<Vec<f64>> = (0..self.dim()).map(|p| self.nodes(p)).collect();
        let mut idx = vec![0; self.dim()];
        (0..self.total())
            .map(|flat| {
                unravel(flat, &self.sizes, &mut idx);
                idx.iter().enumerate().map(|(p, &i)| nodes[p][i]).collect()
            })
            .collect()
    }

    /// Whether every point lies at least `margin` spacings inside the grid.
    pub fn contains_with_margin(&self, points: &DMatrix<f64>, margin: f64) -> bool {
        (0..self.dim()).all(|p| {
            let h = self.spacing(p);
            let col = points.column(p);
            col.min() >= self.lower[p] + margin * h - 1e-12 * h && col.max() <= self.upper[p] - margin * h + 1e-12 * h
        })
    }
}

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn cubic_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t <= 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

pub fn cubic_kernel_derivative(t: f64) -> f64 {
    let a = t.abs();
    let mag = if a <= 1.0 {
        (4.5 * a - 5.0) * a
    } else if a <= 2.0 {
        (-1.5 * a + 5.0) * a - 4.0
    } else {
        0.0
    };
    mag * t.signum()
}

/// Row-sparse interpolation matrix in CSR layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseInterpolation {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Interpolation weights together with their derivatives with respect to
/// each input coordinate, on the same sparsity pattern.
#[derive(Clone, Debug)]
pub struct InterpolationWithGradient {
    pub weights: SparseInterpolation,
    /// `derivatives[p][k] = ∂ values[k] / ∂ x_{row(k), p}`.
    pub derivatives: Vec<Vec<f64>>,
}

impl SparseInterpolation {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and weights of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `W v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|i| {
                let (c, w) = self.row(i);
                c.iter().zip(w).map(|(&j, &x)| x * v[j]).sum()
            })
            .collect())
    }

    /// `Wᵀ v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            let (c, w) = self.row(i);
            for (&j, &x) in c.iter().zip(w) {
                out[j] += x * vi;
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (c, w) = self.row(i);
            for (&j, &x) in c.iter().zip(w) {
                out[(i, j)] += x;
            }
        }
        out
    }
}

// Up to four merged stencil entries in one dimension: (node, weight, dweight/dx).
struct Stencil {
    len: usize,
    node: [usize; 4],
    weight: [f64; 4],
    deriv: [f64; 4],
}

fn stencil_1d(grid: &InducingGrid, p: usize, x: f64, point: usize, clamp: bool) -> Result<Stencil> {
    let (lo, hi) = (grid.lower[p], grid.upper[p]);
    let m = grid.sizes[p];
    let h = grid.spacing(p);
    let slack = 1e-12 * h;
    let x = if x < lo - slack || x > hi + slack {
        if !clamp || !x.is_finite() {
            return Err(MsgpError::OutOfGrid {
                point,
                dim: p,
                coord: x,
                lower: lo,
                upper: hi,
            });
        }
        x.clamp(lo, hi)
    } else {
        x.clamp(lo, hi)
    };
    let t = (x - lo) / h;
    let base = (t.floor() as isize).clamp(0, m as isize - 2);
    let mut st = Stencil {
        len: 0,
        node: [0; 4],
        weight: [0.0; 4],
        deriv: [0.0; 4],
    };
    for k in -1..=2isize {
        let j = base + k;
        let offset = t - j as f64;
        let w = cubic_kernel(offset);
        let dw = cubic_kernel_derivative(offset) / h;
        let node = j.clamp(0, m as isize - 1) as usize;
        match st.node[..st.len].iter().position(|&n| n == node) {
            Some(pos) => {
                st.weight[pos] += w;
                st.deriv[pos] += dw;
            }
            None => {
                st.node[st.len] = node;
                st.weight[st.len] = w;
                st.deriv[st.len] = dw;
                st.len += 1;
            }
        }
    }
    let sum: f64 = st.weight[..st.len].iter().sum();
    let dsum: f64 = st.deriv[..st.len].iter().sum();
    // Keys weights already sum to one; dividing guards against rounding and
    // keeps the derivative consistent with the normalized weights.
    for k in 0..st.len {
        st.deriv[k] = (st.deriv[k] - st.weight[k] / sum * dsum) / sum;
        st.weight[k] /= sum;
    }
    Ok(st)
}

fn build(grid: &InducingGrid, x: &DMatrix<f64>, clamp: bool, with_grad: bool) -> Result<InterpolationWithGradient> {
    let d = grid.dim();
    check_len(d, x.ncols())?;
    let n = x.nrows();
    let strides = {
        let mut s = vec![1usize; d];
        for p in (0..d.saturating_sub(1)).rev() {
            s[p] = s[p + 1] * grid.sizes[p + 1];
        }
        s
    };
    let cap = n * 4usize.pow(d as u32);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(cap);
    let mut values = Vec::with_capacity(cap);
    let mut derivatives = if with_grad { vec![Vec::with_capacity(cap); d] } else { Vec::new() };
    row_ptr.push(0);
    let mut stencils = Vec::with_capacity(d);
    let mut counter = vec![0usize; d];
    for i in 0..n {
        stencils.clear();
        for p in 0..d {
            stencils.push(stencil_1d(grid, p, x[(i, p)], i, clamp)?);
        }
        counter.iter_mut().for_each(|c| *c = 0);
        'outer: loop {
            let mut col = 0;
            let mut w = 1.0;
            for p in 0..d {
                col += stencils[p].node[counter[p]] * strides[p];
                w *= stencils[p].weight[counter[p]];
            }
            col_idx.push(col);
            values.push(w);
            if with_grad {
                for (q, dq) in derivatives.iter_mut().enumerate() {
                    let mut g = 1.0;
                    for p in 0..d {
                        g *= if p == q {
                            stencils[p].deriv[counter[p]]
                        } else {
                            stencils[p].weight[counter[p]]
                        };
                    }
                    dq.push(g);
                }
            }
            for p in (0..d).rev() {
                counter[p] += 1;
                if counter[p] < stencils[p].len {
                    continue 'outer;
                }
                counter[p] = 0;
            }
            break;
        }
        row_ptr.push(col_idx.len());
    }
    Ok(InterpolationWithGradient {
        weights: SparseInterpolation {
            rows: n,
            cols: grid.total(),
            row_ptr,
            col_idx,
            values,
        },
        derivatives,
    })
}

/// Cubic convolution weights of the rows of `x` (n × d) onto `grid`.
/// Points outside the grid are an error unless `clamp` is set, in which
/// case they are moved to the nearest boundary.
pub fn interp_weights(grid: &InducingGrid, x: &DMatrix<f64>, clamp: bool) -> Result<SparseInterpolation> {
    Ok(build(grid, x, clamp, false)?.weights)
}

pub fn interp_weights_with_gradient(grid: &InducingGrid, x: &DMatrix<f64>, clamp: bool) -> Result<InterpolationWithGradient> {
    build(grid, x, clamp, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn grid_nodes_and_spacing() {
        let g = InducingGrid::new(&[0.0], &[3.0], &[4]).unwrap();
        assert_eq!(g.nodes(0), vec![0.0, 1.0, 2.0, 3.0]);
        let g = InducingGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 4]).unwrap();
        assert_eq!(g.total(), 20);
        assert!((g.spacing(0) - 0.25).abs() < 1e-15);
        assert!((g.spacing(1) - 1.0 / 3.0).abs() < 1e-15);
        let m = 1000;
        let g = InducingGrid::new(&[-12.0], &[13.0], &[m]).unwrap();
        assert!((g.spacing(0) - 25.0 / (m - 1) as f64).abs() < 1e-15);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(InducingGrid::new(&[1.0], &[0.0], &[10]).is_err());
        assert!(InducingGrid::new(&[0.0], &[1.0], &[3]).is_err());
        assert!(InducingGrid::new(&[0.0, 0.0], &[1.0], &[5]).is_err());
    }

    #[test]
    fn covering_leaves_margin() {
        let x = col(&[-10.0, 3.0, 10.0]);
        let g = InducingGrid::covering(&x, &[101], 2.0).unwrap();
        assert!(g.contains_with_margin(&x, 2.0 - 1e-9));
        assert!(!g.contains_with_margin(&x, 2.1));
    }

    #[test]
    fn on_node_is_indicator() {
        let g = InducingGrid::new(&[0.0], &[9.0], &[10]).unwrap();
        let w = interp_weights(&g, &col(&[4.0]), false).unwrap();
        let dense = w.to_dense();
        for j in 0..10 {
            assert!((dense[(0, j)] - if j == 4 { 1.0 } else { 0.0 }).abs() < 1e-15);
        }
    }

    #[test]
    fn midpoint_weights() {
        let g = InducingGrid::new(&[0.0], &[9.0], &[10]).unwrap();
        let w = interp_weights(&g, &col(&[4.5]), false).unwrap();
        let dense = w.to_dense();
        let want = [-0.0625, 0.5625, 0.5625, -0.0625];
        for (k, j) in (3..7).enumerate() {
            assert!((dense[(0, j)] - want[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn two_dimensional_row_is_outer_product() {
        let g = InducingGrid::new(&[0.0, 0.0], &[9.0, 9.0], &[10, 10]).unwrap();
        let x = DMatrix::from_row_slice(1, 2, &[4.3, 5.8]);
        let w = interp_weights(&g, &x, false).unwrap();
        assert_eq!(w.nnz(), 16);
        let a = interp_weights(&g.clone_1d(0), &col(&[4.3]), false).unwrap().to_dense();
        let b = interp_weights(&g.clone_1d(1), &col(&[5.8]), false).unwrap().to_dense();
        let dense = w.to_dense();
        for i in 0..10 {
            for j in 0..10 {
                assert!((dense[(0, i * 10 + j)] - a[(0, i)] * b[(0, j)]).abs() < 1e-15);
            }
        }
    }

    impl InducingGrid {
        fn clone_1d(&self, p: usize) -> InducingGrid {
            InducingGrid::new(&[self.lower[p]], &[self.upper[p]], &[self.sizes[p]]).unwrap()
        }
    }

    #[test]
    fn out_of_grid_error_and_clamp() {
        let g = InducingGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.2, 1.5]);
        match interp_weights(&g, &x, false) {
            Err(MsgpError::OutOfGrid { point, dim, .. }) => assert_eq!((point, dim), (1, 1)),
            other => panic!("expected out-of-grid error, got {other:?}"),
        }
        let w = interp_weights(&g, &x, true).unwrap();
        let clamped = interp_weights(&g, &DMatrix::from_row_slice(1, 2, &[0.2, 1.0]), false).unwrap();
        assert_eq!(w.row(1), clamped.row(0));
    }

    #[test]
    fn boundary_rows_are_merged_and_sum_to_one() {
        let g = InducingGrid::new(&[0.0], &[5.0], &[6]).unwrap();
        let w = interp_weights(&g, &col(&[0.0, 0.3, 4.9, 5.0]), false).unwrap();
        for i in 0..4 {
            let (c, v) = w.row(i);
            assert!(c.len() <= 4);
            let mut sorted = c.to_vec();
            sorted.dedup();
            assert_eq!(sorted.len(), c.len());
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_quadratics_in_the_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let g = InducingGrid::new(&[-2.0], &[3.0], &[26]).unwrap();
        let f = |x: f64| 0.7 - 1.3 * x + 0.4 * x * x;
        let values: Vec<f64> = g.nodes(0).iter().map(|&x| f(x)).collect();
        let h = g.spacing(0);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(-2.0 + h..3.0 - h)).collect();
        let w = interp_weights(&g, &col(&xs), false).unwrap();
        for (x, y) in xs.iter().zip(w.apply(&values).unwrap()) {
            assert!((f(*x) - y).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_error_decays_cubically() {
        let f = |x: f64| x * x * x;
        let xs: Vec<f64> = (0..50).map(|i| 0.3 + 0.37 * i as f64 / 49.0).collect();
        let mut errs = Vec::new();
        for m in [21, 41, 81] {
            let g = InducingGrid::new(&[-1.0], &[2.0], &[m]).unwrap();
            let vals: Vec<f64> = g.nodes(0).iter().map(|&x| f(x)).collect();
            let w = interp_weights(&g, &col(&xs), false).unwrap();
            let e = xs
                .iter()
                .zip(w.apply(&vals).unwrap())
                .map(|(x, y)| (f(*x) - y).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        for pair in errs.windows(2) {
            let rate = (pair[0] / pair[1]).log2();
            assert!(rate > 2.7, "observed order {rate}");
        }
    }

    #[test]
    fn transpose_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let g = InducingGrid::new(&[0.0, -1.0], &[2.0, 1.0], &[7, 6]).unwrap();
        let x = DMatrix::from_fn(30, 2, |_, p| if p == 0 { rng.gen_range(0.0..2.0) } else { rng.gen_range(-1.0..1.0) });
        let w = interp_weights(&g, &x, false).unwrap();
        let dense = w.to_dense();
        let v: Vec<f64> = (0..42).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wv = &dense * nalgebra::DVector::from_vec(v.clone());
        let wtu = dense.transpose() * nalgebra::DVector::from_vec(u.clone());
        for (a, b) in w.apply(&v).unwrap().iter().zip(wv.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in w.apply_transpose(&u).unwrap().iter().zip(wtu.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for j in [0, 17, 41] {
            let mut e = vec![0.0; 42];
            e[j] = 1.0;
            let got = w.apply_transpose(&w.apply(&e).unwrap()).unwrap();
            let want = dense.transpose() * dense.column(j);
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn on_node_gather() {
        let g = InducingGrid::new(&[0.0], &[7.0], &[8]).unwrap();
        let w = interp_weights(&g, &col(&[0.0, 3.0, 7.0, 5.0]), false).unwrap();
        let v: Vec<f64> = (0..8).map(|i| i as f64 * 10.0).collect();
        let out = w.apply(&v).unwrap();
        for (a, b) in out.iter().zip([0.0, 30.0, 70.0, 50.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(seed in 0u64..1000, d in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sizes: Vec<usize> = (0..d).map(|_| rng.gen_range(4..12)).collect();
            let g = InducingGrid::new(&vec![0.0; d], &vec![1.0; d], &sizes).unwrap();
            let x = DMatrix::from_fn(20, d, |_, _| rng.gen_range(0.0..=1.0));
            let w = interp_weights(&g, &x, false).unwrap();
            for i in 0..20 {
                let (c, v) = w.row(i);
                prop_assert!(c.len() <= 4usize.pow(d as u32));
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn derivatives_match_finite_differences(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = InducingGrid::new(&[0.0, 0.0], &[1.0, 2.0], &[9, 11]).unwrap();
            let x = DMatrix::from_fn(1, 2, |_, p| rng.gen_range(0.15..0.85) * (p + 1) as f64);
            let v: Vec<f64> = (0..99).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let wg = interp_weights_with_gradient(&g, &x, false).unwrap();
            for p in 0..2 {
                let analytic: f64 = wg.weights.col_idx().iter().zip(&wg.derivatives[p]).map(|(&j, dw)| dw * v[j]).sum();
                let h = 1e-6;
                let mut xp = x.clone();
                xp[(0, p)] += h;
                let up = interp_weights(&g, &xp, false).unwrap().apply(&v).unwrap()[0];
                xp[(0, p)] -= 2.0 * h;
                let dn = interp_weights(&g, &xp, false).unwrap().apply(&v).unwrap()[0];
                let fd = (up - dn) / (2.0 * h);
                prop_assert!((analytic - fd).abs() < 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}
