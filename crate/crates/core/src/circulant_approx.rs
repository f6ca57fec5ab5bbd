//! Circulant approximations of symmetric Toeplitz and BTTB matrices, used as
//! preconditioners and for fast log-determinants.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, MsgpError, Result};
use crate::fft::{spectral_apply, FftNd};
use crate::interpolation::InducingGrid;
use crate::linalg::{unravel, BccbOperator, CirculantOperator, LinearOperator, Preconditioner, ToeplitzOperator};

pub const DEFAULT_WHITTLE_WINDOW: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum CirculantMethod {
    /// Periodic aliasing of the kernel, truncated to `2 window + 1` images.
    Whittle { window: usize },
    Strang,
    TChan,
    /// Superoptimal: minimizes `‖I − C⁻¹T‖_F`.
    Tyrtyshnikov,
}

impl Default for CirculantMethod {
    fn default() -> Self {
        CirculantMethod::Whittle {
            window: DEFAULT_WHITTLE_WINDOW,
        }
    }
}

impl FromStr for CirculantMethod {
    type Err = MsgpError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "whittle" => Ok(CirculantMethod::default()),
            "strang" => Ok(CirculantMethod::Strang),
            "tchan" | "t-chan" | "chan" => Ok(CirculantMethod::TChan),
            "tyrtyshnikov" | "superoptimal" => Ok(CirculantMethod::Tyrtyshnikov),
            other => {
                if let Some(w) = other.strip_prefix("whittle:") {
                    let window = w
                        .parse()
                        .map_err(|_| MsgpError::InvalidArgument(format!("bad Whittle window '{w}'")))?;
                    return Ok(CirculantMethod::Whittle { window });
                }
                Err(MsgpError::InvalidArgument(format!(
                    "unknown circulant method '{s}' (expected whittle, strang, tchan or tyrtyshnikov)"
                )))
            }
        }
    }
}

impl fmt::Display for CirculantMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CirculantMethod::Whittle { window } => write!(f, "whittle:{window}"),
            CirculantMethod::Strang => write!(f, "strang"),
            CirculantMethod::TChan => write!(f, "tchan"),
            CirculantMethod::Tyrtyshnikov => write!(f, "tyrtyshnikov"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDetEstimate {
    pub value: f64,
    /// Number of eigenvalues raised to zero by thresholding.
    pub clipped_count: usize,
}

// Signed representative of i in [-m/2, m/2).
#[inline]
fn centered(i: usize, m: usize) -> i64 {
    if i <= m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

/// Symmetric circulant first column approximating the Toeplitz matrix with
/// first column `k_col`.
///
/// `extension(j)` must return the Toeplitz column entry at any lag `j ≥ 0`;
/// it is required (and only used) for the Whittle method.
pub fn circulant_embed(
    k_col: &[f64],
    method: CirculantMethod,
    extension: Option<&dyn Fn(usize) -> f64>,
) -> Result<CirculantOperator> {
    let m = k_col.len();
    if m == 0 {
        return Err(MsgpError::InvalidArgument("empty Toeplitz column".into()));
    }
    if k_col.iter().any(|x| !x.is_finite()) {
        return Err(MsgpError::NonFinite("Toeplitz column".into()));
    }
    let col = match method {
        CirculantMethod::Whittle { window } => {
            let ext = extension.ok_or_else(|| {
                MsgpError::InvalidArgument("the Whittle approximation needs the kernel beyond the grid".into())
            })?;
            whittle_sum_column(m, window, &|lag: i64| ext(lag.unsigned_abs() as usize))
        }
        CirculantMethod::Strang => (0..m).map(|i| k_col[i.min(m - i)]).collect(),
        CirculantMethod::TChan => (0..m)
            .map(|i| {
                if i == 0 {
                    k_col[0]
                } else {
                    ((m - i) as f64 * k_col[i] + i as f64 * k_col[m - i]) / m as f64
                }
            })
            .collect(),
        CirculantMethod::Tyrtyshnikov => return tyrtyshnikov(k_col),
    };
    if col.iter().any(|x| !x.is_finite()) {
        return Err(MsgpError::NonFinite("circulant approximation".into()));
    }
    CirculantOperator::new(col)
}

pub(crate) fn whittle_sum_column(m: usize, window: usize, k: &dyn Fn(i64) -> f64) -> Vec<f64> {
    let w = window as i64;
    (0..m)
        .map(|i| {
            let c = centered(i, m);
            (-w..=w).map(|j| k(c + j * m as i64)).sum()
        })
        .collect()
}

// T. Chan optimal circulant of an arbitrary square matrix given through its
// wrapped-diagonal sums D(δ) = Σ_{(i-j) mod n = δ} A_ij.
fn tchan_from_wrapped_sums(sums: &[f64]) -> Vec<f64> {
    let n = sums.len() as f64;
    sums.iter().map(|s| s / n).collect()
}

// Wrapped-diagonal sums of T² for symmetric Toeplitz T, in O(n²).
fn wrapped_sums_of_square(t: &[f64]) -> Vec<f64> {
    let n = t.len() as i64;
    let tt = |a: i64| t[a.unsigned_abs() as usize];
    // Number of l with l+a, l, l-b all in [0, n).
    let count = |a: i64, b: i64| (n - 0.max(-a).max(b) - 0.max(a).max(-b)).max(0) as f64;
    (0..n)
        .map(|delta| {
            let mut s = 0.0;
            for a in (1 - n)..n {
                for target in [delta, delta - n] {
                    let b = target - a;
                    if b.abs() < n {
                        s += tt(a) * tt(b) * count(a, b);
                    }
                }
            }
            s
        })
        .collect()
}

fn tyrtyshnikov(k_col: &[f64]) -> Result<CirculantOperator> {
    let m = k_col.len();
    let tchan = circulant_embed(k_col, CirculantMethod::TChan, None)?;
    let lam = tchan.eigenvalues()?;
    let sq = CirculantOperator::new(tchan_from_wrapped_sums(&wrapped_sums_of_square(k_col)))?;
    let lam_sq = sq.eigenvalues()?;
    let mut out = Vec::with_capacity(m);
    for (k, (a, b)) in lam_sq.iter().zip(&lam).enumerate() {
        if b.abs() <= f64::EPSILON * lam.iter().fold(0.0f64, |x, y| x.max(y.abs())) {
            return Err(MsgpError::NonPositiveEigenvalue { index: k, value: *b });
        }
        out.push(a / b);
    }
    CirculantOperator::from_eigenvalues(&out)
}

/// Whittle circulant first column for a 1D stationary kernel on a grid with
/// `m` nodes and the given spacing: `c_i = Σ_{j=-w}^{w} k((i' + j m) Δ)`.
pub fn whittle_column(kernel: &dyn Fn(f64) -> f64, spacing: f64, m: usize, window: usize) -> Vec<f64> {
    whittle_sum_column(m, window, &|lag| kernel(lag as f64 * spacing))
}

/// Real spectrum of a symmetric circulant with negative values raised to zero,
/// in Fourier order, plus the number of clipped values.
pub fn thresholded_spectrum(c: &CirculantOperator) -> Result<(Vec<f64>, usize)> {
    Ok(threshold(c.eigenvalues()?))
}

fn threshold(mut lam: Vec<f64>) -> (Vec<f64>, usize) {
    let mut clipped = 0;
    for l in lam.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
            clipped += 1;
        }
    }
    (lam, clipped)
}

/// `Σ log(λ_i + σ²)` for a thresholded spectrum.
pub fn logdet_from_spectrum(lam: &[f64], sigma2: f64, clipped_count: usize) -> Result<LogDetEstimate> {
    if !(sigma2 >= 0.0) {
        return Err(MsgpError::InvalidArgument(format!("noise variance must be non-negative, got {sigma2}")));
    }
    let mut value = 0.0;
    for (index, &l) in lam.iter().enumerate() {
        let shifted = l + sigma2;
        if !shifted.is_finite() {
            return Err(MsgpError::NonFinite("spectrum".into()));
        }
        if shifted <= 0.0 {
            return Err(MsgpError::NonPositiveEigenvalue { index, value: shifted });
        }
        value += shifted.ln();
    }
    Ok(LogDetEstimate { value, clipped_count })
}

/// Thresholded Whittle spectrum of a 1D stationary kernel.
pub fn whittle_spectrum(kernel: &dyn Fn(f64) -> f64, spacing: f64, m: usize, window: usize) -> Result<(Vec<f64>, usize)> {
    let col = whittle_column(kernel, spacing, m, window);
    if col.iter().any(|x| !x.is_finite()) {
        return Err(MsgpError::NonFinite("kernel values".into()));
    }
    thresholded_spectrum(&CirculantOperator::new(col)?)
}

/// Whittle approximation of `log|T + σ² I|` for the `m × m` Toeplitz matrix
/// `T_ij = k(|i − j| Δ)`.
pub fn whittle_logdet(
    kernel: &dyn Fn(f64) -> f64,
    spacing: f64,
    m: usize,
    sigma2: f64,
    window: usize,
) -> Result<LogDetEstimate> {
    if m < 2 {
        return Err(MsgpError::InvalidArgument("Whittle log-determinant needs m >= 2".into()));
    }
    let (lam, clipped) = whittle_spectrum(kernel, spacing, m, window)?;
    logdet_from_spectrum(&lam, sigma2, clipped)
}

/// Multidimensional Whittle column on a grid: the aliasing sum runs over
/// `(2w + 1)^D` images with per-dimension wrap.
pub fn bccb_whittle_column(kernel: &dyn Fn(&[f64]) -> f64, grid: &InducingGrid, window: usize) -> Vec<f64> {
    let shape = grid.sizes().to_vec();
    let d = shape.len();
    let spacing: Vec<f64> = (0..d).map(|p| grid.spacing(p)).collect();
    let w = window as i64;
    let images = (2 * window + 1).pow(d as u32);
    let image_shape = vec![2 * window + 1; d];
    let mut idx = vec![0; d];
    let mut img = vec![0; d];
    let mut offset = vec![0.0; d];
    (0..grid.total())
        .map(|flat| {
            unravel(flat, &shape, &mut idx);
            let mut s = 0.0;
            for k in 0..images {
                unravel(k, &image_shape, &mut img);
                for p in 0..d {
                    let j = img[p] as i64 - w;
                    offset[p] = (centered(idx[p], shape[p]) + j * shape[p] as i64) as f64 * spacing[p];
                }
                s += kernel(&offset);
            }
            s
        })
        .collect()
}

pub fn bccb_whittle_spectrum(kernel: &dyn Fn(&[f64]) -> f64, grid: &InducingGrid, window: usize) -> Result<(Vec<f64>, usize)> {
    let col = bccb_whittle_column(kernel, grid, window);
    if col.iter().any(|x| !x.is_finite()) {
        return Err(MsgpError::NonFinite("kernel values".into()));
    }
    Ok(threshold(BccbOperator::new(grid.sizes(), col)?.eigenvalues()?))
}

pub fn bccb_whittle_logdet(
    kernel: &dyn Fn(&[f64]) -> f64,
    grid: &InducingGrid,
    sigma2: f64,
    window: usize,
) -> Result<LogDetEstimate> {
    let (lam, clipped) = bccb_whittle_spectrum(kernel, grid, window)?;
    logdet_from_spectrum(&lam, sigma2, clipped)
}

/// `(C + σ² I)⁻¹` applied by spectral division, with the spectrum of `C`
/// thresholded at zero.
#[derive(Clone, Debug)]
pub struct CirculantPreconditioner {
    plan: FftNd,
    inverse_spectrum: Vec<Complex64>,
}

impl CirculantPreconditioner {
    pub fn new(c: &CirculantOperator, sigma2: f64) -> Result<Self> {
        let (lam, _) = thresholded_spectrum(c)?;
        let mut inverse_spectrum = Vec::with_capacity(lam.len());
        for (index, l) in lam.iter().enumerate() {
            let shifted = l + sigma2;
            if !(shifted > 0.0) {
                return Err(MsgpError::NonPositiveEigenvalue { index, value: shifted });
            }
            inverse_spectrum.push(Complex64::new(1.0 / shifted, 0.0));
        }
        Ok(Self {
            plan: FftNd::new(&[lam.len()]),
            inverse_spectrum,
        })
    }

    /// Preconditioner for `T + σ² I` built from the chosen approximation of `T`.
    pub fn for_toeplitz(
        t: &ToeplitzOperator,
        method: CirculantMethod,
        extension: Option<&dyn Fn(usize) -> f64>,
        sigma2: f64,
    ) -> Result<Self> {
        let (c, shift) = circulant_for_shifted(t.first_column(), method, extension, sigma2)?;
        Self::new(&c, shift)
    }
}

/// Circulant approximant of `T + σ² I` as `(C, s)` with the approximant equal
/// to `C + s I`. The superoptimal method is built on the shifted matrix itself,
/// the others approximate `T` and carry the shift.
pub fn circulant_for_shifted(
    k_col: &[f64],
    method: CirculantMethod,
    extension: Option<&dyn Fn(usize) -> f64>,
    sigma2: f64,
) -> Result<(CirculantOperator, f64)> {
    if method == CirculantMethod::Tyrtyshnikov && !k_col.is_empty() {
        let mut col = k_col.to_vec();
        col[0] += sigma2;
        return Ok((circulant_embed(&col, method, extension)?, 0.0));
    }
    Ok((circulant_embed(k_col, method, extension)?, sigma2))
}

impl Preconditioner for CirculantPreconditioner {
    fn dim(&self) -> usize {
        self.inverse_spectrum.len()
    }

    fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        spectral_apply(&self.plan, &self.inverse_spectrum, v)
    }
}

/// `(C + σ² I)⁻¹ v`.
pub fn precondition(c: &CirculantOperator, sigma2: f64, v: &[f64]) -> Result<Vec<f64>> {
    check_len(c.dim(), v.len())?;
    CirculantPreconditioner::new(c, sigma2)?.apply_inverse(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(ell: f64) -> impl Fn(f64) -> f64 {
        move |r: f64| (-0.5 * (r / ell).powi(2)).exp()
    }

    fn dense_logdet(col: &[f64], sigma2: f64) -> f64 {
        let m = col.len();
        let a = DMatrix::from_fn(m, m, |i, j| col[i.abs_diff(j)] + if i == j { sigma2 } else { 0.0 });
        let l = a.cholesky().expect("SPD").l();
        2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>()
    }

    fn superoptimal_objective(c: &[f64], t: &DMatrix<f64>) -> f64 {
        let cm = CirculantOperator::new(c.to_vec()).unwrap().to_dense();
        let n = t.nrows();
        (DMatrix::identity(n, n) - cm.try_inverse().unwrap() * t).norm()
    }

    #[test]
    fn parse_methods() {
        assert_eq!("whittle".parse::<CirculantMethod>().unwrap(), CirculantMethod::Whittle { window: 1 });
        assert_eq!("whittle:3".parse::<CirculantMethod>().unwrap(), CirculantMethod::Whittle { window: 3 });
        assert_eq!("TChan".parse::<CirculantMethod>().unwrap(), CirculantMethod::TChan);
        assert!("helgason".parse::<CirculantMethod>().is_err());
        for m in [CirculantMethod::Strang, CirculantMethod::Tyrtyshnikov, CirculantMethod::Whittle { window: 2 }] {
            assert_eq!(m.to_string().parse::<CirculantMethod>().unwrap(), m);
        }
    }

    #[test]
    fn strang_of_identity() {
        let mut col = vec![0.0; 7];
        col[0] = 1.0;
        let c = circulant_embed(&col, CirculantMethod::Strang, None).unwrap();
        assert_eq!(c.first_column(), &col[..]);
    }

    #[test]
    fn tchan_closed_form() {
        let c = circulant_embed(&[4.0, 3.0, 2.0, 1.0], CirculantMethod::TChan, None).unwrap();
        assert_eq!(c.first_column(), &[4.0, 2.5, 2.0, 2.5]);
    }

    #[test]
    fn tchan_minimizes_frobenius_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let col: Vec<f64> = (0..9).map(|i| (-(i as f64) / 2.5).exp()).collect();
        let t = DMatrix::from_fn(9, 9, |i, j| col[i.abs_diff(j)]);
        let c = circulant_embed(&col, CirculantMethod::TChan, None).unwrap();
        let best = (c.to_dense() - &t).norm();
        for _ in 0..50 {
            let pert: Vec<f64> = c.first_column().iter().map(|x| x + rng.gen_range(-1e-2..1e-2)).collect();
            let other = CirculantOperator::new(pert).unwrap().to_dense();
            assert!((other - &t).norm() >= best);
        }
    }

    #[test]
    fn whittle_requires_extension() {
        assert!(circulant_embed(&[1.0, 0.5], CirculantMethod::default(), None).is_err());
    }

    #[test]
    fn whittle_column_is_symmetric_and_aliased() {
        let k = se(3.0);
        let c = whittle_column(&k, 1.0, 10, 1);
        for i in 1..10 {
            assert!((c[i] - c[10 - i]).abs() < 1e-15);
        }
        let want = k(2.0) + k(8.0) + k(12.0);
        assert!((c[2] - want).abs() < 1e-15);
        assert_eq!(whittle_column(&k, 1.0, 10, 0)[7], k(3.0));
    }

    #[test]
    fn fixed_point_on_circulant_input() {
        // Symmetric Toeplitz column that is also circulant: t_i = t_{m-i}.
        let base = [3.0, 1.0, 0.4, 0.1];
        let m = 7;
        let col: Vec<f64> = (0..m).map(|i| base[i.min(m - i)]).collect();
        let ext = |j: usize| if j < m { col[j] } else { 0.0 };
        let want = CirculantOperator::new(col.clone()).unwrap().eigenvalues().unwrap();
        for method in [
            CirculantMethod::Strang,
            CirculantMethod::TChan,
            CirculantMethod::Tyrtyshnikov,
            CirculantMethod::Whittle { window: 0 },
        ] {
            let got = circulant_embed(&col, method, Some(&ext)).unwrap().eigenvalues().unwrap();
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10, "{method}");
            }
        }
    }

    #[test]
    fn tyrtyshnikov_is_superoptimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for m in [5, 8, 12, 16] {
            let col: Vec<f64> = (0..m).map(|i| 2.0 * (-0.5 * (i as f64 / 2.0).powi(2)).exp()).collect();
            let t = DMatrix::from_fn(m, m, |i, j| col[i.abs_diff(j)] + if i == j { 0.1 } else { 0.0 });
            let shifted: Vec<f64> = (0..m).map(|i| col[i] + if i == 0 { 0.1 } else { 0.0 }).collect();
            let sup = circulant_embed(&shifted, CirculantMethod::Tyrtyshnikov, None).unwrap();
            let best = superoptimal_objective(sup.first_column(), &t);
            let chan = circulant_embed(&shifted, CirculantMethod::TChan, None).unwrap();
            let strang = circulant_embed(&shifted, CirculantMethod::Strang, None).unwrap();
            assert!(best <= superoptimal_objective(chan.first_column(), &t) + 1e-12);
            assert!(best <= superoptimal_objective(strang.first_column(), &t) + 1e-12);
            let lam = sup.eigenvalues().unwrap();
            for _ in 0..30 {
                let pert: Vec<f64> = lam.iter().map(|l| l * (1.0 + rng.gen_range(-1e-3..1e-3))).collect();
                // Keep the perturbed spectrum symmetric so the circulant stays real.
                let sym: Vec<f64> = (0..m).map(|k| 0.5 * (pert[k] + pert[(m - k) % m])).collect();
                let other = CirculantOperator::from_eigenvalues(&sym).unwrap();
                assert!(superoptimal_objective(other.first_column(), &t) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn wrapped_sums_match_dense() {
        let col = [1.0, 0.6, 0.3, -0.1, 0.05];
        let n = col.len();
        let t = DMatrix::from_fn(n, n, |i, j| col[i.abs_diff(j)]);
        let sq = &t * &t;
        let fast = wrapped_sums_of_square(&col);
        for (delta, f) in fast.iter().enumerate() {
            let slow: f64 = (0..n).map(|i| sq[(i, (i + n - delta) % n)]).sum();
            assert!((f - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn logdet_trivial_cases() {
        let delta = |r: f64| if r == 0.0 { 1.0 } else { 0.0 };
        let est = whittle_logdet(&delta, 1.0, 8, 0.0, 1).unwrap();
        assert!(est.value.abs() < 1e-14);
        assert_eq!(est.clipped_count, 0);
        let two = |r: f64| if r == 0.0 { 2.0 } else { 0.0 };
        let est = whittle_logdet(&two, 1.0, 8, 1.0, 1).unwrap();
        assert!((est.value - 8.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn logdet_zero_eigenvalue_without_noise_is_error() {
        let zero = |_: f64| 0.0;
        assert!(whittle_logdet(&zero, 1.0, 4, 0.0, 1).is_err());
        assert!(whittle_logdet(&zero, 1.0, 4, 0.5, 1).is_ok());
        let nan = |_: f64| f64::NAN;
        assert!(whittle_logdet(&nan, 1.0, 4, 0.5, 1).is_err());
    }

    #[test]
    fn se_logdet_within_one_percent_at_m_2000() {
        let k = se(1.0);
        let m = 2000;
        let h = 10.0 / (m - 1) as f64;
        let col: Vec<f64> = (0..m).map(|i| k(i as f64 * h)).collect();
        let exact = dense_logdet(&col, 0.1);
        let approx = whittle_logdet(&k, h, m, 0.1, 1).unwrap().value;
        assert!(((approx - exact) / exact).abs() < 0.01);
    }

    #[test]
    fn window_growth_stabilizes() {
        let k = se(4.0);
        let vals: Vec<f64> = (0..6).map(|w| whittle_logdet(&k, 1.0, 20, 0.1, w).unwrap().value).collect();
        let diffs: Vec<f64> = vals.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
        assert!(diffs[4] < 1e-10 && diffs[4] <= diffs[0]);
    }

    #[test]
    fn thresholding_only_lowers() {
        let c = CirculantOperator::new(vec![1.0, 0.9, 0.0, 0.0, 0.0, 0.9]).unwrap();
        let raw = c.eigenvalues().unwrap();
        let (thr, clipped) = thresholded_spectrum(&c).unwrap();
        assert!(clipped > 0);
        for (t, r) in thr.iter().zip(&raw) {
            assert!(*t <= r.max(0.0));
            assert!(*t >= 0.0);
        }
    }

    #[test]
    fn bccb_logdet_reduces_to_1d() {
        let grid = InducingGrid::new(&[0.0], &[9.0], &[10]).unwrap();
        let k = se(2.0);
        let a = bccb_whittle_logdet(&|d: &[f64]| k(d[0]), &grid, 0.2, 1).unwrap();
        let b = whittle_logdet(&k, 1.0, 10, 0.2, 1).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn bccb_white_noise() {
        let grid = InducingGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 6]).unwrap();
        let s = 2.5;
        let white = |d: &[f64]| if d.iter().all(|&x| x == 0.0) { s } else { 0.0 };
        let est = bccb_whittle_logdet(&white, &grid, 0.0, 1).unwrap();
        assert!((est.value - 30.0 * s.ln()).abs() < 1e-12);
    }

    #[test]
    fn bccb_logdet_close_to_kronecker_on_32x32() {
        let grid = InducingGrid::new(&[0.0, 0.0], &[31.0, 31.0], &[32, 32]).unwrap();
        let (l0, l1) = (1.0, 1.5);
        let k = |d: &[f64]| (-0.5 * ((d[0] / l0).powi(2) + (d[1] / l1).powi(2))).exp();
        let sigma2 = 0.1;
        let approx = bccb_whittle_logdet(&k, &grid, sigma2, 1).unwrap().value;
        // Exact via per-factor eigenvalues of the Kronecker product.
        let eig = |ell: f64| {
            let t = DMatrix::from_fn(32, 32, |i, j| (-0.5 * ((i as f64 - j as f64) / ell).powi(2)).exp());
            t.symmetric_eigen().eigenvalues
        };
        let (e0, e1) = (eig(l0), eig(l1));
        let exact: f64 = e0.iter().flat_map(|a| e1.iter().map(move |b| (a * b + sigma2).ln())).sum();
        assert!(((approx - exact) / exact).abs() < 0.05, "{approx} vs {exact}");
    }

    #[test]
    fn precondition_examples() {
        let id = CirculantOperator::new(vec![1.0, 0.0, 0.0]).unwrap();
        let v = [1.0, -2.0, 3.0];
        let out = precondition(&id, 0.0, &v).unwrap();
        assert!(out.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-14));
        let twos = CirculantOperator::from_eigenvalues(&[2.0, 2.0, 2.0]).unwrap();
        let out = precondition(&twos, 0.0, &[6.0, 0.0, 0.0]).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-14 && out[1].abs() < 1e-14 && out[2].abs() < 1e-14);
        let zero = CirculantOperator::new(vec![0.0, 0.0, 0.0]).unwrap();
        assert!(precondition(&zero, 0.0, &v).is_err());
    }

    #[test]
    fn preconditioner_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let c = CirculantOperator::new(vec![3.0, 1.0, 0.2, 0.2, 1.0]).unwrap();
        let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = precondition(&c, 0.5, &v).unwrap();
        let dense = (c.to_dense() + DMatrix::identity(5, 5) * 0.5).try_inverse().unwrap() * DVector::from_vec(v);
        assert!(out.iter().zip(dense.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
