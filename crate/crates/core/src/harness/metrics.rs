use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute and relative error norms of one field against a reference.
/// Relative norms are `None` when the reference norm is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub rel_l2: Option<f64>,
    pub rel_linf: Option<f64>,
}

/// `L_inf = max |u - ref|`, `L2 = sqrt(mean (u - ref)^2)` (root mean square);
/// relative forms divide by the same norm of `ref`.
pub fn error_norms(u: &[f64], reference: &[f64]) -> Result<Norms> {
    if u.len() != reference.len() || u.is_empty() {
        return Err(Error::validation(format!(
            "error norms need equal, nonempty grids ({} vs {})",
            u.len(),
            reference.len()
        )));
    }
    let n = u.len() as f64;
    let rms = |xs: &mut dyn Iterator<Item = f64>| (xs.map(|x| x * x).sum::<f64>() / n).sqrt();
    let max = |xs: &mut dyn Iterator<Item = f64>| xs.map(f64::abs).fold(0.0, f64::max);
    let l2 = rms(&mut u.iter().zip(reference).map(|(a, b)| a - b));
    let linf = max(&mut u.iter().zip(reference).map(|(a, b)| a - b));
    let ref_l2 = rms(&mut reference.iter().copied());
    let ref_linf = max(&mut reference.iter().copied());
    let rel = |e: f64, r: f64| (r > 0.0).then(|| e / r);
    Ok(Norms {
        l2,
        linf,
        rel_l2: rel(l2, ref_l2),
        rel_linf: rel(linf, ref_linf),
    })
}

/// Mean, sample standard deviation (`n - 1`) and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub se: f64,
}

impl Stat {
    /// `None` entries are skipped; all-`None` gives NaN.
    pub fn of(xs: impl IntoIterator<Item = Option<f64>>) -> Stat {
        let v: Vec<f64> = xs.into_iter().flatten().collect();
        let (mean, std) = crate::runtime::mean_std(&v);
        let se = if v.is_empty() { f64::NAN } else { std / (v.len() as f64).sqrt() };
        Stat { mean, std, se }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    crate::runtime::fit_affine(&lx, &ly).map(|(_, b)| b)
}
