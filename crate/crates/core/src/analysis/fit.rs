use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::voigt::{voigt, voigt_fwhm};
use crate::optics::Spectrum;
use crate::units::GAUSSIAN_FWHM_PER_SIGMA;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LorentzWidth {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub n_peaks: usize,
    pub lorentz: LorentzWidth,
    /// Fit a Gaussian component (common to all peaks).
    pub gaussian: bool,
    /// Lorentzian instrument response, added to the line's Lorentzian width.
    pub instrument_fwhm_ghz: f64,
    pub baseline: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { n_peaks: 1, lorentz: LorentzWidth::Fixed(0.32), gaussian: true, instrument_fwhm_ghz: 0.07, baseline: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoigtFitResult {
    pub n_peaks: usize,
    /// FWHM of one peak without the instrument response.
    pub common_fwhm_ghz: f64,
    pub common_fwhm_err: f64,
    pub gaussian_fwhm_ghz: f64,
    pub lorentz_fwhm_ghz: f64,
    pub lorentz_err: f64,
    /// Majority (larger-area) peak first.
    pub centers_ghz: Vec<f64>,
    pub center_errs: Vec<f64>,
    pub areas: Vec<f64>,
    pub splitting_ghz: Option<f64>,
    pub splitting_err: Option<f64>,
    /// Minority over majority area.
    pub area_ratio: Option<f64>,
    pub area_ratio_err: Option<f64>,
    pub baseline: f64,
    /// χ² per degree of freedom with Poisson weights.
    pub residual_chi2: f64,
    /// Second peak not resolved: splitting or area consistent with zero.
    pub degenerate_splitting: bool,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n_peaks: usize,
    free_l: bool,
    gaussian: bool,
    baseline: bool,
}

impl Layout {
    fn area(&self, j: usize) -> usize {
        2 * j
    }
    fn center(&self, j: usize) -> usize {
        2 * j + 1
    }
    fn gauss(&self) -> Option<usize> {
        self.gaussian.then_some(2 * self.n_peaks)
    }
    fn lorentz(&self) -> Option<usize> {
        self.free_l.then_some(2 * self.n_peaks + usize::from(self.gaussian))
    }
    fn base(&self) -> Option<usize> {
        self.baseline.then_some(2 * self.n_peaks + usize::from(self.gaussian) + usize::from(self.free_l))
    }
    fn len(&self) -> usize {
        2 * self.n_peaks + usize::from(self.gaussian) + usize::from(self.free_l) + usize::from(self.baseline)
    }
}

#[derive(Clone)]
struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
    dx: f64,
    layout: Layout,
    fixed_l: f64,
    instrument: f64,
}

impl Problem<'_> {
    fn widths(&self, p: &[f64]) -> (f64, f64) {
        let g = self.layout.gauss().map(|i| p[i].abs()).unwrap_or(0.0);
        let l = self.layout.lorentz().map(|i| p[i].abs()).unwrap_or(self.fixed_l);
        (g, l)
    }

    fn model(&self, p: &[f64], x: f64) -> f64 {
        let (g, l) = self.widths(p);
        let sigma = g / GAUSSIAN_FWHM_PER_SIGMA;
        let gamma = 0.5 * (l + self.instrument);
        let mut v = self.layout.base().map(|i| p[i]).unwrap_or(0.0);
        for j in 0..self.layout.n_peaks {
            v += p[self.layout.area(j)] * voigt(x - p[self.layout.center(j)], sigma, gamma) * self.dx;
        }
        v
    }

    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.x.iter().zip(self.y).zip(&self.w).map(|((&x, &y), &w)| (y - self.model(p, x)) * w).collect()
    }

    fn chi2(&self, p: &[f64]) -> f64 {
        self.residuals(p).iter().map(|r| r * r).sum()
    }

    fn jacobian(&self, p: &[f64], scales: &[f64]) -> DMatrix<f64> {
        let n = self.x.len();
        let mut j = DMatrix::zeros(n, p.len());
        for k in 0..p.len() {
            let h = 1e-6 * scales[k];
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[k] += h;
            pm[k] -= h;
            let rp = self.residuals(&pp);
            let rm = self.residuals(&pm);
            for i in 0..n {
                // Residuals are (y − f)·w, so ∂f·w = −∂r.
                j[(i, k)] = -(rp[i] - rm[i]) / (2.0 * h);
            }
        }
        j
    }
}

impl CostFunction for Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let c = self.chi2(p);
        Ok(if c.is_finite() { c } else { f64::MAX })
    }
}

fn nelder_mead(problem: &Problem, start: &[f64], steps: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![start.to_vec()];
    for (k, s) in steps.iter().enumerate() {
        let mut v = start.to_vec();
        v[k] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-9).map_err(|e| Error::domain(e.to_string()))?;
    let res = Executor::new(problem.clone(), solver)
        .configure(|s| s.max_iters(4000))
        .run()
        .map_err(|_| Error::Fit { best_chi2: f64::NAN })?;
    let best = res.state().get_best_param().cloned().unwrap_or_else(|| start.to_vec());
    let c = problem.chi2(&best);
    Ok((best, c))
}

/// Levenberg–Marquardt refinement; returns parameters, χ² and (JᵀWJ).
fn levenberg_marquardt(problem: &Problem, start: &[f64], scales: &[f64]) -> (Vec<f64>, f64, DMatrix<f64>) {
    let mut p = start.to_vec();
    let mut chi2 = problem.chi2(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let j = problem.jacobian(&p, scales);
        let r = DVector::from_vec(problem.residuals(&p));
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = problem.chi2(&trial);
            if c.is_finite() && c <= chi2 {
                let rel = (chi2 - c) / chi2.max(1e-300);
                p = trial;
                chi2 = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let j = problem.jacobian(&p, scales);
    (p, chi2, j.transpose() * j)
}

fn covariance(jtj: &DMatrix<f64>, chi2_red: f64) -> DMatrix<f64> {
    let inv = jtj
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| jtj.clone().pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::zeros(jtj.nrows(), jtj.ncols())));
    inv * chi2_red
}

fn estimate_fwhm(x: &[f64], y: &[f64], peak: usize) -> f64 {
    let half = 0.5 * y[peak];
    let mut lo = peak;
    while lo > 0 && y[lo] > half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < y.len() && y[hi] > half {
        hi += 1;
    }
    (x[hi] - x[lo]).max(2.0 * (x[1] - x[0]).abs())
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::MIN), |b, (i, &y)| if y > b.1 { (i, y) } else { b }).0
}

/// Least-squares fit of one or two Voigt peaks with a common width.
///
/// Each peak is a Voigt whose Lorentzian part is the line width plus the
/// instrument width. The fit runs a simplex search from several starts and
/// refines the best one by Levenberg–Marquardt with Poisson weights.
pub fn fit_voigt(spectrum: &Spectrum, opts: &FitOptions) -> Result<VoigtFitResult> {
    let x = &spectrum.freq_ghz;
    let y = &spectrum.counts;
    if x.len() != y.len() {
        return Err(Error::domain("frequency and count columns differ in length"));
    }
    if x.len() < 50 {
        return Err(Error::Statistics(format!("need at least 50 spectrum points, got {}", x.len())));
    }
    if !x.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::domain("frequency axis must be strictly increasing"));
    }
    if !(opts.n_peaks == 1 || opts.n_peaks == 2) {
        return Err(Error::config("fit.n_peaks", "must be 1 or 2"));
    }
    if !(opts.instrument_fwhm_ghz >= 0.0) {
        return Err(Error::config("fit.instrument_fwhm_ghz", "must be >= 0"));
    }
    let fixed_l = match opts.lorentz {
        LorentzWidth::Fixed(l) if l >= 0.0 => l,
        LorentzWidth::Fixed(_) => return Err(Error::config("fit.lorentz", "fixed width must be >= 0")),
        LorentzWidth::Free => 0.0,
    };
    if !opts.gaussian && fixed_l + opts.instrument_fwhm_ghz <= 0.0 && !matches!(opts.lorentz, LorentzWidth::Free) {
        return Err(Error::config("fit", "model has zero width"));
    }
    let total: f64 = y.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptySpectrum);
    }

    let dx = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let w: Vec<f64> = y.iter().map(|&v| 1.0 / v.max(1.0).sqrt()).collect();
    let peak = argmax(y);
    let fwhm0 = estimate_fwhm(x, y, peak);
    let area0 = total;
    let c0 = x[peak];

    let single = Layout {
        n_peaks: 1,
        free_l: matches!(opts.lorentz, LorentzWidth::Free),
        gaussian: opts.gaussian,
        baseline: opts.baseline,
    };
    let problem1 = Problem { x, y, w: w.clone(), dx, layout: single, fixed_l, instrument: opts.instrument_fwhm_ghz };

    let start_for = |layout: &Layout, peaks: &[(f64, f64)], width: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; layout.len()];
        let mut steps = vec![0.0; layout.len()];
        let mut scales = vec![0.0; layout.len()];
        for (j, &(a, c)) in peaks.iter().enumerate() {
            p[layout.area(j)] = a;
            p[layout.center(j)] = c;
            steps[layout.area(j)] = 0.2 * a.abs().max(1.0);
            steps[layout.center(j)] = 0.2 * width;
            scales[layout.area(j)] = area0;
            scales[layout.center(j)] = width;
        }
        let lw = if layout.free_l { 0.5 * width } else { 0.0 };
        if let Some(i) = layout.gauss() {
            let g = (width - lw - fixed_l - opts.instrument_fwhm_ghz).max(0.3 * width);
            p[i] = g;
            steps[i] = 0.2 * g;
            scales[i] = width;
        }
        if let Some(i) = layout.lorentz() {
            p[i] = lw.max(0.05 * width);
            steps[i] = 0.2 * p[i];
            scales[i] = width;
        }
        if let Some(i) = layout.base() {
            let floor = y.iter().cloned().fold(f64::MAX, f64::min).max(0.0);
            p[i] = floor;
            steps[i] = (0.1 * y[peak]).max(1.0);
            scales[i] = y[peak].max(1.0);
        }
        (p, steps, scales)
    };

    let (p1, s1, sc1) = start_for(&single, &[(area0, c0)], fwhm0);
    let (nm1, _) = nelder_mead(&problem1, &p1, &s1)?;
    let (fit1, chi1, jtj1) = levenberg_marquardt(&problem1, &nm1, &sc1);

    let (layout, problem, params, chi2, jtj) = if opts.n_peaks == 1 {
        (single, problem1, fit1, chi1, jtj1)
    } else {
        let double = Layout { n_peaks: 2, ..single };
        let problem2 = Problem { x, y, w, dx, layout: double, fixed_l, instrument: opts.instrument_fwhm_ghz };
        let c1 = fit1[single.center(0)];
        let a1 = fit1[single.area(0)];
        let (g1, l1) = problem1.widths(&fit1);
        let width1 = voigt_fwhm(g1, l1 + opts.instrument_fwhm_ghz).max(fwhm0 * 0.1);
        let resid: Vec<f64> = x.iter().zip(y).map(|(&xi, &yi)| yi - problem1.model(&fit1, xi)).collect();
        let mut seeds = vec![x[argmax(&resid)]];
        for k in [0.5, 1.0, 1.5] {
            seeds.push(c1 - k * width1);
            seeds.push(c1 + k * width1);
        }
        let candidates: Vec<Result<(Vec<f64>, f64)>> = seeds
            .iter()
            .map(|&c2| {
                let (p, s, _) = start_for(&double, &[(0.7 * a1, c1), (0.3 * a1, c2)], 0.8 * width1);
                nelder_mead(&problem2, &p, &s)
            })
            .collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for c in candidates {
            let (p, c) = c?;
            if best.as_ref().is_none_or(|b| c < b.1) {
                best = Some((p, c));
            }
        }
        let (pbest, _) = best.expect("at least one start");
        let (_, _, sc2) = start_for(&double, &[(a1, c1), (a1, c1)], width1);
        let (fit2, chi2, jtj2) = levenberg_marquardt(&problem2, &pbest, &sc2);
        (double, problem2, fit2, chi2, jtj2)
    };

    let dof = (x.len() as f64 - layout.len() as f64).max(1.0);
    let chi2_red = chi2 / dof;
    if !chi2_red.is_finite() || params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit { best_chi2: chi2_red });
    }
    let cov = covariance(&jtj, chi2_red);
    let var = |i: usize| cov[(i, i)].max(0.0);

    let (g, l) = problem.widths(&params);
    let fwhm = voigt_fwhm(g, l);
    let mut grad = vec![0.0; layout.len()];
    if let Some(i) = layout.gauss() {
        let h = 1e-6 * (g + l).max(1e-9);
        grad[i] = (voigt_fwhm(g + h, l) - voigt_fwhm((g - h).max(0.0), l)) / (g + h - (g - h).max(0.0));
    }
    if let Some(i) = layout.lorentz() {
        let h = 1e-6 * (g + l).max(1e-9);
        grad[i] = (voigt_fwhm(g, l + h) - voigt_fwhm(g, (l - h).max(0.0))) / (l + h - (l - h).max(0.0));
    }
    let mut fwhm_var = 0.0;
    for a in 0..grad.len() {
        for b in 0..grad.len() {
            fwhm_var += grad[a] * grad[b] * cov[(a, b)];
        }
    }

    let mut order: Vec<usize> = (0..layout.n_peaks).collect();
    order.sort_by(|&a, &b| params[layout.area(b)].abs().total_cmp(&params[layout.area(a)].abs()));
    let centers: Vec<f64> = order.iter().map(|&j| params[layout.center(j)]).collect();
    let center_errs: Vec<f64> = order.iter().map(|&j| var(layout.center(j)).sqrt()).collect();
    let areas: Vec<f64> = order.iter().map(|&j| params[layout.area(j)]).collect();

    let (splitting, splitting_err, ratio, ratio_err, degenerate) = if layout.n_peaks == 2 {
        let (maj, min) = (order[0], order[1]);
        let (cm, cn) = (layout.center(maj), layout.center(min));
        let (am, an) = (layout.area(maj), layout.area(min));
        let s = (params[cn] - params[cm]).abs();
        let s_err = (cov[(cm, cm)] + cov[(cn, cn)] - 2.0 * cov[(cm, cn)]).max(0.0).sqrt();
        let (a_maj, a_min) = (params[am], params[an]);
        let r = a_min / a_maj;
        let (dmaj, dmin) = (-a_min / (a_maj * a_maj), 1.0 / a_maj);
        let r_var = dmaj * dmaj * cov[(am, am)] + dmin * dmin * cov[(an, an)] + 2.0 * dmaj * dmin * cov[(am, an)];
        let r_err = r_var.max(0.0).sqrt();
        let degenerate = s < 2.0 * s_err || r < 2.0 * r_err || !(r > 0.0);
        if degenerate {
            log::warn!("two-peak fit does not resolve a second peak (splitting {s:.4} ± {s_err:.4} GHz)");
        }
        (Some(s), Some(s_err), Some(r), Some(r_err), degenerate)
    } else {
        (None, None, None, None, false)
    };

    Ok(VoigtFitResult {
        n_peaks: layout.n_peaks,
        common_fwhm_ghz: fwhm,
        common_fwhm_err: fwhm_var.max(0.0).sqrt(),
        gaussian_fwhm_ghz: g,
        lorentz_fwhm_ghz: l,
        lorentz_err: layout.lorentz().map(|i| var(i).sqrt()).unwrap_or(0.0),
        centers_ghz: centers,
        center_errs,
        areas,
        splitting_ghz: splitting,
        splitting_err,
        area_ratio: ratio,
        area_ratio_err: ratio_err,
        baseline: layout.base().map(|i| params[i]).unwrap_or(0.0),
        residual_chi2: chi2_red,
        degenerate_splitting: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn synth(centers: &[(f64, f64)], g: f64, l: f64, instr: f64, range: (f64, f64), n: usize) -> Spectrum {
        let dx = (range.1 - range.0) / (n - 1) as f64;
        let freq: Vec<f64> = (0..n).map(|i| range.0 + i as f64 * dx).collect();
        let sigma = g / GAUSSIAN_FWHM_PER_SIGMA;
        let counts =
            freq.iter().map(|&x| centers.iter().map(|&(a, c)| a * voigt(x - c, sigma, 0.5 * (l + instr)) * dx).sum()).collect();
        Spectrum { freq_ghz: freq, counts }
    }

    #[test]
    fn recovers_pure_lorentzian() {
        let s = synth(&[(1e5, 0.0)], 0.0, 0.8, 0.07, (-6.0, 6.0), 241);
        let opts = FitOptions { lorentz: LorentzWidth::Fixed(0.8), ..Default::default() };
        let r = fit_voigt(&s, &opts).unwrap();
        assert!((r.common_fwhm_ghz - 0.8).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn recovers_free_lorentzian_without_gaussian() {
        let s = synth(&[(1e5, 0.3)], 0.0, 0.77, 0.07, (-6.0, 6.0), 241);
        let opts = FitOptions { lorentz: LorentzWidth::Free, gaussian: false, ..Default::default() };
        let r = fit_voigt(&s, &opts).unwrap();
        assert!((r.lorentz_fwhm_ghz - 0.77).abs() < 1e-6, "{r:?}");
        assert!((r.centers_ghz[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn doublet_generate_and_refit_within_two_sigma() {
        // Gaussian FWHM chosen so the Voigt FWHM with L = 0.32 is 4.94.
        let g = {
            let (mut lo, mut hi) = (3.0, 5.0);
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                if voigt_fwhm(m, 0.32) < 4.94 {
                    lo = m
                } else {
                    hi = m
                }
            }
            0.5 * (lo + hi)
        };
        // Counting noise of about 1% at the peak.
        let clean = synth(&[(5e5, 0.0), (1.95e5, 6.19)], g, 0.32, 0.07, (-15.0, 21.0), 361);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noisy = Spectrum {
            freq_ghz: clean.freq_ghz.clone(),
            counts: clean.counts.iter().map(|&c| c + Normal::new(0.0, c.max(1.0).sqrt()).unwrap().sample(&mut rng)).collect(),
        };
        let r = fit_voigt(&noisy, &FitOptions { n_peaks: 2, ..Default::default() }).unwrap();
        let s = r.splitting_ghz.unwrap();
        let q = r.area_ratio.unwrap();
        assert!((s - 6.19).abs() < 2.0 * r.splitting_err.unwrap().max(1e-3), "{r:?}");
        assert!((q - 0.39).abs() < 2.0 * r.area_ratio_err.unwrap().max(1e-4), "{r:?}");
        assert!((r.common_fwhm_ghz - 4.94).abs() < 2.0 * r.common_fwhm_err.max(1e-3), "{r:?}");
        assert!(!r.degenerate_splitting);
    }

    #[test]
    fn shift_equivariance() {
        let s = synth(&[(5e4, 0.0)], 2.0, 0.32, 0.07, (-10.0, 10.0), 201);
        let shifted = Spectrum { freq_ghz: s.freq_ghz.iter().map(|f| f + 3.25).collect(), counts: s.counts.clone() };
        let a = fit_voigt(&s, &FitOptions::default()).unwrap();
        let b = fit_voigt(&shifted, &FitOptions::default()).unwrap();
        assert!((b.centers_ghz[0] - a.centers_ghz[0] - 3.25).abs() < 1e-6);
        assert!((b.common_fwhm_ghz - a.common_fwhm_ghz).abs() < 1e-6);
    }

    #[test]
    fn rejects_short_spectra_and_bad_options() {
        let s = synth(&[(1e3, 0.0)], 1.0, 0.32, 0.07, (-5.0, 5.0), 20);
        assert!(matches!(fit_voigt(&s, &FitOptions::default()), Err(Error::Statistics(_))));
        let s = synth(&[(1e3, 0.0)], 1.0, 0.32, 0.07, (-5.0, 5.0), 100);
        assert!(fit_voigt(&s, &FitOptions { n_peaks: 3, ..Default::default() }).is_err());
    }

    #[test]
    fn two_peak_fit_on_single_peak_flags_degenerate() {
        let clean = synth(&[(1e5, 0.0)], 4.8, 0.32, 0.07, (-15.0, 15.0), 301);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let noisy = Spectrum {
            freq_ghz: clean.freq_ghz.clone(),
            counts: clean
                .counts
                .iter()
                .map(|&c| (c + Normal::new(0.0, c.max(1.0).sqrt()).unwrap().sample(&mut rng)).max(0.0))
                .collect(),
        };
        let r = fit_voigt(&noisy, &FitOptions { n_peaks: 2, ..Default::default() }).unwrap();
        assert!(r.degenerate_splitting, "{r:?}");
    }
}
