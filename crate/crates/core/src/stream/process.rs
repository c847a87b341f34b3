//! Noise processes sampled at the trigger times.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Exact Ornstein-Uhlenbeck update over `dt`:
/// x' = x·e^{−dt/τ} + σ·√(1 − e^{−2dt/τ})·N(0, 1).
pub fn ou_step<R: Rng + ?Sized>(current: f64, dt: f64, sigma: f64, tau: f64, rng: &mut R) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("OU correlation time must be > 0, got {tau}")));
    }
    if !(dt >= 0.0) {
        return Err(Error::domain(format!("OU step must be >= 0, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(current);
    }
    let decay = (-dt / tau).exp();
    let n: f64 = rng.sample(StandardNormal);
    Ok(current * decay + sigma * (1.0 - decay * decay).max(0.0).sqrt() * n)
}

/// Two-state Markov chain with stationary probability `occupancy` of the
/// flagged state and correlation rate `rate` (= k_up + k_down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateMarkov {
    pub occupancy: f64,
    pub rate: f64,
}

impl TwoStateMarkov {
    pub fn stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.occupancy
    }

    /// Exact transition over `dt`: P(flagged at t+dt | s) = q + (1{s} − q)·e^{−r dt}.
    pub fn step<R: Rng + ?Sized>(&self, flagged: bool, dt: f64, rng: &mut R) -> bool {
        let relax = (-self.rate * dt).exp();
        let base = if flagged { 1.0 } else { 0.0 };
        let p = self.occupancy + (base - self.occupancy) * relax;
        rng.random::<f64>() < p
    }
}

/// Telegraph line jumps between 0 and `splitting_ghz`; the shifted position
/// is the minority state with long-run fraction `occupancy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelegraphProcess {
    pub chain: TwoStateMarkov,
    pub splitting_ghz: f64,
    pub shifted: bool,
}

impl TelegraphProcess {
    pub fn start<R: Rng + ?Sized>(occupancy: f64, rate_per_ns: f64, splitting_ghz: f64, rng: &mut R) -> Self {
        let chain = TwoStateMarkov { occupancy, rate: rate_per_ns };
        Self { chain, splitting_ghz, shifted: chain.stationary(rng) }
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, dt_ns: f64, rng: &mut R) {
        self.shifted = self.chain.step(self.shifted, dt_ns, rng);
    }

    pub fn value(&self) -> f64 {
        telegraph_state(self.shifted, self.splitting_ghz)
    }
}

/// Line offset for a telegraph state: 0 or the splitting.
pub fn telegraph_state(shifted: bool, splitting_ghz: f64) -> f64 {
    if shifted {
        splitting_ghz
    } else {
        0.0
    }
}

/// Samples a telegraph path at uniformly spaced times.
pub fn telegraph_path<R: Rng + ?Sized>(
    n: usize,
    dt_ns: f64,
    rate_per_ns: f64,
    occupancy: f64,
    splitting_ghz: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&occupancy) {
        return Err(Error::domain("telegraph occupancy must lie in [0, 1]"));
    }
    let mut p = TelegraphProcess::start(occupancy, rate_per_ns, splitting_ghz, rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(p.value());
        p.advance(dt_ns, rng);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ou_zero_step_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(ou_step(1.234, 0.0, 2.0, 5.0, &mut rng).unwrap(), 1.234);
    }

    #[test]
    fn ou_rejects_nonpositive_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(ou_step(0.0, 1.0, 1.0, 0.0, &mut rng).is_err());
        assert!(ou_step(0.0, -1.0, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn ou_long_step_forgets_the_start() {
        // dt ≫ τ: outputs from wildly different starts share the same law.
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let x = ou_step(1e6, 1e4, 2.0, 1.0, &mut a).unwrap();
        let y = ou_step(-1e6, 1e4, 2.0, 1.0, &mut b).unwrap();
        assert!((x - y).abs() < 1e-9);
    }

    #[test]
    fn ou_lag_one_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (sigma, tau, dt) = (1.5, 4.0, 1.0);
        let mut x = 0.0;
        let mut prev = Vec::new();
        let mut next = Vec::new();
        for _ in 0..200_000 {
            let y = ou_step(x, dt, sigma, tau, &mut rng).unwrap();
            prev.push(x);
            next.push(y);
            x = y;
        }
        let c: f64 = prev.iter().zip(&next).map(|(a, b)| a * b).sum::<f64>() / prev.len() as f64;
        let expected = sigma * sigma * (-dt / tau).exp();
        assert!((c - expected).abs() < 0.03 * sigma * sigma, "c = {c}, expected {expected}");
    }

    #[test]
    fn zero_occupancy_never_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = telegraph_path(10_000, 1.0, 0.3, 0.0, 6.19, &mut rng).unwrap();
        assert!(path.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn telegraph_values_are_binary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = telegraph_path(10_000, 1.0, 0.3, 0.4, 6.19, &mut rng).unwrap();
        assert!(path.iter().all(|&v| v == 0.0 || v == 6.19));
        assert!(path.contains(&6.19));
    }
}
