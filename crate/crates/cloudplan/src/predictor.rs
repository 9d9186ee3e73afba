//! One-step-ahead demand prediction with a scalar local-level Kalman filter.
//!
//! The state model is a random walk on the demand level: the forecast for
//! the next interval equals the filtered level, which keeps the per-step
//! cost to a handful of multiplications. The filter seeds itself from the
//! first measurement.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KalmanState {
    x_hat: f64,
    p_cov: f64,
    q: f64,
    r_noise: f64,
    initialized: bool,
    last_gain: Option<f64>,
}

impl KalmanState {
    /// New, uninitialized filter. The first `step` seeds the level with the
    /// measurement and the variance with `r_noise`.
    pub fn new(q: f64, r_noise: f64) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 {
            return Err(Error::Validation(format!(
                "process noise q must be > 0, got {q}"
            )));
        }
        if !r_noise.is_finite() || r_noise <= 0.0 {
            return Err(Error::Validation(format!(
                "measurement noise r must be > 0, got {r_noise}"
            )));
        }
        Ok(KalmanState {
            x_hat: 0.0,
            p_cov: 0.0,
            q,
            r_noise,
            initialized: false,
            last_gain: None,
        })
    }

    /// Resume from a known level and variance (q = 0 is allowed here so the
    /// pure update equations can be exercised).
    pub fn seeded(x_hat: f64, p_cov: f64, q: f64, r_noise: f64) -> Self {
        assert!(q >= 0.0 && r_noise > 0.0 && p_cov >= 0.0);
        KalmanState {
            x_hat,
            p_cov,
            q,
            r_noise,
            initialized: true,
            last_gain: None,
        }
    }

    /// Absorb a measurement and return the one-step-ahead prediction.
    ///
    /// Predict: x⁻ = x̂, P⁻ = P + q. Update: K = P⁻ / (P⁻ + r),
    /// x̂ ← x⁻ + K(z − x⁻), P ← (1 − K)P⁻.
    pub fn step(&mut self, z: f64) -> f64 {
        if !self.initialized {
            self.x_hat = z;
            self.p_cov = self.r_noise;
            self.initialized = true;
            return self.x_hat;
        }
        let prior_cov = self.p_cov + self.q;
        let gain = prior_cov / (prior_cov + self.r_noise);
        self.x_hat += gain * (z - self.x_hat);
        self.p_cov = (1.0 - gain) * prior_cov;
        self.last_gain = Some(gain);
        self.x_hat
    }

    /// Capacity to provision for the next interval:
    /// `ceil(max(level, 0) * headroom)`.
    pub fn predict_capacity(&self, headroom: f64) -> Result<u64> {
        if !self.initialized {
            return Err(Error::Precondition(
                "predictor has seen no measurements".to_string(),
            ));
        }
        let scaled = self.x_hat.max(0.0) * headroom;
        // Don't let float residue (10.0 * 1.1 = 11.000000000000002) push the
        // ceiling one instance too high.
        let nearest = scaled.round();
        let value = if (scaled - nearest).abs() < 1e-9 {
            nearest
        } else {
            scaled.ceil()
        };
        Ok(value as u64)
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn level(&self) -> f64 {
        self.x_hat
    }

    pub fn variance(&self) -> f64 {
        self.p_cov
    }

    /// Gain of the most recent update, absent until the second measurement.
    pub fn last_gain(&self) -> Option<f64> {
        self.last_gain
    }
}

/// Default noise parameters from the opening stretch of a trace:
/// `q = 0.05 * var`, `r = var` over the first 20 samples, with the variance
/// floored so constant traces still yield a valid filter.
pub fn default_noise_params(samples: &[u64]) -> (f64, f64) {
    let head = &samples[..samples.len().min(20)];
    let n = head.len().max(1) as f64;
    let mean = head.iter().map(|&s| s as f64).sum::<f64>() / n;
    let var = head
        .iter()
        .map(|&s| {
            let d = s as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let var = var.max(1e-6);
    (0.05 * var, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_validates_noise_parameters() {
        assert!(KalmanState::new(0.01, 1.0).is_ok());
        assert!(KalmanState::new(0.0, 1.0).is_err());
        assert!(KalmanState::new(1.0, -1.0).is_err());
    }

    #[test]
    fn update_equations_match_hand_arithmetic() {
        // x=0, P=1, q=0, r=1, z=2 -> K=0.5, x'=1.0, P'=0.5.
        let mut kf = KalmanState::seeded(0.0, 1.0, 0.0, 1.0);
        let pred = kf.step(2.0);
        assert_eq!(kf.last_gain(), Some(0.5));
        assert_eq!(pred, 1.0);
        assert_eq!(kf.variance(), 0.5);
    }

    #[test]
    fn constant_input_is_a_fixed_point() {
        let mut kf = KalmanState::new(0.05, 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(kf.step(5.0), 5.0);
        }
    }

    #[test]
    fn constant_input_converges_within_50_steps() {
        let mut kf = KalmanState::new(0.01, 1.0).unwrap();
        let mut prediction = 0.0;
        for _ in 0..50 {
            prediction = kf.step(5.0);
        }
        assert!((prediction - 5.0).abs() < 1e-6);
    }

    #[test]
    fn gain_stays_strictly_inside_unit_interval() {
        let mut kf = KalmanState::new(0.01, 1.0).unwrap();
        kf.step(3.0);
        for i in 0..1000 {
            kf.step((i % 7) as f64);
            let k = kf.last_gain().unwrap();
            assert!(k > 0.0 && k < 1.0, "gain {k} escaped (0,1)");
        }
    }

    #[test]
    fn predicted_variance_converges_to_riccati_fixed_point() {
        // Posterior fixed point: positive root of P^2 + qP - qr = 0. When
        // q/r is tiny the recursion decays harmonically (P ~ r/t) long
        // before it reaches that root, so the strict settle-within-10^4
        // bound is only meaningful away from that corner.
        for q in [1e-6f64, 1e-3, 1.0, 1e3, 1e6] {
            for r in [1e-6f64, 1e-3, 1.0, 1e3, 1e6] {
                // Conjugate form of the positive root, stable for q >> r.
                let p_star = 2.0 * q * r / (q + (q * q + 4.0 * q * r).sqrt());
                let mut kf = KalmanState::new(q, r).unwrap();
                kf.step(0.0);
                let mut prev_prior = kf.variance() + q;
                let mut prev_diff = f64::INFINITY;
                let mut settled = false;
                for _ in 0..10_000 {
                    kf.step(1.0);
                    let prior = kf.variance() + q;
                    let diff = (prior - prev_prior).abs();
                    assert!(
                        diff <= prev_diff + 1e-15,
                        "q={q} r={r}: steps must contract"
                    );
                    if diff < 1e-9 {
                        settled = true;
                        break;
                    }
                    prev_prior = prior;
                    prev_diff = diff;
                }
                if q / r >= 1e-4 {
                    assert!(settled, "q={q} r={r} did not settle within 10^4 steps");
                    assert!(
                        (kf.variance() - p_star).abs() <= 1e-3 * p_star,
                        "q={q} r={r}: variance {} vs fixed point {p_star}",
                        kf.variance()
                    );
                }
            }
        }
    }

    #[test]
    fn predictions_are_shift_equivariant() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let zs: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..100.0)).collect();
        for shift in [1.0, 17.5, 400.0] {
            let mut a = KalmanState::new(0.05, 2.0).unwrap();
            let mut b = KalmanState::new(0.05, 2.0).unwrap();
            for &z in &zs {
                let pa = a.step(z);
                let pb = b.step(z + shift);
                assert!((pb - (pa + shift)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn capacity_prediction_rounds_up_and_clamps() {
        let kf = KalmanState::seeded(11.2, 1.0, 0.01, 1.0);
        assert_eq!(kf.predict_capacity(1.0).unwrap(), 12);

        let kf = KalmanState::seeded(-0.3, 1.0, 0.01, 1.0);
        assert_eq!(kf.predict_capacity(1.0).unwrap(), 0);

        let kf = KalmanState::seeded(10.0, 1.0, 0.01, 1.0);
        assert_eq!(kf.predict_capacity(1.1).unwrap(), 11);
    }

    #[test]
    fn capacity_prediction_requires_initialization() {
        let kf = KalmanState::new(0.01, 1.0).unwrap();
        assert!(matches!(
            kf.predict_capacity(1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn default_params_floor_degenerate_variance() {
        let (q, r) = default_noise_params(&[5; 40]);
        assert!(q > 0.0 && r > 0.0);
        let (q, r) = default_noise_params(&[1, 2, 3, 4, 5, 6]);
        assert!((r - 35.0 / 12.0).abs() < 1e-12);
        assert!((q - 0.05 * r).abs() < 1e-12);
    }
}
