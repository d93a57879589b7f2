//! Constant-velocity Kalman filter over `[u, v, s, r, u̇, v̇, ṡ]`: box center,
//! area, aspect ratio (w / h) and the velocities of the first three. One
//! predict advances one snapshot.

use nalgebra::{SMatrix, SVector};

use crate::detection::BBox;

pub type State = SVector<f64, 7>;
pub type Covariance = SMatrix<f64, 7, 7>;
pub type Measurement = SVector<f64, 4>;

/// Smallest area a predicted box may take.
pub const MIN_SCALE: f64 = 1e-3;
const MIN_ASPECT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KalmanNoise {
    /// Initial variance of `u, v, s, r`.
    pub init_position_var: f64,
    /// Initial variance of the velocities.
    pub init_velocity_var: f64,
    /// Process noise on every state entry except `ṡ`.
    pub process_var: f64,
    /// Process noise on `ṡ`.
    pub process_scale_rate_var: f64,
    /// Measurement noise on `u, v, s, r`.
    pub measurement_var: [f64; 4],
}

impl Default for KalmanNoise {
    fn default() -> Self {
        Self {
            init_position_var: 10.0,
            init_velocity_var: 1000.0,
            process_var: 1e-2,
            process_scale_rate_var: 1e-4,
            measurement_var: [1.0, 1.0, 10.0, 1e-2],
        }
    }
}

impl KalmanNoise {
    pub fn process(&self) -> Covariance {
        let mut q = Covariance::identity() * self.process_var;
        q[(6, 6)] = self.process_scale_rate_var;
        q
    }

    pub fn measurement(&self) -> SMatrix<f64, 4, 4> {
        SMatrix::<f64, 4, 4>::from_diagonal(&Measurement::from(self.measurement_var))
    }

    pub fn initial_covariance(&self) -> Covariance {
        let mut p = Covariance::zeros();
        for i in 0..4 {
            p[(i, i)] = self.init_position_var;
        }
        for i in 4..7 {
            p[(i, i)] = self.init_velocity_var;
        }
        p
    }

    pub fn is_valid(&self) -> bool {
        let all = [
            self.init_position_var,
            self.init_velocity_var,
            self.process_var,
            self.process_scale_rate_var,
        ];
        all.iter().chain(&self.measurement_var).all(|v| v.is_finite() && *v >= 0.0)
            && self.measurement_var.iter().all(|v| *v > 0.0)
    }
}

pub fn transition() -> Covariance {
    let mut f = Covariance::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

pub fn observation() -> SMatrix<f64, 4, 7> {
    let mut h = SMatrix::<f64, 4, 7>::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

/// `[u, v, s, r]` of a box.
pub fn bbox_to_measurement(b: &BBox) -> Measurement {
    let (u, v) = b.center();
    let (w, h) = (b.width(), b.height());
    Measurement::new(u, v, w * h, w / h)
}

/// Box from `(u, v, s, r)`: `w = √(s r)`, `h = √(s / r)`.
pub fn state_to_bbox(x: &State) -> BBox {
    let s = x[2].max(MIN_SCALE);
    let r = x[3].max(MIN_ASPECT);
    let w = (s * r).sqrt();
    let h = (s / r).sqrt();
    BBox::new(x[0] - w / 2.0, x[1] - h / 2.0, x[0] + w / 2.0, x[1] + h / 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanFilter {
    pub x: State,
    pub p: Covariance,
    noise: KalmanNoise,
}

impl KalmanFilter {
    /// Starts at `z` with zero velocity.
    pub fn new(z: &Measurement, noise: KalmanNoise) -> Self {
        let mut x = State::zeros();
        x.fixed_rows_mut::<4>(0).copy_from(z);
        Self {
            x,
            p: noise.initial_covariance(),
            noise,
        }
    }

    pub fn noise(&self) -> &KalmanNoise {
        &self.noise
    }

    /// Constant-velocity step, `P ← F P Fᵀ + Q`. A non-positive predicted
    /// area is clamped to [`MIN_SCALE`] and its rate zeroed.
    pub fn predict(&mut self) -> BBox {
        let f = transition();
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + self.noise.process();
        if self.x[2] <= 0.0 {
            self.x[2] = MIN_SCALE;
            self.x[6] = 0.0;
        }
        symmetrize(&mut self.p);
        self.bbox()
    }

    /// Standard Kalman correction. Returns `false` (and leaves the filter
    /// unchanged) for a non-finite measurement or a singular innovation.
    pub fn update(&mut self, z: &Measurement) -> bool {
        if z.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let h = observation();
        let innovation = z - h * self.x;
        let s = h * self.p * h.transpose() + self.noise.measurement();
        let Some(s_inv) = s.try_inverse() else {
            return false;
        };
        let gain = self.p * h.transpose() * s_inv;
        self.x += gain * innovation;
        self.p = (Covariance::identity() - gain * h) * self.p;
        symmetrize(&mut self.p);
        true
    }

    pub fn bbox(&self) -> BBox {
        state_to_bbox(&self.x)
    }
}

fn symmetrize(p: &mut Covariance) {
    *p = (*p + p.transpose()) * 0.5;
}

/// Largest `|P - Pᵀ|` entry.
pub fn asymmetry(p: &Covariance) -> f64 {
    (p - p.transpose()).abs().max()
}
