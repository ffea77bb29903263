//! Linear Kalman filtering and the two trackers built on it: one per lane
//! over `[ρ, θ, ρ̇, θ̇]` and one over the vehicle position `[x, ẋ]`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lane_detect::PolarLine;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KalmanError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
    #[error("position measurement {0} outside [0, 320]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl KalmanState {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>) -> Result<Self, KalmanError> {
        if p.nrows() != x.len() || p.ncols() != x.len() {
            return Err(KalmanError::Dimension(format!(
                "state has {} entries but covariance is {}x{}",
                x.len(),
                p.nrows(),
                p.ncols()
            )));
        }
        Ok(Self { x, p })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl KalmanModel {
    pub fn new(
        f: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self, KalmanError> {
        let n = f.nrows();
        let m = h.nrows();
        let shape = |name: &str, mat: &DMatrix<f64>, rows: usize, cols: usize| {
            if mat.shape() == (rows, cols) {
                Ok(())
            } else {
                Err(KalmanError::Dimension(format!(
                    "{name} is {}x{}, expected {rows}x{cols}",
                    mat.nrows(),
                    mat.ncols()
                )))
            }
        };
        shape("F", &f, n, n)?;
        shape("H", &h, m, n)?;
        shape("Q", &q, n, n)?;
        shape("R", &r, m, m)?;
        Ok(Self { f, h, q, r })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    fn check_state(&self, state: &KalmanState) -> Result<(), KalmanError> {
        if state.dim() != self.state_dim() {
            return Err(KalmanError::Dimension(format!(
                "state has {} entries, model expects {}",
                state.dim(),
                self.state_dim()
            )));
        }
        Ok(())
    }
}

fn symmetrize(p: DMatrix<f64>) -> DMatrix<f64> {
    (&p + p.transpose()) * 0.5
}

/// `x ← F x`, `P ← F P Fᵀ + Q`.
pub fn kf_predict(state: &KalmanState, model: &KalmanModel) -> Result<KalmanState, KalmanError> {
    model.check_state(state)?;
    let x = &model.f * &state.x;
    let p = &model.f * &state.p * model.f.transpose() + &model.q;
    Ok(KalmanState {
        x,
        p: symmetrize(p),
    })
}

/// Measurement update. The gain is obtained from a Cholesky solve of the
/// innovation covariance `S = H P Hᵀ + R` rather than an explicit inverse.
pub fn kf_update(
    state: &KalmanState,
    model: &KalmanModel,
    z: &DVector<f64>,
) -> Result<KalmanState, KalmanError> {
    model.check_state(state)?;
    if z.len() != model.measurement_dim() {
        return Err(KalmanError::Dimension(format!(
            "measurement has {} entries, model expects {}",
            z.len(),
            model.measurement_dim()
        )));
    }
    let h = &model.h;
    let pht = &state.p * h.transpose();
    let s = h * &pht + &model.r;
    let chol = s.cholesky().ok_or(KalmanError::SingularInnovation)?;
    // K = P Hᵀ S⁻¹  ⇔  S Kᵀ = H P
    let gain = chol.solve(&pht.transpose()).transpose();
    let innovation = z - h * &state.x;
    let x = &state.x + &gain * innovation;
    let n = state.dim();
    let p = (DMatrix::identity(n, n) - &gain * h) * &state.p;
    Ok(KalmanState {
        x,
        p: symmetrize(p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneTrackConfig {
    /// Process noise for ρ, θ, ρ̇, θ̇.
    pub q: [f64; 4],
    /// Measurement noise for ρ, θ.
    pub r: [f64; 2],
    pub initial_variance: f64,
    /// Consecutive misses after which the track is dropped.
    pub miss_limit: u32,
}

impl Default for LaneTrackConfig {
    fn default() -> Self {
        Self {
            q: [0.1, 0.01, 0.1, 0.01],
            r: [4.0, 1.0],
            initial_variance: 100.0,
            miss_limit: 8,
        }
    }
}

impl LaneTrackConfig {
    pub fn model(&self) -> KalmanModel {
        #[rustfmt::skip]
        let f = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        #[rustfmt::skip]
        let h = DMatrix::from_row_slice(2, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        ]);
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&self.q));
        let r = DMatrix::from_diagonal(&DVector::from_column_slice(&self.r));
        KalmanModel::new(f, h, q, r).expect("fixed shapes")
    }
}

/// Constant-velocity track of one lane marker in (ρ, θ).
#[derive(Debug, Clone, PartialEq)]
pub struct LaneTrack {
    pub state: KalmanState,
    pub frames_since_measurement: u32,
    model: KalmanModel,
}

impl LaneTrack {
    /// Seeds a track at `initial` with zero rates.
    pub fn new(initial: &PolarLine, config: &LaneTrackConfig) -> Self {
        let x = DVector::from_column_slice(&[initial.rho, initial.theta, 0.0, 0.0]);
        let p = DMatrix::identity(4, 4) * config.initial_variance;
        Self {
            state: KalmanState { x, p },
            frames_since_measurement: 0,
            model: config.model(),
        }
    }

    pub fn estimate(&self) -> PolarLine {
        PolarLine {
            rho: self.state.x[0],
            theta: self.state.x[1],
            votes: 0,
        }
    }

    /// Predicts, then corrects with `measurement` when one is present.
    pub fn step(&mut self, measurement: Option<&PolarLine>) -> PolarLine {
        // shapes are fixed at construction, so the filter cannot fail on
        // dimensions; S = P + R with R > 0 is always positive definite
        let predicted = kf_predict(&self.state, &self.model).expect("lane model shapes");
        self.state = match measurement {
            Some(line) => {
                self.frames_since_measurement = 0;
                let z = DVector::from_column_slice(&[line.rho, line.theta]);
                kf_update(&predicted, &self.model, &z).unwrap_or(predicted)
            }
            None => {
                self.frames_since_measurement += 1;
                predicted
            }
        };
        self.estimate()
    }
}

/// Owns an optional [`LaneTrack`]: seeds on the first detection, coasts on
/// misses and drops the track once `miss_limit` misses accumulate.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneTracker {
    config: LaneTrackConfig,
    track: Option<LaneTrack>,
}

impl LaneTracker {
    pub fn new(config: LaneTrackConfig) -> Self {
        Self {
            config,
            track: None,
        }
    }

    pub fn track(&self) -> Option<&LaneTrack> {
        self.track.as_ref()
    }

    pub fn step(&mut self, measurement: Option<&PolarLine>) -> Option<PolarLine> {
        match (&mut self.track, measurement) {
            (None, None) => None,
            (None, Some(line)) => {
                let mut track = LaneTrack::new(line, &self.config);
                let est = track.step(Some(line));
                self.track = Some(track);
                Some(est)
            }
            (Some(track), m) => {
                let est = track.step(m);
                if track.frames_since_measurement >= self.config.miss_limit {
                    self.track = None;
                    None
                } else {
                    Some(est)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionTrackConfig {
    /// Process noise for x, ẋ.
    pub q: [f64; 2],
    pub r: f64,
    pub initial_variance: f64,
    pub miss_limit: u32,
    /// Upper clamp for estimates (frame width in pixels).
    pub max_x: f64,
}

impl Default for PositionTrackConfig {
    fn default() -> Self {
        Self {
            q: [1.0, 0.1],
            r: 9.0,
            initial_variance: 100.0,
            miss_limit: 8,
            max_x: 320.0,
        }
    }
}

impl PositionTrackConfig {
    pub fn model(&self) -> KalmanModel {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&self.q));
        let r = DMatrix::from_element(1, 1, self.r);
        KalmanModel::new(f, h, q, r).expect("fixed shapes")
    }
}

/// Constant-velocity track of the horizontal vehicle position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionTrack {
    pub state: KalmanState,
    pub frames_since_measurement: u32,
    model: KalmanModel,
    max_x: f64,
}

impl PositionTrack {
    pub fn new(initial_x: f64, config: &PositionTrackConfig) -> Self {
        Self {
            state: KalmanState {
                x: DVector::from_column_slice(&[initial_x, 0.0]),
                p: DMatrix::identity(2, 2) * config.initial_variance,
            },
            frames_since_measurement: 0,
            model: config.model(),
            max_x: config.max_x,
        }
    }

    pub fn estimate(&self) -> f64 {
        self.state.x[0].clamp(0.0, self.max_x)
    }

    pub fn step(&mut self, measurement: Option<f64>) -> Result<f64, KalmanError> {
        if let Some(z) = measurement {
            if !(0.0..=self.max_x).contains(&z) {
                return Err(KalmanError::OutOfRange(z));
            }
        }
        let predicted = kf_predict(&self.state, &self.model)?;
        self.state = match measurement {
            Some(z) => {
                self.frames_since_measurement = 0;
                kf_update(&predicted, &self.model, &DVector::from_element(1, z))?
            }
            None => {
                self.frames_since_measurement += 1;
                predicted
            }
        };
        Ok(self.estimate())
    }
}

/// Position counterpart of [`LaneTracker`].
#[derive(Debug, Clone, PartialEq)]
pub struct PositionTracker {
    config: PositionTrackConfig,
    track: Option<PositionTrack>,
}

impl PositionTracker {
    pub fn new(config: PositionTrackConfig) -> Self {
        Self {
            config,
            track: None,
        }
    }

    pub fn track(&self) -> Option<&PositionTrack> {
        self.track.as_ref()
    }

    pub fn step(&mut self, measurement: Option<f64>) -> Result<Option<f64>, KalmanError> {
        match (&mut self.track, measurement) {
            (None, None) => Ok(None),
            (None, Some(z)) => {
                let mut track = PositionTrack::new(z, &self.config);
                let est = track.step(Some(z))?;
                self.track = Some(track);
                Ok(Some(est))
            }
            (Some(track), m) => {
                let est = track.step(m)?;
                if track.frames_since_measurement >= self.config.miss_limit {
                    self.track = None;
                    Ok(None)
                } else {
                    Ok(Some(est))
                }
            }
        }
    }
}
