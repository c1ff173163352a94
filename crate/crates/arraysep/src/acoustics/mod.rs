//! Acoustic scene sampling, image-method RIRs, and spatialization.
//!
//! The simulation protocol: rectangular rooms with dimensions drawn from
//! [4x4x3, 6x6x4] m, a 7-microphone circular array (radius 4.25 cm plus a
//! center reference mic) at the room center, sources on a discrete azimuth
//! grid at the array height, source-array distances at least 0.3 m and
//! pairwise distance gaps of at least 0.2 m, and T60 either zero
//! (anechoic) or drawn from [0.15, 0.6] s.

mod rir;
mod scenario;
mod spatialize;

pub use rir::{direct_path_rir, schroeder_t60, simulate_rir, Rir};
pub use scenario::{derive_seed, sample_scenario, SamplerConfig};
pub use spatialize::spatialize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{MultichannelWaveform, SignalError, Waveform};

#[derive(Error, Debug)]
pub enum AcousticsError {
    #[error("scene constraints unsatisfiable after {attempts} attempts (seed {seed})")]
    ConstraintsUnsatisfiable { seed: u64, attempts: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("position outside room: {0}")]
    OutsideRoom(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("azimuth resolution {0} does not divide 360")]
    InvalidResolution(f64),
    #[error("speaker count {0} outside supported range 1..=5")]
    SpeakerCount(usize),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// 3-D point/vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

/// Array radius in meters.
pub const ARRAY_RADIUS: f64 = 0.0425;
/// Height of the array (and of all sources) above the floor, meters.
pub const ARRAY_HEIGHT: f64 = 1.5;
/// Minimum source-array distance, meters.
pub const MIN_SOURCE_DISTANCE: f64 = 0.3;
/// Minimum pairwise gap between source-array distances, meters.
pub const MIN_DISTANCE_GAP: f64 = 0.2;
/// Margin kept between sampled sources and the walls, meters.
pub const WALL_MARGIN: f64 = 0.1;

/// The 7-microphone circular array: one center (reference) microphone and
/// six spaced uniformly on a circle in the horizontal plane around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Mic offsets from the array center; index 0 is the reference mic.
    pub mic_offsets: Vec<Vec3>,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::circular(ARRAY_RADIUS)
    }
}

impl ArrayGeometry {
    /// Center mic plus six on a circle of the given radius.
    pub fn circular(radius: f64) -> Self {
        let mut mic_offsets = vec![Vec3::new(0.0, 0.0, 0.0)];
        for k in 0..6 {
            let phi = k as f64 * 60.0f64.to_radians();
            mic_offsets.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), 0.0));
        }
        Self { mic_offsets }
    }

    pub fn n_mics(&self) -> usize {
        self.mic_offsets.len()
    }

    /// Absolute mic positions for an array centered at `center`.
    pub fn positions(&self, center: Vec3) -> Vec<Vec3> {
        self.mic_offsets.iter().map(|&o| center + o).collect()
    }
}

/// Rectangular (shoebox) room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    /// (length, width, height) in meters.
    pub dims: Vec3,
    /// Reverberation time in seconds; 0 means anechoic.
    pub t60: f64,
    /// Maximum total reflection count for the image expansion.
    pub reflection_order: usize,
}

impl Room {
    pub fn new(dims: Vec3, t60: f64) -> Self {
        // Bound on the total reflection count of any image whose path fits
        // the simulated decay span: a path of length r crosses at most
        // r * ||(1/L, 1/W, 1/H)|| walls (Cauchy-Schwarz), plus slack for
        // lattice discreteness. Anything tighter prunes real images inside
        // the decay window and skews the measured T60.
        let reflection_order = if t60 > 0.0 {
            let span_m = crate::SPEED_OF_SOUND * (t60 + 0.05);
            let inv_norm =
                (1.0 / dims.x.powi(2) + 1.0 / dims.y.powi(2) + 1.0 / dims.z.powi(2)).sqrt();
            (span_m * inv_norm).ceil() as usize + 3
        } else {
            0
        };
        Self {
            dims,
            t60,
            reflection_order,
        }
    }

    pub fn volume(&self) -> f64 {
        self.dims.x * self.dims.y * self.dims.z
    }

    pub fn surface_area(&self) -> f64 {
        2.0 * (self.dims.x * self.dims.y + self.dims.x * self.dims.z + self.dims.y * self.dims.z)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x > 0.0 && p.x < self.dims.x && p.y > 0.0 && p.y < self.dims.y && p.z > 0.0 && p.z < self.dims.z
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(self.dims.x / 2.0, self.dims.y / 2.0, ARRAY_HEIGHT)
    }

    /// Uniform wall reflection coefficient realizing the requested T60.
    ///
    /// The image expansion with a uniform coefficient decays at the Eyring
    /// rate, so the Sabine absorption `0.161 V / (T60 A)` is passed
    /// through the Eyring inversion: `beta = exp(-0.0805 V / (T60 A))`.
    /// A pure Sabine bridge (`beta = sqrt(1 - alpha)`) makes the simulated
    /// decay 25-40% short of the target.
    pub fn reflection_coefficient(&self) -> f64 {
        if self.t60 <= 0.0 {
            return 0.0;
        }
        let exponent = -0.0805 * self.volume() / (self.t60 * self.surface_area());
        exponent.exp().clamp(0.0, 0.999)
    }
}

/// A source position expressed relative to the array center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePlacement {
    /// Azimuth in degrees, in [-180, 180); 0 is the array x-axis, angles
    /// increase counter-clockwise.
    pub azimuth_deg: f64,
    /// Distance from the array center in meters.
    pub distance_m: f64,
}

impl SourcePlacement {
    /// Azimuth mapped to the canonical sorting range [0, 360).
    pub fn azimuth_canonical(&self) -> f64 {
        self.azimuth_deg.rem_euclid(360.0)
    }
}

/// A fully sampled acoustic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub room: Room,
    pub array: ArrayGeometry,
    pub array_center: Vec3,
    pub sources: Vec<SourcePlacement>,
    pub azimuth_resolution_deg: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn n_speakers(&self) -> usize {
        self.sources.len()
    }

    /// Absolute position of source `i` (same height as the array).
    pub fn source_position(&self, i: usize) -> Vec3 {
        let s = &self.sources[i];
        let az = s.azimuth_deg.to_radians();
        self.array_center + Vec3::new(s.distance_m * az.cos(), s.distance_m * az.sin(), 0.0)
    }

    pub fn mic_positions(&self) -> Vec<Vec3> {
        self.array.positions(self.array_center)
    }

    /// Smallest pairwise circular azimuth gap in degrees, or `None` for
    /// fewer than two sources.
    pub fn min_azimuth_gap(&self) -> Option<f64> {
        if self.sources.len() < 2 {
            return None;
        }
        let mut min = f64::INFINITY;
        for i in 0..self.sources.len() {
            for j in i + 1..self.sources.len() {
                let d = crate::criteria::circular_diff(
                    self.sources[i].azimuth_deg,
                    self.sources[j].azimuth_deg,
                );
                min = min.min(d);
            }
        }
        Some(min)
    }
}

/// A spatialized dataset record: 7-channel mixture, per-speaker
/// direct-path targets at the reference mic, and the scene that made it.
#[derive(Debug, Clone)]
pub struct MixtureExample {
    pub mixture: MultichannelWaveform,
    pub targets: Vec<Waveform>,
    pub scenario: Scenario,
    pub utterance_ids: Vec<String>,
}

/// Speaker orderings implied by the scene geometry: ascending azimuth on
/// [0, 360) and ascending distance. Azimuth ties break toward the smaller
/// distance, distance ties toward the smaller canonical azimuth.
pub fn geometry_truth(scenario: &Scenario) -> (Vec<usize>, Vec<usize>) {
    let n = scenario.sources.len();
    let mut by_azimuth: Vec<usize> = (0..n).collect();
    by_azimuth.sort_by(|&a, &b| {
        let sa = &scenario.sources[a];
        let sb = &scenario.sources[b];
        sa.azimuth_canonical()
            .partial_cmp(&sb.azimuth_canonical())
            .unwrap()
            .then(sa.distance_m.partial_cmp(&sb.distance_m).unwrap())
            .then(a.cmp(&b))
    });
    let mut by_distance: Vec<usize> = (0..n).collect();
    by_distance.sort_by(|&a, &b| {
        let sa = &scenario.sources[a];
        let sb = &scenario.sources[b];
        sa.distance_m
            .partial_cmp(&sb.distance_m)
            .unwrap()
            .then(
                sa.azimuth_canonical()
                    .partial_cmp(&sb.azimuth_canonical())
                    .unwrap(),
            )
            .then(a.cmp(&b))
    });
    (by_azimuth, by_distance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario_with(sources: Vec<SourcePlacement>) -> Scenario {
        Scenario {
            room: Room::new(Vec3::new(5.0, 5.0, 3.5), 0.0),
            array: ArrayGeometry::default(),
            array_center: Vec3::new(2.5, 2.5, ARRAY_HEIGHT),
            sources,
            azimuth_resolution_deg: 5.0,
            seed: 0,
        }
    }

    fn src(az: f64, d: f64) -> SourcePlacement {
        SourcePlacement {
            azimuth_deg: az,
            distance_m: d,
        }
    }

    #[test]
    fn array_layout() {
        let g = ArrayGeometry::default();
        assert_eq!(g.n_mics(), 7);
        assert_eq!(g.mic_offsets[0], Vec3::new(0.0, 0.0, 0.0));
        for m in 1..7 {
            assert!((g.mic_offsets[m].norm() - ARRAY_RADIUS).abs() < 1e-12);
            assert_eq!(g.mic_offsets[m].z, 0.0);
        }
        // Uniform spacing: neighbors 60 degrees apart.
        for m in 1..7 {
            let next = if m == 6 { 1 } else { m + 1 };
            let a = g.mic_offsets[m];
            let b = g.mic_offsets[next];
            let cos = a.dot(b) / (a.norm() * b.norm());
            assert!((cos - 60.0f64.to_radians().cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn azimuth_order_wraps_canonically() {
        // 350 degrees sorts after 90 on [0, 360).
        let s = scenario_with(vec![src(90.0, 1.0), src(10.0, 1.0), src(-10.0, 1.0)]);
        let (az, _) = geometry_truth(&s);
        assert_eq!(az, vec![1, 0, 2]);
    }

    #[test]
    fn distance_order_ascending() {
        let s = scenario_with(vec![src(0.0, 2.0), src(90.0, 0.5)]);
        let (_, dist) = geometry_truth(&s);
        assert_eq!(dist, vec![1, 0]);
    }

    #[test]
    fn azimuth_tie_breaks_by_distance() {
        let s = scenario_with(vec![src(45.0, 2.0), src(45.0, 0.6)]);
        let (az, _) = geometry_truth(&s);
        assert_eq!(az, vec![1, 0]);
    }

    #[test]
    fn source_position_matches_polar() {
        let s = scenario_with(vec![src(90.0, 1.0)]);
        let p = s.source_position(0);
        assert!((p.x - 2.5).abs() < 1e-12);
        assert!((p.y - 3.5).abs() < 1e-12);
        assert!((p.z - ARRAY_HEIGHT).abs() < 1e-12);
    }

    #[test]
    fn reflection_coefficient_ranges() {
        let anechoic = Room::new(Vec3::new(5.0, 5.0, 3.5), 0.0);
        assert_eq!(anechoic.reflection_coefficient(), 0.0);
        for t60 in [0.15, 0.3, 0.6] {
            let room = Room::new(Vec3::new(5.0, 5.0, 3.5), t60);
            let beta = room.reflection_coefficient();
            assert!(beta > 0.0 && beta < 0.999);
        }
    }
}
