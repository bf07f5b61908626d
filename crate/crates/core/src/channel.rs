//! Deterministic single-bounce channel model.
//!
//! The effective channel between every transmit/receive antenna pair is the
//! coherent sum of these rays:
//!
//! * Tx -> Rx (direct, attenuated by blockers)
//! * Tx -> RIS element -> Rx
//! * Tx -> person -> Rx
//! * Tx -> person -> RIS element -> Rx
//! * Tx -> RIS element -> person -> Rx
//!
//! Every hop uses the free-space response `lambda / (4 pi d) * exp(-j 2 pi d / lambda)`.
//! Each hop is also attenuated by the penetration loss of every blocker it
//! crosses and by a fixed shadowing loss for every person (other than the
//! scatterer itself) whose body circle it passes through.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codebook::{RisConfiguration, RisPanel};
use crate::error::{invalid, io_err, Result};
use crate::geometry::{polygon_contains, Point2, Point3, Segment2};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise density at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    pub subcarrier_count: usize,
    pub subcarrier_spacing: f64,
    pub transmit_power_dbm: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    /// Replaces the thermal floor with a fixed per-subcarrier noise power (mW).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_power_override_mw: Option<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 5.6e9,
            bandwidth: 20e6,
            subcarrier_count: 52,
            subcarrier_spacing: 312.5e3,
            transmit_power_dbm: 20.0,
            tx_antennas: 1,
            rx_antennas: 1,
            noise_power_override_mw: None,
        }
    }
}

impl RadioConfig {
    /// Single-antenna Tx and Rx.
    pub fn simulation(transmit_power_dbm: f64) -> Self {
        Self {
            transmit_power_dbm,
            ..Self::default()
        }
    }

    /// Single-antenna Tx, dual-antenna Rx at 10 dBm.
    pub fn experiment() -> Self {
        Self {
            transmit_power_dbm: 10.0,
            rx_antennas: 2,
            ..Self::default()
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn antenna_pairs(&self) -> usize {
        self.tx_antennas * self.rx_antennas
    }

    /// Subcarrier centre frequencies, symmetric about the carrier. An even
    /// count skips the DC bin.
    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        let k = self.subcarrier_count as i64;
        let indices: Vec<i64> = if k % 2 == 0 {
            (-k / 2..0).chain(1..=k / 2).collect()
        } else {
            (-(k - 1) / 2..=(k - 1) / 2).collect()
        };
        indices
            .into_iter()
            .map(|i| self.carrier_frequency + i as f64 * self.subcarrier_spacing)
            .collect()
    }

    pub fn transmit_power_mw(&self) -> f64 {
        10f64.powf(self.transmit_power_dbm / 10.0)
    }

    /// Per-subcarrier noise power in mW.
    pub fn noise_power_mw(&self) -> f64 {
        if let Some(p) = self.noise_power_override_mw {
            return p;
        }
        let per_bin_hz = self.bandwidth / self.subcarrier_count as f64;
        10f64.powf((THERMAL_NOISE_DBM_PER_HZ + 10.0 * per_bin_hz.log10()) / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarrier_count == 0 {
            return invalid("subcarrier count must be at least 1");
        }
        if !(self.bandwidth > 0.0 && self.carrier_frequency > 0.0 && self.subcarrier_spacing > 0.0)
        {
            return invalid("bandwidth, carrier and subcarrier spacing must be positive");
        }
        if self.subcarrier_count as f64 * self.subcarrier_spacing > self.bandwidth * (1.0 + 1e-12) {
            return invalid("subcarriers do not fit in the bandwidth");
        }
        if self.antenna_pairs() == 0 {
            return invalid("need at least one antenna pair");
        }
        if !self.transmit_power_dbm.is_finite() {
            return invalid("transmit power must be finite");
        }
        if let Some(p) = self.noise_power_override_mw {
            if !(p >= 0.0 && p.is_finite()) {
                return invalid("noise power override must be finite and non-negative");
            }
        }
        Ok(())
    }
}

/// A wall segment with a penetration loss; an infinite loss is a hard block
/// and is written as `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blocker {
    pub segment: Segment2,
    #[serde(with = "loss_db")]
    pub penetration_loss_db: f64,
}

mod loss_db {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonModel {
    pub scatter_gain: f64,
    pub body_radius: f64,
    pub height: f64,
    pub shadow_loss_db: f64,
}

impl PersonModel {
    /// Person whose point-scatter strength matches a radar cross section of
    /// `rcs_m2`. Under the per-hop free-space factors a scatter gain `g` is an
    /// isotropic re-radiator with cross section `g^2 lambda^2 / (4 pi)`.
    pub fn with_cross_section(rcs_m2: f64, wavelength: f64) -> Self {
        Self {
            scatter_gain: (4.0 * PI * rcs_m2).sqrt() / wavelength,
            ..Self::default()
        }
    }

    /// Adult body, 1 m^2 cross section.
    pub fn human(wavelength: f64) -> Self {
        Self::with_cross_section(1.0, wavelength)
    }
}

impl Default for PersonModel {
    fn default() -> Self {
        Self {
            scatter_gain: 0.5,
            body_radius: 0.25,
            height: 1.0,
            shadow_loss_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room_polygon: Vec<Point2>,
    pub blockers: Vec<Blocker>,
    pub tx_positions: Vec<Point3>,
    pub rx_positions: Vec<Point3>,
    pub ris_panel: RisPanel,
    pub reference_points: Vec<Point2>,
    pub person_model: PersonModel,
}

/// Rectangular reference grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Lower-left reference point.
    pub origin: Point2,
    pub columns: usize,
    pub rows: usize,
    pub spacing: f64,
}

impl GridSpec {
    /// 2x2 points, 1 m apart.
    pub fn experiment() -> Self {
        Self {
            origin: Point2::new(1.0, 2.0),
            columns: 2,
            rows: 2,
            spacing: 1.0,
        }
    }

    /// 4x4 points, 0.5 m apart, covering the same area of interest.
    pub fn simulation() -> Self {
        Self {
            origin: Point2::new(1.25, 0.75),
            columns: 4,
            rows: 4,
            spacing: 0.5,
        }
    }

    pub fn points(&self) -> Vec<Point2> {
        let mut pts = Vec::with_capacity(self.columns * self.rows);
        for row in 0..self.rows {
            for col in 0..self.columns {
                pts.push(Point2::new(
                    self.origin.x + col as f64 * self.spacing,
                    self.origin.y + row as f64 * self.spacing,
                ));
            }
        }
        pts
    }
}

impl Scene {
    /// 6x6 m L-shaped room with the upper-left 3x3 m quadrant cut away.
    ///
    /// The transmitter sits in the upper-right arm facing a 10x10
    /// half-wavelength RIS on the bottom wall; the receiver and the area of
    /// interest sit in the lower-left arm, so the re-entrant corner walls
    /// block the direct path.
    pub fn l_shaped(radio: &RadioConfig, grid: GridSpec) -> Result<Self> {
        let wavelength = radio.wavelength();
        let panel = RisPanel::half_wavelength_grid(
            Point3::new(4.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 0.0),
            wavelength,
        )?;
        let corner = Point2::new(3.0, 3.0);
        let blockers = vec![
            Blocker {
                segment: Segment2::new(Point2::new(0.0, 3.0), corner),
                penetration_loss_db: 40.0,
            },
            Blocker {
                segment: Segment2::new(corner, Point2::new(3.0, 6.0)),
                penetration_loss_db: 40.0,
            },
        ];
        let spacing = wavelength / 2.0;
        let tx_positions = (0..radio.tx_antennas)
            .map(|i| Point3::new(4.0 + i as f64 * spacing, 5.0, 1.0))
            .collect();
        let rx_positions = (0..radio.rx_antennas)
            .map(|i| Point3::new(0.5, 2.5 - i as f64 * spacing, 1.0))
            .collect();
        let scene = Self {
            room_polygon: vec![
                Point2::new(0.0, 0.0),
                Point2::new(6.0, 0.0),
                Point2::new(6.0, 6.0),
                Point2::new(3.0, 6.0),
                corner,
                Point2::new(0.0, 3.0),
            ],
            blockers,
            tx_positions,
            rx_positions,
            ris_panel: panel,
            reference_points: grid.points(),
            person_model: PersonModel::human(wavelength),
        };
        scene.validate()?;
        Ok(scene)
    }

    /// 5x5 m room for the small 2x2 grid. The transmitter stands 1 m in front
    /// of the RIS (normal incidence) behind a whiteboard that hides it from
    /// the receiver and from every reference point, so people are only seen
    /// through the RIS.
    pub fn whiteboard_room(radio: &RadioConfig, grid: GridSpec) -> Result<Self> {
        let wavelength = radio.wavelength();
        let ris = Point3::new(3.0, 0.0, 1.0);
        let panel = RisPanel::half_wavelength_grid(ris, Point3::new(0.0, 1.0, 0.0), wavelength)?;
        let spacing = wavelength / 2.0;
        let scene = Self {
            room_polygon: vec![
                Point2::new(0.0, 0.0),
                Point2::new(5.0, 0.0),
                Point2::new(5.0, 5.0),
                Point2::new(0.0, 5.0),
            ],
            blockers: vec![Blocker {
                segment: Segment2::new(Point2::new(2.6, 1.05), Point2::new(2.6, 2.2)),
                penetration_loss_db: 40.0,
            }],
            tx_positions: (0..radio.tx_antennas)
                .map(|i| Point3::new(3.0 + i as f64 * spacing, 1.0, 1.0))
                .collect(),
            rx_positions: (0..radio.rx_antennas)
                .map(|i| Point3::new(1.5, 3.75 - i as f64 * spacing, 1.0))
                .collect(),
            ris_panel: panel,
            reference_points: grid.points(),
            person_model: PersonModel::human(wavelength),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn reference_count(&self) -> usize {
        self.reference_points.len()
    }

    pub fn contains(&self, p: Point2) -> bool {
        polygon_contains(&self.room_polygon, p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.room_polygon.len() < 3 {
            return invalid("room polygon needs at least three vertices");
        }
        self.ris_panel.validate()?;
        if self.tx_positions.is_empty() || self.rx_positions.is_empty() {
            return invalid("scene needs at least one tx and one rx antenna");
        }
        for p in self.tx_positions.iter().chain(&self.rx_positions) {
            if !self.contains(p.xy()) {
                return invalid(format!("antenna at ({}, {}) outside the room", p.x, p.y));
            }
        }
        for (i, p) in self.reference_points.iter().enumerate() {
            if !p.is_finite() || !self.contains(*p) {
                return invalid(format!("reference point {i} outside the room"));
            }
            if self.reference_points[..i].iter().any(|q| q == p) {
                return invalid(format!("reference point {i} duplicates an earlier one"));
            }
        }
        for b in &self.blockers {
            if !(b.penetration_loss_db >= 0.0) {
                return invalid("blocker loss must be non-negative");
            }
        }
        let pm = &self.person_model;
        if !(pm.body_radius >= 0.0 && pm.height.is_finite() && pm.shadow_loss_db >= 0.0) {
            return invalid("invalid person model");
        }
        Ok(())
    }

    pub fn check_radio(&self, radio: &RadioConfig) -> Result<()> {
        radio.validate()?;
        if radio.tx_antennas != self.tx_positions.len() || radio.rx_antennas != self.rx_positions.len()
        {
            return invalid(format!(
                "radio has {}x{} antennas, scene places {}x{}",
                radio.tx_antennas,
                radio.rx_antennas,
                self.tx_positions.len(),
                self.rx_positions.len()
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let scene: Self = serde_json::from_str(&text)?;
        scene.validate()?;
        Ok(scene)
    }
}

/// Complex CSI `H[p][k]`, stored antenna-pair major.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub subcarriers: usize,
    pub antenna_pairs: usize,
    pub values: Vec<Complex64>,
}

impl EffectiveChannel {
    pub fn zeros(subcarriers: usize, antenna_pairs: usize) -> Self {
        Self {
            subcarriers,
            antenna_pairs,
            values: vec![Complex64::new(0.0, 0.0); subcarriers * antenna_pairs],
        }
    }

    pub fn get(&self, k: usize, p: usize) -> Complex64 {
        self.values[p * self.subcarriers + k]
    }

    pub fn pair(&self, p: usize) -> &[Complex64] {
        &self.values[p * self.subcarriers..(p + 1) * self.subcarriers]
    }
}

/// One amplitude-only CSI measurement for a single beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiSample {
    pub case_id: usize,
    pub beam_index: usize,
    pub repetition: usize,
    pub noise_seed: u64,
    /// `amplitudes[p][k]`.
    pub amplitudes: Vec<Vec<f64>>,
}

/// Free-space response of one hop.
pub fn path_response(a: Point3, b: Point3, frequency: f64) -> Result<Complex64> {
    let d = a.distance(b);
    if !(d.is_finite() && frequency.is_finite()) {
        return invalid("path response inputs must be finite");
    }
    if d == 0.0 {
        return invalid("path endpoints coincide");
    }
    if frequency <= 0.0 {
        return invalid("frequency must be positive");
    }
    let wavelength = SPEED_OF_LIGHT / frequency;
    Ok(Complex64::from_polar(
        wavelength / (4.0 * PI * d),
        -TAU * d / wavelength,
    ))
}

/// Blockers crossed by the 2D projection of `a -> b`, and their summed loss.
pub fn is_blocked(a: Point3, b: Point3, scene: &Scene) -> (bool, f64) {
    let seg = Segment2::new(a.xy(), b.xy());
    let mut blocked = false;
    let mut loss = 0.0;
    for blocker in &scene.blockers {
        if seg.intersects(&blocker.segment) {
            blocked = true;
            loss += blocker.penetration_loss_db;
        }
    }
    (blocked, loss)
}

fn db_to_amplitude(loss_db: f64) -> f64 {
    if loss_db.is_infinite() {
        0.0
    } else {
        10f64.powf(-loss_db / 20.0)
    }
}

/// A frequency-independent description of one multi-hop ray. Its response at
/// wavelength `l` is `coef * (l / 4pi)^hops * exp(-j 2pi length / l)`.
#[derive(Debug, Clone, Copy)]
struct Ray {
    coef: Complex64,
    hops: i32,
    length: f64,
}

/// Subcarrier grid shared by every ray. RIS rays, the bulk of the work,
/// advance their phase by a fixed rotation per subcarrier step instead of one
/// `sin`/`cos` pair per subcarrier, resynchronising every `RESYNC`-th
/// subcarrier. Rays that bypass the RIS are evaluated directly.
struct Band {
    wavelengths: Vec<f64>,
    /// Position of each subcarrier on the uniform grid (DC gap included).
    steps: Vec<i64>,
    spacing: f64,
    /// `(lambda / 4pi)^h` per subcarrier, indexed by hop count `h`.
    spreading: Vec<Vec<f64>>,
}

const RESYNC: usize = 8;

impl Band {
    fn new(radio: &RadioConfig, max_hops: usize) -> Self {
        let frequencies = radio.subcarrier_frequencies();
        let wavelengths: Vec<f64> = frequencies.iter().map(|f| SPEED_OF_LIGHT / f).collect();
        let steps = frequencies
            .iter()
            .map(|f| ((f - frequencies[0]) / radio.subcarrier_spacing).round() as i64)
            .collect();
        let spreading = (0..=max_hops as i32)
            .map(|h| wavelengths.iter().map(|l| (l / (4.0 * PI)).powi(h)).collect())
            .collect();
        Self {
            wavelengths,
            steps,
            spacing: radio.subcarrier_spacing,
            spreading,
        }
    }

    fn len(&self) -> usize {
        self.wavelengths.len()
    }

    fn accumulate_exact(&self, rays: &[Ray], out: &mut [Complex64]) {
        for ray in rays {
            let spread = &self.spreading[ray.hops as usize];
            for (k, slot) in out.iter_mut().enumerate() {
                *slot += ray.coef * spread[k] * Complex64::from_polar(1.0, -TAU * ray.length / self.wavelengths[k]);
            }
        }
    }

    fn accumulate(&self, rays: &[Ray], out: &mut [Complex64]) {
        for ray in rays {
            let spread = &self.spreading[ray.hops as usize];
            let rot = Complex64::from_polar(1.0, -TAU * ray.length * self.spacing / SPEED_OF_LIGHT);
            let rot2 = rot * rot;
            let mut phasor = Complex64::new(1.0, 0.0);
            for (k, slot) in out.iter_mut().enumerate() {
                if k % RESYNC == 0 {
                    phasor = Complex64::from_polar(1.0, -TAU * ray.length / self.wavelengths[k]);
                } else {
                    for _ in 0..(self.steps[k] - self.steps[k - 1]) / 2 {
                        phasor *= rot2;
                    }
                    if (self.steps[k] - self.steps[k - 1]) % 2 == 1 {
                        phasor *= rot;
                    }
                }
                *slot += ray.coef * spread[k] * phasor;
            }
        }
    }
}

struct Tracer<'a> {
    scene: &'a Scene,
    people: Vec<Point3>,
    shadow: f64,
}

impl<'a> Tracer<'a> {
    fn new(scene: &'a Scene, people: &[Point2]) -> Self {
        let h = scene.person_model.height;
        Self {
            scene,
            people: people.iter().map(|p| p.at_height(h)).collect(),
            shadow: db_to_amplitude(scene.person_model.shadow_loss_db),
        }
    }

    /// Amplitude factor and length of one hop; `scatterer` is excluded from shadowing.
    fn hop(&self, a: Point3, b: Point3, scatterer: Option<usize>) -> Result<(f64, f64)> {
        let d = a.distance(b);
        if d == 0.0 {
            return invalid("path endpoints coincide");
        }
        let (_, loss) = is_blocked(a, b, self.scene);
        let seg = Segment2::new(a.xy(), b.xy());
        let radius = self.scene.person_model.body_radius;
        let obstructions = self
            .people
            .iter()
            .enumerate()
            .filter(|&(i, q)| Some(i) != scatterer && seg.distance_to(q.xy()) < radius)
            .count();
        let factor = db_to_amplitude(loss) * self.shadow.powi(obstructions as i32) / d;
        Ok((factor, d))
    }

    fn ray(&self, coef: Complex64, hops: &[(Point3, Point3, Option<usize>)]) -> Result<Ray> {
        let mut mag = 1.0;
        let mut length = 0.0;
        for &(a, b, s) in hops {
            let (f, d) = self.hop(a, b, s)?;
            mag *= f;
            length += d;
        }
        Ok(Ray {
            coef: coef * mag,
            hops: hops.len() as i32,
            length,
        })
    }

    /// `(bypass, via_ris)` rays for one antenna pair.
    fn rays(&self, tx: Point3, rx: Point3, config: &RisConfiguration) -> Result<(Vec<Ray>, Vec<Ray>)> {
        let gain = Complex64::new(self.scene.person_model.scatter_gain, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut bypass = vec![self.ray(one, &[(tx, rx, None)])?];
        for (i, &q) in self.people.iter().enumerate() {
            bypass.push(self.ray(gain, &[(tx, q, Some(i)), (q, rx, Some(i))])?);
        }
        let mut via = Vec::new();
        for (n, &e) in self.scene.ris_panel.element_positions.iter().enumerate() {
            let theta = config.coefficient(n);
            if theta == Complex64::new(0.0, 0.0) {
                continue;
            }
            via.push(self.ray(theta, &[(tx, e, None), (e, rx, None)])?);
            for (i, &q) in self.people.iter().enumerate() {
                let s = Some(i);
                via.push(self.ray(theta * gain, &[(tx, q, s), (q, e, s), (e, rx, None)])?);
                via.push(self.ray(theta * gain, &[(tx, e, None), (e, q, s), (q, rx, s)])?);
            }
        }
        Ok((bypass, via))
    }
}

fn check_people(scene: &Scene, people: &[Point2]) -> Result<()> {
    for p in people {
        if !p.is_finite() || !scene.contains(*p) {
            return invalid(format!("person at ({}, {}) outside the room", p.x, p.y));
        }
    }
    Ok(())
}

/// Noise-free effective channel for one RIS state and set of people.
pub fn scene_channel(
    scene: &Scene,
    radio: &RadioConfig,
    config: &RisConfiguration,
    people: &[Point2],
) -> Result<EffectiveChannel> {
    if scene.ris_panel.element_count() == 0 {
        return invalid("RIS panel has no elements");
    }
    scene.check_radio(radio)?;
    config.validate(scene.ris_panel.element_count())?;
    check_people(scene, people)?;
    let tracer = Tracer::new(scene, people);
    let band = Band::new(radio, 3);
    let kk = band.len();
    let mut out = EffectiveChannel::zeros(kk, radio.antenna_pairs());
    for (t, &tx) in scene.tx_positions.iter().enumerate() {
        for (r, &rx) in scene.rx_positions.iter().enumerate() {
            let p = t * scene.rx_positions.len() + r;
            let (bypass, via) = tracer.rays(tx, rx, config)?;
            let dst = &mut out.values[p * kk..(p + 1) * kk];
            band.accumulate_exact(&bypass, dst);
            band.accumulate(&via, dst);
        }
    }
    Ok(out)
}

/// Applies transmit power, a unit pilot and complex AWGN, keeping amplitudes only.
pub fn add_noise(channel: &EffectiveChannel, radio: &RadioConfig, seed: u64) -> CsiSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = radio.transmit_power_mw().sqrt();
    let sigma = (radio.noise_power_mw() / 2.0).sqrt();
    let amplitudes = (0..channel.antenna_pairs)
        .map(|p| {
            channel
                .pair(p)
                .iter()
                .map(|h| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    (h * amp + Complex64::new(sigma * re, sigma * im)).norm()
                })
                .collect()
        })
        .collect();
    CsiSample {
        case_id: 0,
        beam_index: 0,
        repetition: 0,
        noise_seed: seed,
        amplitudes,
    }
}

/// Precomputed per-element responses for people standing on reference points.
///
/// For a fixed set of occupied reference points the channel is
/// `H = D + sum_n theta_n * E_n`, where neither `D` nor `E_n` depends on the
/// RIS state; sweeping a codebook then costs one weighted sum per beam.
pub struct GridChannel<'a> {
    scene: &'a Scene,
    radio: &'a RadioConfig,
    band: Band,
}

/// Beam-independent channel terms for one placement.
pub struct PlacementTerms {
    subcarriers: usize,
    antenna_pairs: usize,
    elements: usize,
    /// `D[p][k]` including person scatter that bypasses the RIS.
    direct: Vec<Complex64>,
    /// `E[p][n][k]`.
    per_element: Vec<Complex64>,
}

impl<'a> GridChannel<'a> {
    pub fn new(scene: &'a Scene, radio: &'a RadioConfig) -> Result<Self> {
        scene.validate()?;
        scene.check_radio(radio)?;
        Ok(Self {
            scene,
            radio,
            band: Band::new(radio, 3),
        })
    }

    pub fn placement(&self, occupied: &[usize]) -> Result<PlacementTerms> {
        let people = occupied
            .iter()
            .map(|&i| {
                self.scene
                    .reference_points
                    .get(i)
                    .copied()
                    .ok_or_else(|| crate::Error::InvalidArgument(format!("no reference point {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let tracer = Tracer::new(self.scene, &people);
        let kk = self.band.len();
        let m = self.scene.ris_panel.element_count();
        let pairs = self.radio.antenna_pairs();
        let zero = Complex64::new(0.0, 0.0);
        let mut direct = vec![zero; pairs * kk];
        let mut per_element = vec![zero; pairs * m * kk];
        let gain = Complex64::new(self.scene.person_model.scatter_gain, 0.0);
        let one = Complex64::new(1.0, 0.0);
        for (t, &tx) in self.scene.tx_positions.iter().enumerate() {
            for (r, &rx) in self.scene.rx_positions.iter().enumerate() {
                let p = t * self.scene.rx_positions.len() + r;
                let mut bypass = vec![tracer.ray(one, &[(tx, rx, None)])?];
                for (i, &q) in tracer.people.iter().enumerate() {
                    bypass.push(tracer.ray(gain, &[(tx, q, Some(i)), (q, rx, Some(i))])?);
                }
                self.band.accumulate_exact(&bypass, &mut direct[p * kk..(p + 1) * kk]);
                for (n, &e) in self.scene.ris_panel.element_positions.iter().enumerate() {
                    let mut rays = vec![tracer.ray(one, &[(tx, e, None), (e, rx, None)])?];
                    for (i, &q) in tracer.people.iter().enumerate() {
                        let s = Some(i);
                        rays.push(tracer.ray(gain, &[(tx, q, s), (q, e, s), (e, rx, None)])?);
                        rays.push(tracer.ray(gain, &[(tx, e, None), (e, q, s), (q, rx, s)])?);
                    }
                    let off = (p * m + n) * kk;
                    self.band.accumulate(&rays, &mut per_element[off..off + kk]);
                }
            }
        }
        Ok(PlacementTerms {
            subcarriers: kk,
            antenna_pairs: pairs,
            elements: m,
            direct,
            per_element,
        })
    }
}

impl PlacementTerms {
    pub fn channel(&self, config: &RisConfiguration) -> Result<EffectiveChannel> {
        config.validate(self.elements)?;
        let kk = self.subcarriers;
        let coefs = config.coefficients();
        let mut out = EffectiveChannel {
            subcarriers: kk,
            antenna_pairs: self.antenna_pairs,
            values: self.direct.clone(),
        };
        for p in 0..self.antenna_pairs {
            let dst = &mut out.values[p * kk..(p + 1) * kk];
            for (n, &theta) in coefs.iter().enumerate() {
                if theta == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let off = (p * self.elements + n) * kk;
                for (d, e) in dst.iter_mut().zip(&self.per_element[off..off + kk]) {
                    *d += theta * e;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_codebook, Quantization};

    fn scene() -> (Scene, RadioConfig) {
        let radio = RadioConfig::experiment();
        (Scene::l_shaped(&radio, GridSpec::simulation()).unwrap(), radio)
    }

    fn rel_err(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn unit_magnitude_distance() {
        let f = 5.6e9;
        let l = SPEED_OF_LIGHT / f;
        let a = Point3::new(0.0, 0.0, 0.0);
        let h = path_response(a, Point3::new(l / (4.0 * PI), 0.0, 0.0), f).unwrap();
        assert!((h.norm() - 1.0).abs() < 1e-12);
        let h1 = path_response(a, Point3::new(1.0, 0.0, 0.0), f).unwrap();
        let h2 = path_response(a, Point3::new(2.0, 0.0, 0.0), f).unwrap();
        assert!((h1.norm() / h2.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn five_metre_magnitude() {
        let h = path_response(Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 4.0, 0.0), 5.6e9).unwrap();
        // lambda = 0.053534 m; lambda / (4 pi 5) = 8.5202e-4
        assert!((h.norm() - 8.5202e-4).abs() < 1e-7, "{}", h.norm());
    }

    #[test]
    fn coincident_points_rejected() {
        let a = Point3::new(1.0, 1.0, 1.0);
        assert!(path_response(a, a, 5.6e9).is_err());
    }

    #[test]
    fn blocker_losses_sum() {
        let (mut s, _) = scene();
        let a = Point3::new(1.0, 1.0, 1.0);
        let b = Point3::new(1.0, 2.0, 1.0);
        assert_eq!(is_blocked(a, b, &s), (false, 0.0));
        s.blockers.clear();
        assert_eq!(is_blocked(a, b, &s), (false, 0.0));
        let wall = |y: f64, db: f64| Blocker {
            segment: Segment2::new(Point2::new(0.0, y), Point2::new(3.0, y)),
            penetration_loss_db: db,
        };
        s.blockers.push(wall(1.5, 40.0));
        assert_eq!(is_blocked(a, b, &s), (true, 40.0));
        s.blockers.push(wall(1.7, 30.0));
        assert_eq!(is_blocked(a, b, &s), (true, 70.0));
    }

    #[test]
    fn default_scene_blocks_direct_path() {
        let (s, _) = scene();
        let (blocked, loss) = is_blocked(s.tx_positions[0], s.rx_positions[0], &s);
        // the line of sight crosses both walls of the inner corner
        assert!(blocked);
        assert_eq!(loss, 80.0);
    }

    #[test]
    fn band_rotation_matches_direct_phases() {
        let radio = RadioConfig::experiment();
        let band = Band::new(&radio, 3);
        for (length, hops) in [(0.3, 1), (7.9, 2), (23.4, 3)] {
            let ray = Ray { coef: Complex64::new(0.7, -0.2), hops, length };
            let mut out = vec![Complex64::new(0.0, 0.0); band.len()];
            band.accumulate(&[ray], &mut out);
            for (k, f) in radio.subcarrier_frequencies().into_iter().enumerate() {
                let l = SPEED_OF_LIGHT / f;
                let want = ray.coef * Complex64::from_polar((l / (4.0 * PI)).powi(hops), -TAU * length / l);
                // a phase of ~1e3 rad carries ~1e-13 rounding whichever way it is formed
                assert!((out[k] - want).norm() <= 1e-12 * want.norm(), "k {k} length {length}");
            }
        }
    }

    #[test]
    fn ris_off_gives_direct_path_exactly() {
        let (s, radio) = scene();
        let h = scene_channel(&s, &radio, &RisConfiguration::off(100), &[]).unwrap();
        let loss = db_to_amplitude(80.0);
        for (p, (&tx, &rx)) in [(s.tx_positions[0], s.rx_positions[0]), (s.tx_positions[0], s.rx_positions[1])]
            .iter()
            .map(|(a, b)| (a, b))
            .enumerate()
        {
            for (k, f) in radio.subcarrier_frequencies().into_iter().enumerate() {
                let d = path_response(tx, rx, f).unwrap() * loss;
                assert!(rel_err(h.get(k, p), d) < 1e-14);
            }
        }
    }

    #[test]
    fn hard_block_single_element() {
        let (mut s, mut radio) = scene();
        radio.rx_antennas = 1;
        s.rx_positions.truncate(1);
        for b in &mut s.blockers {
            b.penetration_loss_db = f64::INFINITY;
        }
        let e = s.ris_panel.element_positions[0];
        s.ris_panel = RisPanel::new(vec![e], s.ris_panel.normal, e).unwrap();
        let config = RisConfiguration {
            beam_label: 0.0,
            amplitudes: vec![1.0],
            phases: vec![0.0],
        };
        let h = scene_channel(&s, &radio, &config, &[]).unwrap();
        for (k, f) in radio.subcarrier_frequencies().into_iter().enumerate() {
            let want = path_response(s.tx_positions[0], e, f).unwrap()
                * path_response(e, s.rx_positions[0], f).unwrap();
            assert!(rel_err(h.get(k, 0), want) < 1e-12);
        }
    }

    #[test]
    fn grid_channel_matches_direct_evaluation() {
        let (s, radio) = scene();
        let cb = build_codebook(&s.ris_panel, 0.0, &[20.0, 50.0], Quantization::OneBit, radio.wavelength())
            .unwrap();
        let grid = GridChannel::new(&s, &radio).unwrap();
        for occupied in [vec![0], vec![1, 3], vec![0, 2, 3]] {
            let people: Vec<Point2> = occupied.iter().map(|&i| s.reference_points[i]).collect();
            let terms = grid.placement(&occupied).unwrap();
            for config in &cb.configurations {
                let fast = terms.channel(config).unwrap();
                let slow = scene_channel(&s, &radio, config, &people).unwrap();
                for (a, b) in fast.values.iter().zip(&slow.values) {
                    assert!(rel_err(*a, *b) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn noise_free_amplitudes_scale_with_power() {
        let (s, mut radio) = scene();
        radio.noise_power_override_mw = Some(0.0);
        let cb = build_codebook(&s.ris_panel, 0.0, &[30.0], Quantization::Continuous, radio.wavelength())
            .unwrap();
        let h = scene_channel(&s, &radio, &cb.configurations[0], &[s.reference_points[0]]).unwrap();
        let sample = add_noise(&h, &radio, 3);
        let amp = radio.transmit_power_mw().sqrt();
        for p in 0..2 {
            for k in 0..52 {
                let want = h.get(k, p).norm() * amp;
                assert!((sample.amplitudes[p][k] - want).abs() <= 1e-14 * want);
            }
        }
    }

    #[test]
    fn thermal_floor_for_default_radio() {
        let radio = RadioConfig::default();
        let dbm = 10.0 * radio.noise_power_mw().log10();
        // -174 + 10 log10(20e6 / 52)
        assert!((dbm - (-118.150)).abs() < 1e-3, "{dbm}");
    }

    #[test]
    fn subcarrier_grid_skips_dc() {
        let f = RadioConfig::default().subcarrier_frequencies();
        assert_eq!(f.len(), 52);
        assert!(!f.contains(&5.6e9));
        assert!((f[0] - (5.6e9 - 26.0 * 312.5e3)).abs() < 1e-3);
        assert!((f[51] - (5.6e9 + 26.0 * 312.5e3)).abs() < 1e-3);
    }

    #[test]
    fn person_outside_room_rejected() {
        let (s, radio) = scene();
        let r = scene_channel(&s, &radio, &RisConfiguration::off(100), &[Point2::new(1.0, 5.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn scene_json_round_trip_with_hard_block() {
        let (mut s, _) = scene();
        s.blockers[0].penetration_loss_db = f64::INFINITY;
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"penetration_loss_db\":null"));
        let back: Scene = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn whiteboard_grid_keeps_paths_clear_of_other_people() {
        // A person standing on the RIS or receiver leg of another point would
        // make the two placements look alike.
        let radio = RadioConfig::experiment();
        let s = Scene::whiteboard_room(&radio, GridSpec::experiment()).unwrap();
        let ris = s.ris_panel.center.xy();
        let rx = s.rx_positions[0].xy();
        for (i, p) in s.reference_points.iter().enumerate() {
            for leg in [Segment2::new(ris, *p), Segment2::new(*p, rx)] {
                for (j, q) in s.reference_points.iter().enumerate() {
                    if i != j {
                        assert!(leg.distance_to(*q) > s.person_model.body_radius, "{j} shadows {i}");
                    }
                }
            }
        }
    }
}
