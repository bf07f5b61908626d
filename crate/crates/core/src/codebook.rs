//! Predefined RIS reflected-beam configurations.
//!
//! Each beam is a per-element phase gradient that steers the reflection of a
//! plane wave arriving from the incidence direction toward one reflection
//! angle. Angles are azimuthal, measured from the panel normal toward the
//! panel's horizontal in-plane axis. The incidence angle is expressed as the
//! specular direction: a beam with `theta_r == theta_i` needs no gradient.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Result};
use crate::geometry::Point3;

const COPLANAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisPanel {
    pub element_positions: Vec<Point3>,
    pub normal: Point3,
    pub center: Point3,
}

impl RisPanel {
    /// Builds a panel from explicit element positions, validating coplanarity.
    pub fn new(element_positions: Vec<Point3>, normal: Point3, center: Point3) -> Result<Self> {
        let panel = Self {
            element_positions,
            normal,
            center,
        };
        panel.validate()?;
        Ok(panel)
    }

    /// A `cols x rows` grid centred on `center`. Columns run along the
    /// horizontal steering axis, rows along the vertical.
    pub fn planar_grid(
        center: Point3,
        normal: Point3,
        cols: usize,
        rows: usize,
        spacing: f64,
    ) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return invalid("panel needs at least one element");
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return invalid(format!("element spacing must be positive, got {spacing}"));
        }
        let normal = unit_horizontal(normal)?;
        let u_axis = steering_axis(normal);
        let v_axis = Point3::new(0.0, 0.0, 1.0);
        let mut positions = Vec::with_capacity(cols * rows);
        for row in 0..rows {
            let v = (row as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
            for col in 0..cols {
                let u = (col as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
                positions.push(center.add(u_axis.scale(u)).add(v_axis.scale(v)));
            }
        }
        Self::new(positions, normal, center)
    }

    /// Default simulated panel: 10x10 elements at half-wavelength spacing.
    pub fn half_wavelength_grid(center: Point3, normal: Point3, wavelength: f64) -> Result<Self> {
        Self::planar_grid(center, normal, 10, 10, wavelength / 2.0)
    }

    pub fn element_count(&self) -> usize {
        self.element_positions.len()
    }

    /// Unit vector along which beams are steered (horizontal, in the panel plane).
    pub fn steering_axis(&self) -> Point3 {
        steering_axis(self.normal)
    }

    /// In-plane coordinate of `pos` along the steering axis, relative to the centre.
    pub fn steering_coordinate(&self, pos: Point3) -> f64 {
        pos.sub(self.center).dot(self.steering_axis())
    }

    /// Unit direction leaving the panel at azimuth `theta_deg` from the normal.
    pub fn direction(&self, theta_deg: f64) -> Point3 {
        let t = theta_deg.to_radians();
        self.normal
            .scale(t.cos())
            .add(self.steering_axis().scale(t.sin()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.element_positions.is_empty() {
            return invalid("panel has no elements");
        }
        let n = self.normal;
        if !(n.is_finite() && (n.norm() - 1.0).abs() < 1e-9) {
            return invalid("panel normal must be a unit vector");
        }
        if n.z.abs() > 1e-9 {
            return invalid("panel normal must be horizontal (azimuth-only steering)");
        }
        for (i, p) in self.element_positions.iter().enumerate() {
            if !p.is_finite() {
                return invalid(format!("element {i} has a non-finite position"));
            }
            let off = p.sub(self.center).dot(n).abs();
            if off > COPLANAR_TOL {
                return invalid(format!("element {i} is {off:e} m off the panel plane"));
            }
        }
        Ok(())
    }
}

fn unit_horizontal(v: Point3) -> Result<Point3> {
    let norm = v.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return invalid("normal must be a finite non-zero vector");
    }
    if v.z.abs() > 1e-12 * norm {
        return invalid("panel normal must be horizontal (azimuth-only steering)");
    }
    Ok(v.scale(1.0 / norm))
}

fn steering_axis(normal: Point3) -> Point3 {
    Point3::new(0.0, 0.0, 1.0).cross(normal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantization {
    Continuous,
    OneBit,
}

/// One RIS state: `theta_n = amplitude_n * exp(j * phase_n)` per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisConfiguration {
    #[serde(rename = "theta_r_deg")]
    pub beam_label: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl RisConfiguration {
    /// All elements absorbing; the RIS contributes nothing.
    pub fn off(element_count: usize) -> Self {
        Self {
            beam_label: 0.0,
            amplitudes: vec![0.0; element_count],
            phases: vec![0.0; element_count],
        }
    }

    pub fn element_count(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn coefficient(&self, n: usize) -> Complex64 {
        Complex64::from_polar(self.amplitudes[n], self.phases[n])
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        (0..self.element_count()).map(|n| self.coefficient(n)).collect()
    }

    /// Maps every phase to the nearer of {0, pi}. Unit amplitudes are kept.
    pub fn quantize_one_bit(&self) -> Self {
        Self {
            beam_label: self.beam_label,
            amplitudes: self.amplitudes.clone(),
            phases: self.phases.iter().map(|&p| one_bit_phase(p)).collect(),
        }
    }

    pub fn validate(&self, element_count: usize) -> Result<()> {
        if self.amplitudes.len() != element_count || self.phases.len() != element_count {
            return invalid(format!(
                "configuration has {}/{} amplitudes/phases for {} elements",
                self.amplitudes.len(),
                self.phases.len(),
                element_count
            ));
        }
        if let Some(a) = self.amplitudes.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return invalid(format!("amplitude {a} outside [0, 1]"));
        }
        if let Some(p) = self.phases.iter().find(|p| !(0.0..TAU).contains(*p)) {
            return invalid(format!("phase {p} outside [0, 2pi)"));
        }
        Ok(())
    }
}

fn one_bit_phase(phase: f64) -> f64 {
    let p = wrap_phase(phase);
    if (PI / 2.0..3.0 * PI / 2.0).contains(&p) {
        PI
    } else {
        0.0
    }
}

/// Wraps into [0, 2pi), guarding against `rem_euclid` rounding up to 2pi.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    #[serde(rename = "incidence_deg")]
    pub incidence_angle: f64,
    pub quantization: Quantization,
    #[serde(rename = "beams")]
    pub configurations: Vec<RisConfiguration>,
}

impl Codebook {
    pub fn beam_count(&self) -> usize {
        self.configurations.len()
    }

    pub fn beam_angles(&self) -> Vec<f64> {
        self.configurations.iter().map(|c| c.beam_label).collect()
    }

    /// Codebook holding a single all-off state; used for the no-RIS baseline.
    pub fn without_ris(element_count: usize) -> Self {
        Self {
            incidence_angle: 0.0,
            quantization: Quantization::Continuous,
            configurations: vec![RisConfiguration::off(element_count)],
        }
    }

    pub fn validate(&self, element_count: usize) -> Result<()> {
        if self.configurations.is_empty() {
            return invalid("codebook has no beams");
        }
        for c in &self.configurations {
            c.validate(element_count)?;
        }
        let labels = self.beam_angles();
        if labels.len() > 1 && labels.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("beam labels must be strictly increasing");
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn check_angle(name: &str, deg: f64) -> Result<()> {
    if !deg.is_finite() {
        return invalid(format!("{name} must be finite, got {deg}"));
    }
    if !(-90.0..=90.0).contains(&deg) {
        return invalid(format!("{name} = {deg} deg outside [-90, 90]"));
    }
    Ok(())
}

/// Phase for an element at in-plane coordinate `u` (metres) so that a wave
/// from the specular direction `theta_i` leaves toward `theta_r`.
pub fn steering_phase(u: f64, theta_i: f64, theta_r: f64, wavelength: f64) -> Result<f64> {
    if !u.is_finite() || !wavelength.is_finite() {
        return invalid("steering phase inputs must be finite");
    }
    if wavelength <= 0.0 {
        return invalid(format!("wavelength must be positive, got {wavelength}"));
    }
    check_angle("incidence angle", theta_i)?;
    check_angle("reflection angle", theta_r)?;
    let gradient = theta_r.to_radians().sin() - theta_i.to_radians().sin();
    Ok(wrap_phase(-(TAU / wavelength) * gradient * u))
}

pub fn build_codebook(
    panel: &RisPanel,
    theta_i: f64,
    angles: &[f64],
    quantization: Quantization,
    wavelength: f64,
) -> Result<Codebook> {
    panel.validate()?;
    if angles.is_empty() {
        return invalid("codebook needs at least one reflection angle");
    }
    check_angle("incidence angle", theta_i)?;
    let mut sorted = angles.to_vec();
    for &a in &sorted {
        check_angle("reflection angle", a)?;
    }
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return invalid("duplicate reflection angles");
    }
    let coords: Vec<f64> = panel
        .element_positions
        .iter()
        .map(|&p| panel.steering_coordinate(p))
        .collect();
    let mut configurations = Vec::with_capacity(sorted.len());
    for theta_r in sorted {
        let phases = coords
            .iter()
            .map(|&u| steering_phase(u, theta_i, theta_r, wavelength))
            .collect::<Result<Vec<_>>>()?;
        let config = RisConfiguration {
            beam_label: theta_r,
            amplitudes: vec![1.0; coords.len()],
            phases,
        };
        configurations.push(match quantization {
            Quantization::Continuous => config,
            Quantization::OneBit => config.quantize_one_bit(),
        });
    }
    Ok(Codebook {
        incidence_angle: theta_i,
        quantization,
        configurations,
    })
}

/// Normalised far-field power gain of `config` toward azimuth `theta`.
pub fn array_gain(
    panel: &RisPanel,
    config: &RisConfiguration,
    theta_i: f64,
    theta: f64,
    wavelength: f64,
) -> Result<f64> {
    let m = panel.element_count();
    if m == 0 {
        return invalid("panel has no elements");
    }
    if config.element_count() != m {
        return invalid("configuration does not match panel size");
    }
    if !(wavelength > 0.0 && theta.is_finite() && theta_i.is_finite()) {
        return invalid("array gain inputs must be finite with positive wavelength");
    }
    let k = TAU / wavelength;
    let gradient = theta.to_radians().sin() - theta_i.to_radians().sin();
    let sum: Complex64 = panel
        .element_positions
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let u = panel.steering_coordinate(p);
            Complex64::from_polar(config.amplitudes[n], config.phases[n] + k * gradient * u)
        })
        .sum();
    Ok(sum.norm_sqr() / (m * m) as f64)
}

/// Gain pattern sampled on `[-90, 90]` with the given step in degrees.
pub fn gain_sweep(
    panel: &RisPanel,
    config: &RisConfiguration,
    theta_i: f64,
    wavelength: f64,
    step_deg: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(step_deg > 0.0) {
        return invalid("sweep step must be positive");
    }
    let steps = (180.0 / step_deg).round() as usize;
    (0..=steps)
        .map(|i| {
            let theta = -90.0 + i as f64 * step_deg;
            array_gain(panel, config, theta_i, theta, wavelength).map(|g| (theta, g))
        })
        .collect()
}

/// All sweep angles attaining the maximum gain (within a relative tolerance).
///
/// A 1-bit pattern has real coefficients, so its gain is mirror-symmetric
/// about the specular direction and the main lobe always has a twin.
pub fn peak_angles(sweep: &[(f64, f64)], rel_tol: f64) -> Vec<f64> {
    let max = sweep.iter().map(|&(_, g)| g).fold(f64::NEG_INFINITY, f64::max);
    sweep
        .iter()
        .filter(|&&(_, g)| g >= max * (1.0 - rel_tol))
        .map(|&(t, _)| t)
        .collect()
}

/// Width in degrees of the contiguous region around `theta_peak` where the
/// sampled gain stays at or above half of the gain at the peak.
pub fn half_power_beamwidth(sweep: &[(f64, f64)], theta_peak: f64) -> Option<f64> {
    let idx = sweep
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - theta_peak).abs().total_cmp(&(b.1 .0 - theta_peak).abs()))?
        .0;
    let half = sweep[idx].1 / 2.0;
    let mut lo = idx;
    while lo > 0 && sweep[lo - 1].1 >= half {
        lo -= 1;
    }
    let mut hi = idx;
    while hi + 1 < sweep.len() && sweep[hi + 1].1 >= half {
        hi += 1;
    }
    Some(sweep[hi].0 - sweep[lo].0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 299_792_458.0 / 5.6e9;

    fn panel() -> RisPanel {
        RisPanel::half_wavelength_grid(
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 0.0),
            LAMBDA,
        )
        .unwrap()
    }

    #[test]
    fn steering_phase_examples() {
        assert_eq!(steering_phase(0.37, 0.0, 0.0, LAMBDA).unwrap(), 0.0);
        let p = steering_phase(LAMBDA / 2.0, 0.0, 30.0, LAMBDA).unwrap();
        assert!((p - 3.0 * PI / 2.0).abs() < 1e-12, "{p}");
        assert_eq!(steering_phase(-1.3, 10.0, 10.0, LAMBDA).unwrap(), 0.0);
    }

    #[test]
    fn steering_phase_rejects_bad_inputs() {
        assert!(steering_phase(f64::NAN, 0.0, 0.0, LAMBDA).is_err());
        assert!(steering_phase(0.1, 0.0, f64::INFINITY, LAMBDA).is_err());
        assert!(steering_phase(0.1, 0.0, 10.0, 0.0).is_err());
        assert!(steering_phase(0.1, 0.0, 95.0, LAMBDA).is_err());
    }

    #[test]
    fn default_codebooks_have_expected_sizes() {
        let p = panel();
        let sim: Vec<f64> = (0..9).map(|i| i as f64 * 10.0).collect();
        let cb = build_codebook(&p, 0.0, &sim, Quantization::Continuous, LAMBDA).unwrap();
        assert_eq!(cb.beam_count(), 9);
        let exp: Vec<f64> = (1..=6).map(|i| i as f64 * 10.0).collect();
        let cb = build_codebook(&p, 0.0, &exp, Quantization::OneBit, LAMBDA).unwrap();
        assert_eq!(cb.beam_count(), 6);
        assert!(cb.validate(100).is_ok());
        for c in &cb.configurations {
            assert!(c.phases.iter().all(|&ph| ph == 0.0 || ph == PI));
        }
    }

    #[test]
    fn broadside_beam_is_all_zero_phase() {
        let cb = build_codebook(&panel(), 0.0, &[0.0], Quantization::Continuous, LAMBDA).unwrap();
        assert!(cb.configurations[0].phases.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn duplicate_and_empty_angles_rejected() {
        let p = panel();
        assert!(build_codebook(&p, 0.0, &[10.0, 10.0], Quantization::Continuous, LAMBDA).is_err());
        assert!(build_codebook(&p, 0.0, &[], Quantization::Continuous, LAMBDA).is_err());
    }

    #[test]
    fn unsorted_angles_come_out_increasing() {
        let cb = build_codebook(&panel(), 0.0, &[40.0, 0.0, 20.0], Quantization::Continuous, LAMBDA)
            .unwrap();
        assert_eq!(cb.beam_angles(), vec![0.0, 20.0, 40.0]);
    }

    #[test]
    fn zero_amplitude_has_zero_gain() {
        let p = panel();
        let g = array_gain(&p, &RisConfiguration::off(100), 0.0, 20.0, LAMBDA).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn one_bit_quantization_is_idempotent() {
        let cb = build_codebook(&panel(), 0.0, &[25.0], Quantization::OneBit, LAMBDA).unwrap();
        let c = &cb.configurations[0];
        assert_eq!(&c.quantize_one_bit(), c);
    }

    #[test]
    fn continuous_beam_peaks_at_target_by_brute_force() {
        let p = panel();
        let cb = build_codebook(&p, 0.0, &[30.0], Quantization::Continuous, LAMBDA).unwrap();
        let sweep = gain_sweep(&p, &cb.configurations[0], 0.0, LAMBDA, 0.5).unwrap();
        let best = sweep.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((best.0 - 30.0).abs() <= 0.5, "{best:?}");
    }

    #[test]
    fn broadside_half_power_beamwidth_is_about_ten_degrees() {
        let p = panel();
        let cb = build_codebook(&p, 0.0, &[0.0], Quantization::Continuous, LAMBDA).unwrap();
        let sweep = gain_sweep(&p, &cb.configurations[0], 0.0, LAMBDA, 0.1).unwrap();
        let hpbw = half_power_beamwidth(&sweep, 0.0).unwrap();
        assert!((9.0..12.0).contains(&hpbw), "{hpbw}");
    }

    #[test]
    fn codebook_json_uses_documented_field_names() {
        let cb = build_codebook(&panel(), 0.0, &[10.0], Quantization::OneBit, LAMBDA).unwrap();
        let v: serde_json::Value = serde_json::to_value(&cb).unwrap();
        assert_eq!(v["incidence_deg"], 0.0);
        assert_eq!(v["quantization"], "one_bit");
        assert_eq!(v["beams"][0]["theta_r_deg"], 10.0);
        assert_eq!(v["beams"][0]["amplitudes"].as_array().unwrap().len(), 100);
        let back: Codebook = serde_json::from_value(v).unwrap();
        assert_eq!(back, cb);
    }

    #[test]
    fn off_panel_element_rejected() {
        let mut p = panel();
        p.element_positions[3].y += 1e-6;
        assert!(p.validate().is_err());
    }
}
