//! Builds the 9-beam continuous codebook and the 6-beam 1-bit codebook and
//! prints where each beam actually points.
//!
//!     cargo run --release --example codebook_sweep

use ris_fingerprint::codebook::{array_gain, gain_sweep, half_power_beamwidth, peak_angles, Codebook, RisPanel};
use ris_fingerprint::pipeline::RunConfig;

fn describe(name: &str, panel: &RisPanel, codebook: &Codebook, wavelength: f64) -> ris_fingerprint::Result<()> {
    println!("{name}: {} beams, {:?}", codebook.beam_count(), codebook.quantization);
    println!("  target   gain@target   peaks                hpbw");
    for beam in &codebook.configurations {
        let sweep = gain_sweep(panel, beam, codebook.incidence_angle, wavelength, 0.5)?;
        let peaks = peak_angles(&sweep, 1e-9);
        let main = peaks
            .iter()
            .copied()
            .min_by(|a, b| (a - beam.beam_label).abs().total_cmp(&(b - beam.beam_label).abs()))
            .unwrap_or(f64::NAN);
        let gain = array_gain(panel, beam, codebook.incidence_angle, beam.beam_label, wavelength)?;
        let hpbw = half_power_beamwidth(&sweep, main).unwrap_or(f64::NAN);
        println!(
            "  {:>5.1}    {gain:>10.6}   {:<20} {hpbw:.1} deg",
            beam.beam_label,
            format!("{peaks:?}")
        );
    }
    Ok(())
}

fn main() -> ris_fingerprint::Result<()> {
    let sim = RunConfig::simulation(0, 20.0);
    let scene = sim.scene()?;
    describe("continuous", &scene.ris_panel, &sim.build_codebook(&scene)?, sim.radio().wavelength())?;

    // 1-bit phases are real (+1/-1), so every beam has a mirror twin.
    let desk = RunConfig::desk(0);
    let scene = desk.scene()?;
    describe("1-bit", &scene.ris_panel, &desk.build_codebook(&scene)?, desk.radio().wavelength())
}
