//! Shows how people on the grid change the received CSI under each beam, and
//! how little they change it when the RIS is switched off.
//!
//!     cargo run --release --example channel_simulation

use ris_fingerprint::channel::{add_noise, scene_channel, EffectiveChannel};
use ris_fingerprint::codebook::RisConfiguration;
use ris_fingerprint::pipeline::RunConfig;

fn mean_amplitude(h: &EffectiveChannel) -> f64 {
    h.values.iter().map(|v| v.norm()).sum::<f64>() / h.values.len() as f64
}

fn main() -> ris_fingerprint::Result<()> {
    let cfg = RunConfig::desk(0);
    let radio = cfg.radio();
    let scene = cfg.scene()?;
    let codebook = cfg.build_codebook(&scene)?;
    let off = RisConfiguration::off(scene.ris_panel.element_count());
    println!("reference points: {:?}", scene.reference_points);
    println!("noise power {:.3e} mW per subcarrier", radio.noise_power_mw());

    let mut states: Vec<(String, &RisConfiguration)> = vec![("off".into(), &off)];
    states.extend(codebook.configurations.iter().map(|c| (format!("{:>2.0} deg", c.beam_label), c)));
    println!("\nmean |H| (x1e6) for an empty room and one person per reference point");
    for (name, config) in states {
        let empty = mean_amplitude(&scene_channel(&scene, &radio, config, &[])?);
        let mut row = format!("  {name:<7} empty {:>8.3}", 1e6 * empty);
        for &p in &scene.reference_points {
            let h = mean_amplitude(&scene_channel(&scene, &radio, config, &[p])?);
            row += &format!("  {:>8.3}", 1e6 * h);
        }
        println!("{row}");
    }

    let h = scene_channel(&scene, &radio, &codebook.configurations[2], &[scene.reference_points[1]])?;
    let a = add_noise(&h, &radio, 7);
    let b = add_noise(&h, &radio, 7);
    assert_eq!(a, b);
    println!("\nnoisy amplitudes, pair 0, first 6 subcarriers: {:?}", &a.amplitudes[0][..6]);
    Ok(())
}
