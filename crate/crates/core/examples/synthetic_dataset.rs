//! Generate the default synthetic dataset and report how separable the
//! classes are from amplitude alone versus amplitude plus true phase.

use phasefuse::datagen::{
    generate_with_truth, nearest_centroid_accuracy, SynthConfig, ACTIVITY_NAMES,
};
use phasefuse::Velocity;

fn main() -> phasefuse::Result<()> {
    let cfg = SynthConfig::default();
    let synth = generate_with_truth(&cfg)?;
    println!(
        "{} samples: {} classes x 3 velocities x {} repetitions",
        synth.len(),
        cfg.classes,
        cfg.samples_per_cell
    );
    println!("classes: {}", ACTIVITY_NAMES.join(", "));

    for v in Velocity::ALL {
        let mut amp = (Vec::new(), Vec::new());
        let mut both = (Vec::new(), Vec::new());
        for (i, s) in synth.iter().filter(|s| s.sample.velocity == v).enumerate() {
            let t = &s.truth[0];
            let a: Vec<f64> = t.clean_amplitude.iter().copied().collect();
            let mut ab = a.clone();
            ab.extend(t.clean_phase.iter().copied());
            let y = s.sample.label;
            let (da, db) = if i % 2 == 0 {
                (&mut amp.0, &mut both.0)
            } else {
                (&mut amp.1, &mut both.1)
            };
            da.push((a, y));
            db.push((ab, y));
        }
        println!(
            "{v}: nearest-centroid accuracy  amplitude {:6.2}%   amplitude+phase {:6.2}%",
            nearest_centroid_accuracy(&amp.0, &amp.1)?,
            nearest_centroid_accuracy(&both.0, &both.1)?
        );
    }
    Ok(())
}
