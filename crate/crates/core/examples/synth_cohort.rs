//! Synthesizes the built-in eleven-subject cohort, writes each recording as
//! a `.sig`/`.rpk` pair and reads it back.
//!
//! ```text
//! cargo run --example synth_cohort -- [duration_seconds] [seed]
//! ```

use ibinet::sigfile::{read_signal_dir, signal_stem, write_signal};
use ibinet::signalgen::{synthesize_subject, SubjectProfile};

fn main() -> ibinet::Result<()> {
    let mut args = std::env::args().skip(1);
    let duration: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(60.0);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let dir = std::env::temp_dir().join(format!("ibinet-cohort-{seed}"));
    std::fs::create_dir_all(&dir)?;

    println!("subject  beats  median_ibi_s  min_ibi_s  max_ibi_s");
    for profile in SubjectProfile::default_cohort(duration) {
        let signal = synthesize_subject(&profile, 500, seed)?;
        let ibis = signal.ibis();
        let min = ibis.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ibis.iter().copied().fold(0.0, f64::max);
        println!(
            "{:>7}  {:>5}  {:>12.3}  {:>9.3}  {:>9.3}",
            profile.subject_id,
            signal.r_peaks().len(),
            signal.median_ibi().unwrap_or(f64::NAN),
            min,
            max
        );
        write_signal(&dir, &signal_stem(profile.subject_id), &signal)?;
    }

    let back = read_signal_dir(&dir)?;
    println!("read {} recordings back from {}", back.len(), dir.display());
    Ok(())
}
