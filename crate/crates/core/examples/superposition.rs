//! Halves the apparent IBI of a slow-rhythm recording by adding a copy of
//! it shifted by about half a beat.

use ibinet::signalgen::{superpose_augment, synthesize_subject, SubjectProfile};

pub fn main() -> ibinet::Result<()> {
    let profile = SubjectProfile {
        subject_id: 5,
        ibi_mean: 0.98,
        ibi_std: 0.04,
        duration: 60.0,
        ..SubjectProfile::default()
    };
    let source = synthesize_subject(&profile, 500, 1)?;
    let augmented = superpose_augment(&source, 1)?;

    let shift = source.len() - augmented.len();
    println!("shift: {shift} samples ({:.3} s)", shift as f64 / 500.0);
    println!(
        "source:    {} beats, median IBI {:.3} s",
        source.r_peaks().len(),
        source.median_ibi().unwrap()
    );
    println!(
        "augmented: {} beats, median IBI {:.3} s",
        augmented.r_peaks().len(),
        augmented.median_ibi().unwrap()
    );

    // Low-rhythm sources are rejected rather than producing overlapping beats.
    let fast = SubjectProfile {
        ibi_mean: 0.6,
        ..profile
    };
    match superpose_augment(&synthesize_subject(&fast, 500, 1)?, 1) {
        Err(e) => println!("0.6 s source: {e}"),
        Ok(_) => println!("0.6 s source unexpectedly accepted"),
    }
    Ok(())
}
