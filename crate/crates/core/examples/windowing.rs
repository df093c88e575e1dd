//! Cuts a recording into eight-peak windows and splits the cohort into a
//! subject-disjoint fold.

use ibinet::signalgen::{synthesize_subject, SubjectProfile};
use ibinet::windowing::{extract_windows, make_folds, signal_extent, WindowConfig};

pub fn main() -> ibinet::Result<()> {
    let profile = SubjectProfile {
        duration: 30.0,
        ..SubjectProfile::default()
    };
    let signal = synthesize_subject(&profile, 500, 3)?;
    let config = WindowConfig::default();
    let windows = extract_windows(&signal, &config, 3)?;

    println!(
        "{} R-peaks -> {} windows of {} samples",
        signal.r_peaks().len(),
        windows.len(),
        config.window_len
    );
    for w in windows.iter().take(4) {
        let extent = signal_extent(&w.input).unwrap();
        let targets: Vec<String> = w.targets.iter().map(|t| format!("{t:.3}")).collect();
        println!(
            "beat {:>2}: signal at {:>4}..{:<4} targets [{}]",
            w.first_beat_index,
            extent.start,
            extent.end,
            targets.join(", ")
        );
    }

    let ids: Vec<u32> = (1..=11).collect();
    for fold in [1, 3, 10] {
        let split = make_folds(&ids, fold, 0)?;
        println!(
            "fold {fold:>2}: train {:?} val {:?} test {:?}",
            split.train, split.val, split.test
        );
    }
    Ok(())
}
