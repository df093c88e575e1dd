//! The quick examples double as smoke tests.

#[path = "../examples/gradient_check.rs"]
mod gradient_check;
#[path = "../examples/loss_and_metrics.rs"]
mod loss_and_metrics;
#[path = "../examples/postprocess.rs"]
mod postprocess;
#[path = "../examples/superposition.rs"]
mod superposition;
#[path = "../examples/windowing.rs"]
mod windowing;

#[test]
fn superposition_example() {
    superposition::main().unwrap();
}

#[test]
fn windowing_example() {
    windowing::main().unwrap();
}

#[test]
fn gradient_check_example() {
    gradient_check::main().unwrap();
}

#[test]
fn loss_and_metrics_example() {
    loss_and_metrics::main().unwrap();
}

#[test]
fn postprocess_example() {
    postprocess::main().unwrap();
}
