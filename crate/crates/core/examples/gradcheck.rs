//! Finite-difference check of the recurrent dueling network's gradients.

use semcov::approximator::gradcheck::{gradient_check, GradCheckConfig};

fn main() -> semcov::Result<()> {
    let config = GradCheckConfig {
        cases: 70,
        ..GradCheckConfig::standard(0)
    };
    let report = gradient_check(&config)?;
    for g in &report.groups {
        println!(
            "{:<14} {:>3} cases  max rel error {:.2e}",
            format!("{:?}", g.group),
            g.cases,
            g.max_rel_error
        );
    }
    println!(
        "overall {:.2e}, {} kinks redrawn",
        report.max_rel_error, report.kinks_skipped
    );
    Ok(())
}
