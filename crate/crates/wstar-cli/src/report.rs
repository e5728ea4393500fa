use std::io::Write;

use wstar::suites::SuiteOutcome;

pub const HEADER: [&str; 7] = ["suite", "trials", "seed", "max_residual", "tolerance", "result", "wall_time_s"];

/// Scientific notation with six significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

fn row(o: &SuiteOutcome, timing: bool) -> [String; 7] {
    [
        o.suite.name().to_string(),
        o.trials.to_string(),
        o.seed.to_string(),
        sci(o.max_residual),
        sci(o.tolerance),
        if o.pass { "pass" } else { "fail" }.to_string(),
        if timing { format!("{:.3}", o.elapsed.as_secs_f64()) } else { "-".to_string() },
    ]
}

/// Report rows as CSV. Wall time is "-" unless requested so identical runs give identical bytes.
pub fn write_csv<W: Write>(out: W, outcomes: &[SuiteOutcome], timing: bool) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for o in outcomes {
        w.write_record(row(o, timing))?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_line(o: &SuiteOutcome) -> String {
    format!(
        "{:<24} trials={:<6} seed={:<10} max_residual={}  tolerance={}  {}",
        o.suite.name(),
        o.trials,
        o.seed,
        sci(o.max_residual),
        sci(o.tolerance),
        if o.pass { "PASS" } else { "FAIL" }
    )
}
