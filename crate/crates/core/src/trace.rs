//! CSV export of optimizer traces, plus the number format shared by every
//! CSV this crate writes.

use std::io::Write;

use crate::error::Result;
use crate::greedy::TraceStep;
use crate::scalar::Real;

pub const TRACE_COLUMNS: [&str; 9] = [
    "algorithm",
    "iteration",
    "variable",
    "dtheta",
    "privacy_gain",
    "utility_loss_step",
    "gain_factor",
    "i_xp_y",
    "utility_loss",
];

/// `printf("%.12g")`: 12 significant digits, trailing zeros trimmed,
/// scientific notation outside `1e-5 <= |v| < 1e12`. Infinities print as
/// `inf`/`-inf`.
pub fn format_sig(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // exponent after rounding to the target precision
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes one row per committed step. `variable` is 1-based and empty for
/// whole-vector moves.
pub fn write_trace_csv<T: Real, W: Write>(out: W, algorithm: &str, trace: &[TraceStep<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for s in trace {
        w.write_record([
            algorithm.to_string(),
            s.iteration.to_string(),
            s.variable.map(|v| (v + 1).to_string()).unwrap_or_default(),
            format_sig(s.dtheta.as_f64()),
            format_sig(s.privacy_gain.as_f64()),
            format_sig(s.utility_loss_step.as_f64()),
            format_sig(s.gain_factor.as_f64()),
            format_sig(s.point.i_xp_y.as_f64()),
            format_sig(s.point.utility_loss.as_f64()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
