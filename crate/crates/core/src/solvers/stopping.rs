use crate::network::PriceVector;
use crate::numeric::{distance, norm};

/// `||current - previous|| / ||previous||`, the absolute ratio for one link.
///
/// A zero denominator gives `+inf`, so the rule never fires before the
/// averaged price has become positive.
pub fn relative_change(current: &[f64], previous: &[f64]) -> f64 {
    let denominator = norm(previous);
    if denominator > 0.0 {
        distance(current, previous) / denominator
    } else {
        f64::INFINITY
    }
}

/// First `t >= 2` whose averaged price changed by less than `delta` relative
/// to `t - 1`. `trace[k]` holds the averaged price at iteration `k + 1`;
/// `None` means the rule never fired within the trace.
pub fn stopping_time(trace: &[PriceVector], delta: f64) -> Option<usize> {
    trace
        .windows(2)
        .position(|w| relative_change(&w[1], &w[0]) < delta)
        .map(|k| k + 2)
}
