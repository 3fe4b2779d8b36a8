use super::UploadBehaviour;

pub const DAYS_PER_MONTH: u32 = 30;
pub const HOURS_PER_MONTH: f64 = 720.0;

/// Estimated hours between uploads in a month with `monthly_count` uploads.
/// `None` marks a month without uploads.
pub fn inter_upload_hours(monthly_count: u32) -> Option<f64> {
    (monthly_count > 0).then(|| HOURS_PER_MONTH / monthly_count as f64)
}

/// Spreads each month's uploads evenly over its days.
///
/// A month with `c <= days` uploads posts once every `days / c` days starting
/// on its first day. Busier months post `c / days` times every day and the
/// remainder once more on evenly spaced days. Returns `(absolute day, count)`
/// for days with at least one upload.
pub fn upload_schedule(behaviour: &UploadBehaviour, days_per_month: u32) -> Vec<(u32, u32)> {
    let days = days_per_month.max(1);
    let mut out = Vec::new();
    for (month, &c) in behaviour.monthly_counts.iter().enumerate() {
        let start = month as u32 * days;
        out.extend(month_schedule(c, days).map(|(d, n)| (start + d, n)));
    }
    out
}

/// One month of [`upload_schedule`]: `(day within month, count)`.
pub fn month_schedule(count: u32, days_per_month: u32) -> impl Iterator<Item = (u32, u32)> {
    let days = days_per_month.max(1);
    let (per_day, rem) = if count <= days { (0, count) } else { (count / days, count % days) };
    let step = days.checked_div(rem).unwrap_or(0);
    (0..days).filter_map(move |d| {
        let extra = u32::from(rem > 0 && d % step == 0 && d / step < rem);
        let n = per_day + extra;
        (n > 0).then_some((d, n))
    })
}

/// Hour offsets of individual uploads: `k` uploads on day `d` are spaced
/// `24 / k` hours apart from hour `24 * d`.
pub fn upload_timestamps(schedule: &[(u32, u32)]) -> Vec<u64> {
    let mut ts = Vec::new();
    for &(day, count) in schedule {
        let base = day as u64 * 24;
        ts.extend((0..count as u64).map(|j| base + j * 24 / count as u64));
    }
    ts
}
