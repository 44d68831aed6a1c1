/// CSV number format: `.` decimal separator, 17 significant digits.
pub fn csv_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_optional(x: Option<f64>) -> String {
    x.map(csv_number).unwrap_or_default()
}
