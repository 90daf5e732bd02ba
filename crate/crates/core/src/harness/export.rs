use std::io::Write;

use super::TrajectoryRecord;
use crate::error::Result;

/// Column names for a plant with `n_u` inputs and `n_g` constraints.
pub fn csv_header(n_u: usize, n_g: usize) -> Vec<String> {
    let numbered = |prefix: &'static str, n: usize| (1..=n).map(move |i| format!("{prefix}_{i}"));
    let mut header = vec!["cycle".to_string(), "index".into(), "purpose".into()];
    header.extend(numbered("u_raw", n_u));
    header.extend(numbered("u_scaled", n_u));
    header.push("phi_hat".into());
    header.extend(numbered("g_hat", n_g));
    header.push("phi_true".into());
    header.extend(numbered("g_true", n_g));
    header.extend(numbered("violations", n_g));
    header.push("is_reference".into());
    header.push("delta_e".into());
    header
}

/// Writes one row per experiment. Floats use the shortest representation
/// that round-trips, flags are written as 0/1.
pub fn write_csv<W: Write>(record: &TrajectoryRecord, out: W) -> Result<()> {
    let n_u = record.rows.first().map_or(0, |r| r.u_raw.len());
    let n_g = record.rows.first().map_or(0, |r| r.g_hat.len());
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(csv_header(n_u, n_g))?;
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for row in &record.rows {
        let mut fields = vec![
            row.cycle.to_string(),
            row.index.to_string(),
            row.purpose.clone(),
        ];
        fields.extend(row.u_raw.iter().map(f64::to_string));
        fields.extend(row.u_scaled.iter().map(f64::to_string));
        fields.push(row.phi_hat.to_string());
        fields.extend(row.g_hat.iter().map(f64::to_string));
        fields.push(row.phi_true.to_string());
        fields.extend(row.g_true.iter().map(f64::to_string));
        fields.extend(row.violations.iter().map(|v| flag(*v)));
        fields.push(flag(row.is_reference));
        fields.push(row.delta_e.to_string());
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

/// JSON mirror of the CSV: the same rows, with arrays for vector columns.
pub fn write_json<W: Write>(record: &TrajectoryRecord, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, record)?;
    Ok(())
}
