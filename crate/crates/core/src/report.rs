//! Serialization of analysis reports: JSONL for machine consumption and a
//! flat CSV of scale-by-scale verdict rows. Field order is fixed and no
//! timestamps are emitted, so equal inputs yield equal bytes.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::ensemble::CascadeVerdict;
use crate::error::{Error, Result};
use crate::flux::kind_label;

/// Append one record as a single JSON line, creating the file if needed.
pub fn append_jsonl(path: impl AsRef<Path>, record: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let line = serde_json::to_string(record).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
    file.write_all(line.as_bytes()).map_err(io_err)?;
    file.write_all(b"\n").map_err(io_err)?;
    Ok(())
}

/// Flatten verdicts into one CSV row per tested scale. The kind column is
/// the statement's flux kinds joined with `+`.
pub fn verdicts_csv(verdicts: &[CascadeVerdict]) -> String {
    let mut out = String::from("scale,kind,mean,lower_bound,upper_bound,pass\n");
    for v in verdicts {
        let kind = kind_label(&v.kinds);
        for row in &v.scales {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.scale, kind, row.mean, row.lower, row.upper, row.pass
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::StructuralConstants;
    use crate::ensemble::{ScaleVerdict, VerdictFlags};
    use crate::flux::FluxKind;

    fn sample_verdict() -> CascadeVerdict {
        let constants = StructuralConstants::default();
        CascadeVerdict {
            statement: crate::ensemble::CascadeStatement::FluidEnergy,
            kinds: vec![FluxKind::U, FluxKind::P],
            r0: 1.0,
            inertial_floor: 0.25,
            range_empty: false,
            reference: 2.0,
            lower: 2.0 / (2.0 * constants.k1),
            upper: 2.0 * constants.k2 * 2.0,
            scales: vec![
                ScaleVerdict {
                    scale: 1.0,
                    in_range: true,
                    mean: 1.5,
                    cover_means: vec![1.5],
                    cover_spread: None,
                    lower: 0.125,
                    upper: 32.0,
                    pass: true,
                },
                ScaleVerdict {
                    scale: 0.5,
                    in_range: true,
                    mean: 40.0,
                    cover_means: vec![40.0],
                    cover_spread: None,
                    lower: 0.125,
                    upper: 32.0,
                    pass: false,
                },
            ],
            skipped_scales: Vec::new(),
            empirical_constant: None,
            flags: VerdictFlags {
                time_scale_ok: true,
                unit_kinetic_energy_ok: true,
                defect_rate: 0.0,
                defect_ok: true,
            },
            covers_per_scale: 1,
            k1: 8,
            k2: 8,
            seed: 7,
        }
    }

    #[test]
    fn csv_has_one_row_per_scale() {
        let csv = verdicts_csv(&[sample_verdict()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "scale,kind,mean,lower_bound,upper_bound,pass");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1,u+p,1.5,0.125,32,true");
        assert_eq!(lines[2], "0.5,u+p,40,0.125,32,false");
    }

    #[test]
    fn csv_is_deterministic() {
        let v = [sample_verdict()];
        assert_eq!(verdicts_csv(&v), verdicts_csv(&v));
    }

    #[test]
    fn jsonl_appends_one_line_per_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        let v = sample_verdict();
        append_jsonl(&path, &v).unwrap();
        append_jsonl(&path, &v).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], lines[1]);
        let parsed: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(parsed["statement"], "fluid_energy");
        assert_eq!(parsed["scales"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn jsonl_reports_the_failing_path() {
        let v = sample_verdict();
        match append_jsonl("/nonexistent-dir/runs.jsonl", &v) {
            Err(Error::Io { path, .. }) => {
                assert!(path.to_string_lossy().contains("nonexistent"))
            }
            other => panic!("expected an io error, got {other:?}"),
        }
    }
}
