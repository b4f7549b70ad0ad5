//! CSV and JSON export of leaf measures.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use super::{PressureReport, WeightedLeafMeasure};
use crate::error::Result;

/// Writes `t,weight,density` rows (normalized weights, arclength densities).
pub fn write_leaf_csv<P: AsRef<Path>>(path: P, measure: &WeightedLeafMeasure) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_leaf_csv_to(file, measure)
}

/// Same as [`write_leaf_csv`] into any writer.
pub fn write_leaf_csv_to<W: Write>(writer: W, measure: &WeightedLeafMeasure) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "weight", "density"])?;
    let p = measure.probabilities();
    let d = measure.densities();
    for ((a, p), d) in measure.atoms.iter().zip(p).zip(d) {
        w.write_record([a.t.to_string(), p.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Compact JSON summary: segment, sizes, mass scale and the pressure report.
pub fn leaf_summary_json(measure: &WeightedLeafMeasure, report: &PressureReport) -> Value {
    json!({
        "segment": measure.segment,
        "n_atoms": measure.atoms.len(),
        "cell_width": measure.cell_width,
        "generation": measure.generation,
        "log_total_mass": measure.log_total(),
        "pressure": report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leaf::leaf_measure;
    use crate::potentials::{PotentialKind, PotentialSpec};
    use crate::torus::{SystemSpec, TorusPoint, TrigPolynomial};

    #[test]
    fn csv_round_trip() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let p = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let (m, rep) =
            leaf_measure(&s, &p, &TorusPoint::new(&[0.2, 0.3]).unwrap(), 0.1, 8, 10).unwrap();
        let mut buf = Vec::new();
        write_leaf_csv_to(&mut buf, &m).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 10);
        let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(leaf_summary_json(&m, &rep)["n_atoms"], 10);
    }
}
