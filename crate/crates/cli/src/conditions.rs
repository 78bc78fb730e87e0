//! Load-condition CSV: `t,p_alpha,p_beta,u_1..u_nb,qb_1..qb_nb`.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use dhpe::nalgebra::DVector;
use dhpe::LoadCondition;

use crate::Malformed;

pub fn header(n_valves: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "p_alpha".to_string(), "p_beta".to_string()];
    h.extend((1..=n_valves).map(|i| format!("u_{i}")));
    h.extend((1..=n_valves).map(|i| format!("qb_{i}")));
    h
}

// 17 significant digits, so values survive a write/read cycle exactly.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write<W: Write>(out: W, conditions: &[LoadCondition]) -> Result<()> {
    let nb = conditions.first().map_or(0, |lc| lc.n_valves());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(nb))?;
    for lc in conditions {
        let mut row = vec![(lc.index + 1).to_string(), num(lc.p_alpha), num(lc.p_beta)];
        row.extend(lc.valve_settings.iter().map(|&u| num(u)));
        row.extend(lc.boundary_flows.iter().map(|&q| num(q)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a condition file. The valve count is taken from the header; the
/// caller checks it against the network.
pub fn read<R: Read>(input: R) -> Result<Vec<LoadCondition>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Malformed(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.len() < 5 || (names.len() - 3) % 2 != 0 {
        return Err(Malformed(format!("header has {} columns, expected 3 + 2 * n_valves", names.len())).into());
    }
    let nb = (names.len() - 3) / 2;
    if names != header(nb) {
        return Err(Malformed(format!("unexpected header {:?}", names.join(","))).into());
    }

    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Malformed(format!("row {}: {e}", line + 1)))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Malformed(format!("row {}: {e}", line + 1)))?;
        if vals.len() != 2 + 2 * nb {
            return Err(Malformed(format!("row {} has {} fields", line + 1, vals.len() + 1)).into());
        }
        out.push(LoadCondition {
            index: line,
            p_alpha: vals[0],
            p_beta: vals[1],
            valve_settings: DVector::from_column_slice(&vals[2..2 + nb]),
            boundary_flows: DVector::from_column_slice(&vals[2 + nb..]),
        });
    }
    Ok(out)
}

pub fn read_path(path: &std::path::Path) -> Result<Vec<LoadCondition>> {
    let file = std::fs::File::open(path).map_err(|e| Malformed(format!("cannot open {}: {e}", path.display())))?;
    let conditions = read(file).with_context(|| format!("reading {}", path.display()))?;
    if conditions.is_empty() {
        bail!("{} contains no load conditions", path.display());
    }
    Ok(conditions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lc(i: usize) -> LoadCondition {
        LoadCondition {
            index: i,
            boundary_flows: DVector::from_vec(vec![150.0 + i as f64, 1.0 / 3.0]),
            valve_settings: DVector::from_vec(vec![0.25, 1.0]),
            p_alpha: 0.0,
            p_beta: -1234.5678901234567,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let cs = vec![lc(0), lc(1)];
        let mut buf = Vec::new();
        write(&mut buf, &cs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,p_alpha,p_beta,u_1,u_2,qb_1,qb_2\n"));
        assert_eq!(read(buf.as_slice()).unwrap(), cs);
    }

    #[test]
    fn bad_header_is_malformed() {
        let err = read("t,p_alpha,p_beta,u_1,q_1\n1,0,1,1,1\n".as_bytes()).unwrap_err();
        assert!(err.is::<Malformed>());
    }

    #[test]
    fn non_numeric_field_is_malformed() {
        let err = read("t,p_alpha,p_beta,u_1,qb_1\n1,0,x,1,1\n".as_bytes()).unwrap_err();
        assert!(err.is::<Malformed>());
    }
}
