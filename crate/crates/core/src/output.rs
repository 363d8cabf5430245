//! Trajectory CSV files: header row, comma separated, LF line endings and 17 significant
//! digits per float.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{LoheError, Result};
use crate::observe::ObservableRecord;

const FIXED_COLUMNS: [&str; 7] = [
    "t",
    "rho",
    "diam_euclid",
    "diam_corr",
    "lyapunov",
    "potential",
    "norm_drift",
];

fn io_error(e: impl std::fmt::Display) -> LoheError {
    LoheError::InvalidInput(format!("csv: {e}"))
}

pub fn header(tuples: &[[usize; 4]]) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for [i, j, k, l] in tuples {
        h.push(format!("cr_{i}_{j}_{k}_{l}_re"));
        h.push(format!("cr_{i}_{j}_{k}_{l}_im"));
    }
    h
}

/// `{:.16e}`: one digit before the point plus sixteen after.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_records<W: Write>(
    writer: W,
    records: &[ObservableRecord],
    tuples: &[[usize; 4]],
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(header(tuples)).map_err(io_error)?;
    for r in records {
        if r.cross_ratios.len() != tuples.len() {
            return Err(LoheError::ShapeMismatch(format!(
                "record at t = {} has {} cross ratios, header has {}",
                r.t,
                r.cross_ratios.len(),
                tuples.len()
            )));
        }
        let mut row = vec![
            format_float(r.t),
            format_float(r.rho),
            format_float(r.diam_euclid),
            format_float(r.diam_corr),
            format_float(r.lyapunov),
            r.potential.map(format_float).unwrap_or_default(),
            format_float(r.norm_drift),
        ];
        for c in &r.cross_ratios {
            row.push(format_float(c.re));
            row.push(format_float(c.im));
        }
        w.write_record(&row).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

fn parse_tuple(name: &str) -> Option<[usize; 4]> {
    let idx: Vec<usize> = name
        .strip_prefix("cr_")?
        .strip_suffix("_re")?
        .split('_')
        .map(|s| s.parse().ok())
        .collect::<Option<_>>()?;
    idx.try_into().ok()
}

/// Reads records written by [`write_records`], returning them with their tuples.
pub fn read_records<R: Read>(reader: R) -> Result<(Vec<ObservableRecord>, Vec<[usize; 4]>)> {
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    let head: Vec<String> = r.headers().map_err(io_error)?.iter().map(String::from).collect();
    if head.len() < FIXED_COLUMNS.len() || head[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(io_error("unexpected header"));
    }
    let tuples: Vec<[usize; 4]> = head[FIXED_COLUMNS.len()..]
        .chunks(2)
        .map(|pair| parse_tuple(&pair[0]).ok_or_else(|| io_error(format!("bad column {}", pair[0]))))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    for row in r.records() {
        let row = row.map_err(io_error)?;
        let num = |k: usize| -> Result<f64> {
            row.get(k)
                .ok_or_else(|| io_error("short row"))?
                .parse::<f64>()
                .map_err(io_error)
        };
        let potential = match row.get(5) {
            Some("") => None,
            _ => Some(num(5)?),
        };
        let cross_ratios = (0..tuples.len())
            .map(|q| {
                let base = FIXED_COLUMNS.len() + 2 * q;
                Ok(Complex64::new(num(base)?, num(base + 1)?))
            })
            .collect::<Result<_>>()?;
        records.push(ObservableRecord {
            t: num(0)?,
            rho: num(1)?,
            diam_euclid: num(2)?,
            diam_corr: num(3)?,
            lyapunov: num(4)?,
            potential,
            norm_drift: num(6)?,
            cross_ratios,
        });
    }
    Ok((records, tuples))
}

/// Extracts `(t, column)` pairs from a trajectory CSV.
pub fn read_column<R: Read>(reader: R, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    let head = r.headers().map_err(io_error)?.clone();
    let find = |name: &str| {
        head.iter()
            .position(|h| h == name)
            .ok_or_else(|| LoheError::InvalidInput(format!("no column named `{name}`")))
    };
    let (ti, ci) = (find("t")?, find(column)?);
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    for row in r.records() {
        let row = row.map_err(io_error)?;
        let get = |k: usize| row.get(k).unwrap_or("").parse::<f64>().map_err(io_error);
        ts.push(get(ti)?);
        ys.push(get(ci)?);
    }
    Ok((ts, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64, with_potential: bool) -> ObservableRecord {
        ObservableRecord {
            t,
            rho: 1.0 / 3.0,
            diam_euclid: std::f64::consts::PI,
            diam_corr: 1e-300,
            lyapunov: 0.1 + 0.2,
            potential: with_potential.then_some(-2.0 / 7.0),
            norm_drift: 5e-17,
            cross_ratios: vec![Complex64::new(1.0 / 9.0, -f64::EPSILON)],
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let tuples = [[0, 1, 2, 3]];
        let records = vec![record(0.0, true), record(0.1, false)];
        let mut buf = Vec::new();
        write_records(&mut buf, &records, &tuples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("t,rho,diam_euclid,diam_corr,lyapunov,potential,norm_drift,cr_0_1_2_3_re,cr_0_1_2_3_im\n"));
        let (back, back_tuples) = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, records);
        assert_eq!(back_tuples, tuples);
        let (t, rho) = read_column(buf.as_slice(), "rho").unwrap();
        assert_eq!(t, vec![0.0, 0.1]);
        assert_eq!(rho, vec![1.0 / 3.0; 2]);
        assert!(read_column(buf.as_slice(), "nope").is_err());
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
