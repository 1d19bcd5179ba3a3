//! Dataset CSV with columns `t, r<i>..., y<j>...`.

use std::io::{Read, Write};

use anyhow::{bail, Context};
use emp_core::pem::Dataset;
use emp_core::{CascadeNetwork, Emp};

pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(data.excited.iter().map(|i| format!("r{i}")));
    header.extend(data.measured.iter().map(|j| format!("y{j}")));
    w.write_record(&header)?;
    for t in 0..data.len() {
        let mut row = vec![t.to_string()];
        row.extend(data.r.iter().chain(&data.y).map(|v| format!("{:e}", v[t])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_dataset`]; the header must name exactly
/// the excited and measured nodes of `emp`.
pub fn read_dataset<R: Read>(input: R, net: CascadeNetwork, emp: Emp) -> anyhow::Result<Dataset> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let mut expected = vec!["t".to_string()];
    expected.extend(emp.pattern().excited().iter().map(|i| format!("r{i}")));
    expected.extend(emp.pattern().measured().iter().map(|j| format!("y{j}")));
    if header != expected {
        bail!("dataset columns {header:?} do not match the EMP (expected {expected:?})");
    }
    let nr = emp.pattern().excited().len();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        for (k, col) in cols.iter_mut().enumerate() {
            let v: f64 = rec[k + 1]
                .trim()
                .parse()
                .with_context(|| format!("row {}, column {}", line + 1, header[k + 1]))?;
            col.push(v);
        }
    }
    let y = cols.split_off(nr);
    Ok(Dataset::from_records(net, emp, cols, y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use emp_core::{ParamModule, Pattern};

    #[test]
    fn round_trip() {
        let net = CascadeNetwork::new(vec![
            ParamModule::first_order(0.4, 1.2).unwrap(),
            ParamModule::fir(vec![1.0, -0.5]).unwrap(),
        ])
        .unwrap();
        let emp = Emp::uniform(Pattern::new(3, &[1, 2], &[3]).unwrap(), 1.0, 0.1).unwrap();
        let data = emp_core::pem::simulate(&net, &emp, 64, 9).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,r1,r2,y3\n"));
        let back = read_dataset(buf.as_slice(), net, emp).unwrap();
        assert_eq!(back.r, data.r);
        assert_eq!(back.y, data.y);
    }

    #[test]
    fn wrong_columns() {
        let net = CascadeNetwork::new(vec![ParamModule::fir(vec![1.0]).unwrap()]).unwrap();
        let emp = Emp::uniform(Pattern::new(2, &[1], &[2]).unwrap(), 1.0, 0.1).unwrap();
        assert!(read_dataset("t,r2,y2\n0,1,1\n".as_bytes(), net, emp).is_err());
    }
}
