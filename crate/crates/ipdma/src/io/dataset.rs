use std::fs::File;
use std::io::Read;
use std::path::Path;

use ipdma_core::{DatasetBuilder, Error, IpdDataset};

use super::csv_bytes;
use crate::config::ColumnMap;
use crate::error::{CliError, Result};

pub fn read_dataset(path: &Path, columns: &ColumnMap) -> Result<IpdDataset> {
    let f = File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    Ok(parse_dataset(f, columns)?)
}

/// Parse participant rows. Rows are numbered from 1 after the header.
pub fn parse_dataset<R: Read>(input: R, columns: &ColumnMap) -> ipdma_core::Result<IpdDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let (id_col, y_col, t_col) = (find(&columns.trial_id)?, find(&columns.y)?, find(&columns.t)?);
    let names: Vec<String> = if columns.covariates.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![id_col, y_col, t_col].contains(i))
            .map(|(_, h)| h.to_string())
            .collect()
    } else {
        columns.covariates.clone()
    };
    let x_cols = names.iter().map(|n| find(n)).collect::<ipdma_core::Result<Vec<_>>>()?;
    let mut builder = DatasetBuilder::new(names.clone());
    let mut x = vec![0.0; x_cols.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let cell = |col: usize, name: &str| -> ipdma_core::Result<f64> {
            let s = rec.get(col).unwrap_or("");
            if s.is_empty() {
                return Err(Error::Row { row, message: format!("missing value in column `{name}`") });
            }
            s.parse().map_err(|_| Error::Row { row, message: format!("non-numeric value `{s}` in column `{name}`") })
        };
        let id = rec.get(id_col).unwrap_or("");
        if id.is_empty() {
            return Err(Error::Row { row, message: format!("missing value in column `{}`", columns.trial_id) });
        }
        let y = cell(y_col, &columns.y)?;
        let t = cell(t_col, &columns.t)?;
        for (v, (&c, n)) in x.iter_mut().zip(x_cols.iter().zip(&names)) {
            *v = cell(c, n)?;
        }
        builder.push(row, id, y, t, &x)?;
    }
    builder.build()
}

/// Inverse of [`parse_dataset`] with the default column names.
pub fn write_dataset(data: &IpdDataset) -> Result<Vec<u8>> {
    let mut header = vec!["trial_id", "y", "t"];
    header.extend(data.covariate_names().iter().map(String::as_str));
    csv_bytes(&header, |w| {
        for tr in data.trials() {
            for j in 0..tr.n() {
                let mut rec = vec![tr.id.clone(), tr.y()[j].to_string(), (tr.t()[j] as u8).to_string()];
                rec.extend(tr.row(j).iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })
}
