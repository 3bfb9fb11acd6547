//! Two-column `x,value` CSV tables.

use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, ValueTable};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

pub fn write_table_csv(path: &Path, table: &ValueTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["x", "value"]).map_err(csv_err)?;
    for (x, v) in table.lattice().levels().zip(table.values()) {
        w.write_record([format!("{x:.16e}"), format!("{v:.16e}")])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table_csv`]; rows must be exactly the points of `lattice`.
pub fn read_table_csv(path: &Path, lattice: &Lattice) -> Result<ValueTable> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut values = Vec::with_capacity(lattice.len());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let field = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "{}: row {} has no column {k}",
                        path.display(),
                        i + 2
                    ))
                })?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{}: row {}: {e}", path.display(), i + 2)))
        };
        let (x, v) = (field(0)?, field(1)?);
        if lattice.index_of(x) != Some(i) {
            return Err(Error::Domain(format!(
                "{}: row {} has x = {x}, expected lattice point {}",
                path.display(),
                i + 2,
                lattice.level(i as isize)
            )));
        }
        values.push(v);
    }
    ValueTable::new(*lattice, values, None)
}
