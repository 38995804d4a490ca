//! Density snapshots as CSV: `edge_id,cell_index,x_center,rho`, one row per
//! cell in global cell order. `cell_index` is 1-based.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::network::CellGrid;

use super::LwrError;

/// `rho_t<time>.csv`, with the time printed to six decimals.
pub fn snapshot_file_name(time: f64) -> String {
    format!("rho_t{time:.6}.csv")
}

pub fn write_snapshot(path: impl AsRef<Path>, grid: &CellGrid, rho: &[f64]) -> Result<(), LwrError> {
    if rho.len() != grid.total_cells() {
        return Err(LwrError::LayoutMismatch(format!("{} densities for {} cells", rho.len(), grid.total_cells())));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "edge_id,cell_index,x_center,rho")?;
    for (e, edge) in grid.network().edges().iter().enumerate() {
        for j in 1..=grid.cells_on(e) {
            writeln!(out, "{},{},{},{}", edge.id, j, grid.cell_center(j), rho[grid.global_index(e, j)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads the total densities of a snapshot written for `grid`. Rows may come
/// in any order but must cover every cell exactly once.
pub fn read_snapshot(path: impl AsRef<Path>, grid: &CellGrid) -> Result<Vec<f64>, LwrError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| LwrError::Snapshot(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| LwrError::Snapshot(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["edge_id", "cell_index", "x_center", "rho"] {
        return Err(LwrError::Snapshot(format!("{}: unexpected header {:?}", path.display(), headers)));
    }
    let net = grid.network();
    let mut rho = vec![f64::NAN; grid.total_cells()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| LwrError::Snapshot(e.to_string()))?;
        let bad = |what: &str| LwrError::Snapshot(format!("{}: row {}: bad {what}", path.display(), line + 2));
        let edge_id: u32 = record[0].parse().map_err(|_| bad("edge_id"))?;
        let j: usize = record[1].parse().map_err(|_| bad("cell_index"))?;
        let value: f64 = record[3].parse().map_err(|_| bad("rho"))?;
        let e = net.edge_index(edge_id).ok_or_else(|| bad("edge_id"))?;
        if j == 0 || j > grid.cells_on(e) {
            return Err(bad("cell_index"));
        }
        let slot = &mut rho[grid.global_index(e, j)];
        if !slot.is_nan() {
            return Err(bad("duplicate cell"));
        }
        *slot = value;
    }
    if rho.iter().any(|r| r.is_nan()) {
        return Err(LwrError::Snapshot(format!("{}: missing cells", path.display())));
    }
    Ok(rho)
}
