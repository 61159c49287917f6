//! CSV reports and trajectory dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lasi_core::mad::StepValues;
use lasi_core::{JndResult, MadTrajectory, SweepRow, TwoAfcResult};

use crate::{format_value, save_image, CliError};

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Usage(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<W: Write>(out: W, path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> crate::Result<fs::File> {
    fs::File::create(path).map_err(|e| CliError::io(path, e))
}

/// `index,d0,d1,a,credit` per 2-AFC example.
pub fn write_2afc(path: &Path, res: &TwoAfcResult) -> crate::Result<()> {
    let rows = res.per_example.iter().enumerate().map(|(i, d)| {
        vec![i.to_string(), format_value(d.d0), format_value(d.d1), d.a.to_string(), format_value(d.credit)]
    });
    write_rows(create(path)?, path, &["index", "d0", "d1", "a", "credit"], rows)
}

/// `rank,recall,precision` along the JND precision-recall curve.
pub fn write_pr_curve(path: &Path, res: &JndResult) -> crate::Result<()> {
    let rows = res
        .pr_curve
        .iter()
        .enumerate()
        .map(|(i, &(r, p))| vec![(i + 1).to_string(), format_value(r), format_value(p)]);
    write_rows(create(path)?, path, &["rank", "recall", "precision"], rows)
}

/// `n,prediction_mse,afc_score`, with `train_loss` before the score when
/// requested.
pub fn write_sweep<W: Write>(out: W, path: &Path, rows: &[SweepRow], train_loss: bool) -> crate::Result<()> {
    let header: &[&str] =
        if train_loss { &["n", "prediction_mse", "train_loss", "afc_score"] } else { &["n", "prediction_mse", "afc_score"] };
    let rows = rows.iter().map(|r| {
        let mut v = vec![r.n.to_string(), format_value(r.prediction_mse)];
        if train_loss {
            v.push(format_value(r.train_loss));
        }
        v.push(format_value(r.afc_score));
        v
    });
    write_rows(out, path, header, rows)
}

fn write_values(path: &Path, values: &[StepValues]) -> crate::Result<()> {
    let rows = values
        .iter()
        .enumerate()
        .map(|(t, v)| vec![t.to_string(), format_value(v.d_fixed), format_value(v.d_moving)]);
    write_rows(create(path)?, path, &["step", "d_fixed", "d_moving"], rows)
}

/// Writes `corrupted.pgm` (or `.ppm`), `max_NNN` and `min_NNN` iterates
/// for steps 1..K, and `max.csv` / `min.csv` with `step,d_fixed,d_moving`
/// from step 0. Returns the image paths written.
pub fn write_mad(dir: &Path, traj: &MadTrajectory) -> crate::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let ext = crate::pnm::extension(traj.corrupted().channels());
    let mut written = vec![dir.join(format!("corrupted.{ext}"))];
    save_image(traj.corrupted(), &written[0])?;
    for (name, iterates) in [("max", &traj.max_iterates), ("min", &traj.min_iterates)] {
        for (t, img) in iterates.iter().enumerate().skip(1) {
            let path = dir.join(format!("{name}_{t:03}.{ext}"));
            save_image(img, &path)?;
            written.push(path);
        }
    }
    write_values(&dir.join("max.csv"), &traj.max_values)?;
    write_values(&dir.join("min.csv"), &traj.min_values)?;
    Ok(written)
}
