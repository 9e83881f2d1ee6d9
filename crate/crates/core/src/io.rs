//! CSV measurement logs and atomic file output.
//!
//! Schemas (header row mandatory):
//!
//! ```text
//! isac.csv   t,range_3d,doppler_velocity
//! imu.csv    t,ax,ay,az,gx,gy,gz
//! truth.csv  t,px,py
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{GroundTruthSample, ImuMeasurement, IsacMeasurement, Pose2D, Timestamp};

pub const ISAC_HEADER: &[&str] = &["t", "range_3d", "doppler_velocity"];
pub const IMU_HEADER: &[&str] = &["t", "ax", "ay", "az", "gx", "gy", "gz"];
pub const TRUTH_HEADER: &[&str] = &["t", "px", "py"];

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Renders rows as CSV text. Floats use the shortest representation that
/// round-trips exactly.
pub fn csv_string<R, I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[String]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.as_ref().join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[String]>,
{
    write_atomic(path, csv_string(header, rows).as_bytes())
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn write_isac(path: &Path, data: &[IsacMeasurement]) -> Result<()> {
    write_csv(
        path,
        ISAC_HEADER,
        data.iter()
            .map(|m| [f(m.t.0), f(m.range_3d), f(m.doppler_velocity)]),
    )
}

pub fn write_imu(path: &Path, data: &[ImuMeasurement]) -> Result<()> {
    write_csv(
        path,
        IMU_HEADER,
        data.iter().map(|m| {
            [
                f(m.t.0),
                f(m.accel_body[0]),
                f(m.accel_body[1]),
                f(m.accel_body[2]),
                f(m.gyro[0]),
                f(m.gyro[1]),
                f(m.gyro[2]),
            ]
        }),
    )
}

pub fn write_truth(path: &Path, data: &[GroundTruthSample]) -> Result<()> {
    write_csv(
        path,
        TRUTH_HEADER,
        data.iter()
            .map(|s| [f(s.t.0), f(s.position.x), f(s.position.y)]),
    )
}

/// Reads a CSV whose header must start with `header`; extra trailing columns
/// are ignored. Returns the numeric rows.
pub fn read_numeric_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let prefix: Vec<&str> = found.iter().take(header.len()).collect();
    if prefix != header {
        return Err(Error::format(
            path,
            format!(
                "expected header {}, found {}",
                header.join(","),
                prefix.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let mut row = Vec::with_capacity(header.len());
        for (col, name) in header.iter().enumerate() {
            let cell = rec.get(col).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(
                    path,
                    format!("row {}: column {name}: cannot parse {cell:?}", line + 2),
                )
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::format(path, format!("{kind:?}")),
    }
}

fn ts(path: &Path, v: f64) -> Result<Timestamp> {
    Timestamp::new(v).map_err(|_| Error::format(path, format!("invalid timestamp {v}")))
}

pub fn read_isac(path: &Path) -> Result<Vec<IsacMeasurement>> {
    read_numeric_csv(path, ISAC_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(IsacMeasurement {
                t: ts(path, r[0])?,
                range_3d: r[1],
                doppler_velocity: r[2],
            })
        })
        .collect()
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuMeasurement>> {
    read_numeric_csv(path, IMU_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(ImuMeasurement {
                t: ts(path, r[0])?,
                accel_body: [r[1], r[2], r[3]],
                gyro: [r[4], r[5], r[6]],
            })
        })
        .collect()
}

pub fn read_truth(path: &Path) -> Result<Vec<GroundTruthSample>> {
    read_numeric_csv(path, TRUTH_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(GroundTruthSample {
                t: ts(path, r[0])?,
                position: Pose2D::new(r[1], r[2]),
            })
        })
        .collect()
}

/// Reads any `t,px,py[,...]` estimate file.
pub fn read_estimates(path: &Path) -> Result<Vec<(f64, Pose2D)>> {
    Ok(read_numeric_csv(path, TRUTH_HEADER)?
        .into_iter()
        .map(|r| (r[0], Pose2D::new(r[1], r[2])))
        .collect())
}

pub fn write_estimates(path: &Path, data: &[(f64, Pose2D)]) -> Result<()> {
    write_csv(
        path,
        TRUTH_HEADER,
        data.iter().map(|(t, p)| [f(*t), f(p.x), f(p.y)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_streams() {
        let dir = tempfile::tempdir().unwrap();
        let isac = vec![IsacMeasurement {
            t: Timestamp(0.030303030303030304),
            range_3d: 2.123456789012345,
            doppler_velocity: -0.1,
        }];
        let imu = vec![ImuMeasurement {
            t: Timestamp(0.02),
            accel_body: [0.1, -0.2, 0.0],
            gyro: [0.0, 0.0, 1e-17],
        }];
        let truth = vec![GroundTruthSample {
            t: Timestamp(0.0),
            position: Pose2D::new(0.5, 3.25),
        }];
        write_isac(&dir.path().join("isac.csv"), &isac).unwrap();
        write_imu(&dir.path().join("imu.csv"), &imu).unwrap();
        write_truth(&dir.path().join("truth.csv"), &truth).unwrap();
        assert_eq!(read_isac(&dir.path().join("isac.csv")).unwrap(), isac);
        assert_eq!(read_imu(&dir.path().join("imu.csv")).unwrap(), imu);
        assert_eq!(read_truth(&dir.path().join("truth.csv")).unwrap(), truth);

        let text = fs::read_to_string(dir.path().join("imu.csv")).unwrap();
        assert!(text.starts_with("t,ax,ay,az,gx,gy,gz\n"));
    }

    #[test]
    fn rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("isac.csv");
        fs::write(&p, "time,range\n0,1\n").unwrap();
        let err = read_isac(&p).unwrap_err();
        assert!(err.to_string().contains("expected header"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_truth(Path::new("/nonexistent/truth.csv")).unwrap_err();
        assert!(err.to_string().contains("truth.csv"));
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "b\n");
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }
}
