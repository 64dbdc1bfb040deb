//! Flat CSV stream, one row per IMU tick:
//!
//! `t, ax, ay, az, gx, gy, gz, alphaL_1..k, [alphaL_dot_1..k], contactL,
//! [tL], [dmL_x..z, vmL_x..z], <same for R>, [gt_qw..qz, gt_vx..vz,
//! gt_px..pz, gt_dR_qw..qz, gt_dpx..dpz]`
//!
//! Bracketed groups are optional. `tL`/`tR` carry the timestamp of a held
//! joint sample, `dm`/`vm` the directly measured foot vector. Leading lines
//! starting with `#` are comments; `# motion=<name>` labels the data.

use super::HarnessError;
use crate::lie::{Rotation3, StateElement};
use crate::models::{ImuSample, JointSample, Leg, MarkerVector, SensorFrame};
use crate::sim::GroundTruth;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub motion: Option<String>,
    pub frames: Vec<SensorFrame>,
    pub truth: Option<GroundTruth>,
    /// Joint rates were absent and filled by finite differences.
    pub rates_filled: bool,
}

const IMU_COLS: [&str; 7] = ["t", "ax", "ay", "az", "gx", "gy", "gz"];
const GT_COLS: [&str; 17] = [
    "gt_qw", "gt_qx", "gt_qy", "gt_qz", "gt_vx", "gt_vy", "gt_vz", "gt_px", "gt_py", "gt_pz", "gt_dR_qw", "gt_dR_qx", "gt_dR_qy", "gt_dR_qz", "gt_dpx",
    "gt_dpy", "gt_dpz",
];

fn side(leg: Leg) -> &'static str {
    match leg {
        Leg::Left => "L",
        Leg::Right => "R",
    }
}

fn marker_cols(leg: Leg) -> Vec<String> {
    let s = side(leg);
    ["x", "y", "z"].iter().map(|a| format!("dm{s}_{a}")).chain(["x", "y", "z"].iter().map(|a| format!("vm{s}_{a}"))).collect()
}

fn quat(r: &Rotation3) -> [f64; 4] {
    let q = UnitQuaternion::from_matrix(r.matrix());
    let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
    [q.w, q.i, q.j, q.k]
}

fn rotation_from(q: [f64; 4]) -> Rotation3 {
    let u = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    Rotation3::from_matrix_unchecked(*u.to_rotation_matrix().matrix())
}

pub fn write_csv<W: Write>(mut out: W, motion: Option<&str>, frames: &[SensorFrame], truth: Option<&GroundTruth>) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io { path: "<output>".into(), message: e.to_string() };
    if let Some(m) = motion {
        writeln!(out, "# motion={m}").map_err(io)?;
    }
    if let Some(gt) = truth {
        if gt.len() != frames.len() {
            return Err(HarnessError::Schema { line: 0, column: "gt".into(), message: format!("{} truth rows for {} frames", gt.len(), frames.len()) });
        }
    }
    let Some(first) = frames.first() else {
        return Err(HarnessError::Empty);
    };
    let k = first.legs[0].angles.len();
    let markers = frames.iter().all(|f| f.legs.iter().all(|l| l.marker.is_some()));

    let mut header: Vec<String> = IMU_COLS.iter().map(|s| s.to_string()).collect();
    for leg in Leg::BOTH {
        let s = side(leg);
        header.extend((1..=k).map(|i| format!("alpha{s}_{i}")));
        header.extend((1..=k).map(|i| format!("alpha{s}_dot_{i}")));
        header.push(format!("contact{s}"));
        header.push(format!("t{s}"));
        if markers {
            header.extend(marker_cols(leg));
        }
    }
    if truth.is_some() {
        header.extend(GT_COLS.iter().map(|s| s.to_string()));
    }

    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| HarnessError::Io { path: "<output>".into(), message: e.to_string() };
    w.write_record(&header).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for (i, f) in frames.iter().enumerate() {
        row.clear();
        row.push(f.t.to_string());
        row.extend(f.imu.accel.iter().chain(f.imu.gyro.iter()).map(|x| x.to_string()));
        for js in &f.legs {
            if js.angles.len() != k || js.rates.len() != k {
                return Err(HarnessError::Schema {
                    line: i + 2,
                    column: format!("alpha{}", side(js.leg)),
                    message: "joint count changes within the stream".into(),
                });
            }
            row.extend(js.angles.iter().chain(&js.rates).map(|x| x.to_string()));
            row.push(if js.contact { "1".into() } else { "0".into() });
            row.push(js.t.to_string());
            if markers {
                let m = js.marker.expect("checked above");
                row.extend(m.position.iter().chain(m.velocity.iter()).map(|x| x.to_string()));
            }
        }
        if let Some(gt) = truth {
            let x = &gt.states[i];
            row.extend(quat(&x.r).iter().chain(x.v.iter()).chain(x.p.iter()).chain(quat(&x.dr).iter()).chain(x.dp.iter()).map(|v| v.to_string()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io { path: "<output>".into(), message: e.to_string() })?;
    Ok(())
}

pub fn write_csv_file(path: &Path, motion: Option<&str>, frames: &[SensorFrame], truth: Option<&GroundTruth>) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })?;
    write_csv(std::io::BufWriter::new(file), motion, frames, truth)
}

struct Layout {
    k: usize,
    imu: [usize; 7],
    legs: [LegLayout; 2],
    gt: Option<[usize; 17]>,
    width: usize,
}

struct LegLayout {
    angles: Vec<usize>,
    rates: Option<Vec<usize>>,
    contact: usize,
    time: Option<usize>,
    marker: Option<[usize; 6]>,
}

fn layout(header: &csv::StringRecord, line: usize) -> Result<Layout, HarnessError> {
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let need = |name: &str| find(name).ok_or_else(|| HarnessError::Schema { line, column: name.into(), message: "required column missing".into() });
    let mut imu = [0; 7];
    for (slot, name) in imu.iter_mut().zip(IMU_COLS) {
        *slot = need(name)?;
    }
    let k = (1..).take_while(|i| find(&format!("alphaL_{i}")).is_some()).count();
    if k == 0 {
        return Err(HarnessError::Schema { line, column: "alphaL_1".into(), message: "required column missing".into() });
    }
    let mut legs = Vec::with_capacity(2);
    for leg in Leg::BOTH {
        let s = side(leg);
        let angles = (1..=k).map(|i| need(&format!("alpha{s}_{i}"))).collect::<Result<Vec<_>, _>>()?;
        let rate_cols: Vec<_> = (1..=k).map(|i| find(&format!("alpha{s}_dot_{i}"))).collect();
        let rates = match rate_cols.iter().filter(|c| c.is_some()).count() {
            0 => None,
            n if n == k => Some(rate_cols.into_iter().map(|c| c.expect("all present")).collect()),
            _ => {
                let missing = (1..=k).find(|i| rate_cols[i - 1].is_none()).expect("some missing");
                return Err(HarnessError::Schema {
                    line,
                    column: format!("alpha{s}_dot_{missing}"),
                    message: "joint-rate columns must be all present or all absent".into(),
                });
            }
        };
        let mcols: Vec<_> = marker_cols(leg).iter().map(|c| find(c)).collect();
        let marker = match mcols.iter().filter(|c| c.is_some()).count() {
            0 => None,
            6 => Some(std::array::from_fn(|i| mcols[i].expect("all present"))),
            _ => {
                return Err(HarnessError::Schema {
                    line,
                    column: format!("dm{s}/vm{s}"),
                    message: "foot-vector columns must be all present or all absent".into(),
                })
            }
        };
        legs.push(LegLayout { angles, rates, contact: need(&format!("contact{s}"))?, time: find(&format!("t{s}")), marker });
    }
    let gcols: Vec<_> = GT_COLS.iter().map(|c| find(c)).collect();
    let gt = match gcols.iter().filter(|c| c.is_some()).count() {
        0 => None,
        17 => Some(std::array::from_fn(|i| gcols[i].expect("all present"))),
        _ => {
            let missing = GT_COLS.iter().zip(&gcols).find(|(_, c)| c.is_none()).expect("some missing").0;
            return Err(HarnessError::Schema { line, column: missing.to_string(), message: "ground-truth columns must be all present or all absent".into() });
        }
    };
    let legs: [LegLayout; 2] = legs.try_into().map_err(|_| HarnessError::Empty)?;
    Ok(Layout { k, imu, legs, gt, width: header.len() })
}

pub fn ingest_csv(path: &Path) -> Result<Dataset, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })?;
    read_csv(BufReader::new(file))
}

pub fn read_csv<R: Read>(input: R) -> Result<Dataset, HarnessError> {
    let mut input = BufReader::new(input);
    let mut motion = None;
    let mut comment_lines = 0;
    let mut body = String::new();
    // Leading comments carry metadata; the csv reader sees the rest.
    loop {
        let mut line = String::new();
        let n = input.read_line(&mut line).map_err(|e| HarnessError::Io { path: "<input>".into(), message: e.to_string() })?;
        if n == 0 {
            break;
        }
        if let Some(rest) = line.trim_start().strip_prefix('#') {
            comment_lines += 1;
            if let Some(m) = rest.trim().strip_prefix("motion=") {
                motion = Some(m.trim().to_string());
            }
        } else {
            body = line;
            break;
        }
    }
    let chained = body.as_bytes().chain(input);
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(chained);
    let header_line = comment_lines + 1;
    let header = reader.headers().map_err(|e| HarnessError::Csv { line: header_line, message: e.to_string() })?.clone();
    let lay = layout(&header, header_line)?;

    let mut frames: Vec<SensorFrame> = Vec::new();
    let mut states = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut rates_filled = false;
    loop {
        let more = reader
            .read_record(&mut record)
            .map_err(|e| HarnessError::Csv { line: comment_lines + e.position().map_or(0, |p| p.line() as usize), message: e.to_string() })?;
        if !more {
            break;
        }
        let line = comment_lines + record.position().map_or(0, |p| p.line() as usize);
        if record.len() != lay.width {
            return Err(HarnessError::Schema {
                line,
                column: header.get(record.len().min(lay.width - 1)).unwrap_or("?").to_string(),
                message: format!("row has {} fields, header has {}", record.len(), lay.width),
            });
        }
        let num = |col: usize| -> Result<f64, HarnessError> {
            let text = &record[col];
            text.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| HarnessError::Schema {
                line,
                column: header[col].to_string(),
                message: format!("`{text}` is not a finite number"),
            })
        };
        let vec3 = |cols: &[usize]| -> Result<Vector3<f64>, HarnessError> { Ok(Vector3::new(num(cols[0])?, num(cols[1])?, num(cols[2])?)) };
        let t = num(lay.imu[0])?;
        if let Some(prev) = frames.last() {
            if !(t > prev.t) {
                return Err(HarnessError::NonMonotone { line, t, previous: prev.t });
            }
        }
        let imu = ImuSample { t, accel: vec3(&lay.imu[1..4])?, gyro: vec3(&lay.imu[4..7])? };
        let mut legs = Vec::with_capacity(2);
        for (leg, ll) in Leg::BOTH.into_iter().zip(&lay.legs) {
            let angles = ll.angles.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?;
            let rates = match &ll.rates {
                Some(cols) => cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?,
                None => {
                    rates_filled = true;
                    vec![0.0; lay.k]
                }
            };
            let contact = match record[ll.contact].to_ascii_lowercase().as_str() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(HarnessError::Schema {
                        line,
                        column: header[ll.contact].to_string(),
                        message: format!("`{other}` is not a contact flag (0/1)"),
                    })
                }
            };
            let marker = match &ll.marker {
                Some(c) => Some(MarkerVector { position: vec3(&c[0..3])?, velocity: vec3(&c[3..6])? }),
                None => None,
            };
            let jt = match ll.time {
                Some(c) => num(c)?,
                None => t,
            };
            legs.push(JointSample { t: jt, leg, angles, rates, contact, marker });
        }
        if let Some(g) = &lay.gt {
            let q = |i: usize| -> Result<[f64; 4], HarnessError> { Ok([num(g[i])?, num(g[i + 1])?, num(g[i + 2])?, num(g[i + 3])?]) };
            states.push(StateElement { r: rotation_from(q(0)?), v: vec3(&g[4..7])?, p: vec3(&g[7..10])?, dr: rotation_from(q(10)?), dp: vec3(&g[14..17])? });
        }
        frames.push(SensorFrame { t, imu, legs: legs.try_into().map_err(|_| HarnessError::Empty)? });
    }
    if frames.is_empty() {
        return Err(HarnessError::Empty);
    }
    if rates_filled {
        for leg in Leg::BOTH {
            if lay.legs[leg.index()].rates.is_none() {
                fill_rates(&mut frames, leg, lay.legs[leg.index()].time.is_some());
            }
        }
    }
    let truth = lay.gt.map(|_| GroundTruth { t: frames.iter().map(|f| f.t).collect(), states, legs: Vec::new() });
    Ok(Dataset { motion, frames, truth, rates_filled })
}

/// Central differences over distinct joint samples (one-sided at the
/// ends). Held samples are recognized by their joint timestamp, or by
/// unchanged angles when no timestamp column exists.
fn fill_rates(frames: &mut [SensorFrame], leg: Leg, timed: bool) {
    let i = leg.index();
    let mut starts: Vec<usize> = Vec::new();
    for (n, f) in frames.iter().enumerate() {
        let new = match starts.last() {
            None => true,
            Some(&s) => {
                let prev = &frames[s].legs[i];
                if timed {
                    f.legs[i].t != prev.t
                } else {
                    f.legs[i].angles != prev.angles
                }
            }
        };
        if new {
            starts.push(n);
        }
    }
    let time = |s: usize| if timed { frames[s].legs[i].t } else { frames[s].t };
    let rates: Vec<Vec<f64>> = (0..starts.len())
        .map(|j| {
            let (a, b) = match (j.checked_sub(1), starts.get(j + 1)) {
                (Some(p), Some(_)) => (starts[p], starts[j + 1]),
                (None, Some(_)) => (starts[j], starts[j + 1]),
                (Some(p), None) => (starts[p], starts[j]),
                (None, None) => return vec![0.0; frames[starts[j]].legs[i].angles.len()],
            };
            let dt = time(b) - time(a);
            frames[a].legs[i].angles.iter().zip(&frames[b].legs[i].angles).map(|(x, y)| (y - x) / dt).collect()
        })
        .collect();
    for (j, &s) in starts.iter().enumerate() {
        let end = starts.get(j + 1).copied().unwrap_or(frames.len());
        for f in &mut frames[s..end] {
            f.legs[i].rates = rates[j].clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> String {
        "# motion=test\nt,ax,ay,az,gx,gy,gz,alphaL_1,contactL,alphaR_1,contactR\n\
         0.0,0,0,9.81,0,0,0,0.0,1,0.0,1\n\
         0.1,0,0,9.81,0,0,0,0.1,1,0.0,0\n\
         0.2,0,0,9.81,0,0,0,0.3,0,0.0,1\n"
            .to_string()
    }

    #[test]
    fn reads_minimal_schema_and_fills_rates() {
        let d = read_csv(tiny().as_bytes()).unwrap();
        assert_eq!(d.motion.as_deref(), Some("test"));
        assert!(d.rates_filled);
        assert!(d.truth.is_none());
        assert_eq!(d.frames.len(), 3);
        let r: Vec<f64> = d.frames.iter().map(|f| f.legs[0].rates[0]).collect();
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 1.5).abs() < 1e-12 && (r[2] - 2.0).abs() < 1e-12);
        assert!(!d.frames[1].legs[1].contact);
    }

    #[test]
    fn truncated_row_names_line() {
        let text = tiny().replace("0.1,0,0,9.81,0,0,0,0.1,1,0.0,0", "0.1,0,0,9.81,0,0,0,0.1");
        let err = read_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, HarnessError::Schema { line: 4, .. }), "{err}");
    }

    #[test]
    fn bad_number_names_column() {
        let text = tiny().replace("0.2,0,0,9.81", "0.2,0,zz,9.81");
        match read_csv(text.as_bytes()).unwrap_err() {
            HarnessError::Schema { line, column, .. } => assert_eq!((line, column.as_str()), (5, "ay")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn non_monotone_time_rejected() {
        let text = tiny().replace("0.2,0,0,9.81", "0.05,0,0,9.81");
        assert!(matches!(read_csv(text.as_bytes()).unwrap_err(), HarnessError::NonMonotone { line: 5, .. }));
    }

    #[test]
    fn missing_required_column() {
        let text = tiny().replace("contactR", "contactX");
        match read_csv(text.as_bytes()).unwrap_err() {
            HarnessError::Schema { column, .. } => assert_eq!(column, "contactR"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn held_samples_differentiate_over_sample_times() {
        let text = "t,ax,ay,az,gx,gy,gz,alphaL_1,contactL,tL,alphaR_1,contactR,tR\n\
                    0.0,0,0,9.81,0,0,0,0.0,1,0.0,0,1,0.0\n\
                    0.1,0,0,9.81,0,0,0,0.0,1,0.0,0,1,0.0\n\
                    0.2,0,0,9.81,0,0,0,0.4,1,0.2,0,1,0.2\n\
                    0.3,0,0,9.81,0,0,0,0.4,1,0.2,0,1,0.2\n";
        let d = read_csv(text.as_bytes()).unwrap();
        assert!(d.frames.iter().all(|f| (f.legs[0].rates[0] - 2.0).abs() < 1e-12));
    }
}
