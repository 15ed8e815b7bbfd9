//! Observation frames, orientation-invariant magnetic features and the
//! room-labelled fingerprint database.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Fill value for anchors not heard in a frame, in dBm.
pub const DEFAULT_MISSING_FILL: f64 = -100.0;
/// Valid RSSI interval in dBm.
pub const RSSI_MIN: f64 = -120.0;
pub const RSSI_MAX: f64 = 0.0;
/// Collection window of one Wi-Fi scan (3 Hz).
pub const SCAN_WINDOW_S: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticSignature<T> {
    /// Signed projection onto the gravity axis, µT.
    pub mf_v: T,
    /// Magnitude of the component orthogonal to gravity, µT.
    pub mf_h: T,
}

/// Splits a phone-frame magnetometer reading into vertical and horizontal
/// components using the gravity vector measured in the same frame.
pub fn decompose_mf<T: Real>(mf: Vec3<T>, gravity: Vec3<T>) -> Result<MagneticSignature<T>> {
    let g = gravity.norm();
    if !(g > T::zero()) || !g.is_finite() {
        return Err(Error::UndefinedVerticalAxis);
    }
    let axis = gravity.scale(T::one() / g);
    let mf_v = mf.dot(&axis);
    let mf_h = mf.sub(&axis.scale(mf_v)).norm();
    Ok(MagneticSignature { mf_v, mf_h })
}

/// One time step of sensor data.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFrame<T> {
    timestamp: T,
    rssi: BTreeMap<String, T>,
    mf: Vec3<T>,
    gravity: Vec3<T>,
}

impl<T: Real> ObservationFrame<T> {
    pub fn new(
        timestamp: T,
        rssi: BTreeMap<String, T>,
        mf: Vec3<T>,
        gravity: Vec3<T>,
    ) -> Result<Self> {
        let (lo, hi) = (lit::<T>(RSSI_MIN), lit::<T>(RSSI_MAX));
        if let Some((ap, v)) = rssi.iter().find(|(_, v)| !(**v >= lo && **v <= hi)) {
            return Err(Error::InvalidParameter(format!(
                "rssi for `{ap}` out of [-120, 0] dBm: {v}"
            )));
        }
        if !(gravity.norm() > T::zero()) {
            return Err(Error::UndefinedVerticalAxis);
        }
        Ok(Self {
            timestamp,
            rssi,
            mf,
            gravity,
        })
    }

    pub fn timestamp(&self) -> T {
        self.timestamp
    }

    pub fn rssi(&self) -> &BTreeMap<String, T> {
        &self.rssi
    }

    pub fn mf(&self) -> Vec3<T> {
        self.mf
    }

    pub fn gravity(&self) -> Vec3<T> {
        self.gravity
    }

    pub fn signature(&self) -> MagneticSignature<T> {
        decompose_mf(self.mf, self.gravity).expect("gravity validated at construction")
    }
}

/// `[rssi(ap_1), .., rssi(ap_k), mf_v, mf_h]`, unheard anchors replaced by `missing_fill`.
pub fn frame_to_features<T: Real>(
    frame: &ObservationFrame<T>,
    ap_list: &[String],
    missing_fill: T,
) -> Vec<T> {
    let sig = frame.signature();
    ap_list
        .iter()
        .map(|ap| frame.rssi.get(ap).copied().unwrap_or(missing_fill))
        .chain([sig.mf_v, sig.mf_h])
        .collect()
}

/// A raw Wi-Fi reading from a scan stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RssiReading<T> {
    pub t: T,
    pub ap: String,
    pub dbm: T,
}

/// A raw magnetometer sample with its gravity vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagSample<T> {
    pub t: T,
    pub mf: Vec3<T>,
    pub gravity: Vec3<T>,
}

/// Pairs asynchronous sensor streams into a frame at `timestamp`: the latest
/// reading per anchor inside `(timestamp - window, timestamp]` and the latest
/// magnetometer sample at or before `timestamp`.
pub fn assemble_frame<T: Real>(
    timestamp: T,
    window: T,
    readings: &[RssiReading<T>],
    mag: &[MagSample<T>],
) -> Result<ObservationFrame<T>> {
    let mut latest: BTreeMap<String, (T, T)> = BTreeMap::new();
    for r in readings
        .iter()
        .filter(|r| r.t <= timestamp && r.t > timestamp - window)
    {
        let dbm = r.dbm.max(lit(RSSI_MIN)).min(lit(RSSI_MAX));
        match latest.get(&r.ap) {
            Some((t, _)) if *t > r.t => {}
            _ => {
                latest.insert(r.ap.clone(), (r.t, dbm));
            }
        }
    }
    let sample = mag
        .iter()
        .filter(|m| m.t <= timestamp)
        .max_by(|a, b| a.t.partial_cmp(&b.t).expect("finite timestamps"))
        .ok_or_else(|| {
            Error::InvalidParameter("no magnetometer sample before frame".to_string())
        })?;
    ObservationFrame::new(
        timestamp,
        latest.into_iter().map(|(k, (_, v))| (k, v)).collect(),
        sample.mf,
        sample.gravity,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    pub features: Vec<T>,
    pub label: String,
}

/// Labelled `<fingerprint, room>` instances.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDatabase<T> {
    pub ap_list: Vec<String>,
    pub instances: Vec<Instance<T>>,
    pub missing_fill: T,
}

/// Which columns of a fingerprint enter a classifier.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    /// Anchor subset (in this order); `None` keeps every anchor.
    pub aps: Option<Vec<String>>,
    /// Drop `mf_v`/`mf_h` when false.
    pub include_mf: bool,
}

impl FeatureSet {
    pub fn all() -> Self {
        Self {
            aps: None,
            include_mf: true,
        }
    }

    pub fn wifi_only() -> Self {
        Self {
            aps: None,
            include_mf: false,
        }
    }
}

/// Plain labelled feature matrix consumed by the classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Vec<Vec<T>>,
    pub labels: Vec<String>,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

impl<T: Real> FingerprintDatabase<T> {
    pub fn new(ap_list: Vec<String>, missing_fill: T) -> Self {
        Self {
            ap_list,
            instances: Vec::new(),
            missing_fill,
        }
    }

    pub fn width(&self) -> usize {
        self.ap_list.len() + 2
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn push(&mut self, features: Vec<T>, label: impl Into<String>) -> Result<()> {
        if features.len() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                got: features.len(),
            });
        }
        self.instances.push(Instance {
            features,
            label: label.into(),
        });
        Ok(())
    }

    pub fn push_frame(&mut self, frame: &ObservationFrame<T>, label: impl Into<String>) {
        let f = frame_to_features(frame, &self.ap_list, self.missing_fill);
        self.instances.push(Instance {
            features: f,
            label: label.into(),
        });
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self
            .instances
            .iter()
            .map(|i| i.label.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        c.sort();
        c
    }

    pub fn column_indices(&self, set: &FeatureSet) -> Result<Vec<usize>> {
        let k = self.ap_list.len();
        let mut cols = match &set.aps {
            None => (0..k).collect::<Vec<_>>(),
            Some(aps) => aps
                .iter()
                .map(|ap| {
                    self.ap_list
                        .iter()
                        .position(|a| a == ap)
                        .ok_or_else(|| Error::UnknownAnchor(ap.clone()))
                })
                .collect::<Result<_>>()?,
        };
        if set.include_mf {
            cols.extend([k, k + 1]);
        }
        Ok(cols)
    }

    pub fn to_dataset(&self, set: &FeatureSet) -> Result<Dataset<T>> {
        let cols = self.column_indices(set)?;
        Ok(Dataset {
            features: self
                .instances
                .iter()
                .map(|i| cols.iter().map(|&c| i.features[c]).collect())
                .collect(),
            labels: self.instances.iter().map(|i| i.label.clone()).collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let mut header = vec!["room".to_string()];
        header.extend(self.ap_list.iter().cloned());
        header.extend(["mf_v".to_string(), "mf_h".to_string()]);
        out.write_record(&header)?;
        let k = self.ap_list.len();
        for inst in &self.instances {
            let mut row = Vec::with_capacity(inst.features.len() + 1);
            row.push(inst.label.clone());
            for (c, v) in inst.features.iter().enumerate() {
                if c < k && *v == self.missing_fill {
                    row.push(String::new());
                } else {
                    row.push(v.to_string());
                }
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses the canonical CSV form. `known_rooms`, when given, restricts labels.
    pub fn read_csv<R: Read>(r: R, known_rooms: Option<&[String]>, missing_fill: T) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(r);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(h) => h?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".to_string(),
                })
            }
        };
        let cols: Vec<&str> = header.iter().collect();
        let n = cols.len();
        if n < 3 || cols[0] != "room" || cols[n - 2] != "mf_v" || cols[n - 1] != "mf_h" {
            return Err(Error::Parse {
                line: 1,
                message: "header must be `room,<aps..>,mf_v,mf_h`".to_string(),
            });
        }
        let ap_list: Vec<String> = cols[1..n - 2].iter().map(|s| s.to_string()).collect();
        let mut db = Self::new(ap_list, missing_fill);
        let k = db.ap_list.len();
        for rec in records {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != n {
                return Err(Error::Parse {
                    line,
                    message: format!("ragged row: expected {n} fields, found {}", rec.len()),
                });
            }
            let label = rec[0].to_string();
            if let Some(rooms) = known_rooms {
                if !rooms.iter().any(|r| *r == label) {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown room label `{label}`"),
                    });
                }
            }
            let mut features = Vec::with_capacity(k + 2);
            for (c, field) in rec.iter().enumerate().skip(1) {
                if field.is_empty() && c <= k {
                    features.push(missing_fill);
                    continue;
                }
                let v: T = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric field `{field}` in column `{}`", cols[c]),
                })?;
                features.push(v);
            }
            db.instances.push(Instance { features, label });
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>, known_rooms: Option<&[String]>, missing_fill: T) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, known_rooms, missing_fill)
    }
}

/// Writes frames as `t,<aps..>,mfx,mfy,mfz,gx,gy,gz`; unheard anchors are empty cells.
pub fn write_observations<T: Real, W: Write>(
    w: W,
    ap_list: &[String],
    frames: &[ObservationFrame<T>],
) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(ap_list.iter().cloned());
    header.extend(["mfx", "mfy", "mfz", "gx", "gy", "gz"].map(String::from));
    out.write_record(&header)?;
    for f in frames {
        let mut row = vec![f.timestamp.to_string()];
        for ap in ap_list {
            row.push(f.rssi.get(ap).map(|v| v.to_string()).unwrap_or_default());
        }
        for v in [f.mf.x, f.mf.y, f.mf.z, f.gravity.x, f.gravity.y, f.gravity.z] {
            row.push(v.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_observations`]; returns the anchor columns and the frames.
pub fn read_observations<T: Real, R: Read>(r: R) -> Result<(Vec<String>, Vec<ObservationFrame<T>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut records = rdr.records();
    let header = records.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".to_string(),
    })??;
    let n = header.len();
    let tail = ["mfx", "mfy", "mfz", "gx", "gy", "gz"];
    if n < 7 || &header[0] != "t" || header.iter().skip(n - 6).ne(tail.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `t,<aps..>,mfx,mfy,mfz,gx,gy,gz`".to_string(),
        });
    }
    let aps: Vec<String> = header.iter().skip(1).take(n - 7).map(String::from).collect();
    let mut frames = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("ragged row: expected {n} fields, found {}", rec.len()),
            });
        }
        let num = |i: usize| -> Result<T> {
            rec[i].parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric field `{}`", &rec[i]),
            })
        };
        let mut rssi = BTreeMap::new();
        for (i, ap) in aps.iter().enumerate() {
            if !rec[i + 1].is_empty() {
                rssi.insert(ap.clone(), num(i + 1)?);
            }
        }
        let b = n - 6;
        let frame = ObservationFrame::new(
            num(0)?,
            rssi,
            Vec3::new(num(b)?, num(b + 1)?, num(b + 2)?),
            Vec3::new(num(b + 3)?, num(b + 4)?, num(b + 5)?),
        )
        .map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        frames.push(frame);
    }
    Ok((aps, frames))
}
