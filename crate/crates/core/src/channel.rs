//! Dual-polarized channels: i.i.d. Rayleigh draws with a fixed cross-polar
//! leakage `X`, the noisy received signal, and replay of measured
//! S-parameter sweeps.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constellation::PolarizationState;
use crate::error::{Error, Result};

/// A `2N_R × 2` channel matrix. Row `2n` is receive antenna `n`'s vertical
/// port `(h_VV, √X·h_VH)`, row `2n + 1` its horizontal port `(√X·h_HV, h_HH)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    n_r: usize,
    x_linear: f64,
    rows: Vec<[Complex64; 2]>,
}

impl ChannelRealization {
    pub fn from_rows(n_r: usize, x_linear: f64, rows: Vec<[Complex64; 2]>) -> Result<Self> {
        if n_r == 0 {
            return Err(Error::Domain("n_r must be at least 1".into()));
        }
        if rows.len() != 2 * n_r {
            return Err(Error::Domain(format!(
                "expected {} rows for n_r = {n_r}, got {}",
                2 * n_r,
                rows.len()
            )));
        }
        Ok(Self { n_r, x_linear, rows })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn x_linear(&self) -> f64 {
        self.x_linear
    }

    pub fn rows(&self) -> &[[Complex64; 2]] {
        &self.rows
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    /// `H·x`.
    pub fn apply(&self, x: &[Complex64; 2]) -> Vec<Complex64> {
        self.rows.iter().map(|r| r[0] * x[0] + r[1] * x[1]).collect()
    }

    /// `‖y − H·x‖²`.
    pub fn residual_energy(&self, y: &[Complex64], x: &[Complex64; 2]) -> f64 {
        self.rows
            .iter()
            .zip(y)
            .map(|(r, &yi)| (yi - r[0] * x[0] - r[1] * x[1]).norm_sqr())
            .sum()
    }
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one Rayleigh realization with cross-polar power ratio `x_linear`.
pub fn sample_rayleigh_channel<R: Rng + ?Sized>(n_r: usize, x_linear: f64, rng: &mut R) -> Result<ChannelRealization> {
    if n_r == 0 {
        return Err(Error::Domain("n_r must be at least 1".into()));
    }
    if !(x_linear >= 0.0 && x_linear.is_finite()) {
        return Err(Error::Domain(format!("X = {x_linear} must be finite and >= 0")));
    }
    let leak = x_linear.sqrt();
    let mut rows = Vec::with_capacity(2 * n_r);
    for _ in 0..n_r {
        let vv = complex_gaussian(rng);
        let vh = complex_gaussian(rng) * leak;
        let hv = complex_gaussian(rng) * leak;
        let hh = complex_gaussian(rng);
        rows.push([vv, vh]);
        rows.push([hv, hh]);
    }
    Ok(ChannelRealization { n_r, x_linear, rows })
}

/// Received vector `y` at linear SNR `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSample {
    pub y: Vec<Complex64>,
    pub rho: f64,
}

/// `y = H·x + w/√ρ` for a given noise vector `w`. `rho = ∞` gives `y = H·x`.
pub fn transmit_with_noise(
    h: &ChannelRealization,
    state: &PolarizationState,
    rho: f64,
    noise: &[Complex64],
) -> Result<ReceivedSample> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho = {rho} must be positive")));
    }
    if noise.len() != h.rows.len() {
        return Err(Error::Domain("noise length does not match the channel".into()));
    }
    let scale = if rho.is_infinite() { 0.0 } else { 1.0 / rho.sqrt() };
    let y = h
        .apply(&state.jones)
        .into_iter()
        .zip(noise)
        .map(|(s, &w)| s + w * scale)
        .collect();
    Ok(ReceivedSample { y, rho })
}

/// `y = H·x + w/√ρ` with fresh unit-variance noise.
pub fn transmit<R: Rng + ?Sized>(
    h: &ChannelRealization,
    state: &PolarizationState,
    rho: f64,
    rng: &mut R,
) -> Result<ReceivedSample> {
    let noise: Vec<Complex64> = (0..h.rows.len()).map(|_| complex_gaussian(rng)).collect();
    transmit_with_noise(h, state, rho, &noise)
}

/// Optional JSON sidecar describing a frequency sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub bandwidth_hz: f64,
    pub tone_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
}

/// Index of each polarization pair inside a measured entry.
pub const VV: usize = 0;
pub const VH: usize = 1;
pub const HV: usize = 2;
pub const HH: usize = 3;

pub const MEASURED_CSV_HEADER: &str = "point_id,freq_hz,re_vv,im_vv,re_vh,im_vh,re_hv,im_hv,re_hh,im_hh";

/// Cross-polar ratio estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XpiEstimate {
    pub linear: f64,
    pub db: f64,
}

/// A measured sweep over tones × receiver points, raw and power-normalized.
#[derive(Debug, Clone)]
pub struct MeasuredChannelSet {
    tones: Vec<f64>,
    points: Vec<String>,
    raw: Vec<[Complex64; 4]>,
    normalized: Vec<[Complex64; 4]>,
    metadata: Option<SweepMetadata>,
}

impl MeasuredChannelSet {
    /// `raw` is point-major: entry `p·T + t` belongs to point `p`, tone `t`.
    pub fn from_raw(tones: Vec<f64>, points: Vec<String>, raw: Vec<[Complex64; 4]>) -> Result<Self> {
        if tones.is_empty() || points.is_empty() {
            return Err(Error::Data("measured set has no tones or no points".into()));
        }
        if raw.len() != tones.len() * points.len() {
            return Err(Error::Data(format!(
                "expected {} entries, got {}",
                tones.len() * points.len(),
                raw.len()
            )));
        }
        if raw.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Data("non-finite S-parameter value".into()));
        }
        let normalized = normalize_per_point(&raw, tones.len())?;
        Ok(Self {
            tones,
            points,
            raw,
            normalized,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, meta: SweepMetadata) -> Result<Self> {
        if meta.tone_count != self.tones.len() {
            return Err(Error::Data(format!(
                "sidecar declares {} tones, file has {}",
                meta.tone_count,
                self.tones.len()
            )));
        }
        self.metadata = Some(meta);
        Ok(self)
    }

    /// Parses the measured-channel CSV. Every point must carry the same tone set.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let expected: Vec<&str> = MEASURED_CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Format {
                line: 1,
                msg: format!("expected header `{MEASURED_CSV_HEADER}`"),
            });
        }

        let mut point_order: Vec<String> = Vec::new();
        let mut point_ix: HashMap<String, usize> = HashMap::new();
        let mut per_point: Vec<Vec<(f64, [Complex64; 4], u64)>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                csv_error(e, line)
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != expected.len() {
                return Err(Error::Format {
                    line,
                    msg: format!("expected {} fields, got {}", expected.len(), rec.len()),
                });
            }
            let num = |i: usize| -> Result<f64> {
                let field = &rec[i];
                let v: f64 = field.parse().map_err(|_| Error::Format {
                    line,
                    msg: format!("column `{}`: `{field}` is not a number", expected[i]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "line {line}: column `{}` is not finite",
                        expected[i]
                    )));
                }
                Ok(v)
            };
            let id = rec[0].to_string();
            if id.is_empty() {
                return Err(Error::Format {
                    line,
                    msg: "empty point_id".into(),
                });
            }
            let freq = num(1)?;
            let mut entry = [Complex64::new(0.0, 0.0); 4];
            for (pl, slot) in entry.iter_mut().enumerate() {
                *slot = Complex64::new(num(2 + 2 * pl)?, num(3 + 2 * pl)?);
            }
            let p = *point_ix.entry(id.clone()).or_insert_with(|| {
                point_order.push(id);
                per_point.push(Vec::new());
                per_point.len() - 1
            });
            per_point[p].push((freq, entry, line));
        }
        if per_point.is_empty() {
            return Err(Error::Format {
                line: 1,
                msg: "no data rows".into(),
            });
        }

        for rows in per_point.iter_mut() {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Format {
                    line: w[1].2,
                    msg: format!("duplicate tone {} Hz for this point", w[1].0),
                });
            }
        }
        let tones: Vec<f64> = per_point[0].iter().map(|r| r.0).collect();
        for (p, rows) in per_point.iter().enumerate() {
            let these: Vec<f64> = rows.iter().map(|r| r.0).collect();
            if these != tones {
                let missing = tones
                    .iter()
                    .chain(these.iter())
                    .find(|f| !these.contains(f) || !tones.contains(f))
                    .copied()
                    .unwrap_or(f64::NAN);
                return Err(Error::Format {
                    line: rows.last().map(|r| r.2).unwrap_or(0),
                    msg: format!(
                        "point `{}` does not cover the common tone set (tone {missing} Hz)",
                        point_order[p]
                    ),
                });
            }
        }
        let raw = per_point
            .into_iter()
            .flat_map(|rows| rows.into_iter().map(|r| r.1))
            .collect();
        Self::from_raw(tones, point_order, raw)
    }

    /// Reads a CSV file plus an optional JSON sidecar.
    pub fn ingest(csv_path: &Path, sidecar: Option<&Path>) -> Result<Self> {
        let file = std::fs::File::open(csv_path)?;
        let set = Self::read_csv(std::io::BufReader::new(file))?;
        match sidecar {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let meta: SweepMetadata = serde_json::from_str(&text).map_err(|e| Error::Format {
                    line: e.line() as u64,
                    msg: format!("sidecar: {e}"),
                })?;
                set.with_metadata(meta)
            }
            None => Ok(set),
        }
    }

    /// Writes either the raw or the normalized values in the ingest schema.
    pub fn write_csv<W: Write>(&self, mut w: W, normalized: bool) -> Result<()> {
        let data = if normalized { &self.normalized } else { &self.raw };
        writeln!(w, "{MEASURED_CSV_HEADER}")?;
        let t_count = self.tones.len();
        for (p, id) in self.points.iter().enumerate() {
            for (t, f) in self.tones.iter().enumerate() {
                let e = &data[p * t_count + t];
                writeln!(
                    w,
                    "{id},{f},{},{},{},{},{},{},{},{}",
                    e[VV].re, e[VV].im, e[VH].re, e[VH].im, e[HV].re, e[HV].im, e[HH].re, e[HH].im
                )?;
            }
        }
        Ok(())
    }

    pub fn tones(&self) -> &[f64] {
        &self.tones
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn metadata(&self) -> Option<&SweepMetadata> {
        self.metadata.as_ref()
    }

    pub fn raw(&self) -> &[[Complex64; 4]] {
        &self.raw
    }

    pub fn normalized(&self) -> &[[Complex64; 4]] {
        &self.normalized
    }

    pub fn normalized_at(&self, tone: usize, point: usize) -> Option<&[Complex64; 4]> {
        if tone >= self.tones.len() || point >= self.points.len() {
            return None;
        }
        self.normalized.get(point * self.tones.len() + tone)
    }

    /// Mean of `|H_VV|² + |H_HH|²` over all tones and points of the normalized set.
    pub fn mean_copolar_power(&self) -> f64 {
        self.normalized
            .iter()
            .map(|e| e[VV].norm_sqr() + e[HH].norm_sqr())
            .sum::<f64>()
            / self.normalized.len() as f64
    }

    /// Cross-polar to co-polar power ratio summed over points and tones.
    pub fn estimate_xpi(&self) -> Result<XpiEstimate> {
        xpi_of(self.normalized.iter())
    }

    /// 2×2 realization assembled from the normalized entry at `(tone, point)`.
    pub fn draw_at(&self, tone: usize, point: usize) -> Result<ChannelRealization> {
        let e = self.normalized_at(tone, point).ok_or_else(|| {
            Error::Range(format!(
                "selector (tone {tone}, point {point}) outside {} tones × {} points",
                self.tones.len(),
                self.points.len()
            ))
        })?;
        let x = self.estimate_xpi().map(|x| x.linear).unwrap_or(0.0);
        ChannelRealization::from_rows(1, x, vec![[e[VV], e[VH]], [e[HV], e[HH]]])
    }

    /// Uniformly random `(tone, point)` replay.
    pub fn draw_random<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelRealization> {
        let t = rng.random_range(0..self.tones.len());
        let p = rng.random_range(0..self.points.len());
        self.draw_at(t, p)
    }
}

fn csv_error(e: csv::Error, line: u64) -> Error {
    Error::Format {
        line,
        msg: e.to_string(),
    }
}

fn xpi_of<'a>(entries: impl Iterator<Item = &'a [Complex64; 4]>) -> Result<XpiEstimate> {
    let (mut cross, mut co) = (0.0, 0.0);
    for e in entries {
        cross += e[VH].norm_sqr() + e[HV].norm_sqr();
        co += e[VV].norm_sqr() + e[HH].norm_sqr();
    }
    if !(co > 0.0) {
        return Err(Error::Degenerate("zero co-polar power".into()));
    }
    let linear = cross / co;
    Ok(XpiEstimate {
        linear,
        db: 10.0 * linear.log10(),
    })
}

/// Scales each point so its tone-averaged co-polar power `|H_VV|² + |H_HH|²` is 2.
pub fn normalize_per_point(raw: &[[Complex64; 4]], tone_count: usize) -> Result<Vec<[Complex64; 4]>> {
    let mut out = Vec::with_capacity(raw.len());
    for (p, chunk) in raw.chunks(tone_count).enumerate() {
        let co: f64 = chunk.iter().map(|e| e[VV].norm_sqr() + e[HH].norm_sqr()).sum::<f64>() / tone_count as f64;
        if !(co > 0.0) {
            return Err(Error::Degenerate(format!("point #{p} has zero co-polar power")));
        }
        let g = (2.0 / co).sqrt();
        out.extend(chunk.iter().map(|e| e.map(|z| z * g)));
    }
    Ok(out)
}

/// Estimates the cross-polar ratio from a sequence of realizations (e.g. a replay).
pub fn xpi_from_realizations<'a>(draws: impl Iterator<Item = &'a ChannelRealization>) -> Result<XpiEstimate> {
    let entries: Vec<[Complex64; 4]> = draws
        .flat_map(|h| {
            h.rows
                .chunks(2)
                .map(|b| [b[0][0], b[0][1], b[1][0], b[1][1]])
                .collect::<Vec<_>>()
        })
        .collect();
    xpi_of(entries.iter())
}
