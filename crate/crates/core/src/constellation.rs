//! Polarization-state constellations.
//!
//! A C_K constellation places `K` circles of latitude on the Poincaré sphere,
//! symmetric around the equator (ε = π/4), and carries an `M`-PSK phase on each
//! of the two polarization branches, for `P = K·M²` states. Bit labels are the
//! concatenation `[k | q_v | q_h]`, each field Gray coded.
//!
//! Internally every index is zero-based and the phase of index `q` is `2πq/M`.
//! Reports (the CSV export) use the one-based convention where phase index `M`
//! stands for phase zero.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-12;

/// A unit-norm Jones vector together with the angles that generate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub eps: f64,
    pub phi_v: f64,
    pub phi_h: f64,
    /// `(x_V, x_H)`.
    pub jones: [Complex64; 2],
}

impl PolarizationState {
    pub fn v(&self) -> Complex64 {
        self.jones[0]
    }

    pub fn h(&self) -> Complex64 {
        self.jones[1]
    }

    pub fn power(&self) -> f64 {
        self.jones[0].norm_sqr() + self.jones[1].norm_sqr()
    }
}

/// Builds `(cos ε·e^{jφ_V}, sin ε·e^{jφ_H})`. Phases are wrapped into `[0, 2π)`.
pub fn jones_vector(eps: f64, phi_v: f64, phi_h: f64) -> Result<PolarizationState> {
    if !(0.0..=FRAC_PI_2).contains(&eps) {
        return Err(Error::Domain(format!("eps = {eps} outside [0, pi/2]")));
    }
    if !phi_v.is_finite() || !phi_h.is_finite() {
        return Err(Error::Domain("non-finite phase".into()));
    }
    let phi_v = phi_v.rem_euclid(TAU);
    let phi_h = phi_h.rem_euclid(TAU);
    let jones = [
        Complex64::from_polar(eps.cos(), phi_v),
        Complex64::from_polar(eps.sin(), phi_h),
    ];
    Ok(PolarizationState {
        eps,
        phi_v,
        phi_h,
        jones,
    })
}

/// Position of a C_K state: latitude circle and the two phase indices (all zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolIndex {
    pub k: usize,
    pub q_v: usize,
    pub q_h: usize,
}

impl SymbolIndex {
    pub fn new(k: usize, q_v: usize, q_h: usize) -> Self {
        Self { k, q_v, q_h }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// `K` circles of latitude with half-spacing `delta_eps`.
    Latitude {
        circles: usize,
        delta_eps: f64,
        eps_list: Vec<f64>,
    },
    /// Dual-polarized spatial modulation: one active branch carrying M-PSK.
    DualPolSm,
}

pub fn gray_encode(n: u32) -> u32 {
    n ^ (n >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut n = g;
    while g > 1 {
        g >>= 1;
        n ^= g;
    }
    n
}

fn log2_exact(n: usize, what: &str) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Domain(format!("{what} = {n} is not a power of two")));
    }
    Ok(n.trailing_zeros())
}

/// A finite polarization-state alphabet with its bit labelling.
#[derive(Debug, Clone)]
pub struct Constellation {
    geometry: Geometry,
    m_psk: usize,
    bits: u32,
    states: Vec<PolarizationState>,
    labels: Vec<u32>,
    index_of_label: Vec<usize>,
    phasors: Vec<Complex64>,
    lat_cos: Vec<f64>,
    lat_sin: Vec<f64>,
}

impl Constellation {
    /// Builds the C_K constellation with `ε_k = π/4 + (2k − K − 1)·Δε`, `k = 1..K`.
    pub fn latitude(circles: usize, m_psk: usize, delta_eps: f64) -> Result<Self> {
        let k_bits = log2_exact(circles, "K")?;
        let phase_bits = log2_exact(m_psk, "M")?;
        if m_psk < 2 {
            return Err(Error::Domain("M must be at least 2".into()));
        }
        let bits = k_bits + 2 * phase_bits;
        if bits > 30 {
            return Err(Error::Domain(format!("{bits} bits per symbol is too many")));
        }
        let delta_eps = if circles == 1 { 0.0 } else { delta_eps };
        if circles > 1 && !(delta_eps.is_finite() && delta_eps > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "delta_eps must be positive for K = {circles}, got {delta_eps}"
            )));
        }
        let eps_list: Vec<f64> = (0..circles)
            .map(|k| FRAC_PI_4 + (2.0 * k as f64 + 1.0 - circles as f64) * delta_eps)
            .collect();
        if let Some(bad) = eps_list.iter().find(|&&e| !(e > 0.0 && e < FRAC_PI_2)) {
            return Err(Error::InvalidGeometry(format!(
                "latitude eps = {bad} escapes (0, pi/2); reduce delta_eps"
            )));
        }

        let m = m_psk;
        let phasors: Vec<Complex64> = (0..m).map(|q| Complex64::cis(TAU * q as f64 / m as f64)).collect();
        let mut states = Vec::with_capacity(circles * m * m);
        let mut labels = Vec::with_capacity(circles * m * m);
        for (k, &eps) in eps_list.iter().enumerate() {
            for q_v in 0..m {
                for q_h in 0..m {
                    let phi_v = TAU * q_v as f64 / m as f64;
                    let phi_h = TAU * q_h as f64 / m as f64;
                    states.push(jones_vector(eps, phi_v, phi_h)?);
                    labels.push(
                        (gray_encode(k as u32) << (2 * phase_bits))
                            | (gray_encode(q_v as u32) << phase_bits)
                            | gray_encode(q_h as u32),
                    );
                }
            }
        }
        let lat_cos = eps_list.iter().map(|e| e.cos()).collect();
        let lat_sin = eps_list.iter().map(|e| e.sin()).collect();
        Self::assemble(
            Geometry::Latitude {
                circles,
                delta_eps,
                eps_list,
            },
            m_psk,
            bits,
            states,
            labels,
            phasors,
            lat_cos,
            lat_sin,
        )
    }

    /// The dual-polarized spatial-modulation subset `{(e^{j2πq/M}, 0)} ∪ {(0, e^{j2πq/M})}`.
    ///
    /// Labels are `[branch | gray(q)]` with branch 0 = vertical.
    pub fn dual_pol_sm(m_psk: usize) -> Result<Self> {
        let phase_bits = log2_exact(m_psk, "M")?;
        if m_psk < 2 {
            return Err(Error::Domain("M must be at least 2".into()));
        }
        let m = m_psk;
        let phasors: Vec<Complex64> = (0..m).map(|q| Complex64::cis(TAU * q as f64 / m as f64)).collect();
        let zero = Complex64::new(0.0, 0.0);
        let mut states = Vec::with_capacity(2 * m);
        let mut labels = Vec::with_capacity(2 * m);
        for branch in 0..2u32 {
            for q in 0..m {
                let phi = TAU * q as f64 / m as f64;
                let state = if branch == 0 {
                    PolarizationState {
                        eps: 0.0,
                        phi_v: phi,
                        phi_h: 0.0,
                        jones: [phasors[q], zero],
                    }
                } else {
                    PolarizationState {
                        eps: FRAC_PI_2,
                        phi_v: 0.0,
                        phi_h: phi,
                        jones: [zero, phasors[q]],
                    }
                };
                states.push(state);
                labels.push((branch << phase_bits) | gray_encode(q as u32));
            }
        }
        Self::assemble(
            Geometry::DualPolSm,
            m_psk,
            phase_bits + 1,
            states,
            labels,
            phasors,
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        geometry: Geometry,
        m_psk: usize,
        bits: u32,
        states: Vec<PolarizationState>,
        labels: Vec<u32>,
        phasors: Vec<Complex64>,
        lat_cos: Vec<f64>,
        lat_sin: Vec<f64>,
    ) -> Result<Self> {
        debug_assert_eq!(states.len(), 1 << bits);
        for s in &states {
            if (s.power() - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidGeometry("state is not unit norm".into()));
            }
        }
        let mut index_of_label = vec![usize::MAX; states.len()];
        for (i, &l) in labels.iter().enumerate() {
            index_of_label[l as usize] = i;
        }
        Ok(Self {
            geometry,
            m_psk,
            bits,
            states,
            labels,
            index_of_label,
            phasors,
            lat_cos,
            lat_sin,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn is_latitude(&self) -> bool {
        matches!(self.geometry, Geometry::Latitude { .. })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn m_psk(&self) -> usize {
        self.m_psk
    }

    /// Number of latitude circles; DP-SM reports its two branches.
    pub fn circles(&self) -> usize {
        match &self.geometry {
            Geometry::Latitude { circles, .. } => *circles,
            Geometry::DualPolSm => 2,
        }
    }

    pub fn delta_eps(&self) -> Option<f64> {
        match &self.geometry {
            Geometry::Latitude { delta_eps, circles, .. } if *circles > 1 => Some(*delta_eps),
            _ => None,
        }
    }

    pub fn eps_list(&self) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Latitude { eps_list, .. } => Some(eps_list),
            Geometry::DualPolSm => None,
        }
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn states(&self) -> &[PolarizationState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &PolarizationState {
        &self.states[index]
    }

    /// `e^{j2πq/M}`.
    pub fn phasor(&self, q: usize) -> Complex64 {
        self.phasors[q % self.m_psk]
    }

    pub fn lat_cos(&self, k: usize) -> f64 {
        self.lat_cos[k]
    }

    pub fn lat_sin(&self, k: usize) -> f64 {
        self.lat_sin[k]
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn index_of_label(&self, label: u32) -> Result<usize> {
        self.index_of_label
            .get(label as usize)
            .copied()
            .ok_or_else(|| Error::Domain(format!("label {label} has more than {} bits", self.bits)))
    }

    /// Flat index of a C_K symbol; lexicographic in `(k, q_v, q_h)`.
    pub fn index_of(&self, sym: SymbolIndex) -> usize {
        let m = self.m_psk;
        (sym.k * m + sym.q_v) * m + sym.q_h
    }

    /// Inverse of [`Constellation::index_of`]; `None` for DP-SM.
    pub fn symbol(&self, index: usize) -> Option<SymbolIndex> {
        if !self.is_latitude() || index >= self.len() {
            return None;
        }
        let m = self.m_psk;
        Some(SymbolIndex::new(index / (m * m), (index / m) % m, index % m))
    }

    fn check_symbol(&self, sym: SymbolIndex) -> Result<()> {
        if !self.is_latitude() {
            return Err(Error::Domain("symbol indices apply to C_K constellations".into()));
        }
        if sym.k >= self.circles() || sym.q_v >= self.m_psk || sym.q_h >= self.m_psk {
            return Err(Error::Domain(format!("{sym:?} outside the constellation")));
        }
        Ok(())
    }

    /// Maps an MSB-first bit block of width `log2(K·M²)` to its symbol.
    pub fn bits_to_symbol(&self, bits: &[bool]) -> Result<SymbolIndex> {
        if bits.len() != self.bits as usize {
            return Err(Error::Domain(format!(
                "expected {} bits, got {}",
                self.bits,
                bits.len()
            )));
        }
        let label = bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
        let index = self.index_of_label(label)?;
        self.symbol(index)
            .ok_or_else(|| Error::Domain("symbol indices apply to C_K constellations".into()))
    }

    pub fn symbol_to_bits(&self, sym: SymbolIndex) -> Result<Vec<bool>> {
        self.check_symbol(sym)?;
        let label = self.labels[self.index_of(sym)];
        Ok((0..self.bits).rev().map(|b| (label >> b) & 1 == 1).collect())
    }

    /// Number of differing label bits between two flat indices.
    pub fn hamming(&self, a: usize, b: usize) -> u32 {
        (self.labels[a] ^ self.labels[b]).count_ones()
    }

    pub fn hamming_distance(&self, a: SymbolIndex, b: SymbolIndex) -> Result<u32> {
        self.check_symbol(a)?;
        self.check_symbol(b)?;
        Ok(self.hamming(self.index_of(a), self.index_of(b)))
    }

    /// Bits per channel use, `log2(P)`.
    pub fn data_rate(&self) -> f64 {
        self.bits as f64
    }

    /// Rate with root-raised-cosine pulses: `T_s·log2(P) / (N_s·(1 + α))`.
    pub fn rrc_rate(&self, samples_per_pulse: u32, rolloff: f64, symbol_period: f64) -> Result<f64> {
        if samples_per_pulse == 0 {
            return Err(Error::Domain("N_s must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&rolloff) {
            return Err(Error::Domain(format!("rolloff {rolloff} outside [0, 1]")));
        }
        if !(symbol_period > 0.0) {
            return Err(Error::Domain("symbol period must be positive".into()));
        }
        Ok(symbol_period * self.data_rate() / (samples_per_pulse as f64 * (1.0 + rolloff)))
    }

    /// One-based `(k, q_v, q_h)` used in reports; a phase index of `M` means phase zero.
    /// For DP-SM `k` is the active branch (1 = V, 2 = H) and the idle field is 0.
    pub fn report_indices(&self, index: usize) -> (usize, usize, usize) {
        let m = self.m_psk;
        let one_based = |q: usize| if q == 0 { m } else { q };
        match self.geometry {
            Geometry::Latitude { .. } => {
                let s = self.symbol(index).expect("index in range");
                (s.k + 1, one_based(s.q_v), one_based(s.q_h))
            }
            Geometry::DualPolSm => {
                let branch = index / m;
                let q = one_based(index % m);
                if branch == 0 {
                    (1, q, 0)
                } else {
                    (2, 0, q)
                }
            }
        }
    }

    /// CSV with columns `index,bits,k,q_v,q_h,eps,re_xV,im_xV,re_xH,im_xH`, one row per state.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,bits,k,q_v,q_h,eps,re_xV,im_xV,re_xH,im_xH")?;
        for (i, s) in self.states.iter().enumerate() {
            let (k, q_v, q_h) = self.report_indices(i);
            writeln!(
                w,
                "{},{:0width$b},{},{},{},{},{},{},{},{}",
                i,
                self.labels[i],
                k,
                q_v,
                q_h,
                s.eps,
                s.jones[0].re,
                s.jones[0].im,
                s.jones[1].re,
                s.jones[1].im,
                width = self.bits as usize
            )?;
        }
        Ok(())
    }
}

/// Largest Δε that keeps every latitude strictly inside `(0, π/2)`.
pub fn max_delta_eps(circles: usize) -> f64 {
    if circles <= 1 {
        f64::INFINITY
    } else {
        PI / (4.0 * (circles - 1) as f64)
    }
}
