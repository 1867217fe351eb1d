//! Beamforming weights and the link metrics built on them.
//!
//! Gains are always `|wᴴh|²` with `w` unit-norm, so full array gain toward a
//! unit-modulus channel of `n` elements is `n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{point_response, steering_vector, AmplitudeModel, CarrierSpec, ChannelVector, Direction};
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, Dim, Point};

/// Floor applied to normalized gains so that exact nulls stay finite.
pub const DB_FLOOR: f64 = -160.0;

/// Relative singular-value cutoff for the zero-forcing pseudoinverse.
pub const PINV_RELATIVE_THRESHOLD: f64 = 1e-12;

/// Unit-norm antenna weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<Complex64>);

impl Weights {
    /// Normalizes `entries` to unit norm.
    pub fn normalized(entries: Vec<Complex64>) -> Result<Self> {
        let norm = entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("weights must be non-zero and finite"));
        }
        Ok(Weights(entries.into_iter().map(|z| z / norm).collect()))
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `wᴴh`.
    pub fn response(&self, h: &[Complex64]) -> Complex64 {
        self.0.iter().zip(h).map(|(w, z)| w.conj() * z).sum()
    }
}

impl Serialize for Weights {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|z| [z.re, z.im]))
    }
}

impl<'de> Deserialize<'de> for Weights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Weights::normalized(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
}

impl LinkBudget {
    /// Transmit-power to noise-power ratio, linear.
    pub fn snr_scale(&self) -> f64 {
        10f64.powf((self.tx_power_dbm - self.noise_power_dbm) / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power_dbm.is_finite() && self.noise_power_dbm.is_finite()) {
            return Err(Error::invalid("link budget powers must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamPattern {
    pub theta_grid_deg: Vec<f64>,
    /// Normalized so the largest entry is 0 dB; floored at [`DB_FLOOR`].
    pub gains_db: Vec<f64>,
    /// Un-normalized gain at the peak sample, `max |wᴴa(θ)|²`.
    pub peak_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocusMap {
    pub points: Vec<Point>,
    /// Normalized so the largest entry is 0 dB; floored at [`DB_FLOOR`].
    pub gains_db: Vec<f64>,
    /// Un-normalized gain at the peak sample, `max |wᴴh|²`.
    pub peak_gain: f64,
}

impl FocusMap {
    /// Number of samples within 3 dB of the peak.
    pub fn focal_cell_count(&self) -> usize {
        self.gains_db
            .iter()
            .filter(|&&g| g >= 10.0 * 0.5f64.log10())
            .count()
    }

    pub fn peak_index(&self) -> usize {
        argmax(&self.gains_db)
    }
}

/// Row-major Cartesian sample grid: `y` outer, `x` inner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl CartesianGrid {
    pub fn points(&self) -> Vec<Point> {
        let axis = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
            if k == 1 {
                return vec![lo];
            }
            (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
        };
        let xs = axis(self.x_min, self.x_max, self.nx);
        let ys = axis(self.y_min, self.y_max, self.ny);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| Point::new(x, y)))
            .collect()
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Maximum-ratio transmission `w = h / ‖h‖`.
pub fn mrt_weights(h: &ChannelVector) -> Result<Weights> {
    if h.norm_sqr() == 0.0 {
        return Err(Error::invalid("MRT is undefined for a zero channel"));
    }
    Weights::normalized(h.entries().to_vec())
}

fn to_matrix(columns: &[ChannelVector], n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r])
}

/// Orthonormal basis of the numerical column space of `a`.
fn range_basis(a: &DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = PINV_RELATIVE_THRESHOLD * largest;
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cutoff && s > 0.0)
        .map(|(k, _)| u.column(k).iter().cloned().collect())
        .collect()
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for q in basis {
        let coeff: Complex64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        for (slot, qi) in v.iter_mut().zip(q) {
            *slot -= coeff * qi;
        }
    }
}

/// Zero-forcing weights: `h0` projected onto the orthogonal complement of the
/// channels in `nulls`, normalized. `wᴴh0` comes out real and positive.
pub fn zf_weights(h0: &ChannelVector, nulls: &[ChannelVector]) -> Result<Weights> {
    if nulls.is_empty() {
        return mrt_weights(h0);
    }
    let n = h0.len();
    if let Some(bad) = nulls.iter().find(|a| a.len() != n) {
        return Err(Error::invalid(format!(
            "null channel has {} entries, target has {n}",
            bad.len()
        )));
    }
    if nulls.len() >= n {
        return Err(Error::invalid(format!(
            "cannot null {} channels with {n} elements",
            nulls.len()
        )));
    }
    let target_norm = h0.norm();
    if target_norm == 0.0 {
        return Err(Error::invalid("zero-forcing target channel is zero"));
    }
    let basis = range_basis(&to_matrix(nulls, n));
    let mut v = h0.entries().to_vec();
    // A second pass removes the residue left by rounding in the first.
    project_out(&mut v, &basis);
    project_out(&mut v, &basis);
    let residual = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if residual <= 1e-10 * target_norm {
        return Err(Error::DegenerateTarget(
            "target channel lies in the span of the null channels".into(),
        ));
    }
    Weights::normalized(v)
}

/// `|wᴴh|²`.
pub fn beam_gain(w: &Weights, h: &ChannelVector) -> Result<f64> {
    if w.len() != h.len() {
        return Err(Error::invalid(format!(
            "weights have {} entries, channel has {}",
            w.len(),
            h.len()
        )));
    }
    Ok(w.response(h.entries()).norm_sqr())
}

fn normalize_db(gains: &[f64]) -> (Vec<f64>, f64) {
    let peak = gains.iter().cloned().fold(0.0, f64::max);
    let db = gains
        .iter()
        .map(|&g| {
            if peak > 0.0 {
                (10.0 * (g / peak).log10()).max(DB_FLOOR)
            } else {
                0.0
            }
        })
        .collect();
    (db, peak)
}

/// Normalized far-field pattern of a 1D array over `theta_grid_deg`.
pub fn beam_pattern(
    layout: &ArrayLayout,
    w: &Weights,
    theta_grid_deg: &[f64],
    carrier: &CarrierSpec,
) -> Result<BeamPattern> {
    if layout.dim() != Dim::One {
        return Err(Error::invalid("beam patterns are defined for 1D layouts"));
    }
    if theta_grid_deg.is_empty() {
        return Err(Error::invalid("theta grid is empty"));
    }
    if theta_grid_deg.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::invalid("theta grid must be sorted"));
    }
    if w.len() != layout.len() {
        return Err(Error::invalid("weights and layout sizes differ"));
    }
    let gains = theta_grid_deg
        .par_iter()
        .map(|&theta| {
            let a = steering_vector(layout, &Direction::axis(theta)?, carrier)?;
            beam_gain(w, &a)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (gains_db, peak_gain) = normalize_db(&gains);
    Ok(BeamPattern {
        theta_grid_deg: theta_grid_deg.to_vec(),
        gains_db,
        peak_gain,
    })
}

/// Normalized near-field gain `|wᴴh(p)|²` over arbitrary sample points.
pub fn focus_map(
    layout: &ArrayLayout,
    w: &Weights,
    samples: &[Point],
    carrier: &CarrierSpec,
    amp: AmplitudeModel,
) -> Result<FocusMap> {
    if layout.dim() != Dim::Two {
        return Err(Error::invalid("focus maps are defined for 2D layouts"));
    }
    if samples.is_empty() {
        return Err(Error::invalid("sample grid is empty"));
    }
    if w.len() != layout.len() {
        return Err(Error::invalid("weights and layout sizes differ"));
    }
    let gains = samples
        .par_iter()
        .map(|p| {
            let h = point_response(layout, p, carrier, amp)?;
            Ok(w.response(h.entries()).norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (gains_db, peak_gain) = normalize_db(&gains);
    Ok(FocusMap {
        points: samples.to_vec(),
        gains_db,
        peak_gain,
    })
}

/// Received SNR `P·|wᴴh|²/σ²`, linear.
pub fn snr(budget: &LinkBudget, w: &Weights, h: &ChannelVector) -> Result<f64> {
    Ok(budget.snr_scale() * beam_gain(w, h)?)
}

/// `max(0, log2(1 + γ_b) − log2(1 + γ_e))` in bps/Hz.
pub fn secrecy_rate(gamma_b: f64, gamma_e: f64) -> Result<f64> {
    if !(gamma_b >= 0.0 && gamma_e >= 0.0) {
        return Err(Error::invalid(format!(
            "SNRs must be non-negative, got {gamma_b} and {gamma_e}"
        )));
    }
    Ok((gamma_b.ln_1p() - gamma_e.ln_1p()).max(0.0) / std::f64::consts::LN_2)
}

/// Worst-case secrecy rate against several eavesdroppers.
pub fn secrecy_rate_worst(gamma_b: f64, gamma_eves: &[f64]) -> Result<f64> {
    let worst = gamma_eves.iter().cloned().fold(0.0, f64::max);
    secrecy_rate(gamma_b, worst)
}

/// `Σ_k |wᴴh_k|²`.
pub fn leakage_power(w: &Weights, eves: &[ChannelVector]) -> Result<f64> {
    eves.iter().map(|h| beam_gain(w, h)).sum()
}

/// Effective rank `exp(−Σ p_i ln p_i)` of the eavesdropper channel matrix, with
/// `p_i` the normalized squared singular values.
pub fn adversary_subspace_rank(eves: &[ChannelVector]) -> Result<f64> {
    let Some(first) = eves.first() else {
        return Err(Error::invalid("no eavesdropper channels given"));
    };
    let n = first.len();
    if eves.iter().any(|h| h.len() != n) {
        return Err(Error::invalid("eavesdropper channels differ in length"));
    }
    let total: f64 = eves.iter().map(|h| h.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::invalid("all eavesdropper channels are zero"));
    }
    let sv = to_matrix(eves, n).singular_values();
    let energy: f64 = sv.iter().map(|s| s * s).sum();
    let entropy: f64 = sv
        .iter()
        .map(|s| s * s / energy)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    let upper = n.min(eves.len()) as f64;
    Ok(entropy.exp().clamp(1.0, upper))
}
