//! Splitting a transverse profile into absolutely continuous, Cantor and
//! jump parts, and lifting the parts back to the domain.

use serde::{Deserialize, Serialize};

use crate::domain::{MetricDomain, NodeField};
use crate::error::{LaminaError, Result};
use crate::flowbox::{FlowBox, Lamination};
use crate::transverse::{
    extract_profile,
    integrate_current, ruelle_sullivan, transition_invariance, TransverseMeasure, TransverseProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Ac,
    Cantor,
    Jump,
}

pub const PARTS: [Part; 3] = [Part::Ac, Part::Cantor, Part::Jump];

impl Part {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Part::Ac => "ac",
            Part::Cantor => "c",
            Part::Jump => "j",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GornyOptions {
    /// Jumps must exceed this fraction of the total mass.
    pub jump_frac: f64,
    /// Samples on either side compared against a candidate jump.
    pub jump_window: usize,
    /// Span in samples over which one jump may be smeared.
    pub jump_run: usize,
    /// Block size in samples at the classification scale; a power of two.
    pub block: usize,
    /// Allowed ratio between coarse and fine difference quotients.
    pub ratio: f64,
    /// Blocks on either side that supply the background density.
    pub background_blocks: usize,
}

impl Default for GornyOptions {
    fn default() -> Self {
        GornyOptions {
            jump_frac: 1.0 / 1024.0,
            jump_window: 4,
            jump_run: 1,
            block: 16,
            ratio: 2.0,
            background_blocks: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileDecomposition {
    pub labels: Vec<f64>,
    /// Value of the profile at the first label.
    pub base: f64,
    /// Nondecreasing components starting at zero, indexed by [`Part`].
    pub parts: [Vec<f64>; 3],
    pub masses: [f64; 3],
    /// Class of each increment; `None` for increments without mass.
    pub classes: Vec<Option<Part>>,
    pub block: usize,
    pub orientation: f64,
}

impl ProfileDecomposition {
    pub fn part(&self, p: Part) -> &[f64] {
        &self.parts[p.index()]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `base + ac + c + j` at every sample.
    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.labels.len())
            .map(|i| self.base + self.parts[0][i] + self.parts[1][i] + self.parts[2][i])
            .collect()
    }

    /// Component `p` at label `k`, linear between samples and constant beyond.
    pub fn value(&self, p: Part, k: f64) -> f64 {
        let l = &self.labels;
        let v = &self.parts[p.index()];
        if k <= l[0] {
            return v[0];
        }
        if k >= l[l.len() - 1] {
            return v[v.len() - 1];
        }
        let m = l.partition_point(|&x| x <= k) - 1;
        let t = (k - l[m]) / (l[m + 1] - l[m]);
        v[m] + t * (v[m + 1] - v[m])
    }

    /// The measure of component `p` in the form used by the current.
    pub fn measure(&self, p: Part) -> TransverseMeasure {
        let cdf = self.parts[p.index()].clone();
        TransverseMeasure {
            labels: self.labels.clone(),
            total_mass: *cdf.last().unwrap_or(&0.0),
            cdf,
            atoms: Vec::new(),
            orientation: self.orientation,
        }
    }
}

/// Multiscale Lebesgue decomposition of a monotone profile.
///
/// Jumps are single increments above `jump_frac` of the total that also
/// dominate their neighbourhood. Of the rest, a block is absolutely
/// continuous when the difference quotients of its halves and quarters stay
/// within `ratio` of the block quotient. Samples of the remaining blocks are
/// absolutely continuous when they do not exceed twice the background
/// density of nearby continuous blocks, and Cantor otherwise.
pub fn decompose_profile(profile: &TransverseProfile, opts: &GornyOptions) -> Result<ProfileDecomposition> {
    let v = &profile.values;
    if v.len() < 32 {
        return Err(LaminaError::TooFewSamples { got: v.len(), min: 32 });
    }
    if !opts.block.is_power_of_two() || opts.block < 4 {
        return Err(LaminaError::InvalidOptions(format!("block {} must be a power of two >= 4", opts.block)));
    }
    let n = v.len() - 1;
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = d.iter().position(|&x| x < 0.0) {
        return Err(LaminaError::NonMonotoneProfile {
            k1: profile.labels[i],
            k2: profile.labels[i + 1],
        });
    }
    let total: f64 = d.iter().sum();
    let mut classes: Vec<Option<Part>> = vec![None; n];

    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + d[i];
    }
    for i in 0..n {
        if d[i] <= opts.jump_frac * total {
            continue;
        }
        for len in 1..=opts.jump_run.min(n - i) {
            let lo = i.saturating_sub(opts.jump_window);
            let hi = (i + len + opts.jump_window).min(n);
            if prefix[i + len] - prefix[i] > 0.75 * (prefix[hi] - prefix[lo]) {
                for k in i..i + len {
                    if d[k] > 0.0 {
                        classes[k] = Some(Part::Jump);
                    }
                }
            }
        }
    }

    let r: Vec<f64> = (0..n).map(|i| if classes[i].is_some() { 0.0 } else { d[i] }).collect();
    let b = opts.block;
    let n_blocks = n.div_ceil(b);
    let quotient = |lo: usize, hi: usize| r[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    let mut block_q: Vec<Option<f64>> = vec![None; n_blocks];
    for (bi, q_out) in block_q.iter_mut().enumerate() {
        let (lo, hi) = (bi * b, ((bi + 1) * b).min(n));
        if hi - lo < 4 {
            continue;
        }
        let q = quotient(lo, hi);
        if q <= 0.0 {
            continue;
        }
        let stable = [2, 4].iter().all(|&parts| {
            let w = (hi - lo) / parts;
            (0..parts).all(|k| {
                let e = if k + 1 == parts { hi } else { lo + (k + 1) * w };
                let qk = quotient(lo + k * w, e);
                qk >= q / opts.ratio && qk <= q * opts.ratio
            })
        });
        if stable {
            *q_out = Some(q);
        }
    }
    let global: Vec<f64> = block_q.iter().flatten().copied().collect();
    for bi in 0..n_blocks {
        let (lo, hi) = (bi * b, ((bi + 1) * b).min(n));
        if block_q[bi].is_some() {
            for i in lo..hi {
                if classes[i].is_none() && r[i] > 0.0 {
                    classes[i] = Some(Part::Ac);
                }
            }
            continue;
        }
        let mut near: Vec<f64> = (bi.saturating_sub(opts.background_blocks)..(bi + 1 + opts.background_blocks).min(n_blocks))
            .filter_map(|k| block_q[k])
            .collect();
        if near.is_empty() {
            near = global.clone();
        }
        let background = median(&mut near).unwrap_or(0.0);
        for i in lo..hi {
            if classes[i].is_none() && r[i] > 0.0 {
                classes[i] = Some(if r[i] <= 2.0 * background { Part::Ac } else { Part::Cantor });
            }
        }
    }

    let mut parts = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
    for i in 0..n {
        for (p, part) in parts.iter_mut().enumerate() {
            part[i + 1] = part[i] + if classes[i].map(Part::index) == Some(p) { d[i] } else { 0.0 };
        }
    }
    let masses = [parts[0][n], parts[1][n], parts[2][n]];
    Ok(ProfileDecomposition {
        labels: profile.labels.clone(),
        base: v[0],
        parts,
        masses,
        classes,
        block: b,
        orientation: profile.orientation,
    })
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(v[v.len() / 2])
}

/// The three components lifted to the nodes of one box.
/// Decomposes the transverse profile of every box of the atlas.
pub fn decompose_lamination(
    u: &NodeField,
    lam: &Lamination,
    dom: &MetricDomain,
    opts: &GornyOptions,
) -> Result<Vec<ProfileDecomposition>> {
    lam.atlas
        .iter()
        .map(|bx| decompose_profile(&extract_profile(u, bx, dom, 1e-3)?, opts))
        .collect()
}

#[derive(Debug, Clone)]
pub struct BoxLift {
    pub fields: [NodeField; 3],
    /// Nodes inside the box.
    pub mask: Vec<bool>,
}

/// Extends each component constantly along the plaques of `bx`.
pub fn lift_decomposition(dec: &ProfileDecomposition, bx: &FlowBox, dom: &MetricDomain) -> Result<BoxLift> {
    if dec.labels.len() < 2 {
        return Err(LaminaError::BoxMismatch);
    }
    let n = dom.n_nodes();
    let mut fields = [NodeField::zeros(n), NodeField::zeros(n), NodeField::zeros(n)];
    let mut mask = vec![false; n];
    let mut any = false;
    for k in dom.active_nodes() {
        let Some((_, eta)) = bx.inverse(dom.node_pos(k)) else { continue };
        if eta.abs() > bx.half_height {
            continue;
        }
        mask[k] = true;
        any = true;
        let label = eta * dec.orientation;
        for p in PARTS {
            fields[p.index()].values[k] = dec.value(p, label);
        }
    }
    if !any {
        return Err(LaminaError::BoxMismatch);
    }
    Ok(BoxLift { fields, mask })
}

/// Glues per-box components into global fields by integrating the current
/// of each component's transverse measure. Overlapping boxes must assign
/// every component masses agreeing within `overlap_tol`.
pub fn glue_components(
    decs: &[ProfileDecomposition],
    lam: &Lamination,
    dom: &MetricDomain,
    overlap_tol: f64,
    curl_tol: f64,
) -> Result<[NodeField; 3]> {
    if decs.len() != lam.atlas.len() {
        return Err(LaminaError::OverlapMismatch(format!(
            "{} decompositions for {} boxes",
            decs.len(),
            lam.atlas.len()
        )));
    }
    if !dom.is_simply_connected() {
        return Err(LaminaError::NotSimplyConnected);
    }
    let mut out = [NodeField::zeros(dom.n_nodes()), NodeField::zeros(dom.n_nodes()), NodeField::zeros(dom.n_nodes())];
    for p in PARTS {
        let measures: Vec<TransverseMeasure> = decs.iter().map(|d| d.measure(p)).collect();
        let inv = transition_invariance(lam, &measures);
        if inv.max_deviation > overlap_tol {
            return Err(LaminaError::OverlapMismatch(format!(
                "{} masses differ by {:.3e} on an overlap",
                p.name(),
                inv.max_deviation
            )));
        }
        // parts below the overlap tolerance are numerically absent
        if measures.iter().all(|m| m.total_mass <= overlap_tol) {
            continue;
        }
        let t = ruelle_sullivan(lam, &measures, dom)?;
        out[p.index()] = integrate_current(&t.values, dom, curl_tol)?.u;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(n: usize, f: impl Fn(f64) -> f64) -> TransverseProfile {
        let labels: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let values = labels.iter().map(|&k| f(k)).collect();
        TransverseProfile::from_samples(labels, values).unwrap()
    }

    #[test]
    fn ramp_is_absolutely_continuous() {
        let d = decompose_profile(&profile(256, |k| k), &GornyOptions::default()).unwrap();
        assert!((d.masses[0] - 1.0).abs() < 1e-12);
        assert_eq!(d.masses[1] + d.masses[2], 0.0);
    }

    #[test]
    fn step_is_a_jump() {
        let d = decompose_profile(&profile(256, |k| if k > 0.5 { 1.0 } else { 0.0 }), &GornyOptions::default()).unwrap();
        assert_eq!(d.masses, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn reconstruction_is_exact() {
        let d = decompose_profile(&profile(300, |k| k * k + if k > 0.3 { 0.5 } else { 0.0 }), &GornyOptions::default())
            .unwrap();
        let r = d.reconstruct();
        for (i, &k) in d.labels.iter().enumerate() {
            let v = k * k + if k > 0.3 { 0.5 } else { 0.0 };
            assert!((r[i] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn short_profile_is_rejected() {
        assert!(matches!(
            decompose_profile(&profile(10, |k| k), &GornyOptions::default()),
            Err(LaminaError::TooFewSamples { .. })
        ));
    }
}
