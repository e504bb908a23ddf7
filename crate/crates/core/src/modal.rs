//! Pitch-class distributions: poles, their widths, the mode built on them
//! and tuning against the equal-tempered A440 grid.

use serde::{Deserialize, Serialize};

use crate::cents::{cents_between, circular_diff, fold_octave, transpose, CENTS_PER_OCTAVE};
use crate::error::{Error, Result};
use crate::pitch::PitchTrack;

pub const KDE_BANDWIDTH_CENTS: f64 = 10.0;
pub const HISTOGRAM_BIN_CENTS: f64 = 5.0;
pub const HISTOGRAM_SPAN_CENTS: f64 = 250.0;
pub const ASSIGNMENT_RADIUS_CENTS: f64 = 250.0;
pub const MIN_POLE_SEPARATION_CENTS: f64 = 50.0;
/// A density maximum must rise this fraction of its height above the
/// surrounding valleys to count as a pole candidate.
pub const MIN_RELATIVE_PROMINENCE: f64 = 0.1;
pub const DEFAULT_MIN_MASS: f64 = 0.05;
pub const MIN_OBSERVATIONS: usize = 100;
pub const AMBIGUOUS_MIN_CENTS: f64 = 80.0;
pub const AMBIGUOUS_MAX_CENTS: f64 = 120.0;
pub const A4_HZ: f64 = 440.0;

const SEMITONE: f64 = 100.0;
pub const DEGREE_NAMES: [&str; 12] = ["C", "Db", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

impl Segment {
    pub fn new(start_s: f64, end_s: f64, label: impl Into<String>) -> Self {
        Self {
            start_s,
            end_s,
            label: label.into(),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}

/// Checks segments are well formed, ordered and non-overlapping.
pub fn validate_segments(segments: &[Segment]) -> Result<()> {
    for s in segments {
        if !(s.start_s.is_finite() && s.end_s.is_finite() && s.start_s < s.end_s) {
            return Err(Error::InvalidSegments(format!(
                "segment {:?} has start {} not before end {}",
                s.label, s.start_s, s.end_s
            )));
        }
    }
    if let Some(w) = segments.windows(2).find(|w| w[1].start_s < w[0].end_s) {
        return Err(Error::InvalidSegments(format!(
            "segment {:?} overlaps or precedes {:?}",
            w[1].label, w[0].label
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldWeighting {
    #[default]
    Salience,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// In `[0, 1200)` above the reference.
    pub cents: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldedTrack {
    pub reference_hz: f64,
    pub observations: Vec<Observation>,
}

/// Every candidate of every voiced frame as cents above `final_hz`, modulo
/// the octave.
pub fn fold_to_pitch_classes(
    track: &PitchTrack,
    final_hz: f64,
    weighting: FoldWeighting,
) -> Result<FoldedTrack> {
    if !(final_hz > 0.0 && final_hz.is_finite()) {
        return Err(Error::InvalidParameter(format!("final {final_hz} Hz must be positive")));
    }
    let observations: Vec<Observation> = track
        .frames
        .iter()
        .flat_map(|f| &f.candidates)
        .map(|c| Observation {
            cents: fold_octave(cents_between(c.frequency, final_hz)),
            weight: match weighting {
                FoldWeighting::Salience => c.salience,
                FoldWeighting::Uniform => 1.0,
            },
        })
        .collect();
    if observations.is_empty() {
        return Err(Error::EmptyTrack);
    }
    Ok(FoldedTrack {
        reference_hz: final_hz,
        observations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Bin centre, cents from the pole.
    pub cents_bin: f64,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleDistribution {
    /// Cents above the folding reference, in `[0, 1200)`.
    pub pole_cents: f64,
    pub pole_hz: f64,
    /// Weighted counts of the assigned observations by offset from the pole.
    pub histogram: Vec<HistogramBin>,
    /// Interquartile range of the assigned offsets.
    pub q_cents: f64,
    /// Share of the total weight assigned to this pole.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleAnalysis {
    /// Ascending in `pole_cents`.
    pub poles: Vec<PoleDistribution>,
    /// Share of the weight further than the assignment radius from any pole.
    pub residual_mass: f64,
}

/// Circular Gaussian kernel density on the 5-cent grid.
fn kde(obs: &[Observation]) -> Vec<f64> {
    // 1-cent pre-binning keeps the cost independent of track length
    let mut fine = vec![0.0; CENTS_PER_OCTAVE as usize];
    for o in obs {
        let k = (o.cents.round() as usize) % fine.len();
        fine[k] += o.weight;
    }
    let grid = (CENTS_PER_OCTAVE / HISTOGRAM_BIN_CENTS) as usize;
    let reach = (5.0 * KDE_BANDWIDTH_CENTS) as i64;
    let norm = -0.5 / (KDE_BANDWIDTH_CENTS * KDE_BANDWIDTH_CENTS);
    (0..grid)
        .map(|g| {
            let centre = (g as f64 * HISTOGRAM_BIN_CENTS) as i64;
            (-reach..=reach)
                .map(|d| {
                    let k = (centre + d).rem_euclid(fine.len() as i64) as usize;
                    fine[k] * ((d * d) as f64 * norm).exp()
                })
                .sum()
        })
        .collect()
}

/// Local maxima of a circular density as (refined position, height),
/// keeping those with enough topographic prominence.
fn density_maxima(density: &[f64]) -> Vec<(f64, f64)> {
    let n = density.len();
    let at = |i: i64| density[i.rem_euclid(n as i64) as usize];
    let mut out = Vec::new();
    for i in 0..n as i64 {
        let (l, c, r) = (at(i - 1), at(i), at(i + 1));
        if !(c > l && c >= r) || c <= 0.0 {
            continue;
        }
        let mut left_min = c;
        let mut right_min = c;
        for d in 1..n as i64 {
            let v = at(i - d);
            if v > c {
                break;
            }
            left_min = left_min.min(v);
        }
        for d in 1..n as i64 {
            let v = at(i + d);
            if v > c {
                break;
            }
            right_min = right_min.min(v);
        }
        if c - left_min.max(right_min) < MIN_RELATIVE_PROMINENCE * c {
            // the global maximum has no higher neighbour; its valleys are the global minimum
            if !(left_min == right_min && density.iter().all(|&v| v <= c)) {
                continue;
            }
        }
        let denom = l - 2.0 * c + r;
        let offset = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        out.push((fold_octave((i as f64 + offset) * HISTOGRAM_BIN_CENTS), c));
    }
    out
}

/// Nearest pole within the assignment radius, per observation.
fn assign(obs: &[Observation], poles: &[f64]) -> Vec<Option<usize>> {
    obs.iter()
        .map(|o| {
            poles
                .iter()
                .enumerate()
                .map(|(k, &p)| (k, circular_diff(o.cents, p, CENTS_PER_OCTAVE).abs()))
                .filter(|&(_, d)| d <= ASSIGNMENT_RADIUS_CENTS)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k)
        })
        .collect()
}

/// Weighted quantile with linear interpolation between the weight midpoints
/// of the sorted values.
fn weighted_quantile(sorted: &[(f64, f64)], q: f64) -> f64 {
    let total: f64 = sorted.iter().map(|s| s.1).sum();
    if sorted.len() == 1 || total <= 0.0 {
        return sorted[0].0;
    }
    let mut cum = 0.0;
    let positions: Vec<f64> = sorted
        .iter()
        .map(|&(_, w)| {
            let p = (cum + w / 2.0) / total;
            cum += w;
            p
        })
        .collect();
    let k = positions.partition_point(|&p| p < q);
    if k == 0 {
        return sorted[0].0;
    }
    if k == sorted.len() {
        return sorted[k - 1].0;
    }
    let (p0, p1) = (positions[k - 1], positions[k]);
    let t = if p1 > p0 { (q - p0) / (p1 - p0) } else { 0.0 };
    sorted[k - 1].0 + t * (sorted[k].0 - sorted[k - 1].0)
}

/// Weighted interquartile range.
pub fn interquartile_range(values: &[(f64, f64)]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    weighted_quantile(&sorted, 0.75) - weighted_quantile(&sorted, 0.25)
}

fn histogram(offsets: &[(f64, f64)]) -> Vec<HistogramBin> {
    let bins = (2.0 * HISTOGRAM_SPAN_CENTS / HISTOGRAM_BIN_CENTS) as usize + 1;
    let mut counts = vec![0.0; bins];
    for &(d, w) in offsets {
        let k = ((d + HISTOGRAM_SPAN_CENTS) / HISTOGRAM_BIN_CENTS).round() as usize;
        counts[k.min(bins - 1)] += w;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            cents_bin: k as f64 * HISTOGRAM_BIN_CENTS - HISTOGRAM_SPAN_CENTS,
            count,
        })
        .collect()
}

/// Poles of a folded track: kernel-density maxima at least 50 cents apart
/// that keep at least `min_mass` of the weight once every observation is
/// assigned to its nearest pole within 250 cents.
pub fn estimate_poles(folded: &FoldedTrack, min_mass: f64) -> Result<PoleAnalysis> {
    let obs: Vec<Observation> = folded
        .observations
        .iter()
        .copied()
        .filter(|o| o.weight > 0.0)
        .collect();
    if obs.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientObservations {
            found: obs.len(),
            required: MIN_OBSERVATIONS,
        });
    }
    let total: f64 = obs.iter().map(|o| o.weight).sum();

    let mut maxima = density_maxima(&kde(&obs));
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let mut poles: Vec<f64> = Vec::new();
    for (p, _) in maxima {
        if poles
            .iter()
            .all(|&q| circular_diff(p, q, CENTS_PER_OCTAVE).abs() > MIN_POLE_SEPARATION_CENTS)
        {
            poles.push(p);
        }
    }

    // drop light poles one at a time, lightest first, reassigning in between
    let mut assignment = assign(&obs, &poles);
    loop {
        let mut mass = vec![0.0; poles.len()];
        for (o, a) in obs.iter().zip(&assignment) {
            if let Some(k) = a {
                mass[*k] += o.weight / total;
            }
        }
        let lightest = mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m < min_mass)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k);
        match lightest {
            Some(k) => {
                poles.remove(k);
                assignment = assign(&obs, &poles);
            }
            None => break,
        }
    }

    let mut residual = 0.0;
    let mut offsets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); poles.len()];
    for (o, a) in obs.iter().zip(&assignment) {
        match a {
            Some(k) => offsets[*k].push((circular_diff(o.cents, poles[*k], CENTS_PER_OCTAVE), o.weight)),
            None => residual += o.weight,
        }
    }
    let mut out: Vec<PoleDistribution> = poles
        .iter()
        .zip(&offsets)
        .map(|(&p, offs)| PoleDistribution {
            pole_cents: p,
            pole_hz: transpose(folded.reference_hz, p),
            histogram: histogram(offs),
            q_cents: interquartile_range(offs),
            mass: offs.iter().map(|o| o.1).sum::<f64>() / total,
        })
        .collect();
    out.sort_by(|a, b| a.pole_cents.total_cmp(&b.pole_cents));
    Ok(PoleAnalysis {
        poles: out,
        residual_mass: residual / total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "cents")]
pub enum FinalSelection {
    #[default]
    HighestMass,
    /// The pole nearest this many cents above the folding reference.
    Nearest(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degree {
    /// Cents above the final, in `[0, 1200)`.
    pub cents: f64,
    pub hz: f64,
    /// Nearest chromatic degree with the final as C.
    pub label: String,
    pub offset_cents: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousPair {
    pub lower: String,
    pub upper: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub final_hz: f64,
    /// Ascending; the final is the first, at 0 cents.
    pub degrees: Vec<Degree>,
    pub ambiguous: Vec<AmbiguousPair>,
    /// Final's deviation from the nearest A440 equal-tempered pitch.
    pub tuning_offset_cents: f64,
}

impl ModeEstimate {
    pub fn labels(&self) -> Vec<&str> {
        self.degrees.iter().map(|d| d.label.as_str()).collect()
    }

    /// Labels with ambiguous pairs joined as `lower/upper`.
    pub fn summary(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for d in &self.degrees {
            if self.ambiguous.iter().any(|a| a.upper == d.label) {
                continue;
            }
            match self.ambiguous.iter().find(|a| a.lower == d.label) {
                Some(a) => out.push(format!("{}/{}", a.lower, a.upper)),
                None => out.push(d.label.clone()),
            }
        }
        out
    }
}

pub fn degree_label(cents_above_final: f64) -> (&'static str, f64) {
    let c = fold_octave(cents_above_final);
    let step = (c / SEMITONE).round();
    (DEGREE_NAMES[step as usize % 12], c - step * SEMITONE)
}

fn letter(label: &str) -> char {
    label.chars().next().unwrap_or(' ')
}

/// Mode built on the poles. Degrees closer than 50 cents are merged into the
/// heavier one. Two degrees 80 to 120 cents apart that both carry at least
/// `min_mass` and share a letter name (E flat and E, say) are reported as
/// an ambiguous pair.
pub fn infer_mode(poles: &[PoleDistribution], selection: FinalSelection, min_mass: f64) -> Option<ModeEstimate> {
    let fin = match selection {
        FinalSelection::HighestMass => poles.iter().max_by(|a, b| {
            a.mass
                .total_cmp(&b.mass)
                .then(b.pole_cents.total_cmp(&a.pole_cents))
        })?,
        FinalSelection::Nearest(c) => poles.iter().min_by(|a, b| {
            circular_diff(a.pole_cents, c, CENTS_PER_OCTAVE)
                .abs()
                .total_cmp(&circular_diff(b.pole_cents, c, CENTS_PER_OCTAVE).abs())
        })?,
    };

    let mut by_mass: Vec<&PoleDistribution> = poles.iter().collect();
    by_mass.sort_by(|a, b| b.mass.total_cmp(&a.mass).then(a.pole_cents.total_cmp(&b.pole_cents)));
    // the final always survives deduplication
    by_mass.retain(|p| !std::ptr::eq(*p, fin));
    by_mass.insert(0, fin);
    let mut kept: Vec<&PoleDistribution> = Vec::new();
    for p in by_mass {
        if kept.iter().all(|k| {
            circular_diff(p.pole_cents, k.pole_cents, CENTS_PER_OCTAVE).abs() >= MIN_POLE_SEPARATION_CENTS
        }) {
            kept.push(p);
        }
    }

    let mut degrees: Vec<Degree> = kept
        .iter()
        .map(|p| {
            let cents = fold_octave(p.pole_cents - fin.pole_cents);
            let (label, offset) = degree_label(cents);
            Degree {
                cents,
                hz: p.pole_hz,
                label: label.to_string(),
                offset_cents: offset,
                mass: p.mass,
            }
        })
        .collect();
    degrees.sort_by(|a, b| a.cents.total_cmp(&b.cents));

    let mut ambiguous = Vec::new();
    for (i, a) in degrees.iter().enumerate() {
        for b in &degrees[i + 1..] {
            let gap = b.cents - a.cents;
            if (AMBIGUOUS_MIN_CENTS..=AMBIGUOUS_MAX_CENTS).contains(&gap)
                && a.mass >= min_mass
                && b.mass >= min_mass
                && letter(&a.label) == letter(&b.label)
            {
                ambiguous.push(AmbiguousPair {
                    lower: a.label.clone(),
                    upper: b.label.clone(),
                });
            }
        }
    }

    Some(ModeEstimate {
        final_hz: fin.pole_hz,
        tuning_offset_cents: circular_diff(cents_between(fin.pole_hz, A4_HZ), 0.0, SEMITONE),
        degrees,
        ambiguous,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOffset {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
    pub voiced_frames: usize,
    /// In `(-50, 50]`; absent when the segment has no voiced frames.
    pub offset_cents: Option<f64>,
}

/// Offset `o` minimising the summed squared circular distance (period 100
/// cents) between `values` and `o`.
///
/// Exact: the optimum is the mean of the values unwrapped at some cut point
/// between consecutive sorted values, and the cut giving the least unwrapped
/// variance is the one whose mean is optimal.
pub fn circular_least_squares_offset(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.rem_euclid(SEMITONE)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut s1: f64 = v.iter().sum();
    let mut s2: f64 = v.iter().map(|x| x * x).sum();
    let mut best = (s2 - s1 * s1 / n, s1 / n);
    for &x in &v[..v.len() - 1] {
        // move the lowest remaining value to the top of the unwrapped range
        let y = x + SEMITONE;
        s1 += SEMITONE;
        s2 += y * y - x * x;
        let var = s2 - s1 * s1 / n;
        if var < best.0 {
            best = (var, s1 / n);
        }
    }
    Some(circular_diff(best.1, 0.0, SEMITONE))
}

/// Tuning offset of the top candidate of each voiced frame against the
/// A440 equal-tempered grid, per segment or over the whole track.
pub fn estimate_tuning_offset(track: &PitchTrack, segments: Option<&[Segment]>) -> Result<Vec<SegmentOffset>> {
    let whole;
    let segments = match segments {
        Some(s) => {
            validate_segments(s)?;
            s
        }
        None => {
            let start = track.frames.first().map_or(0.0, |f| f.time);
            let end = track.frames.last().map_or(0.0, |f| f.time + track.hop_seconds.max(f64::EPSILON));
            whole = [Segment::new(start, end, "global")];
            &whole[..]
        }
    };
    Ok(segments
        .iter()
        .map(|s| {
            let values: Vec<f64> = track
                .frames
                .iter()
                .filter(|f| s.contains(f.time))
                .filter_map(|f| f.top())
                .map(|c| cents_between(c.frequency, A4_HZ))
                .collect();
            SegmentOffset {
                label: s.label.clone(),
                start_s: s.start_s,
                end_s: s.end_s,
                voiced_frames: values.len(),
                offset_cents: circular_least_squares_offset(&values),
            }
        })
        .collect())
}
