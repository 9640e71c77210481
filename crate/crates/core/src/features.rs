//! Landmark alignment and the two feature streams.
//!
//! Every calibrated frame is aligned to a canonical template with a
//! least-squares similarity transform, then flattened into the interleaved
//! layout `[x1, y1, x2, y2, ..., xP, yP]` (the absolute stream). The
//! differential stream holds consecutive differences of the absolute one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{LandmarkFrame, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("degenerate landmark configuration{}", frame.map(|f| format!(" in frame {f}")).unwrap_or_default())]
    DegenerateConfiguration { frame: Option<u64> },
    #[error("sequence too short: need at least 2 vectors, got {0}")]
    TooShort(usize),
    #[error("empty input")]
    Empty,
    #[error("landmark count {found} does not match template ({expected})")]
    CountMismatch { found: usize, expected: usize },
    #[error("feature vectors have inconsistent lengths")]
    RaggedSequence,
    #[error("target length must be >= 2")]
    BadTargetLength,
}

/// Inner eye corners in the 68-point layout.
const INNER_EYE: (usize, usize) = (39, 42);
/// Outer eye corners in the 68-point layout.
const OUTER_EYE: (usize, usize) = (36, 45);

/// Mean 68-point face shape (unit-square coordinates, y down). Only its
/// geometry matters: [`AlignmentTemplate::canonical`] renormalizes it.
#[rustfmt::skip]
const MEAN_SHAPE: [Point2; 68] = [
    [0.0792396913815, 0.339223741112], [0.0829219487236, 0.456955367943],
    [0.0967927109165, 0.575648016728], [0.122141515615, 0.691921601066],
    [0.168687863544, 0.800341263616], [0.239789390707, 0.895732504778],
    [0.325662452515, 0.977068762493], [0.422318282013, 1.04329000149],
    [0.531777802068, 1.06080371126], [0.641296298053, 1.03981924107],
    [0.738105872266, 0.972268833998], [0.824444363295, 0.889624082279],
    [0.894792677532, 0.792494155836], [0.939395486253, 0.681546643421],
    [0.96111933829, 0.562238253072], [0.970579841181, 0.441758925744],
    [0.971193274221, 0.322118743967], [0.163846223133, 0.249151738053],
    [0.21780354657, 0.204255863861], [0.291299351124, 0.192367318323],
    [0.367460241458, 0.203582210627], [0.4392945113, 0.233135599851],
    [0.586445962425, 0.228141644834], [0.660152671635, 0.195923841854],
    [0.737466449096, 0.182360984545], [0.813236546239, 0.192828009114],
    [0.8707571886, 0.235293377042], [0.51534533827, 0.31863546193],
    [0.516221448289, 0.396200446263], [0.517118861835, 0.473797687758],
    [0.51816430343, 0.553157797772], [0.433701156035, 0.604054457668],
    [0.475501237769, 0.62076344024], [0.520712933176, 0.634268222208],
    [0.565874114041, 0.618796581487], [0.607054002672, 0.60157671656],
    [0.252418718401, 0.331052263829], [0.298663015648, 0.302646354002],
    [0.355749724218, 0.303020650651], [0.403718978315, 0.33867711083],
    [0.352507175597, 0.349987615384], [0.296791759886, 0.350478978225],
    [0.631326076346, 0.334136672344], [0.679073381078, 0.29645404267],
    [0.73597236153, 0.294721285802], [0.782865376271, 0.321305281656],
    [0.740312274764, 0.341849376713], [0.68499850091, 0.343734332172],
    [0.353167761422, 0.746189164237], [0.414587777921, 0.719053835073],
    [0.477677654595, 0.706835892494], [0.522732900812, 0.717092275768],
    [0.569832064287, 0.705414478982], [0.635195811927, 0.71565572516],
    [0.69951672331, 0.739419187253], [0.639447159575, 0.805236879972],
    [0.576410514055, 0.835436670169], [0.525398405766, 0.841706377792],
    [0.47641545769, 0.837505914975], [0.41379548902, 0.810045601727],
    [0.380084785646, 0.749979603086], [0.477955996282, 0.74513234612],
    [0.523389793327, 0.748924302636], [0.571057789237, 0.74332894691],
    [0.672409137852, 0.744177032192], [0.572539621444, 0.776609286626],
    [0.5240106503, 0.783370783245], [0.478708823565, 0.778896491412],
];

/// Canonical landmark positions that every frame is aligned to.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTemplate {
    pub canonical_points: Vec<Point2>,
}

impl AlignmentTemplate {
    /// The 68-point template with the inner-eye-corner midpoint at
    /// `(0.5, 0.4)` and the outer eye corners 0.3 apart.
    pub fn canonical() -> Self {
        let (il, ir) = INNER_EYE;
        let (ol, or) = OUTER_EYE;
        let mid = [
            0.5 * (MEAN_SHAPE[il][0] + MEAN_SHAPE[ir][0]),
            0.5 * (MEAN_SHAPE[il][1] + MEAN_SHAPE[ir][1]),
        ];
        let iod = (MEAN_SHAPE[or][0] - MEAN_SHAPE[ol][0])
            .hypot(MEAN_SHAPE[or][1] - MEAN_SHAPE[ol][1]);
        let s = 0.3 / iod;
        let canonical_points = MEAN_SHAPE
            .iter()
            .map(|p| [0.5 + s * (p[0] - mid[0]), 0.4 + s * (p[1] - mid[1])])
            .collect();
        Self { canonical_points }
    }

    pub fn from_points(points: Vec<Point2>) -> Self {
        Self {
            canonical_points: points,
        }
    }

    pub fn len(&self) -> usize {
        self.canonical_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical_points.is_empty()
    }

    /// Template points mapped into a `width`×`height` pixel frame.
    pub fn pixel_layout(&self, width: f64, height: f64) -> Vec<Point2> {
        self.canonical_points
            .iter()
            .map(|p| [p[0] * width, p[1] * height])
            .collect()
    }

    /// FNV-1a over the coordinate bit patterns, as 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for c in self.canonical_points.iter().flatten() {
            for b in c.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentMode {
    /// Scale, rotation and translation (4 DOF).
    #[default]
    Similarity,
    /// Full affine (6 DOF); kept for ablation.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: f64,
    pub translation: [f64; 2],
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        scale: 1.0,
        rotation: 0.0,
        translation: [0.0, 0.0],
    };

    pub fn apply(&self, p: Point2) -> Point2 {
        let (sin, cos) = self.rotation.sin_cos();
        [
            self.scale * (cos * p[0] - sin * p[1]) + self.translation[0],
            self.scale * (sin * p[0] + cos * p[1]) + self.translation[1],
        ]
    }
}

/// Row-major `[[a, b, tx], [c, d, ty]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine(pub [[f64; 3]; 2]);

impl Affine {
    pub fn apply(&self, p: Point2) -> Point2 {
        let m = &self.0;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2],
        ]
    }
}

fn centroid(points: &[Point2]) -> Point2 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

/// Closed-form least-squares similarity mapping `frame_points` onto the template.
pub fn fit_similarity(
    frame_points: &[Point2],
    template: &AlignmentTemplate,
) -> Result<Similarity, FeatureError> {
    let target = &template.canonical_points;
    if frame_points.len() != target.len() {
        return Err(FeatureError::CountMismatch {
            found: frame_points.len(),
            expected: target.len(),
        });
    }
    if frame_points.len() < 2 {
        return Err(FeatureError::DegenerateConfiguration { frame: None });
    }
    let (pc, qc) = (centroid(frame_points), centroid(target));
    let (mut dot, mut cross, mut norm) = (0.0, 0.0, 0.0);
    for (p, q) in frame_points.iter().zip(target) {
        let (px, py) = (p[0] - pc[0], p[1] - pc[1]);
        let (qx, qy) = (q[0] - qc[0], q[1] - qc[1]);
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
        norm += px * px + py * py;
    }
    let spread = frame_points
        .iter()
        .flatten()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1.0);
    if norm <= 1e-18 * spread * spread * frame_points.len() as f64 {
        return Err(FeatureError::DegenerateConfiguration { frame: None });
    }
    let (a, b) = (dot / norm, cross / norm);
    let scale = a.hypot(b);
    let rotation = b.atan2(a);
    let translation = [
        qc[0] - (a * pc[0] - b * pc[1]),
        qc[1] - (b * pc[0] + a * pc[1]),
    ];
    Ok(Similarity {
        scale,
        rotation,
        translation,
    })
}

/// Least-squares full affine fit; needs three non-collinear points.
pub fn fit_affine(
    frame_points: &[Point2],
    template: &AlignmentTemplate,
) -> Result<Affine, FeatureError> {
    let target = &template.canonical_points;
    if frame_points.len() != target.len() {
        return Err(FeatureError::CountMismatch {
            found: frame_points.len(),
            expected: target.len(),
        });
    }
    // Centering keeps the normal equations well conditioned at pixel scale.
    let (pc, qc) = (centroid(frame_points), centroid(target));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let mut rhs = [[0.0; 2]; 2];
    for (p, q) in frame_points.iter().zip(target) {
        let (px, py) = (p[0] - pc[0], p[1] - pc[1]);
        let (qx, qy) = (q[0] - qc[0], q[1] - qc[1]);
        sxx += px * px;
        sxy += px * py;
        syy += py * py;
        rhs[0][0] += px * qx;
        rhs[0][1] += py * qx;
        rhs[1][0] += px * qy;
        rhs[1][1] += py * qy;
    }
    let det = sxx * syy - sxy * sxy;
    if !(det.abs() > 1e-12 * (sxx * syy).max(1e-300)) {
        return Err(FeatureError::DegenerateConfiguration { frame: None });
    }
    let mut m = [[0.0; 3]; 2];
    for row in 0..2 {
        let (r0, r1) = (rhs[row][0], rhs[row][1]);
        let a = (syy * r0 - sxy * r1) / det;
        let b = (sxx * r1 - sxy * r0) / det;
        m[row][0] = a;
        m[row][1] = b;
        m[row][2] = qc[row] - a * pc[0] - b * pc[1];
    }
    Ok(Affine(m))
}

/// Aligns one frame's points to the template.
pub fn align_points(
    points: &[Point2],
    template: &AlignmentTemplate,
    mode: AlignmentMode,
) -> Result<Vec<Point2>, FeatureError> {
    Ok(match mode {
        AlignmentMode::Similarity => {
            let t = fit_similarity(points, template)?;
            points.iter().map(|&p| t.apply(p)).collect()
        }
        AlignmentMode::Affine => {
            let t = fit_affine(points, template)?;
            points.iter().map(|&p| t.apply(p)).collect()
        }
    })
}

pub fn flatten_points(points: &[Point2]) -> Vec<f64> {
    points.iter().flat_map(|p| [p[0], p[1]]).collect()
}

pub fn unflatten_points(values: &[f64]) -> Vec<Point2> {
    values.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Absolute,
    Differential,
}

impl StreamKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StreamKind::Absolute => "absolute",
            StreamKind::Differential => "differential",
        }
    }
}

/// A time-ordered list of equal-length feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub vectors: Vec<Vec<f64>>,
    pub stream_kind: StreamKind,
    pub label: Option<f64>,
}

impl FeatureSequence {
    pub fn new(
        vectors: Vec<Vec<f64>>,
        stream_kind: StreamKind,
        label: Option<f64>,
    ) -> Result<Self, FeatureError> {
        if let Some(first) = vectors.first() {
            if vectors.iter().any(|v| v.len() != first.len()) {
                return Err(FeatureError::RaggedSequence);
            }
        }
        Ok(Self {
            vectors,
            stream_kind,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Absolute stream: each frame aligned, then flattened.
pub fn absolute_features(
    calibrated: &[LandmarkFrame],
    template: &AlignmentTemplate,
    mode: AlignmentMode,
) -> Result<FeatureSequence, FeatureError> {
    if calibrated.is_empty() {
        return Err(FeatureError::Empty);
    }
    let vectors = calibrated
        .iter()
        .map(|frame| {
            align_points(&frame.points, template, mode)
                .map(|p| flatten_points(&p))
                .map_err(|e| match e {
                    FeatureError::DegenerateConfiguration { .. } => {
                        FeatureError::DegenerateConfiguration {
                            frame: Some(frame.frame_index),
                        }
                    }
                    other => other,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    FeatureSequence::new(vectors, StreamKind::Absolute, None)
}

/// Differential stream `b_i = a_{i+1} - a_i`; one vector shorter than its input.
pub fn differential_features(absolute: &FeatureSequence) -> Result<FeatureSequence, FeatureError> {
    if absolute.len() < 2 {
        return Err(FeatureError::TooShort(absolute.len()));
    }
    let vectors = absolute
        .vectors
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
        .collect();
    FeatureSequence::new(vectors, StreamKind::Differential, absolute.label)
}

/// Uniform temporal subsampling (first and last kept) or pad-by-repeat.
pub fn temporal_resample(
    seq: &FeatureSequence,
    target_len: usize,
) -> Result<FeatureSequence, FeatureError> {
    if target_len < 2 {
        return Err(FeatureError::BadTargetLength);
    }
    if seq.is_empty() {
        return Err(FeatureError::Empty);
    }
    let n = seq.len();
    let vectors = if n >= target_len {
        let span = target_len - 1;
        (0..target_len)
            .map(|i| seq.vectors[(i * (n - 1) + span / 2) / span].clone())
            .collect()
    } else {
        (0..target_len)
            .map(|i| seq.vectors[i.min(n - 1)].clone())
            .collect()
    };
    Ok(FeatureSequence {
        vectors,
        stream_kind: seq.stream_kind,
        label: seq.label,
    })
}
