//! Frame sequences: synthetic dynamic point clouds, text IO and
//! chronological splitting.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::error::{ensure, Error, Result};
use crate::graph::{build_knn_graph, Graph};
use crate::linalg::DenseMatrix;
use crate::rng::seeded;

/// `T` graph signals sharing the same `N × F` shape.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    n_nodes: usize,
    n_features: usize,
    frames: Vec<DenseMatrix>,
}

impl FrameSequence {
    pub fn new(n_nodes: usize, n_features: usize, frames: Vec<DenseMatrix>) -> Result<Self> {
        for (t, f) in frames.iter().enumerate() {
            ensure(f.shape() == (n_nodes, n_features), || {
                format!(
                    "frame {t} is {}x{}, expected {n_nodes}x{n_features}",
                    f.n_rows(),
                    f.n_cols()
                )
            })?;
            ensure(f.is_finite(), || {
                format!("frame {t} has non-finite entries")
            })?;
        }
        Ok(Self {
            n_nodes,
            n_features,
            frames,
        })
    }

    /// Builds a sequence from a non-empty list of frames.
    pub fn from_frames(frames: Vec<DenseMatrix>) -> Result<Self> {
        let (n, f) = frames
            .first()
            .map(|m| m.shape())
            .ok_or_else(|| Error::contract("empty frame list"))?;
        Self::new(n, f, frames)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[DenseMatrix] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &DenseMatrix {
        &self.frames[t]
    }

    /// Element-wise mean over all frames.
    pub fn mean_frame(&self) -> DenseMatrix {
        let mut acc = DenseMatrix::zeros(self.n_nodes, self.n_features);
        for f in &self.frames {
            acc.axpy(1.0, f).expect("shapes validated");
        }
        acc.scale(1.0 / self.frames.len().max(1) as f64)
    }

    /// Mean squared-error of predicting each frame by its predecessor.
    pub fn copy_last_loss(&self) -> f64 {
        copy_last_loss(&self.frames)
    }

    /// Text form: `gfrm 1 N F T` then `T` blocks of `N` lines with `F`
    /// values at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "gfrm 1 {} {} {}",
            self.n_nodes,
            self.n_features,
            self.frames.len()
        );
        for (t, f) in self.frames.iter().enumerate() {
            let _ = writeln!(s, "# frame {t}");
            for i in 0..self.n_nodes {
                let line: Vec<String> = f.row(i).iter().map(|v| format!("{v:.16e}")).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty frame file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "gfrm" {
            return Err(Error::parse(hline, "expected header `gfrm 1 N F T`"));
        }
        if fields[1] != "1" {
            return Err(Error::parse(
                hline,
                format!("unsupported frame format version {}", fields[1]),
            ));
        }
        let count = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(hline, format!("invalid {what} `{s}`")))
        };
        let n = count(fields[2], "node count")?;
        let f = count(fields[3], "feature count")?;
        let t = count(fields[4], "frame count")?;

        let mut values = Vec::with_capacity(n * f * t);
        let mut rows = 0usize;
        let mut last = hline;
        for (ln, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(ln, format!("invalid number `{v}`")))
                })
                .collect::<Result<_>>()?;
            if row.len() != f {
                return Err(Error::parse(
                    ln,
                    format!("expected {f} values, found {}", row.len()),
                ));
            }
            values.extend(row);
            rows += 1;
            last = ln;
        }
        if n == 0 || rows != n * t {
            let frames_found = rows.checked_div(n).unwrap_or(0);
            return Err(Error::parse(
                last,
                format!(
                    "header declares {t} frames of {n} nodes ({} rows) but found {rows} rows ({frames_found} complete frames)",
                    n * t
                ),
            ));
        }
        let frames = values
            .chunks(n * f)
            .map(|c| DenseMatrix::from_vec(n, f, c.to_vec()).expect("chunk sized"))
            .collect();
        Self::new(n, f, frames).map_err(|e| Error::parse(last, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_frames(self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_frames(path)
    }
}

pub fn save_frames(seq: &FrameSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, seq.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_frames(path: impl AsRef<Path>) -> Result<FrameSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FrameSequence::from_text(&text)
}

/// Mean `‖x_{t+1} − x_t‖²_F` over consecutive frames.
pub fn copy_last_loss(frames: &[DenseMatrix]) -> f64 {
    if frames.len() < 2 {
        return 0.0;
    }
    let total: f64 = frames
        .windows(2)
        .map(|w| {
            w[0].as_slice()
                .iter()
                .zip(w[1].as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    total / (frames.len() - 1) as f64
}

/// Chronological split at `⌊ratio·T⌋`; the training part is the prefix.
pub fn split_train_test(seq: &FrameSequence, ratio: f64) -> Result<(FrameSequence, FrameSequence)> {
    ensure(ratio > 0.0 && ratio < 1.0, || {
        format!("split ratio must lie in (0, 1), got {ratio}")
    })?;
    let t = seq.n_frames();
    ensure(t >= 2, || format!("cannot split a sequence of {t} frames"))?;
    let cut = split_index(t, ratio);
    ensure(cut >= 1 && cut < t, || {
        format!("split of {t} frames at ratio {ratio} leaves an empty partition")
    })?;
    let train = FrameSequence::new(seq.n_nodes, seq.n_features, seq.frames[..cut].to_vec())?;
    let test = FrameSequence::new(seq.n_nodes, seq.n_features, seq.frames[cut..].to_vec())?;
    Ok((train, test))
}

/// `⌊ratio·T⌋`: the number of training frames and index of the first test frame.
pub fn split_index(t: usize, ratio: f64) -> usize {
    (ratio * t as f64).floor() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseShape {
    /// Unit circle in the xy-plane.
    Ring,
    /// Square lattice spanning `[-1, 1]²` in the xy-plane.
    Grid,
    /// Stacked offset rings of radius 1 spanning `z ∈ [-1, 1]`.
    Cylinder,
}

impl BaseShape {
    pub const NAMES: &'static [&'static str] = &["ring", "grid", "cylinder"];

    pub fn name(self) -> &'static str {
        match self {
            BaseShape::Ring => "ring",
            BaseShape::Grid => "grid",
            BaseShape::Cylinder => "cylinder",
        }
    }
}

impl FromStr for BaseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(BaseShape::Ring),
            "grid" => Ok(BaseShape::Grid),
            "cylinder" => Ok(BaseShape::Cylinder),
            _ => Err(Error::config(format!(
                "unknown shape `{s}` (valid: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// Parameters of the synthetic dynamic point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_nodes: usize,
    pub n_frames: usize,
    pub base_shape: BaseShape,
    /// Rotation about the z-axis per frame, radians.
    pub rotation_rate: f64,
    pub deformation_amplitude: f64,
    /// Full deformation cycles over the whole sequence.
    pub deformation_frequency: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Neighbours per node in the returned kNN graph.
    pub k_neighbors: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_nodes: 128,
            n_frames: 200,
            base_shape: BaseShape::Cylinder,
            rotation_rate: 0.01,
            deformation_amplitude: 0.2,
            deformation_frequency: 2.0,
            noise_std: 0.05,
            seed: 0,
            k_neighbors: 6,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.n_nodes >= 4, || {
            format!("synthetic data needs n_nodes >= 4, got {}", self.n_nodes)
        })?;
        ensure(self.n_frames >= 1, || "n_frames must be >= 1".into())?;
        ensure(
            self.deformation_amplitude >= 0.0 && self.noise_std >= 0.0,
            || "amplitudes must be non-negative".into(),
        )?;
        ensure(
            [
                self.rotation_rate,
                self.deformation_amplitude,
                self.deformation_frequency,
                self.noise_std,
            ]
            .iter()
            .all(|v| v.is_finite()),
            || "synthetic parameters must be finite".into(),
        )?;
        ensure(
            self.k_neighbors >= 1 && self.k_neighbors < self.n_nodes,
            || {
                format!(
                    "k_neighbors must lie in 1..{}, got {}",
                    self.n_nodes, self.k_neighbors
                )
            },
        )
    }
}

fn base_points(shape: BaseShape, n: usize) -> Vec<[f64; 3]> {
    match shape {
        BaseShape::Ring => (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        BaseShape::Grid => {
            let side = (n as f64).sqrt().ceil() as usize;
            let step = if side > 1 {
                2.0 / (side - 1) as f64
            } else {
                0.0
            };
            (0..n)
                .map(|i| {
                    [
                        -1.0 + step * (i % side) as f64,
                        -1.0 + step * (i / side) as f64,
                        0.0,
                    ]
                })
                .collect()
        }
        BaseShape::Cylinder => {
            let rings = ((n as f64 / 2.0).sqrt().round() as usize).max(1);
            let per_ring = n.div_ceil(rings);
            (0..n)
                .map(|i| {
                    let (r, j) = (i / per_ring, i % per_ring);
                    let offset = if r % 2 == 1 { 0.5 } else { 0.0 };
                    let a = 2.0 * PI * (j as f64 + offset) / per_ring as f64;
                    let z = if rings > 1 {
                        -1.0 + 2.0 * r as f64 / (rings - 1) as f64
                    } else {
                        0.0
                    };
                    [a.cos(), a.sin(), z]
                })
                .collect()
        }
    }
}

/// Generates a rotating, deforming, noisy point cloud and the kNN graph of
/// its first frame.
///
/// Frame `t` is `R_z(t·rate)·(p_i + A·sin(2π·f·t/T)·cos(φ_i)·ẑ) + ε`, where
/// `φ_i` is the azimuth of base point `p_i` and `ε` is Gaussian noise.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(FrameSequence, Graph)> {
    cfg.validate()?;
    let n = cfg.n_nodes;
    let base = base_points(cfg.base_shape, n);
    let profile: Vec<f64> = base.iter().map(|p| p[1].atan2(p[0]).cos()).collect();
    let mut rng = seeded(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std)
        .map_err(|e| Error::config(format!("invalid noise_std: {e}")))?;

    let mut frames = Vec::with_capacity(cfg.n_frames);
    for t in 0..cfg.n_frames {
        let angle = t as f64 * cfg.rotation_rate;
        let (s, c) = angle.sin_cos();
        let phase = 2.0 * PI * cfg.deformation_frequency * t as f64 / cfg.n_frames as f64;
        let wave = cfg.deformation_amplitude * phase.sin();
        let mut frame = DenseMatrix::zeros(n, 3);
        for (i, p) in base.iter().enumerate() {
            let z = p[2] + wave * profile[i];
            let row = frame.row_mut(i);
            row[0] = c * p[0] - s * p[1];
            row[1] = s * p[0] + c * p[1];
            row[2] = z;
            if cfg.noise_std > 0.0 {
                for v in row.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            }
        }
        frames.push(frame);
    }
    let graph = build_knn_graph(&frames[0], cfg.k_neighbors)?;
    Ok((FrameSequence::new(n, 3, frames)?, graph))
}

/// Which frames the kNN graph is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GraphSource {
    #[default]
    FirstFrame,
    MeanFrame,
}

impl FromStr for GraphSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first_frame" => Ok(GraphSource::FirstFrame),
            "mean" | "mean_frame" => Ok(GraphSource::MeanFrame),
            _ => Err(Error::config(format!(
                "unknown graph source `{s}` (valid: first, mean)"
            ))),
        }
    }
}

impl GraphSource {
    pub fn name(self) -> &'static str {
        match self {
            GraphSource::FirstFrame => "first",
            GraphSource::MeanFrame => "mean",
        }
    }
}

/// kNN graph from the training frames of a sequence.
pub fn graph_from_frames(train: &FrameSequence, k: usize, source: GraphSource) -> Result<Graph> {
    ensure(train.n_frames() >= 1, || {
        "no frames to build a graph from".into()
    })?;
    match source {
        GraphSource::FirstFrame => build_knn_graph(train.frame(0), k),
        GraphSource::MeanFrame => build_knn_graph(&train.mean_frame(), k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(frame: &DenseMatrix) -> Vec<f64> {
        let n = frame.n_rows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d: f64 = frame
                    .row(i)
                    .iter()
                    .zip(frame.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                out.push(d.sqrt());
            }
        }
        out
    }

    #[test]
    fn static_config_repeats_first_frame() {
        let cfg = SyntheticConfig {
            n_nodes: 16,
            n_frames: 5,
            rotation_rate: 0.0,
            deformation_amplitude: 0.0,
            noise_std: 0.0,
            ..SyntheticConfig::default()
        };
        let (seq, _) = generate_synthetic(&cfg).unwrap();
        for f in seq.frames() {
            assert_eq!(f, seq.frame(0));
        }
    }

    #[test]
    fn rigid_rotation_preserves_distances() {
        let cfg = SyntheticConfig {
            n_nodes: 20,
            n_frames: 6,
            rotation_rate: 0.3,
            deformation_amplitude: 0.0,
            noise_std: 0.0,
            base_shape: BaseShape::Grid,
            ..SyntheticConfig::default()
        };
        let (seq, _) = generate_synthetic(&cfg).unwrap();
        let d0 = pairwise(seq.frame(0));
        for t in 1..6 {
            let frame = seq.frame(t);
            let (s, c) = (0.3 * t as f64).sin_cos();
            for i in 0..20 {
                let p = seq.frame(0).row(i);
                let q = frame.row(i);
                assert!((q[0] - (c * p[0] - s * p[1])).abs() < 1e-12);
                assert!((q[1] - (s * p[0] + c * p[1])).abs() < 1e-12);
                assert!((q[2] - p[2]).abs() < 1e-12);
            }
            for (a, b) in d0.iter().zip(pairwise(frame)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_sequence_moves() {
        let (seq, graph) = generate_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(
            (seq.n_nodes(), seq.n_features(), seq.n_frames()),
            (128, 3, 200)
        );
        assert!(seq.copy_last_loss() > 0.0);
        assert!(graph.degrees().iter().all(|&d| (6..=12).contains(&d)));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig {
            n_nodes: 24,
            n_frames: 10,
            ..SyntheticConfig::default()
        };
        let (a, ga) = generate_synthetic(&cfg).unwrap();
        let (b, gb) = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let (c, _) = generate_synthetic(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn all_shapes_generate() {
        for shape in [BaseShape::Ring, BaseShape::Grid, BaseShape::Cylinder] {
            let cfg = SyntheticConfig {
                n_nodes: 30,
                n_frames: 3,
                base_shape: shape,
                ..SyntheticConfig::default()
            };
            let (seq, g) = generate_synthetic(&cfg).unwrap();
            assert_eq!(seq.n_nodes(), 30);
            assert_eq!(g.n_nodes(), 30);
        }
        assert!("sphere".parse::<BaseShape>().is_err());
        assert!(generate_synthetic(&SyntheticConfig {
            n_nodes: 3,
            ..SyntheticConfig::default()
        })
        .is_err());
    }

    #[test]
    fn text_round_trip_and_parse_errors() {
        let cfg = SyntheticConfig {
            n_nodes: 8,
            n_frames: 3,
            ..SyntheticConfig::default()
        };
        let (seq, _) = generate_synthetic(&cfg).unwrap();
        assert_eq!(FrameSequence::from_text(&seq.to_text()).unwrap(), seq);

        assert!(matches!(
            FrameSequence::from_text(""),
            Err(Error::Parse { line: 1, .. })
        ));
        let short = "gfrm 1 2 1 2\n1.0\n2.0\n3.0\n";
        match FrameSequence::from_text(short) {
            Err(Error::Parse { message, .. }) => {
                assert!(
                    message.contains("2 frames") && message.contains("1 complete"),
                    "{message}"
                );
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            FrameSequence::from_text("gfrm 1 1 2 1\n1.0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(FrameSequence::from_text("frames 1 1 1 1\n0\n").is_err());
    }

    #[test]
    fn split_examples() {
        let mk = |t: usize| {
            FrameSequence::from_frames(
                (0..t)
                    .map(|i| DenseMatrix::filled(2, 1, i as f64))
                    .collect(),
            )
            .unwrap()
        };
        let (a, b) = split_train_test(&mk(573), 0.8).unwrap();
        assert_eq!((a.n_frames(), b.n_frames()), (458, 115));
        let (a, b) = split_train_test(&mk(10), 0.5).unwrap();
        assert_eq!((a.n_frames(), b.n_frames()), (5, 5));
        let (a, b) = split_train_test(&mk(2), 0.8).unwrap();
        assert_eq!((a.n_frames(), b.n_frames()), (1, 1));
        assert_eq!(a.frame(0)[(0, 0)], 0.0);
        assert_eq!(b.frame(0)[(0, 0)], 1.0);

        assert!(split_train_test(&mk(2), 0.2).is_err());
        assert!(split_train_test(&mk(5), 1.0).is_err());
        assert!(split_train_test(&mk(1), 0.5).is_err());
    }
}
