//! Finite kernel spaces: a point list with a symmetric, nonnegative,
//! extended-real kernel matrix, plus index subsets of it.

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtendedValue;

/// Kernels available to the grid builders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `|x − y|`
    Euclid,
    /// `0` on the diagonal, `1` elsewhere
    Discrete,
    /// `−log |x − y|`, infinite on the diagonal; needs `|x − y| ≤ 1`
    NegLog,
    /// `|x − y|^(−s)`, infinite on the diagonal
    Riesz(f64),
}

impl Kernel {
    /// Evaluates the kernel at two points of equal dimension.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<ExtendedValue> {
        if x.len() != y.len() {
            return Err(Error::Argument(format!(
                "points of different dimension ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        let dist = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        match *self {
            Kernel::Euclid => ExtendedValue::finite(dist),
            Kernel::Discrete => Ok(if x == y {
                ExtendedValue::ZERO
            } else {
                ExtendedValue::finite(1.0)?
            }),
            Kernel::NegLog => {
                if dist == 0.0 {
                    Ok(ExtendedValue::INFINITY)
                } else if dist > 1.0 {
                    Err(Error::Domain(format!(
                        "-log|x-y| is negative at distance {dist} > 1"
                    )))
                } else {
                    ExtendedValue::finite(-dist.ln())
                }
            }
            Kernel::Riesz(s) => {
                if !(s > 0.0) {
                    return Err(Error::Argument(format!("riesz exponent {s} must be > 0")));
                }
                if dist == 0.0 {
                    Ok(ExtendedValue::INFINITY)
                } else {
                    ExtendedValue::finite(dist.powf(-s))
                }
            }
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    /// `euclid`, `discrete`, `neglog`, or `riesz:<s>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euclid" => Ok(Kernel::Euclid),
            "discrete" => Ok(Kernel::Discrete),
            "neglog" => Ok(Kernel::NegLog),
            other => {
                if let Some(exp) = other.strip_prefix("riesz:") {
                    let s: f64 = exp
                        .parse()
                        .map_err(|_| Error::Argument(format!("bad riesz exponent {exp:?}")))?;
                    if !(s > 0.0) {
                        return Err(Error::Argument(format!("riesz exponent {s} must be > 0")));
                    }
                    Ok(Kernel::Riesz(s))
                } else {
                    Err(Error::Argument(format!("unknown kernel {other:?}")))
                }
            }
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Euclid => f.write_str("euclid"),
            Kernel::Discrete => f.write_str("discrete"),
            Kernel::NegLog => f.write_str("neglog"),
            Kernel::Riesz(s) => write!(f, "riesz:{s}"),
        }
    }
}

/// Kernel value for two points (free-function form of [`Kernel::eval`]).
pub fn kernel_eval(kernel: Kernel, x: &[f64], y: &[f64]) -> Result<ExtendedValue> {
    kernel.eval(x, y)
}

/// Metric used on the circle grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircleMetric {
    Chordal,
    Geodesic,
}

impl FromStr for CircleMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chordal" => Ok(CircleMetric::Chordal),
            "geodesic" => Ok(CircleMetric::Geodesic),
            other => Err(Error::Argument(format!("unknown circle metric {other:?}"))),
        }
    }
}

/// A finite space with a dense, validated kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpace {
    label: String,
    coords: Option<Vec<Vec<f64>>>,
    n: usize,
    kernel: Vec<ExtendedValue>,
}

impl DiscreteSpace {
    /// Validates symmetry (exact) and shape. Nonnegativity is guaranteed by [`ExtendedValue`].
    pub fn new(
        label: impl Into<String>,
        coords: Option<Vec<Vec<f64>>>,
        matrix: Vec<Vec<ExtendedValue>>,
    ) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::Validation("kernel matrix has no points".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::Validation(format!(
                        "kernel not symmetric at ({i},{j}): {} vs {}",
                        matrix[i][j], matrix[j][i]
                    )));
                }
            }
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::Validation(format!(
                    "{} coordinates for {n} points",
                    c.len()
                )));
            }
        }
        Ok(DiscreteSpace {
            label: label.into(),
            coords,
            n,
            kernel: matrix.into_iter().flatten().collect(),
        })
    }

    /// Fills the kernel matrix from point coordinates.
    pub fn from_points(
        label: impl Into<String>,
        points: Vec<Vec<f64>>,
        kernel: Kernel,
    ) -> Result<Self> {
        let n = points.len();
        let mut matrix = vec![vec![ExtendedValue::ZERO; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(&points[i], &points[j])?;
                matrix[i][j] = v;
                matrix[j][i] = v;
            }
        }
        Self::new(label, Some(points), matrix)
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    #[inline]
    pub fn k(&self, i: usize, j: usize) -> ExtendedValue {
        self.kernel[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[ExtendedValue] {
        &self.kernel[i * self.n..(i + 1) * self.n]
    }

    pub fn matrix(&self) -> Vec<Vec<ExtendedValue>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn all(&self) -> SubsetRef {
        SubsetRef::all(self.n)
    }

    /// True when no entry is infinite.
    pub fn is_finite_valued(&self) -> bool {
        self.kernel.iter().all(|v| v.is_finite())
    }

    /// Largest finite entry (0 for an all-infinite matrix).
    pub fn max_finite_entry(&self) -> f64 {
        self.kernel
            .iter()
            .filter_map(|v| v.value())
            .fold(0.0, f64::max)
    }

    /// Copy of the space with a new label.
    pub fn relabeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn to_file(&self) -> SpaceFile {
        SpaceFile {
            schema: Some(1),
            label: self.label.clone(),
            coords: self.coords.clone(),
            kernel: self.matrix(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("malformed space file: {e}")))?;
        Self::new(file.label, file.coords, file.kernel)
    }

    /// Header-free CSV kernel matrix; entries are numbers or `inf`.
    pub fn from_csv_reader<R: Read>(label: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut matrix = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let row = record
                .iter()
                .map(|f| f.parse::<ExtendedValue>())
                .collect::<Result<Vec<_>>>()?;
            matrix.push(row);
        }
        Self::new(label, None, matrix)
    }
}

/// On-disk form of a space: `{"label", "coords"?, "kernel": [[...]]}` with `"inf"` strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    pub kernel: Vec<Vec<ExtendedValue>>,
}

/// Checks a square matrix and wraps it as an unlabeled space.
pub fn build_from_matrix(matrix: Vec<Vec<ExtendedValue>>) -> Result<DiscreteSpace> {
    let n = matrix.len();
    DiscreteSpace::new(format!("matrix[{n}]"), None, matrix)
}

/// `n` equally spaced points on `[a, b]`, endpoints included.
pub fn build_interval_grid(a: f64, b: f64, n: usize, kernel: Kernel) -> Result<DiscreteSpace> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Argument(format!(
            "need finite a < b, got [{a}, {b}]"
        )));
    }
    if n < 2 {
        return Err(Error::Argument(format!(
            "grid needs at least 2 points, got {n}"
        )));
    }
    let h = (b - a) / (n - 1) as f64;
    let points = (0..n)
        .map(|i| {
            if i == n - 1 {
                vec![b]
            } else {
                vec![a + i as f64 * h]
            }
        })
        .collect();
    DiscreteSpace::from_points(format!("interval[{a},{b}]/{n}/{kernel}"), points, kernel)
}

/// `n` equally spaced points on the unit circle.
pub fn build_circle_grid(n: usize, metric: CircleMetric) -> Result<DiscreteSpace> {
    if n < 3 {
        return Err(Error::Argument(format!(
            "circle grid needs at least 3 points, got {n}"
        )));
    }
    let coords = (0..n)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let mut matrix = vec![vec![ExtendedValue::ZERO; n]; n];
    for i in 0..n {
        for j in 0..n {
            let d = i.abs_diff(j).min(n - i.abs_diff(j));
            let v = match metric {
                _ if d == 0 => 0.0,
                CircleMetric::Chordal => 2.0 * (PI * d as f64 / n as f64).sin(),
                CircleMetric::Geodesic => 2.0 * PI / n as f64 * d as f64,
            };
            matrix[i][j] = ExtendedValue::finite(v)?;
        }
    }
    let name = match metric {
        CircleMetric::Chordal => "chordal",
        CircleMetric::Geodesic => "geodesic",
    };
    DiscreteSpace::new(format!("circle/{n}/{name}"), Some(coords), matrix)
}

/// The two-point space `{a, b}` with the discrete metric.
pub fn discrete_two_point() -> DiscreteSpace {
    let one = ExtendedValue::finite(1.0).unwrap();
    DiscreteSpace::new(
        "discrete2",
        None,
        vec![
            vec![ExtendedValue::ZERO, one],
            vec![one, ExtendedValue::ZERO],
        ],
    )
    .expect("valid two-point space")
}

/// A sorted, duplicate-free set of point indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetRef {
    indices: Vec<usize>,
}

impl SubsetRef {
    pub fn all(n: usize) -> Self {
        SubsetRef {
            indices: (0..n).collect(),
        }
    }

    /// Sorts and deduplicates; every index must be `< n_points`.
    pub fn new(mut indices: Vec<usize>, n_points: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n_points) {
            return Err(Error::Argument(format!(
                "index {bad} out of range for {n_points} points"
            )));
        }
        Ok(SubsetRef { indices })
    }

    pub fn singleton(i: usize, n_points: usize) -> Result<Self> {
        Self::new(vec![i], n_points)
    }

    /// Parses `all`, a comma list `0,2,5`, or ranges `i..j` / `i..=j` (comma-combinable).
    pub fn parse(spec: &str, n_points: usize) -> Result<Self> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("all") {
            return Ok(Self::all(n_points));
        }
        let mut out = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || Error::Argument(format!("bad subset selector {part:?}"));
            if let Some((a, b)) = part.split_once("..") {
                let start: usize = a.trim().parse().map_err(|_| bad())?;
                let (end, inclusive) = match b.strip_prefix('=') {
                    Some(rest) => (rest.trim().parse::<usize>().map_err(|_| bad())?, true),
                    None => (b.trim().parse::<usize>().map_err(|_| bad())?, false),
                };
                let end = if inclusive { end + 1 } else { end };
                out.extend(start..end);
            } else {
                out.push(part.parse().map_err(|_| bad())?);
            }
        }
        Self::new(out, n_points)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &SubsetRef) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    pub(crate) fn require_nonempty(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            Err(Error::Argument(format!("{what} must be non-empty")))
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_in(&self, space: &DiscreteSpace) -> Result<()> {
        match self.indices.last() {
            Some(&i) if i >= space.n_points() => Err(Error::Argument(format!(
                "index {i} out of range for {} points",
                space.n_points()
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SubsetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: f64) -> ExtendedValue {
        ExtendedValue::finite(v).unwrap()
    }

    #[test]
    fn kernel_zoo() {
        assert_eq!(Kernel::Euclid.eval(&[0.0], &[1.0]).unwrap(), f(1.0));
        let v = Kernel::NegLog
            .eval(&[0.0], &[0.25])
            .unwrap()
            .value()
            .unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-15);
        assert_eq!(
            Kernel::Discrete.eval(&[3.0], &[3.0]).unwrap(),
            ExtendedValue::ZERO
        );
        assert_eq!(
            Kernel::NegLog.eval(&[0.5], &[0.5]).unwrap(),
            ExtendedValue::INFINITY
        );
        assert_eq!(Kernel::Riesz(1.0).eval(&[0.0], &[0.5]).unwrap(), f(2.0));
        assert!(matches!(
            Kernel::NegLog.eval(&[0.0], &[1.5]),
            Err(Error::Domain(_))
        ));
        assert_eq!("riesz:2.5".parse::<Kernel>().unwrap(), Kernel::Riesz(2.5));
        assert!("riesz:-1".parse::<Kernel>().is_err());
    }

    #[test]
    fn interval_grids() {
        let g2 = build_interval_grid(0.0, 1.0, 2, Kernel::Euclid).unwrap();
        assert_eq!(
            g2.matrix(),
            vec![vec![f(0.0), f(1.0)], vec![f(1.0), f(0.0)]]
        );

        let g3 = build_interval_grid(0.0, 1.0, 3, Kernel::Euclid).unwrap();
        assert_eq!(
            g3.matrix(),
            vec![
                vec![f(0.0), f(0.5), f(1.0)],
                vec![f(0.5), f(0.0), f(0.5)],
                vec![f(1.0), f(0.5), f(0.0)],
            ]
        );

        let l3 = build_interval_grid(0.0, 1.0, 3, Kernel::NegLog).unwrap();
        let ln2 = 2f64.ln();
        for i in 0..3 {
            assert_eq!(l3.k(i, i), ExtendedValue::INFINITY);
        }
        assert!((l3.k(0, 1).value().unwrap() - ln2).abs() < 1e-15);
        assert!((l3.k(1, 2).value().unwrap() - ln2).abs() < 1e-15);
        assert_eq!(l3.k(0, 2), ExtendedValue::ZERO);

        assert!(matches!(
            build_interval_grid(0.0, 2.0, 3, Kernel::NegLog),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn circle_grids() {
        let c4 = build_circle_grid(4, CircleMetric::Chordal).unwrap();
        let s2 = 2f64.sqrt();
        for i in 0..4 {
            let mut off: Vec<f64> = (0..4)
                .filter(|&j| j != i)
                .map(|j| c4.k(i, j).value().unwrap())
                .collect();
            off.sort_by(f64::total_cmp);
            assert!((off[0] - s2).abs() < 1e-15 && (off[1] - s2).abs() < 1e-15);
            assert!((off[2] - 2.0).abs() < 1e-15);
            let row_mean: f64 = (0..4).map(|j| c4.k(i, j).value().unwrap()).sum::<f64>() / 4.0;
            let closed = 0.5 / (PI / 8.0).tan();
            assert!((row_mean - closed).abs() < 1e-12);
            assert!((row_mean - 1.2071).abs() < 1e-4);
        }

        let g3 = build_circle_grid(3, CircleMetric::Geodesic).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 2.0 * PI / 3.0 };
                assert_eq!(g3.k(i, j).value().unwrap(), want);
            }
        }
    }

    #[test]
    fn matrix_validation() {
        let ok = build_from_matrix(vec![vec![f(0.0), f(1.0)], vec![f(1.0), f(0.0)]]).unwrap();
        assert_eq!(ok, discrete_two_point().relabeled("matrix[2]"));

        let err = build_from_matrix(vec![vec![f(0.0), f(1.0)], vec![f(2.0), f(0.0)]]).unwrap_err();
        assert!(err.to_string().contains("(0,1)"), "{err}");

        let inf = ExtendedValue::INFINITY;
        assert!(build_from_matrix(vec![vec![inf, f(1.0)], vec![f(1.0), inf]]).is_ok());
        assert!(build_from_matrix(vec![vec![f(0.0)], vec![f(0.0)]]).is_err());
    }

    #[test]
    fn negative_entries_rejected_at_ingestion() {
        let err =
            DiscreteSpace::from_json(r#"{"label":"x","kernel":[[0,-1],[-1,0]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let csv = "0,-1\n-1,0\n";
        assert!(DiscreteSpace::from_csv_reader("c", csv.as_bytes()).is_err());
    }

    #[test]
    fn csv_ingestion() {
        let csv = "inf, 1\n1, inf\n";
        let s = DiscreteSpace::from_csv_reader("c", csv.as_bytes()).unwrap();
        assert_eq!(s.k(0, 0), ExtendedValue::INFINITY);
        assert_eq!(s.k(0, 1), f(1.0));
    }

    #[test]
    fn subset_parsing() {
        assert_eq!(SubsetRef::parse("all", 3).unwrap().indices(), &[0, 1, 2]);
        assert_eq!(SubsetRef::parse("4,1,1", 5).unwrap().indices(), &[1, 4]);
        assert_eq!(SubsetRef::parse("2..5", 6).unwrap().indices(), &[2, 3, 4]);
        assert_eq!(
            SubsetRef::parse("0..=1,4", 6).unwrap().indices(),
            &[0, 1, 4]
        );
        assert!(SubsetRef::parse("9", 3).is_err());
        assert!(SubsetRef::parse("a..b", 3).is_err());
        let h = SubsetRef::parse("1", 3).unwrap();
        assert!(h.is_subset_of(&SubsetRef::all(3)));
    }

    #[test]
    fn euclid_grid_is_metric() {
        let g = build_interval_grid(-1.0, 2.0, 64, Kernel::Euclid).unwrap();
        let n = g.n_points();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let lhs = g.k(i, l).value().unwrap();
                    let rhs = g.k(i, j).value().unwrap() + g.k(j, l).value().unwrap();
                    assert!(lhs <= rhs + 1e-12);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sym_matrix() -> impl Strategy<Value = Vec<Vec<ExtendedValue>>> {
            (1usize..7).prop_flat_map(|n| {
                proptest::collection::vec(
                    prop_oneof![
                        5 => any::<f64>()
                            .prop_filter("finite", |v| v.is_finite())
                            .prop_map(|v| ExtendedValue::finite(v.abs()).unwrap()),
                        1 => Just(ExtendedValue::INFINITY),
                    ],
                    n * n,
                )
                .prop_map(move |flat| {
                    let mut m = vec![vec![ExtendedValue::ZERO; n]; n];
                    for i in 0..n {
                        for j in i..n {
                            m[i][j] = flat[i * n + j];
                            m[j][i] = flat[i * n + j];
                        }
                    }
                    m
                })
            })
        }

        proptest! {
            #[test]
            fn json_round_trip_is_bit_exact(m in sym_matrix()) {
                let s = build_from_matrix(m).unwrap();
                let back = DiscreteSpace::from_json(&s.to_json().unwrap()).unwrap();
                for i in 0..s.n_points() {
                    for j in 0..s.n_points() {
                        let (a, b) = (s.k(i, j), back.k(i, j));
                        prop_assert_eq!(a.is_infinite(), b.is_infinite());
                        if let (Some(x), Some(y)) = (a.value(), b.value()) {
                            prop_assert_eq!(x.to_bits(), y.to_bits());
                        }
                    }
                }
            }
        }
    }
}
