//! Point sets, subset selections and the experiment population generators.

use std::fmt;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// A point of the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::invalid(format!("coordinate {c} outside [0, 1]")));
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// An ordered, immutable list of `N` points in `[0,1]^d`.
///
/// Coordinates are stored row-major; index `i` identifies point `i` for the
/// lifetime of the set.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "mixed dimensions: expected {dim}, got {}",
                    p.len()
                )));
            }
            coords.extend(p);
        }
        Self::from_flat(dim, coords)
    }

    /// Builds a point set from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid("point set must contain at least one complete point"));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::invalid(format!("coordinate {c} outside [0, 1]")));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Copies out the points of `sel` as a standalone set.
    pub fn select(&self, sel: &SubsetSelection) -> PointSet {
        let mut coords = Vec::with_capacity(sel.len() * self.dim);
        for &i in sel.indices() {
            coords.extend_from_slice(self.point(i));
        }
        PointSet { dim: self.dim, coords }
    }

    pub fn read_csv(path: impl AsRef<Path>, header: bool) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(header)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let mut points = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            let row = record
                .iter()
                .map(|field| {
                    field.parse::<f64>().map_err(|e| {
                        Error::invalid(format!("{}: bad coordinate `{field}`: {e}", path.display()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(row);
        }
        PointSet::new(points)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
        if header {
            let names: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
            writer.write_record(&names).map_err(csv_err)?;
        }
        for p in self.iter() {
            writer
                .write_record(p.iter().map(|c| c.to_string()))
                .map_err(csv_err)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

/// A sorted list of distinct indices into a population.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetSelection(Vec<usize>);

impl SubsetSelection {
    /// Canonicalizes `indices` (any order) and checks them against a
    /// population of size `pop_size`.
    pub fn new(mut indices: Vec<usize>, pop_size: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("subset must contain at least one index"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("subset contains duplicate indices"));
        }
        if let Some(&last) = indices.last() {
            if last >= pop_size {
                return Err(Error::invalid(format!(
                    "index {last} out of range for population of size {pop_size}"
                )));
            }
        }
        Ok(SubsetSelection(indices))
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SubsetSelection(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Replaces member `out` with non-member `inn`.
    pub fn swap(&self, out: usize, inn: usize) -> Result<Self> {
        let pos = self
            .0
            .binary_search(&out)
            .map_err(|_| Error::InvalidSwap(format!("{out} is not in the subset")))?;
        let ins = match self.0.binary_search(&inn) {
            Ok(_) => return Err(Error::InvalidSwap(format!("{inn} is already in the subset"))),
            Err(ins) => ins,
        };
        let mut v = self.0.clone();
        v.remove(pos);
        let ins = if ins > pos { ins - 1 } else { ins };
        v.insert(ins, inn);
        Ok(SubsetSelection(v))
    }

    /// Index of the `k`-th population index (in increasing order) that is
    /// not a member, for `k < pop_size - len`.
    pub(crate) fn kth_non_member(&self, mut k: usize) -> usize {
        // Walk the gaps between consecutive members.
        let mut next = 0;
        for &member in &self.0 {
            let gap = member - next;
            if k < gap {
                return next + k;
            }
            k -= gap;
            next = member + 1;
        }
        next + k
    }

    pub fn read_json(path: impl AsRef<Path>, pop_size: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let indices: Vec<usize> = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        SubsetSelection::new(indices, pop_size)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("index list serializes")
    }
}

impl fmt::Display for SubsetSelection {
    /// Semicolon-joined index list, as used in trace files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

/// `n` i.i.d. uniform points on `[0,1]^d`.
pub fn generate_uniform(n: usize, d: usize, seed: RngSeed) -> Result<PointSet> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("uniform population needs n >= 1 and d >= 1"));
    }
    let mut rng = seed.stream("population/uniform");
    let coords = (0..n * d).map(|_| rng.random::<f64>()).collect();
    PointSet::from_flat(d, coords)
}

/// One isotropic Gaussian component of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Point,
    pub stddev: f64,
    pub weight: f64,
}

/// The two-cluster mixture used for the MMD experiment: means (0.3, 0.3)
/// and (0.7, 0.7), stddev 0.1, equal weights.
pub fn default_mixture() -> Vec<MixtureComponent> {
    [[0.3, 0.3], [0.7, 0.7]]
        .into_iter()
        .map(|mean| MixtureComponent {
            mean: Point(mean.to_vec()),
            stddev: 0.1,
            weight: 0.5,
        })
        .collect()
}

const MIN_ACCEPTANCE: f64 = 1e-6;

/// Probability that an isotropic Gaussian draw lands in the unit cube.
fn cube_acceptance(c: &MixtureComponent) -> f64 {
    let phi = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    c.mean
        .coords()
        .iter()
        .map(|&mu| phi((1.0 - mu) / c.stddev) - phi(-mu / c.stddev))
        .product()
}

/// `n` points from a Gaussian mixture truncated to the unit cube.
///
/// Each point picks a component by normalized weight and then redraws the
/// isotropic Gaussian until it falls inside `[0,1]^d` (no clipping).
pub fn generate_gaussian_mixture(
    n: usize,
    d: usize,
    components: &[MixtureComponent],
    seed: RngSeed,
) -> Result<PointSet> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("mixture population needs n >= 1 and d >= 1"));
    }
    if components.is_empty() {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    for c in components {
        if c.mean.dim() != d {
            return Err(Error::invalid(format!(
                "component mean has dimension {}, expected {d}",
                c.mean.dim()
            )));
        }
        if !(c.stddev > 0.0 && c.stddev.is_finite()) {
            return Err(Error::invalid("component stddev must be positive"));
        }
        if !(c.weight >= 0.0 && c.weight.is_finite()) {
            return Err(Error::invalid("component weight must be non-negative"));
        }
    }
    let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
    let picker = WeightedIndex::new(&weights)
        .map_err(|_| Error::invalid("mixture weights must sum to a positive value"))?;
    for c in components.iter().filter(|c| c.weight > 0.0) {
        let p = cube_acceptance(c);
        if p < MIN_ACCEPTANCE {
            return Err(Error::Rejection(format!(
                "component at {:?} lands in the unit cube with probability {p:e}",
                c.mean.coords()
            )));
        }
    }

    let mut rng = seed.stream("population/mixture");
    let mut coords = Vec::with_capacity(n * d);
    let mut draw = vec![0.0; d];
    for _ in 0..n {
        let c = &components[picker.sample(&mut rng)];
        loop {
            for (x, &mu) in draw.iter_mut().zip(c.mean.coords()) {
                let z: f64 = rng.sample(StandardNormal);
                *x = mu + c.stddev * z;
            }
            if draw.iter().all(|x| (0.0..=1.0).contains(x)) {
                break;
            }
        }
        coords.extend_from_slice(&draw);
    }
    PointSet::from_flat(d, coords)
}

/// Uniform `m`-subset of `0..pop_size` by Floyd's algorithm.
pub fn random_subset(pop_size: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<SubsetSelection> {
    if m == 0 || m > pop_size {
        return Err(Error::invalid(format!(
            "subset size {m} must lie in 1..={pop_size}"
        )));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for j in pop_size - m..pop_size {
        let t = rng.random_range(0..=j);
        let pick = match chosen.binary_search(&t) {
            Ok(_) => j,
            Err(_) => t,
        };
        // `j` exceeds everything drawn so far, `t` does not collide.
        let pos = chosen.binary_search(&pick).unwrap_err();
        chosen.insert(pos, pick);
    }
    Ok(SubsetSelection::from_sorted_unchecked(chosen))
}

/// Uniformly random 1-swap neighbour: one member out, one non-member in.
pub fn one_swap_neighbor(
    sel: &SubsetSelection,
    pop_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SubsetSelection> {
    let (out, inn) = random_swap(sel, pop_size, rng)?;
    sel.swap(out, inn)
}

/// Draws the `(out, in)` pair of a uniform 1-swap move.
pub fn random_swap(
    sel: &SubsetSelection,
    pop_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize)> {
    let m = sel.len();
    if m >= pop_size {
        return Err(Error::invalid("no 1-swap neighbours: subset is the whole population"));
    }
    let out = sel.indices()[rng.random_range(0..m)];
    let inn = sel.kth_non_member(rng.random_range(0..pop_size - m));
    Ok((out, inn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, HashMap};

    #[test]
    fn uniform_shapes_and_determinism() {
        let a = generate_uniform(1000, 2, RngSeed(3)).unwrap();
        assert_eq!((a.len(), a.dim()), (1000, 2));
        let one = generate_uniform(1, 1, RngSeed(3)).unwrap();
        assert_eq!(one.len(), 1);
        assert!((0.0..=1.0).contains(&one.point(0)[0]));
        let b = generate_uniform(100, 2, RngSeed(11)).unwrap();
        let c = generate_uniform(100, 2, RngSeed(11)).unwrap();
        let bits = |p: &PointSet| p.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&b), bits(&c));
    }

    #[test]
    fn uniform_rejects_empty() {
        assert!(generate_uniform(0, 2, RngSeed(0)).is_err());
        assert!(generate_uniform(5, 0, RngSeed(0)).is_err());
    }

    #[test]
    fn point_validation() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![0.5, 1.2]).is_err());
        assert!(PointSet::new(vec![vec![0.1], vec![0.2, 0.3]]).is_err());
        assert!(PointSet::new(vec![]).is_err());
    }

    #[test]
    fn mixture_default_stays_in_square() {
        let pop = generate_gaussian_mixture(1000, 2, &default_mixture(), RngSeed(1)).unwrap();
        assert_eq!(pop.len(), 1000);
        assert!(pop.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn mixture_degenerate_component() {
        let comps = vec![MixtureComponent {
            mean: Point::new(vec![0.5, 0.5]).unwrap(),
            stddev: 1e-9,
            weight: 1.0,
        }];
        let pop = generate_gaussian_mixture(50, 2, &comps, RngSeed(2)).unwrap();
        assert!(pop.iter().flatten().all(|x| (x - 0.5).abs() < 1e-6));
    }

    #[test]
    fn mixture_component_proportions() {
        // Points below the diagonal x + y < 1 come (almost surely) from the
        // first cluster; the count is Binomial(n, 1/2) under equal weights.
        let n = 10_000;
        let pop = generate_gaussian_mixture(n, 2, &default_mixture(), RngSeed(5)).unwrap();
        let lower = pop.iter().filter(|p| p[0] + p[1] < 1.0).count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        // Misassignment across the diagonal has probability ~1e-4 per point.
        assert!((lower - n as f64 / 2.0).abs() < 3.0 * sd + 5.0, "lower = {lower}");
    }

    #[test]
    fn mixture_errors() {
        assert!(generate_gaussian_mixture(10, 2, &[], RngSeed(0)).is_err());
        let mut zero = default_mixture();
        zero.iter_mut().for_each(|c| c.weight = 0.0);
        assert!(generate_gaussian_mixture(10, 2, &zero, RngSeed(0)).is_err());
        let wide = vec![MixtureComponent {
            mean: Point::new(vec![0.5, 0.5]).unwrap(),
            stddev: 1e6,
            weight: 1.0,
        }];
        assert!(matches!(
            generate_gaussian_mixture(10, 2, &wide, RngSeed(0)),
            Err(Error::Rejection(_))
        ));
    }

    #[test]
    fn subset_canonical_form() {
        let a = SubsetSelection::new(vec![4, 1, 3], 5).unwrap();
        let b = SubsetSelection::new(vec![1, 3, 4], 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices(), &[1, 3, 4]);
        assert!(SubsetSelection::new(vec![1, 1], 5).is_err());
        assert!(SubsetSelection::new(vec![5], 5).is_err());
        assert!(SubsetSelection::new(vec![], 5).is_err());
        assert_eq!(a.to_string(), "1;3;4");
    }

    #[test]
    fn kth_non_member_walks_gaps() {
        let s = SubsetSelection::new(vec![1, 2, 5], 8).unwrap();
        let non: Vec<usize> = (0..5).map(|k| s.kth_non_member(k)).collect();
        assert_eq!(non, vec![0, 3, 4, 6, 7]);
    }

    #[test]
    fn random_subset_full_set() {
        let mut rng = RngSeed(0).stream("t");
        let s = random_subset(5, 5, &mut rng).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2, 3, 4]);
        assert!(random_subset(5, 6, &mut rng).is_err());
    }

    #[test]
    fn random_subset_paper_size() {
        let mut rng = RngSeed(0).stream("t");
        let s = random_subset(1000, 25, &mut rng).unwrap();
        assert_eq!(s.len(), 25);
        assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
        assert!(*s.indices().last().unwrap() < 1000);
    }

    #[test]
    fn random_subset_is_uniform() {
        // Chi-square over the 6 two-element subsets of {0,1,2,3}.
        let draws = 100_000;
        let mut rng = RngSeed(9).stream("uniformity");
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            let s = random_subset(4, 2, &mut rng).unwrap();
            *counts.entry(s.indices().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let sd = (draws as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for (k, &c) in &counts {
            assert!((c as f64 - expected).abs() < 3.0 * sd, "{k:?}: {c}");
        }
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.999 quantile of chi-square with 5 degrees of freedom.
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    #[test]
    fn one_swap_small_neighbourhood() {
        let sel = SubsetSelection::new(vec![0, 1], 3).unwrap();
        let mut rng = RngSeed(1).stream("swap");
        let mut seen = BTreeSet::new();
        for _ in 0..200 {
            seen.insert(one_swap_neighbor(&sel, 3, &mut rng).unwrap().indices().to_vec());
        }
        assert_eq!(seen, BTreeSet::from([vec![0, 2], vec![1, 2]]));
        let full = SubsetSelection::new(vec![0, 1, 2], 3).unwrap();
        assert!(one_swap_neighbor(&full, 3, &mut rng).is_err());
    }

    #[test]
    fn neighbourhood_size_by_enumeration() {
        for (n, m) in [(6usize, 2usize), (7, 3), (9, 4)] {
            let sel = SubsetSelection::new((0..m).collect(), n).unwrap();
            let mut all = BTreeSet::new();
            for &o in sel.indices() {
                for k in 0..n - m {
                    all.insert(sel.swap(o, sel.kth_non_member(k)).unwrap());
                }
            }
            assert_eq!(all.len(), m * (n - m));
        }
        assert_eq!(25 * (1000 - 25), 24_375);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pop = generate_uniform(20, 3, RngSeed(4)).unwrap();
        for header in [false, true] {
            let path = dir.path().join(format!("p{header}.csv"));
            pop.write_csv(&path, header).unwrap();
            assert_eq!(PointSet::read_csv(&path, header).unwrap(), pop);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn swap_changes_exactly_one(seed in any::<u64>(), n in 2usize..40, frac in 0.0f64..1.0) {
                let m = 1 + ((n - 1) as f64 * frac) as usize % (n - 1);
                let mut rng = RngSeed(seed).stream("p");
                let sel = random_subset(n, m, &mut rng).unwrap();
                let next = one_swap_neighbor(&sel, n, &mut rng).unwrap();
                let a: BTreeSet<_> = sel.indices().iter().copied().collect();
                let b: BTreeSet<_> = next.indices().iter().copied().collect();
                prop_assert_eq!(a.symmetric_difference(&b).count(), 2);
                prop_assert!(next.indices().windows(2).all(|w| w[0] < w[1]));
            }

            #[test]
            fn canonical_order_insensitive(mut v in proptest::collection::btree_set(0usize..50, 1..20)
                .prop_map(|s| s.into_iter().collect::<Vec<_>>()), seed in any::<u64>()) {
                let sorted = SubsetSelection::new(v.clone(), 50).unwrap();
                use rand::seq::SliceRandom;
                v.shuffle(&mut RngSeed(seed).stream("shuffle"));
                prop_assert_eq!(SubsetSelection::new(v, 50).unwrap(), sorted);
            }
        }
    }
}
