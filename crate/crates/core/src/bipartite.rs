//! Colored bipartite graphs and the combinatorics of their perfect matchings.
//!
//! A perfect matching is stored as a permutation `γ` with `x_i` matched to
//! `y_γ(i)`. Matchings are grouped into classes by *spectrum*, the multiset
//! of edge colors they use; a class's *signature* is the sum of the signs
//! of its members. Every matrix in the colored pattern class is nonsingular
//! iff exactly one class has nonzero signature.
//!
//! Two independent routes are provided:
//!
//! * [`enumerate_matchings`] + [`equivalence_classes`] walk every matching
//!   explicitly (this is what [`pattern_nonsingular`] uses);
//! * [`symbolic_det`] expands the determinant of the symbolic pattern matrix
//!   by a subset dynamic program that never materializes a permutation.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{ColorId, Vertex};

/// Default cap on `|X|` for explicit enumeration.
pub const DEFAULT_MAX_SIDE: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("|X| = {x} but |Y| = {y}")]
    SizeMismatch { x: usize, y: usize },
    #[error("|X| = {size} exceeds the enumeration cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("duplicate bipartite edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("bipartite edge ({0}, {1}) is out of range")]
    IndexOutOfRange(usize, usize),
    #[error("vertex {0} appears on both sides")]
    OverlappingSides(usize),
}

/// `G(π) = (X, Y, E_XY, π_XY)`. Edges are `(x index, y index, local color)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredBipartite {
    x: Vec<Vertex>,
    y: Vec<Vertex>,
    edges: Vec<(usize, usize, usize)>,
    color_map: Vec<ColorId>,
    color_names: Vec<String>,
    color_at: Vec<Option<usize>>,
}

impl ColoredBipartite {
    /// Builds a bipartite graph from edges carrying global color ids. Global
    /// colors that occur are renumbered `0..ℓ` in increasing order; the map
    /// back is kept in [`ColoredBipartite::color_map`].
    pub fn with_global_colors(
        x: Vec<Vertex>,
        y: Vec<Vertex>,
        edges: Vec<(usize, usize, ColorId)>,
        global_names: &[String],
    ) -> Result<Self, MatchingError> {
        if let Some(&v) = x.iter().find(|v| y.contains(v)) {
            return Err(MatchingError::OverlappingSides(v));
        }
        let mut color_map: Vec<ColorId> = edges.iter().map(|e| e.2).collect();
        color_map.sort_unstable();
        color_map.dedup();
        let color_names = color_map
            .iter()
            .map(|&c| {
                global_names
                    .get(c)
                    .cloned()
                    .unwrap_or_else(|| format!("c{}", c + 1))
            })
            .collect();
        let (s, t) = (x.len(), y.len());
        let mut color_at = vec![None; s * t];
        let mut local = Vec::with_capacity(edges.len());
        for (i, j, c) in edges {
            if i >= s || j >= t {
                return Err(MatchingError::IndexOutOfRange(i, j));
            }
            if color_at[i * t + j].is_some() {
                return Err(MatchingError::DuplicateEdge(i, j));
            }
            let lc = color_map.binary_search(&c).expect("color collected above");
            color_at[i * t + j] = Some(lc);
            local.push((i, j, lc));
        }
        local.sort_unstable();
        Ok(ColoredBipartite {
            x,
            y,
            edges: local,
            color_map,
            color_names,
            color_at,
        })
    }

    /// Abstract `s x t` bipartite graph; `x_i` is vertex `i`, `y_j` is
    /// vertex `s + j`, and colors are named `c1, c2, ...` by their given id.
    pub fn from_local(
        s: usize,
        t: usize,
        edges: &[(usize, usize, ColorId)],
    ) -> Result<Self, MatchingError> {
        let k = edges.iter().map(|e| e.2 + 1).max().unwrap_or(0);
        let names: Vec<String> = (1..=k).map(|c| format!("c{c}")).collect();
        Self::with_global_colors(
            (0..s).collect(),
            (s..s + t).collect(),
            edges.to_vec(),
            &names,
        )
    }

    pub fn x_vertices(&self) -> &[Vertex] {
        &self.x
    }

    pub fn y_vertices(&self) -> &[Vertex] {
        &self.y
    }

    pub fn edges(&self) -> &[(usize, usize, usize)] {
        &self.edges
    }

    /// Local color id -> global color id.
    pub fn color_map(&self) -> &[ColorId] {
        &self.color_map
    }

    pub fn color_names(&self) -> &[String] {
        &self.color_names
    }

    pub fn palette_size(&self) -> usize {
        self.color_map.len()
    }

    pub fn is_square(&self) -> bool {
        self.x.len() == self.y.len()
    }

    pub fn color(&self, i: usize, j: usize) -> Option<usize> {
        self.color_at[i * self.y.len() + j]
    }

    fn adjacency(&self) -> Vec<u64> {
        let mut adj = vec![0u64; self.x.len()];
        for &(i, j, _) in &self.edges {
            adj[i] |= 1 << j;
        }
        adj
    }

    fn check_square(&self, cap: usize) -> Result<usize, MatchingError> {
        let (s, t) = (self.x.len(), self.y.len());
        if s != t {
            return Err(MatchingError::SizeMismatch { x: s, y: t });
        }
        if s > cap || s > 63 {
            return Err(MatchingError::TooLarge {
                size: s,
                cap: cap.min(63),
            });
        }
        Ok(s)
    }

    /// The pattern matrix realized at `values[c]` for local color `c`:
    /// entry `(j, i)` holds the value of edge `{x_i, y_j}`, zero otherwise.
    pub fn realize(&self, values: &[Complex64]) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.y.len(), self.x.len());
        for &(i, j, c) in &self.edges {
            m[(j, i)] = values[c];
        }
        m
    }
}

/// Color multiplicities over a local palette. Doubles as the exponent
/// vector of a monomial in the color variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Spectrum(pub Vec<u16>);

impl Spectrum {
    pub fn zero(colors: usize) -> Self {
        Spectrum(vec![0; colors])
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `c1^2·c3`-style rendering with the given color names.
    pub fn render(&self, names: &[String]) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(c, &e)| {
                if e == 1 {
                    names[c].clone()
                } else {
                    format!("{}^{e}", names[c])
                }
            })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("·")
        }
    }

    pub fn eval(&self, values: &[Complex64]) -> Complex64 {
        self.0
            .iter()
            .zip(values)
            .fold(Complex64::new(1.0, 0.0), |acc, (&e, v)| {
                acc * v.powu(e as u32)
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub assignment: Vec<usize>,
    pub sign: i8,
    pub spectrum: Spectrum,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingClass {
    pub spectrum: Spectrum,
    pub signature: i64,
    pub members: usize,
}

/// Parity of a permutation by counting inversions.
pub fn permutation_sign(perm: &[usize]) -> i8 {
    let mut inversions = 0usize;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn enumerate_matchings(b: &ColoredBipartite) -> Result<Vec<Matching>, MatchingError> {
    enumerate_matchings_with(b, DEFAULT_MAX_SIDE)
}

/// All perfect matchings in lexicographic order of their assignment.
///
/// Depth-first over `x_0, x_1, ...`; a branch is cut as soon as the
/// remaining `x`'s cannot be perfectly matched into the free `y`'s.
pub fn enumerate_matchings_with(
    b: &ColoredBipartite,
    max_side: usize,
) -> Result<Vec<Matching>, MatchingError> {
    let t = b.check_square(max_side)?;
    let adj = b.adjacency();
    let mut out = Vec::new();
    let mut assignment = Vec::with_capacity(t);
    if t == 0 || completable(&adj, 0, 0) {
        extend(b, &adj, &mut assignment, 0, &mut out);
    }
    Ok(out)
}

fn extend(
    b: &ColoredBipartite,
    adj: &[u64],
    assignment: &mut Vec<usize>,
    used: u64,
    out: &mut Vec<Matching>,
) {
    let i = assignment.len();
    if i == adj.len() {
        let mut spectrum = Spectrum::zero(b.palette_size());
        for (x, &y) in assignment.iter().enumerate() {
            spectrum.0[b.color(x, y).expect("matched along an edge")] += 1;
        }
        out.push(Matching {
            assignment: assignment.clone(),
            sign: permutation_sign(assignment),
            spectrum,
        });
        return;
    }
    let mut free = adj[i] & !used;
    while free != 0 {
        let j = free.trailing_zeros() as usize;
        free &= free - 1;
        let next = used | (1 << j);
        if completable(adj, i + 1, next) {
            assignment.push(j);
            extend(b, adj, assignment, next, out);
            assignment.pop();
        }
    }
}

/// Whether `x_from..` can be perfectly matched into the `y`'s not in `used`
/// (Kuhn's augmenting paths on bitmasks).
fn completable(adj: &[u64], from: usize, used: u64) -> bool {
    let t = adj.len();
    let mut owner: Vec<Option<usize>> = vec![None; t];
    fn augment(
        x: usize,
        adj: &[u64],
        used: u64,
        owner: &mut [Option<usize>],
        seen: &mut u64,
    ) -> bool {
        let mut cand = adj[x] & !used & !*seen;
        while cand != 0 {
            let y = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            *seen |= 1 << y;
            let free = match owner[y] {
                None => true,
                Some(o) => augment(o, adj, used, owner, seen),
            };
            if free {
                owner[y] = Some(x);
                return true;
            }
        }
        false
    }
    (from..t).all(|x| {
        let mut seen = 0u64;
        augment(x, adj, used, &mut owner, &mut seen)
    })
}

/// Groups matchings by spectrum; classes come out sorted by spectrum.
pub fn equivalence_classes(ms: &[Matching]) -> Vec<MatchingClass> {
    let mut by_spec: BTreeMap<&Spectrum, (i64, usize)> = BTreeMap::new();
    for m in ms {
        let entry = by_spec.entry(&m.spectrum).or_default();
        entry.0 += m.sign as i64;
        entry.1 += 1;
    }
    by_spec
        .into_iter()
        .map(|(spectrum, (signature, members))| MatchingClass {
            spectrum: spectrum.clone(),
            signature,
            members,
        })
        .collect()
}

/// The unique nonzero class signature, if there is exactly one.
pub fn certifying_signature(classes: &[MatchingClass]) -> Option<i64> {
    let mut nonzero = classes.iter().filter(|c| c.signature != 0);
    match (nonzero.next(), nonzero.next()) {
        (Some(c), None) => Some(c.signature),
        _ => None,
    }
}

/// Every matrix in the colored pattern class is nonsingular iff a perfect
/// matching exists and exactly one equivalence class has nonzero signature.
pub fn pattern_nonsingular(b: &ColoredBipartite) -> Result<bool, MatchingError> {
    let ms = enumerate_matchings(b)?;
    Ok(certifying_signature(&equivalence_classes(&ms)).is_some())
}

/// Integer polynomial in the color variables; only nonzero terms are kept.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetPolynomial {
    pub terms: BTreeMap<Spectrum, i64>,
}

impl DetPolynomial {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, values: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(mono, &coef)| mono.eval(values) * coef as f64)
            .sum()
    }

    pub fn render(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (mono, &coef)) in self.terms.iter().enumerate() {
            let sep = match (i, coef < 0) {
                (0, true) => "-",
                (0, false) => "",
                (_, true) => " - ",
                (_, false) => " + ",
            };
            s.push_str(sep);
            if coef.abs() != 1 {
                s.push_str(&format!("{}·", coef.abs()));
            }
            s.push_str(&mono.render(names));
        }
        s
    }
}

impl fmt::Display for DetPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.terms.keys().next().map_or(0, |m| m.0.len());
        let names: Vec<String> = (1..=k).map(|c| format!("c{c}")).collect();
        f.write_str(&self.render(&names))
    }
}

/// Determinant of the symbolic pattern matrix as a polynomial in the local
/// color variables.
///
/// Dynamic program over `x_0, x_1, ...` keyed by the set of used `y`'s.
/// Assigning `x_i` to `y_j` adds one inversion per already-used `y` with a
/// larger index, so signs are tracked incrementally.
pub fn symbolic_det(b: &ColoredBipartite) -> Result<DetPolynomial, MatchingError> {
    let t = b.check_square(usize::MAX)?;
    let k = b.palette_size();
    let mut layer: BTreeMap<u64, BTreeMap<Spectrum, i64>> = BTreeMap::new();
    layer.insert(0, BTreeMap::from([(Spectrum::zero(k), 1)]));
    for i in 0..t {
        let mut next: BTreeMap<u64, BTreeMap<Spectrum, i64>> = BTreeMap::new();
        for (&used, poly) in &layer {
            for j in 0..t {
                if used & (1 << j) != 0 {
                    continue;
                }
                let Some(c) = b.color(i, j) else { continue };
                let flips = (used >> (j + 1)).count_ones();
                let sign = if flips % 2 == 0 { 1 } else { -1 };
                let target = next.entry(used | (1 << j)).or_default();
                for (mono, &coef) in poly {
                    let mut m = mono.clone();
                    m.0[c] += 1;
                    *target.entry(m).or_insert(0) += sign * coef;
                }
            }
        }
        for poly in next.values_mut() {
            poly.retain(|_, c| *c != 0);
        }
        next.retain(|_, p| !p.is_empty());
        layer = next;
    }
    let full = if t == 0 { 0 } else { u64::MAX >> (64 - t) };
    let terms = layer.remove(&full).unwrap_or_default();
    Ok(DetPolynomial { terms })
}

/// A polynomial with integer coefficients never vanishes on nonzero values
/// iff it consists of exactly one monomial.
pub fn nonsingular_via_polynomial(p: &DetPolynomial) -> bool {
    p.terms.len() == 1
}

/// Nonzero complex number with magnitude in `[0.5, 2]` and uniform phase.
pub fn sample_nonzero_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(rng.random_range(0.5..=2.0), rng.random_range(0.0..TAU))
}

/// Searches for nonzero color values at which `p` vanishes.
///
/// Follows the root argument for polynomials with at least two monomials:
/// pick a variable whose exponent differs between two monomials, fix the
/// others at random nonzero values, and take a nonzero root of the
/// resulting univariate polynomial. Returns `None` for a single monomial
/// (which has no such root) and when every restart fails.
pub fn find_singular_realization<R: Rng + ?Sized>(
    p: &DetPolynomial,
    colors: usize,
    rng: &mut R,
    restarts: usize,
) -> Option<Vec<Complex64>> {
    if p.is_zero() {
        return Some(vec![Complex64::new(1.0, 0.0); colors]);
    }
    if p.terms.len() == 1 {
        return None;
    }
    let monos: Vec<&Spectrum> = p.terms.keys().collect();
    let var = (0..colors).find(|&c| monos.iter().any(|m| m.0[c] != monos[0].0[c]))?;
    for _ in 0..restarts {
        let mut values: Vec<Complex64> = (0..colors).map(|_| sample_nonzero_complex(rng)).collect();
        // Coefficients of the univariate polynomial in `values[var]`.
        let mut coeffs: BTreeMap<u16, Complex64> = BTreeMap::new();
        for (mono, &coef) in &p.terms {
            let mut rest = mono.clone();
            let e = rest.0[var];
            rest.0[var] = 0;
            *coeffs.entry(e).or_default() += rest.eval(&values) * coef as f64;
        }
        let scale = coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        coeffs.retain(|_, c| c.norm() > 1e-12 * scale);
        if coeffs.len() < 2 {
            continue;
        }
        let low = *coeffs.keys().next().unwrap();
        let high = *coeffs.keys().next_back().unwrap();
        let degree = (high - low) as usize;
        // Monic companion matrix of q(z) = Σ a_e z^(e - low).
        let lead = coeffs[&high];
        let mut companion = DMatrix::<Complex64>::zeros(degree, degree);
        for r in 1..degree {
            companion[(r, r - 1)] = Complex64::new(1.0, 0.0);
        }
        for (&e, &a) in &coeffs {
            let d = (e - low) as usize;
            if d < degree {
                companion[(d, degree - 1)] = -a / lead;
            }
        }
        let roots = match nalgebra::linalg::Schur::try_new(companion, 1e-14, 10_000) {
            Some(schur) => schur.eigenvalues()?,
            None => continue,
        };
        if let Some(root) = roots
            .iter()
            .copied()
            .filter(|r| r.norm() > 1e-9)
            .min_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()))
        {
            values[var] = root;
            return Some(values);
        }
    }
    None
}
