//! Finite interval families standing in for "all intervals I".

use std::fmt;

use rayon::iter::Either;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridInterval};

/// Largest grid on which an all-aligned family may feed O(|I|)-per-interval
/// (oscillation-based) functionals.
pub const OSCILLATION_ALL_ALIGNED_LIMIT: usize = 1024;

/// Sliding-window length, either absolute or relative to the grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Window {
    /// Fixed number of cells.
    Cells(usize),
    /// `n_cells / d` cells.
    Fraction(usize),
}

impl Window {
    fn cells(&self, n: usize) -> Result<usize> {
        let w = match *self {
            Window::Cells(w) => w,
            Window::Fraction(d) => {
                if d == 0 || !n.is_multiple_of(d) {
                    return Err(Error::BadFamily(format!("window n/{d} does not divide {n} cells")));
                }
                n / d
            }
        };
        if w == 0 {
            return Err(Error::BadFamily("zero-length window".into()));
        }
        if w > n {
            return Err(Error::BadFamily(format!("window of {w} cells exceeds the grid's {n} cells")));
        }
        Ok(w)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Cells(w) => write!(f, "{w}"),
            Window::Fraction(d) => write!(f, "n/{d}"),
        }
    }
}

/// Description of an interval family, resolved against a grid by
/// [`enumerate_family`] / [`Family::new`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum IntervalFamilySpec {
    /// Every cell range `[s, e)`: `n(n+1)/2` intervals.
    AllAligned,
    /// Dyadic intervals with at least `min_cells` cells (`2n − 1` when 1).
    Dyadic { min_cells: usize },
    /// Windows of the given lengths placed every `stride` cells.
    Sliding { windows: Vec<Window>, stride: usize },
    /// Every interval whose left endpoint is the grid point `at`.
    Anchored { at: f64 },
    Union(Vec<IntervalFamilySpec>),
}

impl IntervalFamilySpec {
    pub fn dyadic() -> Self {
        IntervalFamilySpec::Dyadic { min_cells: 1 }
    }

    pub fn sliding(windows: Vec<Window>, stride: usize) -> Self {
        IntervalFamilySpec::Sliding { windows, stride }
    }

    /// Dyadic intervals plus stride-1 windows of `n/4` and `n/16` cells:
    /// the workhorse family for grids too large for all-aligned.
    pub fn standard() -> Self {
        IntervalFamilySpec::Union(vec![
            Self::dyadic(),
            Self::sliding(vec![Window::Fraction(4), Window::Fraction(16)], 1),
        ])
    }

    fn contains_all_aligned(&self) -> bool {
        match self {
            IntervalFamilySpec::AllAligned => true,
            IntervalFamilySpec::Union(parts) => parts.iter().any(|p| p.contains_all_aligned()),
            _ => false,
        }
    }

    /// The family covering the same geometry on a grid refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        match self {
            IntervalFamilySpec::Dyadic { min_cells } => {
                IntervalFamilySpec::Dyadic { min_cells: min_cells * factor }
            }
            IntervalFamilySpec::Sliding { windows, stride } => IntervalFamilySpec::Sliding {
                windows: windows
                    .iter()
                    .map(|w| match w {
                        Window::Cells(c) => Window::Cells(c * factor),
                        other => *other,
                    })
                    .collect(),
                stride: *stride,
            },
            IntervalFamilySpec::Union(parts) => {
                IntervalFamilySpec::Union(parts.iter().map(|p| p.refined(factor)).collect())
            }
            other => other.clone(),
        }
    }

    /// Validates every non-all-aligned member of a family that all-aligned
    /// already covers.
    fn validate_parts(&self, grid: &Grid) -> Result<()> {
        match self {
            IntervalFamilySpec::AllAligned => Ok(()),
            IntervalFamilySpec::Union(parts) => parts.iter().try_for_each(|p| p.validate_parts(grid)),
            other => other.push_intervals(grid, &mut Vec::new()),
        }
    }

    fn push_intervals(&self, grid: &Grid, out: &mut Vec<GridInterval>) -> Result<()> {
        let n = grid.n_cells();
        match self {
            IntervalFamilySpec::AllAligned => {
                for s in 0..n {
                    out.extend((s + 1..=n).map(|e| GridInterval { start: s, end: e }));
                }
            }
            IntervalFamilySpec::Dyadic { min_cells } => {
                if *min_cells == 0 {
                    return Err(Error::BadFamily("dyadic min_cells must be positive".into()));
                }
                let mut len = n;
                while len >= *min_cells && len >= 1 {
                    out.extend((0..n / len).map(|k| GridInterval { start: k * len, end: (k + 1) * len }));
                    len /= 2;
                }
            }
            IntervalFamilySpec::Sliding { windows, stride } => {
                if *stride == 0 {
                    return Err(Error::BadFamily("sliding stride must be positive".into()));
                }
                if windows.is_empty() {
                    return Err(Error::BadFamily("sliding family needs at least one window".into()));
                }
                for w in windows {
                    let w = w.cells(n)?;
                    out.extend((0..=n - w).step_by(*stride).map(|s| GridInterval { start: s, end: s + w }));
                }
            }
            IntervalFamilySpec::Anchored { at } => {
                let s = grid.point_index(*at).ok_or(Error::NotAGridPoint(*at))?;
                if s == n {
                    return Err(Error::BadFamily(format!("anchor {at} is the right endpoint")));
                }
                out.extend((s + 1..=n).map(|e| GridInterval { start: s, end: e }));
            }
            IntervalFamilySpec::Union(parts) => {
                if parts.is_empty() {
                    return Err(Error::BadFamily("empty union".into()));
                }
                for p in parts {
                    p.push_intervals(grid, out)?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for IntervalFamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntervalFamilySpec::AllAligned => write!(f, "all-aligned"),
            IntervalFamilySpec::Dyadic { min_cells: 1 } => write!(f, "dyadic"),
            IntervalFamilySpec::Dyadic { min_cells } => write!(f, "dyadic(min={min_cells})"),
            IntervalFamilySpec::Sliding { windows, stride } => {
                let ws: Vec<String> = windows.iter().map(|w| w.to_string()).collect();
                write!(f, "sliding(w={};stride={stride})", ws.join("|"))
            }
            IntervalFamilySpec::Anchored { at } => write!(f, "anchored({at})"),
            IntervalFamilySpec::Union(parts) => {
                let ps: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "union({})", ps.join(","))
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Members {
    AllAligned,
    Listed(Vec<GridInterval>),
}

/// A family resolved on a concrete grid: duplicate-free and ordered by
/// start, then end.
#[derive(Debug, Clone)]
pub struct Family {
    spec: IntervalFamilySpec,
    n_cells: usize,
    members: Members,
}

/// Maximum of a functional over a family, with the interval attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub value: f64,
    pub witness: GridInterval,
}

/// `true` when `a` beats `b` in an arg-max: larger value, ties going to
/// the smaller interval. NaN never wins.
#[inline]
pub(crate) fn better(a: &Extremum, b: &Extremum) -> bool {
    match (a.value.is_nan(), b.value.is_nan()) {
        (true, _) => false,
        (false, true) => true,
        _ => a.value > b.value || (a.value == b.value && a.witness < b.witness),
    }
}

#[inline]
pub(crate) fn pick(a: Extremum, b: Extremum) -> Extremum {
    if better(&b, &a) {
        b
    } else {
        a
    }
}

impl Family {
    pub fn new(grid: &Grid, spec: &IntervalFamilySpec) -> Result<Self> {
        let n_cells = grid.n_cells();
        let members = if spec.contains_all_aligned() {
            spec.validate_parts(grid)?;
            Members::AllAligned
        } else {
            let mut v = Vec::new();
            spec.push_intervals(grid, &mut v)?;
            v.sort_unstable();
            v.dedup();
            if v.is_empty() {
                return Err(Error::BadFamily(format!("`{spec}` is empty on {n_cells} cells")));
            }
            Members::Listed(v)
        };
        Ok(Self { spec: spec.clone(), n_cells, members })
    }

    pub fn spec(&self) -> &IntervalFamilySpec {
        &self.spec
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Human-readable identity carried into reports.
    pub fn label(&self) -> String {
        format!("{}@{}", self.spec, self.n_cells)
    }

    pub fn len(&self) -> usize {
        match &self.members {
            Members::AllAligned => self.n_cells * (self.n_cells + 1) / 2,
            Members::Listed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_all_aligned(&self) -> bool {
        matches!(self.members, Members::AllAligned)
    }

    /// Total number of cells visited by one pass over every interval.
    pub fn total_cells(&self) -> usize {
        match &self.members {
            Members::AllAligned => {
                let n = self.n_cells;
                n * (n + 1) * (n + 2) / 6
            }
            Members::Listed(v) => v.iter().map(|i| i.len()).sum(),
        }
    }

    /// Rejects families whose O(|I|)-per-interval evaluation is too costly.
    pub fn check_oscillation_budget(&self) -> Result<()> {
        if self.is_all_aligned() && self.n_cells > OSCILLATION_ALL_ALIGNED_LIMIT {
            return Err(Error::FamilyTooLarge { family: self.spec.to_string(), n_cells: self.n_cells });
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = GridInterval> + '_ {
        let n = self.n_cells;
        match &self.members {
            Members::AllAligned => Either::Left(
                (0..n).flat_map(move |s| (s + 1..=n).map(move |e| GridInterval { start: s, end: e })),
            ),
            Members::Listed(v) => Either::Right(v.iter().copied()),
        }
    }

    pub fn par_iter(&self) -> impl ParallelIterator<Item = GridInterval> + '_ {
        let n = self.n_cells;
        match &self.members {
            Members::AllAligned => Either::Left((0..n).into_par_iter().flat_map_iter(move |s| {
                (s + 1..=n).map(move |e| GridInterval { start: s, end: e })
            })),
            Members::Listed(v) => Either::Right(v.par_iter().copied()),
        }
    }

    /// Materialized member list.
    pub fn to_vec(&self) -> Vec<GridInterval> {
        self.iter().collect()
    }

    /// Deterministic parallel arg-max of `value` over the family.
    pub fn argmax<F>(&self, value: F) -> Extremum
    where
        F: Fn(GridInterval) -> f64 + Sync,
    {
        self.par_iter()
            .map(|i| Extremum { value: value(i), witness: i })
            .reduce_with(pick)
            .expect("families are nonempty")
    }
}

/// Resolves `spec` on `grid` into its ordered, duplicate-free member list.
pub fn enumerate_family(grid: &Grid, spec: &IntervalFamilySpec) -> Result<Vec<GridInterval>> {
    Ok(Family::new(grid, spec)?.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn grid(n: usize) -> Grid {
        make_grid(-1.0, 1.0, n).unwrap()
    }

    #[test]
    fn family_sizes() {
        let g = grid(8);
        assert_eq!(enumerate_family(&g, &IntervalFamilySpec::AllAligned).unwrap().len(), 36);
        assert_eq!(enumerate_family(&g, &IntervalFamilySpec::dyadic()).unwrap().len(), 15);
        let sl = IntervalFamilySpec::sliding(vec![Window::Cells(3)], 1);
        assert_eq!(enumerate_family(&g, &sl).unwrap().len(), 6);
        assert_eq!(Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap().len(), 36);
    }

    #[test]
    fn oversized_window_is_rejected() {
        let sl = IntervalFamilySpec::sliding(vec![Window::Cells(9)], 1);
        assert!(matches!(enumerate_family(&grid(8), &sl), Err(Error::BadFamily(_))));
    }

    #[test]
    fn union_is_sorted_and_deduplicated() {
        let g = grid(16);
        let spec = IntervalFamilySpec::Union(vec![
            IntervalFamilySpec::dyadic(),
            IntervalFamilySpec::sliding(vec![Window::Fraction(2), Window::Cells(4)], 4),
            IntervalFamilySpec::Anchored { at: 0.0 },
        ]);
        let v = enumerate_family(&g, &spec).unwrap();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.contains(&GridInterval { start: 8, end: 13 }));
    }

    #[test]
    fn dyadic_min_cells_prunes_fine_levels() {
        let g = grid(16);
        let v = enumerate_family(&g, &IntervalFamilySpec::Dyadic { min_cells: 4 }).unwrap();
        assert_eq!(v.len(), 1 + 2 + 4);
        assert!(v.iter().all(|i| i.len() >= 4));
    }

    #[test]
    fn anchor_must_be_a_grid_point() {
        let spec = IntervalFamilySpec::Anchored { at: 0.1 };
        assert_eq!(enumerate_family(&grid(8), &spec), Err(Error::NotAGridPoint(0.1)));
        let spec = IntervalFamilySpec::Anchored { at: 0.0 };
        assert_eq!(enumerate_family(&grid(8), &spec).unwrap().len(), 4);
    }

    #[test]
    fn argmax_breaks_ties_by_order() {
        let g = grid(8);
        let fam = Family::new(&g, &IntervalFamilySpec::AllAligned).unwrap();
        let e = fam.argmax(|_| 1.0);
        assert_eq!(e.witness, GridInterval { start: 0, end: 1 });
        let e = fam.argmax(|i| i.len() as f64);
        assert_eq!(e.witness, g.full());
        let e = fam.argmax(|i| if i.start == 3 { f64::NAN } else { (i.start % 2) as f64 });
        assert_eq!(e.witness, GridInterval { start: 1, end: 2 });
    }

    #[test]
    fn total_cells_matches_enumeration() {
        let g = grid(16);
        for spec in [IntervalFamilySpec::AllAligned, IntervalFamilySpec::standard()] {
            let fam = Family::new(&g, &spec).unwrap();
            assert_eq!(fam.total_cells(), fam.iter().map(|i| i.len()).sum::<usize>());
        }
    }
}
