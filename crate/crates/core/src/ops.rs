//! Finite-difference operators with zero Dirichlet boundaries.
//!
//! Every operator acts on full-length node vectors; boundary entries of the
//! input are treated as zero and boundary entries of the output are written
//! as zero. Factorizations are computed once at construction.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{SpaceGrid, SpaceTimeField, SpatialField};

/// LU factors of a general tridiagonal matrix (Thomas algorithm, no pivoting).
#[derive(Clone, Debug)]
pub struct TriDiagLu {
    lower: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TriDiagLu {
    /// `sub[i]` couples row `i` to column `i-1` (`sub[0]` unused), `sup[i]`
    /// couples row `i` to column `i+1` (last entry unused).
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let m = diag.len();
        if sub.len() != m || sup.len() != m {
            return Err(Error::shape("tridiagonal bands must have equal length"));
        }
        let mut lower = vec![0.0; m];
        let mut pivots = vec![0.0; m];
        pivots[0] = diag[0];
        for i in 1..m {
            if pivots[i - 1] == 0.0 || !pivots[i - 1].is_finite() {
                return Err(Error::Numeric(format!(
                    "singular tridiagonal pivot at row {}",
                    i - 1
                )));
            }
            lower[i] = sub[i] / pivots[i - 1];
            pivots[i] = diag[i] - lower[i] * sup[i - 1];
        }
        if pivots[m - 1] == 0.0 || !pivots[m - 1].is_finite() {
            return Err(Error::Numeric(format!(
                "singular tridiagonal pivot at row {}",
                m - 1
            )));
        }
        Ok(Self {
            lower,
            pivots,
            upper: sup.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    /// Solves in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let m = self.pivots.len();
        for i in 1..m {
            x[i] -= self.lower[i] * x[i - 1];
        }
        x[m - 1] /= self.pivots[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = (x[i] - self.upper[i] * x[i + 1]) / self.pivots[i];
        }
    }
}

/// LU factors of a banded matrix with two sub- and two super-diagonals.
#[derive(Clone, Debug)]
pub struct PentaDiagLu {
    // band[i][2 + d] holds entry (i, i + d) for d in -2..=2
    band: Vec<[f64; 5]>,
}

impl PentaDiagLu {
    pub fn factor(mut band: Vec<[f64; 5]>) -> Result<Self> {
        let m = band.len();
        for k in 0..m {
            let pivot = band[k][2];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Numeric(format!("singular banded pivot at row {k}")));
            }
            for r in (k + 1)..(k + 3).min(m) {
                let d = r - k; // row r, column k sits at offset -d
                let factor = band[r][2 - d] / pivot;
                band[r][2 - d] = factor;
                // update row r for columns k+1 ..= k+2
                for c in (k + 1)..(k + 3).min(m) {
                    let off_r = c as isize - r as isize;
                    let off_k = c as isize - k as isize;
                    if (-2..=2).contains(&off_r) {
                        band[r][(2 + off_r) as usize] -= factor * band[k][(2 + off_k) as usize];
                    }
                }
            }
        }
        Ok(Self { band })
    }

    pub fn len(&self) -> usize {
        self.band.len()
    }

    pub fn is_empty(&self) -> bool {
        self.band.is_empty()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let m = self.band.len();
        for i in 0..m {
            for d in 1..=2usize.min(i) {
                x[i] -= self.band[i][2 - d] * x[i - d];
            }
        }
        for i in (0..m).rev() {
            let mut acc = x[i];
            for d in 1..=2 {
                if i + d < m {
                    acc -= self.band[i][2 + d] * x[i + d];
                }
            }
            x[i] = acc / self.band[i][2];
        }
    }
}

/// Central-difference Laplacian `Δ_h` on the interior nodes of a grid.
#[derive(Clone, Debug)]
pub struct DirichletLaplacian {
    grid: SpaceGrid,
    lu: TriDiagLu,
}

impl DirichletLaplacian {
    pub fn new(grid: SpaceGrid) -> Result<Self> {
        let m = grid.interior_len();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let lu = TriDiagLu::factor(&vec![inv_h2; m], &vec![-2.0 * inv_h2; m], &vec![inv_h2; m])?;
        Ok(Self { grid, lu })
    }

    pub fn grid(&self) -> SpaceGrid {
        self.grid
    }

    /// `out = Δ_h g` on full-length node slices.
    pub fn apply_slice(&self, g: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let left = if i == 1 { 0.0 } else { g[i - 1] };
            let right = if i == n - 2 { 0.0 } else { g[i + 1] };
            out[i] = (left - 2.0 * g[i] + right) * inv_h2;
        }
    }

    /// Solves `Δ_h z = rhs` in place on a full-length slice.
    pub fn solve_slice(&self, rhs: &mut [f64]) {
        let n = self.grid.len();
        self.lu.solve_in_place(&mut rhs[1..n - 1]);
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
    }

    pub fn apply(&self, g: &SpatialField) -> Result<SpatialField> {
        self.check(g)?;
        let mut out = SpatialField::zeros(self.grid);
        self.apply_slice(
            g.values().as_slice().expect("contiguous"),
            out.values_mut().as_slice_mut().expect("contiguous"),
        );
        Ok(out)
    }

    pub fn solve(&self, rhs: &SpatialField) -> Result<SpatialField> {
        self.check(rhs)?;
        let mut out = rhs.clone();
        self.solve_slice(out.values_mut().as_slice_mut().expect("contiguous"));
        if !out.is_finite() {
            return Err(Error::Numeric(
                "Laplacian solve produced non-finite values".into(),
            ));
        }
        Ok(out)
    }

    fn check(&self, g: &SpatialField) -> Result<()> {
        if g.grid() != self.grid {
            return Err(Error::shape("field grid differs from the operator grid"));
        }
        Ok(())
    }
}

/// `Δ_h² + shift·I` on interior nodes, where `Δ_h²` is the square of the
/// discrete Dirichlet Laplacian.
#[derive(Clone, Debug)]
pub struct DirichletBiLaplacian {
    grid: SpaceGrid,
    shift: f64,
    lu: PentaDiagLu,
}

impl DirichletBiLaplacian {
    pub fn new(grid: SpaceGrid) -> Result<Self> {
        Self::with_shift(grid, 0.0)
    }

    pub fn with_shift(grid: SpaceGrid, shift: f64) -> Result<Self> {
        let m = grid.interior_len();
        let inv_h4 = (grid.h() * grid.h()).powi(-2);
        let band = (0..m)
            .map(|i| {
                // (T²)_{ii} is 6 except on the first and last interior rows,
                // where the missing neighbour leaves 5.
                let diag = if i == 0 || i + 1 == m { 5.0 } else { 6.0 };
                [
                    inv_h4,
                    -4.0 * inv_h4,
                    diag * inv_h4 + shift,
                    -4.0 * inv_h4,
                    inv_h4,
                ]
            })
            .collect();
        let lu = PentaDiagLu::factor(band)?;
        Ok(Self { grid, shift, lu })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn apply_slice(&self, lap: &DirichletLaplacian, g: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; g.len()];
        lap.apply_slice(g, &mut tmp);
        lap.apply_slice(&tmp, out);
        for i in 1..g.len() - 1 {
            out[i] += self.shift * g[i];
        }
    }

    pub fn solve_slice(&self, rhs: &mut [f64]) {
        let n = self.grid.len();
        self.lu.solve_in_place(&mut rhs[1..n - 1]);
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
    }

    pub fn solve(&self, rhs: &SpatialField) -> Result<SpatialField> {
        if rhs.grid() != self.grid {
            return Err(Error::shape("field grid differs from the operator grid"));
        }
        let mut out = rhs.clone();
        self.solve_slice(out.values_mut().as_slice_mut().expect("contiguous"));
        if !out.is_finite() {
            return Err(Error::Numeric(
                "bi-Laplacian solve produced non-finite values".into(),
            ));
        }
        Ok(out)
    }
}

/// Backward differences `(f^n − f^{n−1})/dt` for `n ≥ 1`; row 0 copies row 1.
pub fn time_derivative(f: &SpaceTimeField) -> SpaceTimeField {
    let time = f.time();
    let inv_dt = 1.0 / time.dt();
    let v = f.values();
    let mut out = Array2::zeros(v.dim());
    for n in 1..time.len() {
        let mut row = out.row_mut(n);
        row.assign(&v.row(n));
        row -= &v.row(n - 1);
        row *= inv_dt;
    }
    let first = out.row(1).to_owned();
    out.row_mut(0).assign(&first);
    SpaceTimeField::from_values(f.space(), time, out).expect("shape preserved")
}
