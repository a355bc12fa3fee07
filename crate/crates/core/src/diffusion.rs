//! Twisted Laplacian, principal eigenpair and the stationary measure of the
//! twisted Brownian motion.
//!
//! For `ω = c·dθ` the twisted operator expands to
//!
//! ```text
//! Δ_λω f = (1/√g) ∂i(√g gij ∂j f) + 2λ (c/r²) ∂θ f + λ² (c²/r²) f
//! ```
//!
//! with `√g = r √(1+r'²)`, `g^zz = 1/(1+r'²)`, `g^θθ = 1/r²`. The
//! discretization is second-order centered on the (θ, z) grid, flux form in
//! z (row sums equal the potential exactly, constants are annihilated at
//! λ = 0), periodic in θ, reflecting at the z boundary.
//!
//! The principal eigenpair is computed by shifted inverse power iteration
//! with the shift just above the potential ceiling `λ²c²/a²`; inner solves
//! use BiCGStab preconditioned by z-line tridiagonal sweeps. The drift term
//! vanishes on θ-independent functions, so the ground state is rotationally
//! invariant and must match the θ-averaged 1D Sturm-Liouville reduction —
//! an independent tridiagonal solver kept here as the dimension-reduction
//! oracle.
//!
//! The stationary measure follows the ground-state construction: the
//! density is `h_{λω}·h_{-λω}` weighted by the Riemannian area element and
//! normalized to unit mass. The spectral route replaces path-space
//! simulation; it is deterministic and reproducible.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::surface::RevolutionProfile;

/// Assembled twisted Laplacian. Coefficients depend on the z-row only;
/// `triplets` exposes the sparse (row, col, weight) view of the 5-point
/// stencil plus diagonal.
#[derive(Debug, Clone)]
pub struct TwistedOperator {
    pub grid: Grid,
    pub lambda: f64,
    pub omega_coefficient: f64,
    /// coupling to row j+1 (flux form)
    cp: Vec<f64>,
    /// coupling to row j-1
    cm: Vec<f64>,
    /// θ-diffusion coupling per row
    ath: Vec<f64>,
    /// antisymmetric drift coefficient per row
    drift: Vec<f64>,
    /// zero-order potential λ²c²/r² per row
    v: Vec<f64>,
}

/// Assemble the operator on `grid`. Negative `lambda` is allowed (the
/// reflection θ → -θ intertwines the two signs; both are needed for the
/// stationary measure).
pub fn assemble_twisted_laplacian(
    profile: &RevolutionProfile,
    grid: &Grid,
    lambda: f64,
    c: f64,
) -> TwistedOperator {
    let nz = grid.n_z;
    let dz = grid.d_z();
    let dth = grid.d_theta();
    // half-cell flux points at the boundary rows reflect into the domain
    let sg = |z: f64| profile.area_element(grid.fold_z(z));
    let gzz = |z: f64| {
        let rp = profile.radius_prime(grid.fold_z(z));
        1.0 / (1.0 + rp * rp)
    };
    let mut cp = vec![0.0; nz];
    let mut cm = vec![0.0; nz];
    let mut ath = vec![0.0; nz];
    let mut drift = vec![0.0; nz];
    let mut v = vec![0.0; nz];
    for j in 0..nz {
        let z = grid.z(j);
        let w = sg(z);
        let r2 = profile.radius(z).powi(2);
        cp[j] = sg(z + 0.5 * dz) * gzz(z + 0.5 * dz) / (w * dz * dz);
        cm[j] = sg(z - 0.5 * dz) * gzz(z - 0.5 * dz) / (w * dz * dz);
        ath[j] = 1.0 / (r2 * dth * dth);
        drift[j] = lambda * c / (r2 * dth);
        v[j] = lambda * lambda * c * c / r2;
    }
    TwistedOperator {
        grid: *grid,
        lambda,
        omega_coefficient: c,
        cp,
        cm,
        ath,
        drift,
        v,
    }
}

impl TwistedOperator {
    /// Ceiling of the zero-order potential, attained at the waist.
    pub fn potential_max(&self) -> f64 {
        self.v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let g = &self.grid;
        let n = g.n_theta;
        for j in 0..g.n_z {
            let (czp, czm) = if j == 0 {
                (self.cp[j] + self.cm[j], 0.0)
            } else if j == g.n_z - 1 {
                (0.0, self.cp[j] + self.cm[j])
            } else {
                (self.cp[j], self.cm[j])
            };
            let diag = -(self.cp[j] + self.cm[j]) - 2.0 * self.ath[j] + self.v[j];
            let tp = self.ath[j] + self.drift[j];
            let tm = self.ath[j] - self.drift[j];
            let base = g.idx(0, j);
            let up = if j + 1 < g.n_z { g.idx(0, j + 1) } else { 0 };
            let dn = if j > 0 { g.idx(0, j - 1) } else { 0 };
            for i in 0..n {
                let ip = if i + 1 == n { 0 } else { i + 1 };
                let im = if i == 0 { n - 1 } else { i - 1 };
                let mut acc = diag * x[base + i] + tp * x[base + ip] + tm * x[base + im];
                if czp > 0.0 {
                    acc += czp * x[up + i];
                }
                if czm > 0.0 {
                    acc += czm * x[dn + i];
                }
                y[base + i] = acc;
            }
        }
    }

    /// Sparse COO view (row, col, weight).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let g = &self.grid;
        let n = g.n_theta;
        let mut out = Vec::with_capacity(5 * g.len());
        for j in 0..g.n_z {
            let diag = -(self.cp[j] + self.cm[j]) - 2.0 * self.ath[j] + self.v[j];
            let tp = self.ath[j] + self.drift[j];
            let tm = self.ath[j] - self.drift[j];
            for i in 0..n {
                let me = g.idx(i, j);
                out.push((me, me, diag));
                out.push((me, g.idx((i + 1) % n, j), tp));
                out.push((me, g.idx((i + n - 1) % n, j), tm));
                if j == 0 {
                    out.push((me, g.idx(i, 1), self.cp[j] + self.cm[j]));
                } else if j == g.n_z - 1 {
                    out.push((me, g.idx(i, g.n_z - 2), self.cp[j] + self.cm[j]));
                } else {
                    out.push((me, g.idx(i, j + 1), self.cp[j]));
                    out.push((me, g.idx(i, j - 1), self.cm[j]));
                }
            }
        }
        out
    }
}

/// Principal eigenvalue with its positive, max-normalized eigenfunction.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub eigenfunction: ScalarField,
    pub residual: f64,
}

/// Thomas solve of a tridiagonal system (no pivoting; callers guarantee
/// diagonal dominance through the spectral shift).
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for k in 1..n {
        let m = 1.0 / (diag[k] - lower[k - 1] * scratch[k - 1]);
        if k < n - 1 {
            scratch[k] = upper[k] * m;
        }
        rhs[k] = (rhs[k] - lower[k - 1] * rhs[k - 1]) * m;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= scratch[k] * rhs[k + 1];
    }
}

/// z-line block preconditioner of `(σ I - A)`: per θ-column tridiagonal
/// solves keeping the full diagonal, dropping the θ couplings.
struct LinePrecond {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl LinePrecond {
    fn build(op: &TwistedOperator, sigma: f64) -> Self {
        let nz = op.grid.n_z;
        let mut lower = vec![0.0; nz - 1];
        let mut diag = vec![0.0; nz];
        let mut upper = vec![0.0; nz - 1];
        for j in 0..nz {
            let a_diag = -(op.cp[j] + op.cm[j]) - 2.0 * op.ath[j] + op.v[j];
            diag[j] = sigma - a_diag;
            if j == 0 {
                upper[0] = -(op.cp[0] + op.cm[0]);
            } else if j == nz - 1 {
                lower[nz - 2] = -(op.cp[j] + op.cm[j]);
            } else {
                upper[j] = -op.cp[j];
                lower[j - 1] = -op.cm[j];
            }
        }
        Self { lower, diag, upper }
    }

    fn apply(&self, grid: &Grid, x: &mut [f64]) {
        let nz = grid.n_z;
        let n = grid.n_theta;
        let mut col = vec![0.0; nz];
        let mut scratch = vec![0.0; nz];
        for i in 0..n {
            for j in 0..nz {
                col[j] = x[grid.idx(i, j)];
            }
            thomas(&self.lower, &self.diag, &self.upper, &mut col, &mut scratch);
            for j in 0..nz {
                x[grid.idx(i, j)] = col[j];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned BiCGStab for `(σ I - A) x = b`.
fn solve_shifted(
    op: &TwistedOperator,
    sigma: f64,
    pre: &LinePrecond,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<()> {
    let n = b.len();
    let grid = op.grid;
    let apply = |p_in: &[f64], y: &mut [f64], tmp: &mut [f64]| {
        tmp.copy_from_slice(p_in);
        pre.apply(&grid, tmp);
        op.matvec(tmp, y);
        for k in 0..n {
            y[k] = sigma * tmp[k] - y[k];
        }
    };
    let mut tmp = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut p = vec![0.0; n];
    let mut vv = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut xacc = vec![0.0; n];
    let bnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut converged = false;
    for it in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-280 {
            converged = true;
            break;
        }
        if it == 0 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * vv[k]);
            }
        }
        rho = rho_new;
        apply(&p, &mut vv, &mut tmp);
        alpha = rho / dot(&r0, &vv);
        for k in 0..n {
            s[k] = r[k] - alpha * vv[k];
        }
        let snorm = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if snorm / bnorm < tol {
            for k in 0..n {
                xacc[k] += alpha * p[k];
            }
            converged = true;
            break;
        }
        apply(&s, &mut t, &mut tmp);
        omega = dot(&t, &s) / dot(&t, &t).max(1e-300);
        for k in 0..n {
            xacc[k] += alpha * p[k] + omega * s[k];
            r[k] = s[k] - omega * t[k];
        }
        let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rnorm / bnorm < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Err(Error::NotConverged {
            max_iter,
            residual: rnorm / bnorm,
        });
    }
    // undo the right preconditioning
    pre.apply(&grid, &mut xacc);
    x.copy_from_slice(&xacc);
    Ok(())
}

/// Largest-real eigenpair by shifted inverse power iteration. The shift
/// sits just above the potential ceiling; the start vector is the constant
/// 1 field. Positivity of the converged eigenvector is verified.
pub fn principal_eigenpair(op: &TwistedOperator) -> Result<EigenPair> {
    let g = op.grid;
    let n = g.len();
    let sigma = op.potential_max() + 1.0;
    let pre = LinePrecond::build(op, sigma);
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut ay = vec![0.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let max_outer = 500;
    for _ in 0..max_outer {
        solve_shifted(op, sigma, &pre, &x, &mut y, 1e-13, 500)?;
        let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &mut y {
            *v /= norm;
        }
        op.matvec(&y, &mut ay);
        lambda = dot(&ay, &y) / dot(&y, &y);
        residual = y
            .iter()
            .zip(&ay)
            .fold(0.0f64, |m, (yi, ai)| m.max((ai - lambda * yi).abs()));
        x.copy_from_slice(&y);
        if residual < 1e-9 {
            break;
        }
    }
    if residual >= 1e-9 {
        return Err(Error::NotConverged {
            max_iter: max_outer,
            residual,
        });
    }
    // orient positive and verify strict positivity
    let max = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let min = x.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if max.abs() < min.abs() {
        for v in &mut x {
            *v = -*v;
        }
    }
    let max = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut field = ScalarField { grid: g, values: x };
    for v in &mut field.values {
        *v /= max;
    }
    let min = field.values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min <= 0.0 {
        return Err(Error::NonPositiveEigenvector { ratio: min });
    }
    Ok(EigenPair {
        eigenvalue: lambda,
        eigenfunction: field,
        residual,
    })
}

/// θ-averaged 1D Sturm-Liouville reduction: same flux coefficients and
/// potential, no θ terms (they vanish on rotationally invariant functions).
/// Independent tridiagonal route used as the dimension-reduction oracle.
pub fn principal_eigen_1d(
    profile: &RevolutionProfile,
    n_z: usize,
    z_max: f64,
    lambda: f64,
    c: f64,
) -> Result<(f64, Vec<f64>)> {
    let grid = Grid::new(4, n_z, z_max)?;
    let op = assemble_twisted_laplacian(profile, &grid, lambda, c);
    let nz = n_z;
    let mut lower = vec![0.0; nz - 1];
    let mut diag = vec![0.0; nz];
    let mut upper = vec![0.0; nz - 1];
    let sigma = op.potential_max() + 1.0;
    for j in 0..nz {
        diag[j] = sigma - (-(op.cp[j] + op.cm[j]) + op.v[j]);
        if j == 0 {
            upper[0] = -(op.cp[0] + op.cm[0]);
        } else if j == nz - 1 {
            lower[nz - 2] = -(op.cp[j] + op.cm[j]);
        } else {
            upper[j] = -op.cp[j];
            lower[j - 1] = -op.cm[j];
        }
    }
    let amul = |x: &[f64], y: &mut [f64]| {
        for j in 0..nz {
            let d = -(op.cp[j] + op.cm[j]) + op.v[j];
            let mut acc = d * x[j];
            if j == 0 {
                acc += (op.cp[0] + op.cm[0]) * x[1];
            } else if j == nz - 1 {
                acc += (op.cp[j] + op.cm[j]) * x[nz - 2];
            } else {
                acc += op.cp[j] * x[j + 1] + op.cm[j] * x[j - 1];
            }
            y[j] = acc;
        }
    };
    let mut x = vec![1.0; nz];
    let mut scratch = vec![0.0; nz];
    let mut ay = vec![0.0; nz];
    let mut lam = 0.0;
    for _ in 0..600 {
        thomas(&lower, &diag, &upper, &mut x, &mut scratch);
        let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &mut x {
            *v /= norm;
        }
        amul(&x, &mut ay);
        let lnew = dot(&ay, &x) / dot(&x, &x);
        let resid = x
            .iter()
            .zip(&ay)
            .fold(0.0f64, |m, (xi, ai)| m.max((ai - lnew * xi).abs()));
        lam = lnew;
        if resid < 1e-11 {
            break;
        }
    }
    if x[nz / 2] < 0.0 {
        for v in &mut x {
            *v = -*v;
        }
    }
    let max = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    for v in &mut x {
        *v /= max;
    }
    Ok((lam, x))
}

/// Probability measure on the grid from the ground-state product.
#[derive(Debug, Clone)]
pub struct StationaryMeasure {
    /// cell masses, summing to one
    pub cell_mass: ScalarField,
    /// Radon-Nikodym density with respect to the Riemannian area
    pub density: ScalarField,
}

/// `ν ∝ h_{λω} · h_{-λω} · dA`, normalized to total mass one. The two
/// eigenvalues agree in exact arithmetic; a mismatch beyond 1e-6 signals a
/// broken pair.
pub fn stationary_measure(
    pair_plus: &EigenPair,
    pair_minus: &EigenPair,
    profile: &RevolutionProfile,
) -> Result<StationaryMeasure> {
    let g = pair_plus.eigenfunction.grid;
    assert_eq!(g, pair_minus.eigenfunction.grid, "eigenpair grids differ");
    let diff = (pair_plus.eigenvalue - pair_minus.eigenvalue).abs();
    if diff > 1e-6 {
        return Err(Error::EigenvalueMismatch { diff, tol: 1e-6 });
    }
    let dz = g.d_z();
    let dth = g.d_theta();
    let mut mass = ScalarField::zeros(g);
    for j in 0..g.n_z {
        let w = if j == 0 || j == g.n_z - 1 { 0.5 } else { 1.0 };
        let cell = profile.area_element(g.z(j)) * dz * dth * w;
        for i in 0..g.n_theta {
            let m = pair_plus.eigenfunction.get(i, j) * pair_minus.eigenfunction.get(i, j) * cell;
            mass.set(i, j, m);
        }
    }
    let total: f64 = mass.values.iter().sum();
    for v in &mut mass.values {
        *v /= total;
    }
    let mut density = ScalarField::zeros(g);
    for j in 0..g.n_z {
        let w = if j == 0 || j == g.n_z - 1 { 0.5 } else { 1.0 };
        let cell = profile.area_element(g.z(j)) * dz * dth * w;
        for i in 0..g.n_theta {
            density.set(i, j, mass.get(i, j) / cell);
        }
    }
    Ok(StationaryMeasure {
        cell_mass: mass,
        density,
    })
}

/// Mass of the band `z ∈ [z_lo, z_hi]`; with `symmetric` both signed bands
/// `|z| ∈ [z_lo, z_hi]` count.
pub fn measure_of_set(mu: &StationaryMeasure, z_lo: f64, z_hi: f64, symmetric: bool) -> f64 {
    let g = mu.cell_mass.grid;
    let mut total = 0.0;
    for j in 0..g.n_z {
        let z = g.z(j);
        let zq = if symmetric { z.abs() } else { z };
        if zq >= z_lo && zq <= z_hi {
            for i in 0..g.n_theta {
                total += mu.cell_mass.get(i, j);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_legendre;

    fn p112(z_max: f64) -> RevolutionProfile {
        RevolutionProfile::new(1.0, 1.0, 2, z_max).unwrap()
    }

    #[test]
    fn kills_constants_at_lambda_zero() {
        let p = p112(1.0);
        let g = Grid::new(48, 49, 1.0).unwrap();
        let op = assemble_twisted_laplacian(&p, &g, 0.0, 1.0);
        let x = vec![1.0; g.len()];
        let mut y = vec![0.0; g.len()];
        op.matvec(&x, &mut y);
        let m = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(m < 1e-10, "constants not annihilated: {m}");
    }

    #[test]
    fn near_cylinder_mode_symbol() {
        // b -> 0: the symbol approaches the flat cylinder Laplacian; apply
        // the operator to cos(θ)·cos(π(z+1)/2) and compare with the
        // separated eigenvalue -(1/a² + (π/2)²) up to O(h²)
        let p = RevolutionProfile::new(1.0, 1e-12, 2, 1.0).unwrap();
        let g = Grid::new(96, 97, 1.0).unwrap();
        let op = assemble_twisted_laplacian(&p, &g, 0.0, 1.0);
        let mut x = vec![0.0; g.len()];
        for j in 0..g.n_z {
            for i in 0..g.n_theta {
                x[g.idx(i, j)] =
                    g.theta(i).cos() * (std::f64::consts::FRAC_PI_2 * (g.z(j) + 1.0)).cos();
            }
        }
        let mut y = vec![0.0; g.len()];
        op.matvec(&x, &mut y);
        let ev = -(1.0 + std::f64::consts::FRAC_PI_2.powi(2));
        // compare away from the Neumann boundary rows, which this test mode
        // does not satisfy
        let mut worst = 0.0f64;
        for j in 8..g.n_z - 8 {
            for i in 0..g.n_theta {
                let idx = g.idx(i, j);
                worst = worst.max((y[idx] - ev * x[idx]).abs());
            }
        }
        assert!(worst < 3e-3, "cylinder symbol error {worst}");
    }

    #[test]
    fn drift_symbol_on_theta_harmonics() {
        // (A_λ - A_0) on sin(nθ) equals the centered drift symbol plus the
        // potential, matching 2λ(c/r²)·n·cos(nθ) to O(Δθ²)
        let p = p112(1.0);
        let g = Grid::new(192, 33, 1.0).unwrap();
        let lam = 3.0;
        let op1 = assemble_twisted_laplacian(&p, &g, lam, 1.0);
        let op0 = assemble_twisted_laplacian(&p, &g, 0.0, 1.0);
        let nmode = 2.0;
        let mut x = vec![0.0; g.len()];
        for j in 0..g.n_z {
            for i in 0..g.n_theta {
                x[g.idx(i, j)] = (nmode * g.theta(i)).sin();
            }
        }
        let mut y1 = vec![0.0; g.len()];
        let mut y0 = vec![0.0; g.len()];
        op1.matvec(&x, &mut y1);
        op0.matvec(&x, &mut y0);
        let mut worst = 0.0f64;
        for j in 0..g.n_z {
            let r2 = p.radius(g.z(j)).powi(2);
            for i in 0..g.n_theta {
                let idx = g.idx(i, j);
                let analytic =
                    2.0 * lam / r2 * nmode * (nmode * g.theta(i)).cos() + lam * lam / r2 * x[idx];
                worst = worst.max((y1[idx] - y0[idx] - analytic).abs());
            }
        }
        // centered-difference symbol error bound: 2λ n³ Δθ²/6 per unit 1/r²
        let bound = 2.0 * lam * nmode.powi(3) * g.d_theta().powi(2) / 6.0;
        assert!(worst < 1.5 * bound, "drift symbol error {worst} vs bound {bound}");
    }

    #[test]
    fn lambda_zero_ground_state() {
        let p = p112(1.0);
        let g = Grid::new(48, 49, 1.0).unwrap();
        let op = assemble_twisted_laplacian(&p, &g, 0.0, 1.0);
        let pair = principal_eigenpair(&op).unwrap();
        assert!(pair.eigenvalue.abs() < 1e-9, "Λ(0) = {}", pair.eigenvalue);
        let osc = pair.eigenfunction.oscillation();
        assert!(osc < 1e-8, "ground state oscillation {osc}");
    }

    #[test]
    fn reflection_symmetry_of_eigenvalue() {
        let p = p112(1.0);
        let g = Grid::new(64, 65, 1.0).unwrap();
        for lam in [1.0, 4.0, 16.0] {
            let op_p = assemble_twisted_laplacian(&p, &g, lam, 1.0);
            let op_m = assemble_twisted_laplacian(&p, &g, -lam, 1.0);
            let e_p = principal_eigenpair(&op_p).unwrap();
            let e_m = principal_eigenpair(&op_m).unwrap();
            assert!(
                (e_p.eigenvalue - e_m.eigenvalue).abs() < 1e-8,
                "Λ({lam}) = {} vs Λ(-{lam}) = {}",
                e_p.eigenvalue,
                e_m.eigenvalue
            );
            assert!(e_p.residual < 1e-9 && e_m.residual < 1e-9);
        }
    }

    #[test]
    fn two_d_matches_one_d_reduction() {
        let p = p112(1.0);
        let g = Grid::new(96, 97, 1.0).unwrap();
        let lam = 16.0;
        let op = assemble_twisted_laplacian(&p, &g, lam, 1.0);
        let pair = principal_eigenpair(&op).unwrap();
        let (l1d, _) = principal_eigen_1d(&p, 97, 1.0, lam, 1.0).unwrap();
        assert!(
            (pair.eigenvalue - l1d).abs() < 1e-6,
            "2D {} vs 1D {l1d}",
            pair.eigenvalue
        );
        // rotational invariance of the ground state
        for j in 0..g.n_z {
            assert!(pair.eigenfunction.row_oscillation(j) < 1e-6);
        }
    }

    #[test]
    fn stationary_measure_riemannian_at_lambda_zero() {
        let p = p112(1.0);
        let g = Grid::new(64, 65, 1.0).unwrap();
        let op_p = assemble_twisted_laplacian(&p, &g, 0.0, 1.0);
        let op_m = assemble_twisted_laplacian(&p, &g, -0.0, 1.0);
        let ep = principal_eigenpair(&op_p).unwrap();
        let em = principal_eigenpair(&op_m).unwrap();
        let mu = stationary_measure(&ep, &em, &p).unwrap();
        let total: f64 = mu.cell_mass.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // node-sampled Riemannian area fraction of the band 0.2 <= |z| <= 0.5
        let mut band_area = 0.0;
        let mut total_area = 0.0;
        for j in 0..g.n_z {
            let w = if j == 0 || j == g.n_z - 1 { 0.5 } else { 1.0 };
            let cell = p.area_element(g.z(j)) * w;
            total_area += cell;
            if g.z(j).abs() >= 0.2 && g.z(j).abs() <= 0.5 {
                band_area += cell;
            }
        }
        let frac = band_area / total_area;
        let got = measure_of_set(&mu, 0.2, 0.5, true);
        assert!(
            (got - frac).abs() < 1e-12,
            "band area fraction {got} vs {frac}"
        );
        // and the continuum quadrature agrees to O(dz)
        let area = |lo: f64, hi: f64| {
            2.0 * gauss_legendre(&|z: f64| p.area_element(z), lo, hi, 64) * std::f64::consts::TAU
        };
        let cont = area(0.2, 0.5) / area(0.0, 1.0);
        assert!((got - cont).abs() < 2.0 * g.d_z(), "vs continuum {cont}");
        // complement additivity on the node partition
        let comp = measure_of_set(&mu, 0.0, 0.199, true) + measure_of_set(&mu, 0.2, 1.0, true);
        assert!((comp - 1.0).abs() < 1e-12);
        // whole domain and empty band
        assert!((measure_of_set(&mu, 0.0, 1.0, true) - 1.0).abs() < 1e-12);
        assert_eq!(measure_of_set(&mu, 0.71, 0.70, true), 0.0);
    }

    #[test]
    fn eigenvalue_mismatch_detected() {
        let p = p112(1.0);
        let g = Grid::new(32, 33, 1.0).unwrap();
        let e1 = principal_eigenpair(&assemble_twisted_laplacian(&p, &g, 4.0, 1.0)).unwrap();
        let e2 = principal_eigenpair(&assemble_twisted_laplacian(&p, &g, 8.0, 1.0)).unwrap();
        assert!(matches!(
            stationary_measure(&e1, &e2, &p),
            Err(Error::EigenvalueMismatch { .. })
        ));
    }

    #[test]
    fn concentration_grows_with_lambda() {
        let p = p112(1.0);
        let g = Grid::new(64, 129, 1.0).unwrap();
        let band = |lam: f64| {
            let ep = principal_eigenpair(&assemble_twisted_laplacian(&p, &g, lam, 1.0)).unwrap();
            let em = principal_eigenpair(&assemble_twisted_laplacian(&p, &g, -lam, 1.0)).unwrap();
            let mu = stationary_measure(&ep, &em, &p).unwrap();
            measure_of_set(&mu, 0.0, 0.2, true)
        };
        let m8 = band(8.0);
        let m32 = band(32.0);
        assert!(m32 > m8, "waist-band mass not increasing: {m8} vs {m32}");
        // semiclassical mass law via the 1D reduction oracle: the band
        // |z| <= 0.05 holds at least 90% of the mass once λ·B(0.05) is
        // deep in the exponential tail
        let nz = 2049;
        let lam = 40000.0;
        let (_, h) = principal_eigen_1d(&p, nz, 1.0, lam, 1.0).unwrap();
        let dz = 2.0 / (nz - 1) as f64;
        let mut inside = 0.0;
        let mut total = 0.0;
        for (j, hv) in h.iter().enumerate() {
            let z: f64 = -1.0 + dz * j as f64;
            let w = p.area_element(z) * if j == 0 || j == nz - 1 { 0.5 } else { 1.0 };
            let m = hv * hv * w;
            total += m;
            if z.abs() <= 0.05 {
                inside += m;
            }
        }
        assert!(inside / total >= 0.9, "mass inside: {}", inside / total);
    }
}
