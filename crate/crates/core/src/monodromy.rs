//! Independent verification channel for the Galerkin solver: integrate the
//! matrix equation `-Y'' + Q Y = lambda Y` across one period from the two
//! canonical initial blocks, evaluate the characteristic determinant
//! `Delta(lambda, t)` whose zeros in `lambda` are the Bloch eigenvalues,
//! and refine Galerkin values by minimizing `|Delta|^2`.
//!
//! The integrator is a fixed-step 8-stage explicit Runge-Kutta scheme of
//! order six (Verner's classic pair, propagated with the sixth-order
//! weights) with Richardson step-halving for error control. The
//! coefficient matrix of the first-order system is traceless, so the
//! `2m x 2m` transfer matrix stays unimodular; the drift of `det M` from
//! one is the cheapest global accuracy indicator.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::MatrixPotential;
use crate::CMatrix;

/// Stage abscissae of the 8-stage order-6 scheme.
const RK_C: [f64; 8] = [
    0.0,
    1.0 / 6.0,
    4.0 / 15.0,
    2.0 / 3.0,
    5.0 / 6.0,
    1.0,
    1.0 / 15.0,
    1.0,
];

/// Strictly lower-triangular stage coupling coefficients.
const RK_A: [[f64; 7]; 8] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [4.0 / 75.0, 16.0 / 75.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 6.0, -8.0 / 3.0, 5.0 / 2.0, 0.0, 0.0, 0.0, 0.0],
    [-165.0 / 64.0, 55.0 / 6.0, -425.0 / 64.0, 85.0 / 96.0, 0.0, 0.0, 0.0],
    [12.0 / 5.0, -8.0, 4015.0 / 612.0, -11.0 / 36.0, 88.0 / 255.0, 0.0, 0.0],
    [
        -8263.0 / 15000.0,
        124.0 / 75.0,
        -643.0 / 680.0,
        -81.0 / 250.0,
        2484.0 / 10625.0,
        0.0,
        0.0,
    ],
    [
        3501.0 / 1720.0,
        -300.0 / 43.0,
        297275.0 / 52632.0,
        -319.0 / 2322.0,
        24068.0 / 84065.0,
        0.0,
        3850.0 / 26703.0,
    ],
];

/// Sixth-order propagation weights.
const RK_B: [f64; 8] = [
    3.0 / 40.0,
    0.0,
    875.0 / 2244.0,
    23.0 / 72.0,
    264.0 / 1955.0,
    0.0,
    125.0 / 11592.0,
    43.0 / 616.0,
];

/// Richardson acceptance threshold for [`integrate`].
const INTEGRATION_TOL: f64 = 1e-9;
/// Hard cap on step doubling.
const MAX_STEPS: usize = 1 << 17;
/// Residual acceptance factor for [`refine_eigenvalue`].
const REFINE_RTOL: f64 = 1e-5;

/// Boundary values at `x = 1` of the canonical matrix solutions
/// `Y_1 (O, I)` and `Y_2 (I, O)`.
#[derive(Debug, Clone)]
pub struct MonodromyData {
    pub lambda: f64,
    pub y1: CMatrix,
    pub y1_prime: CMatrix,
    pub y2: CMatrix,
    pub y2_prime: CMatrix,
}

impl MonodromyData {
    /// Transfer matrix `M = [[Y2, Y1], [Y2', Y1']]` propagating solution
    /// values and derivatives across one period.
    pub fn transfer_matrix(&self) -> CMatrix {
        let m = self.y1.nrows();
        let mut t = CMatrix::zeros(2 * m, 2 * m);
        t.view_mut((0, 0), (m, m)).copy_from(&self.y2);
        t.view_mut((0, m), (m, m)).copy_from(&self.y1);
        t.view_mut((m, 0), (m, m)).copy_from(&self.y2_prime);
        t.view_mut((m, m), (m, m)).copy_from(&self.y1_prime);
        t
    }

    /// `|det M - 1|`; exactly zero in exact arithmetic.
    pub fn unimodularity_defect(&self) -> f64 {
        (self.transfer_matrix().determinant() - Complex64::new(1.0, 0.0)).norm()
    }
}

/// One derivative evaluation of the first-order system
/// `d/dx [Y; Y'] = [[0, I], [Q - lambda, 0]] [Y; Y']`.
fn derivative(potential: &MatrixPotential, lambda: f64, x: f64, state: &CMatrix) -> CMatrix {
    let m = potential.dimension();
    let top = state.view((0, 0), (m, 2 * m));
    let bottom = state.view((m, 0), (m, 2 * m));
    let mut q = potential.evaluate(x);
    for s in 0..m {
        q[(s, s)] -= Complex64::new(lambda, 0.0);
    }
    let mut out = CMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, 2 * m)).copy_from(&bottom);
    out.view_mut((m, 0), (m, 2 * m)).copy_from(&(q * top));
    out
}

/// Fixed-step integration over `[0, 1]` of both canonical solutions.
pub fn integrate_fixed(potential: &MatrixPotential, lambda: f64, steps: usize) -> MonodromyData {
    assert!(steps >= 1);
    let m = potential.dimension();
    // columns [Y1 | Y2], stacked values over derivatives
    let mut state = CMatrix::zeros(2 * m, 2 * m);
    for s in 0..m {
        state[(s, m + s)] = Complex64::new(1.0, 0.0); // Y2(0) = I
        state[(m + s, s)] = Complex64::new(1.0, 0.0); // Y1'(0) = I
    }
    let h = 1.0 / steps as f64;
    let mut stages: Vec<CMatrix> = Vec::with_capacity(8);
    for i in 0..steps {
        let x0 = i as f64 * h;
        stages.clear();
        for stage in 0..8 {
            let mut arg = state.clone();
            for (l, k) in stages.iter().enumerate() {
                let a = RK_A[stage][l];
                if a != 0.0 {
                    arg += k * Complex64::new(a * h, 0.0);
                }
            }
            stages.push(derivative(potential, lambda, x0 + RK_C[stage] * h, &arg));
        }
        for (stage, k) in stages.iter().enumerate() {
            let b = RK_B[stage];
            if b != 0.0 {
                state += k * Complex64::new(b * h, 0.0);
            }
        }
    }
    MonodromyData {
        lambda,
        y1: state.view((0, 0), (m, m)).into_owned(),
        y1_prime: state.view((m, 0), (m, m)).into_owned(),
        y2: state.view((0, m), (m, m)).into_owned(),
        y2_prime: state.view((m, m), (m, m)).into_owned(),
    }
}

fn block_distance(a: &MonodromyData, b: &MonodromyData) -> f64 {
    [
        (&a.y1, &b.y1),
        (&a.y1_prime, &b.y1_prime),
        (&a.y2, &b.y2),
        (&a.y2_prime, &b.y2_prime),
    ]
    .iter()
    .map(|(x, y)| (*x - *y).map(|z| z.norm()).max())
    .fold(0.0, f64::max)
}

/// Integrates with Richardson step-halving until two consecutive
/// resolutions agree, then validates unimodularity of the transfer matrix.
pub fn integrate(potential: &MatrixPotential, lambda: f64, steps: usize) -> Result<MonodromyData> {
    if steps < 64 {
        return Err(Error::InvalidParameter(format!(
            "integration needs at least 64 steps, got {steps}"
        )));
    }
    let mut steps = steps;
    let mut coarse = integrate_fixed(potential, lambda, steps);
    loop {
        let fine = integrate_fixed(potential, lambda, 2 * steps);
        let scale = fine
            .transfer_matrix()
            .map(|z| z.norm())
            .max()
            .max(1.0);
        let defect = block_distance(&coarse, &fine) / scale;
        if defect <= INTEGRATION_TOL {
            let unimod = fine.unimodularity_defect();
            let unimod_scale = scale.powi(2 * potential.dimension() as i32);
            if unimod > 1e-6 * unimod_scale {
                return Err(Error::IntegrationTolerance {
                    defect: unimod,
                    tol: 1e-6 * unimod_scale,
                    steps: 2 * steps,
                });
            }
            return Ok(fine);
        }
        if 2 * steps > MAX_STEPS {
            return Err(Error::IntegrationTolerance {
                defect,
                tol: INTEGRATION_TOL,
                steps: 2 * steps,
            });
        }
        steps *= 2;
        coarse = fine;
    }
}

fn delta_from_blocks(data: &MonodromyData, t: f64) -> Complex64 {
    let m = data.y1.nrows();
    let phase = Complex64::from_polar(1.0, t);
    let mut d = CMatrix::zeros(2 * m, 2 * m);
    // [[Y1(1), Y2(1) - e^{it} I], [Y1'(1) - e^{it} I, Y2'(1)]]
    d.view_mut((0, 0), (m, m)).copy_from(&data.y1);
    let mut top_right = data.y2.clone();
    let mut bottom_left = data.y1_prime.clone();
    for s in 0..m {
        top_right[(s, s)] -= phase;
        bottom_left[(s, s)] -= phase;
    }
    d.view_mut((0, m), (m, m)).copy_from(&top_right);
    d.view_mut((m, 0), (m, m)).copy_from(&bottom_left);
    d.view_mut((m, m), (m, m)).copy_from(&data.y2_prime);
    d.determinant()
}

/// Characteristic determinant `Delta(lambda, t)`, a degree-`2m` polynomial
/// in `e^{it}` vanishing exactly at the Bloch eigenvalues of `L_t`.
pub fn delta(
    potential: &MatrixPotential,
    lambda: f64,
    t: f64,
    steps: usize,
) -> Result<Complex64> {
    if t.abs() > std::f64::consts::PI {
        return Err(Error::InvalidParameter(format!(
            "quasimomentum t = {t} outside [-pi, pi]"
        )));
    }
    Ok(delta_from_blocks(&integrate(potential, lambda, steps)?, t))
}

/// `Delta` without step-size control, for inner minimization loops.
pub fn delta_fixed(potential: &MatrixPotential, lambda: f64, t: f64, steps: usize) -> Complex64 {
    delta_from_blocks(&integrate_fixed(potential, lambda, steps), t)
}

/// Locates the zero of `Delta(., t)` nearest to a Galerkin eigenvalue by
/// golden-section minimization of `|Delta|^2` inside the bracket followed
/// by a local quadratic fit. A minimum stuck at the bracket boundary or a
/// residual that fails to drop signals a spurious input value.
pub fn refine_eigenvalue(
    potential: &MatrixPotential,
    t: f64,
    lambda_guess: f64,
    bracket_width: f64,
    steps: usize,
) -> Result<f64> {
    if !(bracket_width > 0.0) {
        return Err(Error::InvalidParameter(
            "bracket_width must be positive".into(),
        ));
    }
    let phi = |lam: f64| delta_fixed(potential, lam, t, steps).norm_sqr();
    let lo = lambda_guess - bracket_width;
    let hi = lambda_guess + bracket_width;
    let scale_ends = phi(lo).max(phi(hi));

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let tol = 1e-13 * lambda_guess.abs().max(1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    for _ in 0..160 {
        if b - a < tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = phi(d);
        }
    }
    let mut best = 0.5 * (a + b);
    let mut f_best = phi(best);

    // local quadratic fit around the golden minimizer
    let step = (b - a).max(tol);
    let (xl, xr) = (best - step, best + step);
    let (fl, fr) = (phi(xl), phi(xr));
    let denom = (best - xl) * (f_best - fr) - (best - xr) * (f_best - fl);
    if denom != 0.0 {
        let vertex = best
            - 0.5 * ((best - xl).powi(2) * (f_best - fr) - (best - xr).powi(2) * (f_best - fl))
                / denom;
        if vertex.is_finite() && vertex > lo && vertex < hi {
            let fv = phi(vertex);
            if fv < f_best {
                best = vertex;
                f_best = fv;
            }
        }
    }

    let boundary_stuck = best - lo < 2.0 * tol || hi - best < 2.0 * tol;
    let residual_ok = f_best.sqrt() <= REFINE_RTOL * scale_ends.sqrt().max(f64::MIN_POSITIVE);
    if boundary_stuck || !residual_ok {
        return Err(Error::NoBracketMinimum { lo, hi });
    }
    Ok(best)
}
