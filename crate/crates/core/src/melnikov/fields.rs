use super::profile::ProfileH;
use super::MelnikovError;
use crate::spectral::{FourierField, Grid, ScalarField};

type Field = FourierField<f64>;
type Scalar = ScalarField<f64>;

/// Largest dropped coefficient mass per unit amplitude when truncating a
/// composed field to the working grid.
pub const TRUNCATION_TOL: f64 = 1e-8;
/// Relative residual allowed in the curl and divergence audits.
pub const AUDIT_TOL: f64 = 1e-10;
/// Mean of the Poisson source above which synthesis is considered broken.
pub const SOURCE_MEAN_TOL: f64 = 1e-12;

fn check_amplitudes(m: f64, eps: f64) -> Result<(), MelnikovError> {
    if !(m.is_finite() && m > 0.0) {
        return Err(MelnikovError::BadParameter { name: "M", value: m });
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(MelnikovError::BadParameter { name: "eps", value: eps });
    }
    Ok(())
}

fn doubled(grid: Grid) -> Grid {
    Grid::new(grid.n() * 2).expect("doubled power of two")
}

/// Truncates a field sampled on the doubled grid; the second value bounds
/// the pointwise truncation error by the dropped coefficient mass.
fn truncate_vector(grid: Grid, fine: &Field) -> (Field, f64) {
    let g = fine.grid();
    let mut dropped = 0.0;
    g.for_each_mode(|idx, k| {
        if !grid.fits(k) || grid.k_on_nyquist(k) {
            let w = g.weight_k3(k[2]);
            dropped += w * (0..3).map(|c| fine.component(c)[idx].norm()).sum::<f64>();
        }
    });
    (fine.resample(grid), dropped)
}

fn truncate_scalar(grid: Grid, fine: &Scalar) -> (Scalar, f64) {
    let g = fine.grid();
    let mut out = Scalar::zeros(grid);
    let mut dropped = 0.0;
    let c = fine.coeffs();
    g.for_each_mode(|idx, k| {
        if grid.fits(k) && !grid.k_on_nyquist(k) && !g.k_on_nyquist(k) {
            let (slot, _) = grid.slot(k).expect("fits");
            out.coeffs_mut()[slot] = c[idx];
        } else {
            dropped += g.weight_k3(k[2]) * c[idx].norm();
        }
    });
    (out, dropped)
}

fn guard_truncation(dropped: f64, scale: f64, grid: Grid) -> Result<(), MelnikovError> {
    if dropped > TRUNCATION_TOL * scale {
        return Err(MelnikovError::Truncation { error: dropped / scale, grid: grid.n(), suggested: grid.n() * 2 });
    }
    Ok(())
}

fn phase(eps: f64, h: &ProfileH, x: [f64; 3]) -> f64 {
    x[2] + eps * h.value(x[0], x[1])
}

/// Pointwise initial vorticity `M(sin θ, cos θ, −ε∂₁h sin θ − ε∂₂h cos θ)`
/// with `θ = x₃ + εh`.
pub fn omega0_at(m: f64, eps: f64, h: &ProfileH, x: [f64; 3]) -> [f64; 3] {
    let (s, c) = phase(eps, h, x).sin_cos();
    let g = h.gradient(x[0], x[1]);
    [m * s, m * c, -eps * m * (g[0] * s + g[1] * c)]
}

/// Spectral initial vorticity, sampled on the doubled grid and truncated.
pub fn build_omega0(m: f64, eps: f64, h: &ProfileH, grid: Grid) -> Result<Field, MelnikovError> {
    check_amplitudes(m, eps)?;
    let fine = Field::sample(doubled(grid), |x| omega0_at(m, eps, h, x));
    let (mut out, dropped) = truncate_vector(grid, &fine);
    guard_truncation(dropped, m, grid)?;
    out.refresh_flags();
    Ok(out)
}

fn source_with_loss(h: &ProfileH, eps: f64, grid: Grid) -> (Scalar, f64) {
    let fine = Scalar::sample(doubled(grid), |x| {
        let (s, c) = phase(eps, h, x).sin_cos();
        let g = h.gradient(x[0], x[1]);
        g[1] * s - g[0] * c
    });
    truncate_scalar(grid, &fine)
}

fn invert(rhs: &Scalar) -> Result<Scalar, MelnikovError> {
    let mean = rhs.mean();
    if mean.abs() > SOURCE_MEAN_TOL {
        return Err(MelnikovError::SourceMean(mean));
    }
    rhs.inverse_laplacian(f64::INFINITY).map_err(MelnikovError::Spectral)
}

/// Source `∂₂h sin θ − ∂₁h cos θ` of the potential equation, truncated to
/// `grid`. Its truncation loss is checked where it enters the velocity.
pub fn phi_source(h: &ProfileH, eps: f64, grid: Grid) -> Scalar {
    source_with_loss(h, eps, grid).0
}

/// Zero-mean potential with `Δφ = ∂₂h sin θ − ∂₁h cos θ`.
pub fn solve_phi(h: &ProfileH, eps: f64, grid: Grid) -> Result<Scalar, MelnikovError> {
    invert(&phi_source(h, eps, grid))
}

/// Unit-frequency shear `M(sin x₃, cos x₃, 0)`.
pub fn shear_field(m: f64, grid: Grid) -> Field {
    Field::sample(grid, |x| [m * x[2].sin(), m * x[2].cos(), 0.0])
}

/// Initial velocity `M(sin θ, cos θ, 0) + εM∇φ`, audited against
/// [`build_omega0`].
pub fn build_u0(m: f64, eps: f64, h: &ProfileH, grid: Grid) -> Result<Field, MelnikovError> {
    check_amplitudes(m, eps)?;
    let fine = Field::sample(doubled(grid), |x| {
        let (s, c) = phase(eps, h, x).sin_cos();
        [m * s, m * c, 0.0]
    });
    let (mut u, dropped) = truncate_vector(grid, &fine);
    guard_truncation(dropped, m, grid)?;
    let (rhs, loss) = source_with_loss(h, eps, grid);
    guard_truncation(eps * loss, 1.0, grid)?;
    let phi = invert(&rhs)?;
    u.axpy(eps * m, &phi.gradient());
    u.refresh_flags();
    let omega = build_omega0(m, eps, h, grid)?;
    let defect = u.curl().sub(&omega).l2_norm() / omega.l2_norm();
    if defect > AUDIT_TOL {
        return Err(MelnikovError::CurlMismatch(defect));
    }
    Ok(u)
}

/// `‖u₀ − W‖_{H^k}` for `k = 0..=k_max`, with `W` the unit-frequency shear.
pub fn shear_deviation(u0: &Field, m: f64, k_max: usize) -> Vec<f64> {
    let d = u0.sub(&shear_field(m, u0.grid()));
    (0..=k_max).map(|k| d.sobolev_norm(k).value).collect()
}

/// First-order vorticity tendency split into its viscous and transport parts.
#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    /// `νΔω₀`.
    pub linear: Field,
    /// `(ω₀·∇)u₀ − (u₀·∇)ω₀`.
    pub nonlinear: Field,
}

impl Bracket {
    pub fn total(&self) -> Field {
        self.linear.add(&self.nonlinear)
    }
}

/// Pseudo-spectral, dealiased tendency of the vorticity at `t = 0`.
pub fn vorticity_bracket(u0: &Field, omega0: &Field, nu: f64) -> Bracket {
    let linear = omega0.laplacian().scaled(nu);
    let nonlinear = omega0.advect_dealiased(u0).sub(&u0.advect_dealiased(omega0));
    Bracket { linear, nonlinear }
}

/// Relative gap between the transport bracket and `curl(u₀ × ω₀)`.
pub fn curl_form_defect(u0: &Field, omega0: &Field) -> f64 {
    let b = vorticity_bracket(u0, omega0, 0.0).nonlinear;
    let c = u0.cross_dealiased(omega0).curl();
    let scale = omega0.l2_norm() * u0.l2_norm();
    if scale == 0.0 {
        0.0
    } else {
        b.sub(&c).l2_norm() / scale
    }
}

/// `ω₀ + t(νΔω₀ + (ω₀·∇)u₀ − (u₀·∇)ω₀)`.
pub fn early_vorticity(u0: &Field, omega0: &Field, nu: f64, t: f64) -> Field {
    let mut out = omega0.clone();
    if t != 0.0 {
        out.axpy(t, &vorticity_bracket(u0, omega0, nu).total());
    }
    out
}
