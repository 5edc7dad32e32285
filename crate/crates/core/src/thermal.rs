//! Current continuity, Joule heating and transient heat conduction in the
//! metal.
//!
//! Conductivities follow the Wiedemann-Franz law `kappa = L T sigma` with
//! `sigma = nu sigma_bulk(T)`, where `nu` corrects for finite size. Heat is
//! advanced with a Theta-scheme whose coefficients are lagged to the start
//! of the step.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fem::{
    add_neumann_flux, add_volume_source, assemble_laplace, assemble_mass, boundary_flux, eval_field, solve_cg,
    CgOptions, DofMap, Flux, ScalarField, SparseSymSystem,
};
use crate::mesh::{BoundaryTag, Mesh, Region};
use crate::{Error, Result};

/// Piecewise-linear table, held constant beyond its end points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Table {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for Table {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Table::new(points)
    }
}

impl From<Table> for Vec<(f64, f64)> {
    fn from(t: Table) -> Self {
        t.points
    }
}

impl Table {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("table needs at least one point"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::config("table abscissae must be strictly increasing"));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::config("table entries must be finite"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Interpolated value and whether `x` was outside the table.
    pub fn eval(&self, x: f64) -> (f64, bool) {
        let p = &self.points;
        let (first, last) = (p[0], p[p.len() - 1]);
        if x < first.0 {
            return (first.1, true);
        }
        if x > last.0 {
            return (last.1, true);
        }
        if p.len() == 1 {
            return (first.1, false);
        }
        let k = p.partition_point(|q| q.0 <= x).clamp(1, p.len() - 1);
        let (a, b) = (p[k - 1], p[k]);
        let s = (x - a.0) / (b.0 - a.0);
        (a.1 + s * (b.1 - a.1), false)
    }
}

/// Finite-size correction factor applied to the bulk conductivity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FiniteSize {
    Constant(f64),
    Table(Table),
}

impl FiniteSize {
    fn eval(&self, t: f64) -> (f64, bool) {
        match self {
            FiniteSize::Constant(v) => (*v, false),
            FiniteSize::Table(tab) => tab.eval(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    /// Bulk electric conductivity against temperature, (K, S/m).
    pub sigma_bulk: Table,
    pub finite_size: FiniteSize,
    /// Characteristic conductor diameter the correction refers to (m).
    pub feature_size: f64,
    /// Lorentz number (W Ohm / K^2).
    pub lorenz: f64,
    /// Volumetric heat capacity (J / (K m^3)).
    pub heat_capacity: f64,
    /// Ambient temperature (K).
    pub ambient: f64,
}

impl Default for MaterialModel {
    /// Copper: resistivity of the bulk metal up to the melting point and
    /// the liquid just above it.
    fn default() -> Self {
        let rho = [
            (100.0, 0.348e-8),
            (200.0, 1.046e-8),
            (300.0, 1.725e-8),
            (400.0, 2.402e-8),
            (600.0, 3.792e-8),
            (800.0, 5.262e-8),
            (1000.0, 6.858e-8),
            (1200.0, 8.626e-8),
            (1357.0, 10.06e-8),
            (1358.0, 21.0e-8),
            (2000.0, 26.0e-8),
        ];
        Self {
            sigma_bulk: Table::new(rho.iter().map(|&(t, r)| (t, 1.0 / r)).collect()).unwrap(),
            finite_size: FiniteSize::Constant(1.0),
            feature_size: 0.0,
            lorenz: 2.0e-8,
            heat_capacity: 3.45e6,
            ambient: 300.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conductivity {
    /// Electric conductivity (S/m).
    pub sigma: f64,
    /// Thermal conductivity (W / (m K)).
    pub kappa: f64,
    /// `T` was outside a table and the end value was used.
    pub clamped: bool,
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_bulk.points().iter().any(|p| !(p.1 > 0.0)) {
            return Err(Error::config("conductivity table values must be positive"));
        }
        let nu_ok = match &self.finite_size {
            FiniteSize::Constant(v) => *v > 0.0,
            FiniteSize::Table(t) => t.points().iter().all(|p| p.1 > 0.0),
        };
        if !nu_ok {
            return Err(Error::config("finite-size factor must be positive"));
        }
        for (name, v) in [("lorenz", self.lorenz), ("heat_capacity", self.heat_capacity), ("ambient", self.ambient)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Conductivities at temperature `t`.
    pub fn conductivity(&self, t: f64) -> Result<Conductivity> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::config(format!("temperature must be positive, got {t}")));
        }
        let (bulk, c1) = self.sigma_bulk.eval(t);
        let (nu, c2) = self.finite_size.eval(t);
        let sigma = nu * bulk;
        Ok(Conductivity { sigma, kappa: self.lorenz * t * sigma, clamped: c1 || c2 })
    }
}

/// Conductivities per global cell from the mean cell temperature (metal
/// cells only; vacuum entries are zero).
pub fn cell_conductivities(mesh: &Mesh, temperature: &ScalarField, mat: &MaterialModel) -> Result<Vec<Conductivity>> {
    let zero = Conductivity { sigma: 0.0, kappa: 0.0, clamped: false };
    let mut out = vec![zero; mesh.num_cells()];
    let mut clamped = 0;
    for c in mesh.cells_in(Region::Metal) {
        out[c] = mat.conductivity(temperature.cell_mean(mesh, c))?;
        clamped += out[c].clamped as usize;
    }
    if clamped > 0 {
        log::warn!("{clamped} metal cells outside the material tables; end values used");
    }
    Ok(out)
}

/// Metal potential for emitted current density `emission` on the surface
/// faces (ordered as [`Mesh::faces_with_tag`] for the surface tag), with
/// the metal base grounded. Returns the potential and the solved system.
pub fn solve_continuity(
    mesh: &Mesh,
    sigma: &[f64],
    emission: &[f64],
    cg: CgOptions,
) -> Result<(ScalarField, SparseSymSystem)> {
    let mut sys = assemble_laplace(mesh, Region::Metal, |c| sigma[c])?;
    sys.constrain_tag(mesh, BoundaryTag::MetalBase, 0.0)?;
    add_neumann_flux(&mut sys, mesh, BoundaryTag::Surface, Flux::PerFace(emission))?;
    let (phi, _) = solve_cg(&sys, cg, None)?;
    Ok((phi, sys))
}

/// Joule power density `sigma |grad phi|^2` per global cell.
pub fn joule_power(mesh: &Mesh, phi: &ScalarField, sigma: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; mesh.num_cells()];
    for c in mesh.cells_in(phi.dofs.region()) {
        p[c] = sigma[c] * eval_field(mesh, phi, c).norm_squared();
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatState {
    pub temperature: ScalarField,
    pub time: f64,
}

impl HeatState {
    pub fn ambient(mesh: &Mesh, mat: &MaterialModel) -> Self {
        let dofs = Arc::new(DofMap::for_region(mesh, Region::Metal));
        Self { temperature: ScalarField::constant(dofs, mat.ambient), time: 0.0 }
    }
}

/// Heat sources held constant over a step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeatSources {
    /// Volumetric power per global cell (W/m^3).
    pub volume: Vec<f64>,
    /// Heat flux into the metal per surface face (W/m^2), ordered as
    /// [`Mesh::faces_with_tag`] for the surface tag.
    pub surface: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMatrix {
    #[default]
    Consistent,
    /// Row-sum lumped; keeps a discrete maximum principle at any step size.
    Lumped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatOptions {
    /// 1 is implicit Euler, 0.5 Crank-Nicolson.
    pub theta: f64,
    /// Fixed temperatures per boundary tag.
    pub dirichlet: Vec<(BoundaryTag, f64)>,
    pub mass: MassMatrix,
    pub cg: CgOptions,
}

impl HeatOptions {
    pub fn ambient(mat: &MaterialModel) -> Self {
        Self {
            theta: 1.0,
            dirichlet: vec![(BoundaryTag::MetalBase, mat.ambient)],
            mass: MassMatrix::Consistent,
            cg: CgOptions::default(),
        }
    }
}

fn load_vector(mesh: &Mesh, sys: &mut SparseSymSystem, sources: &HeatSources) -> Result<()> {
    if !sources.volume.is_empty() {
        if sources.volume.len() != mesh.num_cells() {
            return Err(Error::config("volume heat source needs one value per cell"));
        }
        add_volume_source(sys, mesh, &sources.volume);
    }
    if !sources.surface.is_empty() {
        add_neumann_flux(sys, mesh, BoundaryTag::Surface, Flux::PerFace(&sources.surface))?;
    }
    Ok(())
}

fn constrain(mesh: &Mesh, sys: &mut SparseSymSystem, opts: &HeatOptions) -> Result<()> {
    if opts.dirichlet.is_empty() {
        return Err(Error::config("heat problem needs at least one fixed-temperature boundary"));
    }
    for &(tag, value) in &opts.dirichlet {
        sys.constrain_tag(mesh, tag, value)?;
    }
    Ok(())
}

/// Thermal conductivity per global cell, lagged at `temperature`.
pub fn cell_kappa(mesh: &Mesh, temperature: &ScalarField, mat: &MaterialModel) -> Result<Vec<f64>> {
    Ok(cell_conductivities(mesh, temperature, mat)?.iter().map(|c| c.kappa).collect())
}

/// Stiffness system `K T = f` for thermal conductivity `kappa` per cell.
pub fn heat_stiffness(mesh: &Mesh, kappa: &[f64], sources: &HeatSources, opts: &HeatOptions) -> Result<SparseSymSystem> {
    let mut sys = assemble_laplace(mesh, Region::Metal, |c| kappa[c])?;
    load_vector(mesh, &mut sys, sources)?;
    constrain(mesh, &mut sys, opts)?;
    Ok(sys)
}

/// One Theta-scheme step with given conductivities,
/// `(C/dt + Theta K) T1 = (C/dt - (1 - Theta) K) T0 + f`.
pub fn theta_step(
    mesh: &Mesh,
    state: &HeatState,
    dt: f64,
    kappa: &[f64],
    heat_capacity: f64,
    sources: &HeatSources,
    opts: &HeatOptions,
) -> Result<HeatState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(format!("heat time step must be positive, got {dt}")));
    }
    if !(0.0..=1.0).contains(&opts.theta) {
        return Err(Error::config(format!("theta must lie in [0, 1], got {}", opts.theta)));
    }
    let stiff = heat_stiffness(mesh, kappa, sources, opts)?;
    let dofs = &stiff.dofs;
    let mut mass = assemble_mass(mesh, dofs, &stiff.matrix, |_| heat_capacity);
    if opts.mass == MassMatrix::Lumped {
        let mut lumped = mass.zeroed_like();
        for i in 0..dofs.len() {
            lumped.add(i, i, mass.row(i).map(|(_, v)| v).sum());
        }
        mass = lumped;
    }
    let t0 = &state.temperature.values;
    let mut k_t0 = vec![0.0; t0.len()];
    stiff.matrix.mul_vec(t0, &mut k_t0);
    let mut c_t0 = vec![0.0; t0.len()];
    mass.mul_vec(t0, &mut c_t0);
    let rhs: Vec<f64> = (0..t0.len())
        .map(|i| c_t0[i] / dt - (1.0 - opts.theta) * k_t0[i] + stiff.rhs[i])
        .collect();
    let sys = SparseSymSystem {
        dofs: stiff.dofs.clone(),
        matrix: mass.linear_combination(1.0 / dt, &stiff.matrix, opts.theta),
        rhs,
        dirichlet: stiff.dirichlet.clone(),
    };
    let (temperature, _) = solve_cg(&sys, opts.cg, Some(t0))?;
    Ok(HeatState { temperature, time: state.time + dt })
}

/// One heat step with conductivities from `mat` lagged at the current
/// temperature.
pub fn step_heat(
    mesh: &Mesh,
    state: &HeatState,
    dt: f64,
    sources: &HeatSources,
    mat: &MaterialModel,
    opts: &HeatOptions,
) -> Result<HeatState> {
    let kappa = cell_kappa(mesh, &state.temperature, mat)?;
    theta_step(mesh, state, dt, &kappa, mat.heat_capacity, sources, opts)
}

/// Steady temperature for conductivities `kappa`.
pub fn solve_steady_heat(
    mesh: &Mesh,
    kappa: &[f64],
    sources: &HeatSources,
    opts: &HeatOptions,
    guess: Option<&[f64]>,
) -> Result<ScalarField> {
    let sys = heat_stiffness(mesh, kappa, sources, opts)?;
    Ok(solve_cg(&sys, opts.cg, guess)?.0)
}

/// Heat conducted out of the metal through the faces tagged `tag` (W),
/// from the consistent reaction flux of the stiffness system.
pub fn conductive_outflow(
    mesh: &Mesh,
    temperature: &ScalarField,
    kappa: &[f64],
    sources: &HeatSources,
    opts: &HeatOptions,
    tag: BoundaryTag,
) -> Result<f64> {
    let sys = heat_stiffness(mesh, kappa, sources, opts)?;
    Ok(-boundary_flux(&sys, mesh, temperature, tag)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_and_clamps() {
        let t = Table::new(vec![(1.0, 10.0), (3.0, 30.0), (4.0, 0.0)]).unwrap();
        assert_eq!(t.eval(2.0), (20.0, false));
        assert_eq!(t.eval(3.5), (15.0, false));
        assert_eq!(t.eval(0.5), (10.0, true));
        assert_eq!(t.eval(9.0), (0.0, true));
        assert_eq!(t.eval(1.0), (10.0, false));
        assert_eq!(t.eval(4.0), (0.0, false));
        assert!(Table::new(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
        let single = Table::new(vec![(5.0, 2.0)]).unwrap();
        assert_eq!(single.eval(5.0), (2.0, false));
    }

    #[test]
    fn wiedemann_franz() {
        let mat = MaterialModel::default();
        let c = mat.conductivity(300.0).unwrap();
        assert_eq!(c.kappa, mat.lorenz * 300.0 * c.sigma);
        assert!((c.sigma - 1.0 / 1.725e-8).abs() < 1.0);
        let half = MaterialModel { finite_size: FiniteSize::Constant(0.5), ..mat.clone() };
        let h = half.conductivity(300.0).unwrap();
        assert_eq!(h.sigma, 0.5 * c.sigma);
        assert_eq!(h.kappa, 0.5 * c.kappa);
        assert!(mat.conductivity(0.0).is_err());
        assert!(mat.conductivity(5000.0).unwrap().clamped);
    }

    #[test]
    fn table_end_points_reproduce_resistivity() {
        let mat = MaterialModel::default();
        let (lo, hi) = (mat.conductivity(100.0).unwrap(), mat.conductivity(2000.0).unwrap());
        assert!((1.0 / lo.sigma - 0.348e-8).abs() < 1e-20);
        assert!((1.0 / hi.sigma - 26.0e-8).abs() < 1e-20);
    }
}
