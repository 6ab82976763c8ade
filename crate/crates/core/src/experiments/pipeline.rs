//! Mesh → band → surface → spaces, shared by every experiment family.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_a, assemble_b, assemble_c, assemble_mass, assemble_rhs, assemble_system,
    AssembledSystem, Forcing, FormContext, FormParameters, Stabilization,
};
use crate::fem::{build_space, DiscreteSpace};
use crate::geometry::{
    default_subdivision, extract_band_for_subdivision, extract_cut_surface_with, CutSurface,
    LevelSet,
};
use crate::mesh::{build_mesh, ActiveBand, BackgroundMesh};
use crate::par::ExecMode;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Sphere,
    Torus,
}

impl Surface {
    pub fn level_set(self) -> LevelSet {
        match self {
            Surface::Sphere => LevelSet::sphere(),
            Surface::Torus => LevelSet::torus(),
        }
    }

    pub fn exact_area(self) -> f64 {
        match self {
            Surface::Sphere => 4.0 * std::f64::consts::PI,
            Surface::Torus => 0.8 * std::f64::consts::PI * std::f64::consts::PI,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Surface::Sphere => "sphere",
            Surface::Torus => "torus",
        }
    }
}

/// Velocity–pressure element pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pair {
    P2P1,
    P1P1,
}

impl Pair {
    pub fn velocity_degree(self) -> usize {
        match self {
            Pair::P2P1 => 2,
            Pair::P1P1 => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pair::P2P1 => "P2P1",
            Pair::P1P1 => "P1P1",
        }
    }
}

/// Geometry and finite element spaces of one level.
#[derive(Debug)]
pub struct Discretization {
    pub level: u32,
    pub phi: LevelSet,
    pub mesh: Arc<BackgroundMesh>,
    pub band: ActiveBand,
    pub cut: CutSurface,
    pub vel: DiscreteSpace,
    pub pres: DiscreteSpace,
    pub mode: ExecMode,
}

impl Discretization {
    /// `subdivision = None` uses `m = ⌈1/h⌉`.
    pub fn build(
        phi: &LevelSet,
        level: u32,
        pair: Pair,
        subdivision: Option<usize>,
        mode: ExecMode,
    ) -> Result<Self> {
        let mesh = Arc::new(build_mesh(level, Some(phi))?);
        let m = subdivision.unwrap_or_else(|| default_subdivision(mesh.h));
        let band = extract_band_for_subdivision(mesh.clone(), phi, m)?;
        let cut = extract_cut_surface_with(&band, phi, m, mode)?;
        let vel = build_space(&band, pair.velocity_degree(), 3)?;
        let pres = build_space(&band, 1, 1)?;
        Ok(Discretization {
            level,
            phi: phi.clone(),
            mesh,
            band,
            cut,
            vel,
            pres,
            mode,
        })
    }

    pub fn h(&self) -> f64 {
        self.mesh.h
    }

    pub fn context(&self) -> FormContext<'_> {
        FormContext {
            band: &self.band,
            cut: &self.cut,
            vel: &self.vel,
            pres: &self.pres,
            mode: self.mode,
        }
    }

    pub fn assemble(
        &self,
        params: &FormParameters,
        stab: Stabilization,
        mass_stab: Stabilization,
        forcing: Option<&Forcing<'_>>,
    ) -> Result<AssembledSystem> {
        assemble_system(&self.context(), params, stab, mass_stab, forcing)
    }

    /// One system per `(C★, M★)` pair, sharing the blocks that do not depend
    /// on the pressure stabilization.
    pub fn assemble_variants(
        &self,
        params: &FormParameters,
        variants: &[(Stabilization, Stabilization)],
        forcing: Option<&Forcing<'_>>,
    ) -> Result<Vec<AssembledSystem>> {
        let ctx = self.context();
        let a = assemble_a(&ctx, params)?;
        let b = assemble_b(&ctx)?;
        let m0 = assemble_mass(&ctx)?;
        let (f, g) = match forcing {
            Some(fg) => assemble_rhs(&ctx, fg)?,
            None => (vec![0.0; a.nrows], vec![0.0; b.nrows]),
        };
        let mut cache: Vec<(Stabilization, crate::linalg::CsrMatrix)> = Vec::new();
        let mut stab_matrix = |s: Stabilization| -> Result<crate::linalg::CsrMatrix> {
            if let Some((_, c)) = cache.iter().find(|(k, _)| *k == s) {
                return Ok(c.clone());
            }
            let c = assemble_c(&ctx, s, params.rho_p)?;
            cache.push((s, c.clone()));
            Ok(c)
        };
        variants
            .iter()
            .map(|&(stab, mass_stab)| {
                let c = stab_matrix(stab)?;
                let mstar = m0.add_scaled(&stab_matrix(mass_stab)?, 1.0);
                Ok(AssembledSystem {
                    a: a.clone(),
                    b: b.clone(),
                    c,
                    m0: m0.clone(),
                    mstar,
                    f: f.clone(),
                    g: g.clone(),
                    stabilization: stab,
                    mass_stabilization: mass_stab,
                })
            })
            .collect()
    }
}
