/// Numerical thresholds shared by the solvers.
///
/// Defaults target double precision. `scaled` multiplies every entry, which is
/// what the `BP_TOLERANCE_SCALE` environment variable feeds into.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// A state is defective when |(x)^2| < defect_ratio * <x|x>.
    pub defect_ratio: f64,
    /// Orthonormality check applied to mixing bases.
    pub basis_orthonormality: f64,
    /// Matching confidence below which two assignments count as tied.
    pub match_tie: f64,
    /// Additive slack in the sweep continuity bound.
    pub continuity: f64,
    /// Relative step size at which root polishing stops.
    pub root_step: f64,
    /// disc_residual must stay below this times the reference scale.
    pub disc_residual: f64,
    /// Branch points closer than this are merged.
    pub dedup_radius: f64,
    /// Minimal admissible distance between an encircling loop and a degeneracy.
    pub loop_clearance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            defect_ratio: 1e-6,
            basis_orthonormality: 1e-10,
            match_tie: 1e-9,
            continuity: 1e-9,
            root_step: 1e-14,
            disc_residual: 1e-10,
            dedup_radius: 1e-6,
            loop_clearance: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn scaled(factor: f64) -> Self {
        let d = Tolerances::default();
        Tolerances {
            defect_ratio: d.defect_ratio * factor,
            basis_orthonormality: d.basis_orthonormality * factor,
            match_tie: d.match_tie * factor,
            continuity: d.continuity * factor,
            root_step: d.root_step * factor,
            disc_residual: d.disc_residual * factor,
            dedup_radius: d.dedup_radius * factor,
            loop_clearance: d.loop_clearance * factor,
        }
    }

    /// Overrides one entry by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        if !(value.is_finite() && value > 0.0) {
            return Err(format!("tolerance {name} must be positive and finite, got {value}"));
        }
        let slot = match name {
            "defect_ratio" => &mut self.defect_ratio,
            "basis_orthonormality" => &mut self.basis_orthonormality,
            "match_tie" => &mut self.match_tie,
            "continuity" => &mut self.continuity,
            "root_step" => &mut self.root_step,
            "disc_residual" => &mut self.disc_residual,
            "dedup_radius" => &mut self.dedup_radius,
            "loop_clearance" => &mut self.loop_clearance,
            _ => return Err(format!("unknown tolerance {name:?}")),
        };
        *slot = value;
        Ok(())
    }
}
