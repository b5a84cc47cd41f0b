//! Market and preference parameters, derived constants and the wealth grid.

use crate::error::ParamError;

/// Upper limit on ambiguity aversion accepted by the numerical solvers.
pub const MAX_AMBIGUITY: f64 = 1e3;
/// Upper limit on the hazard rate accepted by the numerical solvers.
pub const MAX_HAZARD: f64 = 10.0;
/// Smallest admissible number of grid nodes.
pub const MIN_GRID_NODES: usize = 17;

/// The seven scalars describing the retiree's market and preferences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Riskless interest rate (1/year).
    pub rate: f64,
    /// Drift of the risky asset (1/year).
    pub drift: f64,
    /// Volatility of the risky asset (1/sqrt(year)).
    pub volatility: f64,
    /// Consumption rate (wealth/year).
    pub consumption: f64,
    /// Wealth level at which the retiree is ruined.
    pub ruin_level: f64,
    /// Force of mortality (1/year).
    pub hazard: f64,
    /// Ambiguity aversion; zero means the reference model is trusted.
    pub ambiguity: f64,
}

impl ModelParams {
    pub fn new(
        rate: f64,
        drift: f64,
        volatility: f64,
        consumption: f64,
        ruin_level: f64,
        hazard: f64,
        ambiguity: f64,
    ) -> Result<Self, ParamError> {
        validate(ModelParams { rate, drift, volatility, consumption, ruin_level, hazard, ambiguity })
    }

    pub fn with_rate(self, rate: f64) -> Result<Self, ParamError> {
        validate(ModelParams { rate, ..self })
    }

    pub fn with_ambiguity(self, ambiguity: f64) -> Result<Self, ParamError> {
        validate(ModelParams { ambiguity, ..self })
    }

    pub fn with_hazard(self, hazard: f64) -> Result<Self, ParamError> {
        validate(ModelParams { hazard, ..self })
    }

    /// Wealth above which consumption is financed by interest alone.
    pub fn safe_level(&self) -> f64 {
        self.consumption / self.rate
    }

    /// Excess return per unit variance, the Merton fraction numerator.
    pub fn merton_ratio(&self) -> f64 {
        (self.drift - self.rate) / (self.volatility * self.volatility)
    }

    /// Sharpe ratio of the risky asset.
    pub fn sharpe(&self) -> f64 {
        (self.drift - self.rate) / self.volatility
    }

    /// Normalised distance to the safe level: 1 at the ruin level, 0 at the safe level.
    pub fn gap_ratio(&self, w: f64) -> f64 {
        let x = (self.consumption - self.rate * w) / (self.consumption - self.rate * self.ruin_level);
        x.clamp(0.0, 1.0)
    }

    /// Check the extra limits imposed by the numerical solvers.
    pub fn check_solver_range(&self) -> Result<(), ParamError> {
        if !(self.ambiguity > 0.0 && self.ambiguity <= MAX_AMBIGUITY) {
            return Err(ParamError::AmbiguityRange(self.ambiguity));
        }
        if !(self.hazard > 0.0 && self.hazard <= MAX_HAZARD) {
            return Err(ParamError::HazardRange(self.hazard));
        }
        Ok(())
    }
}

/// Return the parameters unchanged if every standing assumption holds.
pub fn validate(p: ModelParams) -> Result<ModelParams, ParamError> {
    let fields = [
        ("r", p.rate),
        ("mu", p.drift),
        ("sigma", p.volatility),
        ("c", p.consumption),
        ("b", p.ruin_level),
        ("lambda", p.hazard),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(ParamError::NotFinite(name));
        }
    }
    if p.ambiguity.is_nan() || p.ambiguity.is_infinite() {
        return Err(ParamError::NotFinite("eps"));
    }
    if p.rate <= 0.0 {
        return Err(ParamError::RateNotPositive);
    }
    if p.volatility <= 0.0 {
        return Err(ParamError::VolatilityNotPositive);
    }
    if p.consumption <= 0.0 {
        return Err(ParamError::ConsumptionNotPositive);
    }
    if p.drift <= p.rate {
        return Err(ParamError::DriftBelowRate);
    }
    if p.hazard < 0.0 {
        return Err(ParamError::HazardNegative);
    }
    if p.ambiguity < 0.0 {
        return Err(ParamError::AmbiguityNegative);
    }
    if p.ruin_level >= p.safe_level() {
        return Err(ParamError::RuinAboveSafe { b: p.ruin_level, safe: p.safe_level() });
    }
    Ok(p)
}

/// Constants that recur in every formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Half the squared Sharpe ratio.
    pub half_sharpe_sq: f64,
    /// Exponent of the non-robust ruin probability, larger root of
    /// `r k^2 - (r + lambda + half_sharpe_sq) k + lambda = 0`.
    pub exponent: f64,
    pub safe_level: f64,
    /// Below this ambiguity level the robust ruin probability is convex.
    pub convex_threshold: f64,
    /// Above this ambiguity level it changes concavity once.
    pub concave_threshold: f64,
}

pub fn derive(p: &ModelParams) -> DerivedConstants {
    let r = p.rate;
    let lam = p.hazard;
    let big_r = 0.5 * p.sharpe() * p.sharpe();
    let s = r + lam + big_r;
    let disc = (s * s - 4.0 * r * lam).sqrt();
    let exponent = (s + disc) / (2.0 * r);
    let convex_threshold = if r * exponent > lam { big_r / (r * exponent - lam) } else { f64::INFINITY };
    let concave_threshold = if r > lam { big_r / (r - lam) } else { f64::INFINITY };
    DerivedConstants {
        half_sharpe_sq: big_r,
        exponent,
        safe_level: p.safe_level(),
        convex_threshold,
        concave_threshold,
    }
}

/// Uniform grid on `[b, w_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub spacing: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Index of the cell containing `w`, clamped to the grid.
    pub fn locate(&self, w: f64) -> usize {
        let pos = (w - self.nodes[0]) / self.spacing;
        (pos.max(0.0) as usize).min(self.nodes.len() - 2)
    }
}

pub fn make_grid(p: &ModelParams, n: usize) -> Result<Grid, ParamError> {
    if n < MIN_GRID_NODES {
        return Err(ParamError::GridTooSmall(n));
    }
    let b = p.ruin_level;
    let ws = p.safe_level();
    let m = (n - 1) as f64;
    let nodes: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { ws } else { b + (ws - b) * (i as f64 / m) })
        .collect();
    Ok(Grid { nodes, spacing: (ws - b) / m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(r: f64) -> ModelParams {
        ModelParams::new(r, 0.1, 0.15, 1.0, 1.0, 0.04, 5.0).unwrap()
    }

    #[test]
    fn rejects_each_assumption() {
        let p = base(0.02);
        assert_eq!(validate(ModelParams { drift: 0.01, ..p }), Err(ParamError::DriftBelowRate));
        assert!(matches!(validate(ModelParams { ruin_level: 60.0, ..p }), Err(ParamError::RuinAboveSafe { .. })));
        assert_eq!(validate(ModelParams { volatility: 0.0, ..p }), Err(ParamError::VolatilityNotPositive));
        assert_eq!(validate(ModelParams { hazard: -1.0, ..p }), Err(ParamError::HazardNegative));
        assert_eq!(validate(ModelParams { ambiguity: f64::NAN, ..p }), Err(ParamError::NotFinite("eps")));
        assert!(validate(ModelParams { drift: 0.01, ..p }).unwrap_err().to_string().contains("mu must exceed r"));
        assert!(validate(ModelParams { ruin_level: 60.0, ..p })
            .unwrap_err()
            .to_string()
            .contains("b must be below safe level"));
    }

    #[test]
    fn thresholds_at_higher_rate() {
        let k = derive(&base(0.06));
        assert!((k.convex_threshold - 0.4765).abs() < 5e-4, "{}", k.convex_threshold);
        assert!((k.concave_threshold - 1.7778).abs() < 5e-4);
        assert!((k.exponent - 1.910).abs() < 1e-3);
    }

    #[test]
    fn constants_at_lower_rate() {
        let p = base(0.02);
        let k = derive(&p);
        assert!((k.half_sharpe_sq - 0.142222).abs() < 1e-6);
        assert!((k.exponent - 9.909).abs() < 1e-3);
        let s = p.rate + p.hazard + k.half_sharpe_sq;
        let q = p.rate * k.exponent * k.exponent - s * k.exponent + p.hazard;
        assert!(q.abs() <= 1e-12 * s * s);
        assert!(k.convex_threshold.is_finite());
        assert!(k.concave_threshold.is_infinite());
    }

    #[test]
    fn grid_spacing() {
        let p = base(0.02);
        let g = make_grid(&p, 50).unwrap();
        assert_eq!(g.len(), 50);
        assert!((g.spacing - 1.0).abs() < 1e-12);
        assert_eq!(g.nodes[49], 50.0);
        let g = make_grid(&p, 4901).unwrap();
        assert!((g.spacing - 0.01).abs() < 1e-12);
        assert_eq!(make_grid(&p, 5), Err(ParamError::GridTooSmall(5)));
    }
}
