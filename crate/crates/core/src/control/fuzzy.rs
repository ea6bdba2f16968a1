use serde::{Deserialize, Serialize};

use super::ControlError;

/// Points on the output universe used for centroid integration.
pub const OUTPUT_GRID: usize = 1001;

/// Piecewise-linear membership function. Outside its first and last
/// vertex it holds the end values, so a shoulder trapezoid stays at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipFn {
    pub name: String,
    pub vertices: Vec<(f64, f64)>,
}

impl MembershipFn {
    /// Trapezoid rising over `[a, b]`, flat at 1 over `[b, c]`, falling
    /// over `[c, d]`. `a == b` or `c == d` gives a shoulder.
    pub fn trapezoid(name: &str, [a, b, c, d]: [f64; 4]) -> Self {
        let mut vertices = Vec::with_capacity(4);
        if a < b {
            vertices.push((a, 0.0));
        }
        vertices.push((b, 1.0));
        vertices.push((c, 1.0));
        if c < d {
            vertices.push((d, 0.0));
        }
        Self {
            name: name.to_string(),
            vertices,
        }
    }

    pub fn degree(&self, x: f64) -> f64 {
        let v = &self.vertices;
        let (first, last) = (v[0], v[v.len() - 1]);
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        for w in v.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                if x1 == x0 {
                    return y1;
                }
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        last.1
    }

    fn validate(&self) -> Result<(), ControlError> {
        let bad = |why: &str| ControlError::InvalidFuzzyConfig(format!("membership {:?}: {why}", self.name));
        if self.vertices.is_empty() {
            return Err(bad("no vertices"));
        }
        if self
            .vertices
            .iter()
            .any(|(x, y)| !x.is_finite() || !(0.0..=1.0).contains(y))
        {
            return Err(bad("vertex outside [0, 1] or non-finite"));
        }
        if self.vertices.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(bad("abscissae decrease"));
        }
        let peak = self.vertices.iter().map(|v| v.1).fold(0.0, f64::max);
        if peak != 1.0 {
            return Err(bad("peak is not 1"));
        }
        Ok(())
    }
}

/// `if d is <input> then y is <output>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub input: String,
    pub output: String,
}

impl Rule {
    pub fn new(input: &str, output: &str) -> Self {
        Self {
            input: input.to_string(),
            output: output.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyConfig {
    /// Universe of `d`, centimeters. Inputs above it are clamped.
    pub input_range: (f64, f64),
    pub inputs: Vec<MembershipFn>,
    pub output_range: (f64, f64),
    pub outputs: Vec<MembershipFn>,
    pub rules: Vec<Rule>,
    /// The controller is active when `y` exceeds this.
    pub activation_threshold: f64,
}

impl Default for FuzzyConfig {
    /// `small`/`big` cross at d = 0.05 cm; `inactive`/`active` split the
    /// output at 0.5.
    fn default() -> Self {
        Self::with_distance_threshold(0.05)
    }
}

impl FuzzyConfig {
    /// Default rule base with the `small`/`big` crossover moved to
    /// `threshold` cm (transition band ±20 % around it).
    pub fn with_distance_threshold(threshold: f64) -> Self {
        let (lo, hi) = (0.8 * threshold, 1.2 * threshold);
        Self {
            input_range: (0.0, 1.0),
            inputs: vec![
                MembershipFn::trapezoid("small", [0.0, 0.0, lo, hi]),
                MembershipFn::trapezoid("big", [lo, hi, 1.0, 1.0]),
            ],
            output_range: (0.0, 1.0),
            outputs: vec![
                MembershipFn::trapezoid("inactive", [0.0, 0.0, 0.2, 0.5]),
                MembershipFn::trapezoid("active", [0.5, 0.8, 1.0, 1.0]),
            ],
            rules: vec![Rule::new("small", "inactive"), Rule::new("big", "active")],
            activation_threshold: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |why: String| Err(ControlError::InvalidFuzzyConfig(why));
        for (name, (lo, hi)) in [("input", self.input_range), ("output", self.output_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("{name} universe [{lo}, {hi}] is empty"));
            }
        }
        if !self.activation_threshold.is_finite() {
            return bad("activation threshold is not finite".into());
        }
        for mf in self.inputs.iter().chain(&self.outputs) {
            mf.validate()?;
        }
        if self.rules.is_empty() {
            return bad("no rules".into());
        }
        for r in &self.rules {
            if !self.inputs.iter().any(|m| m.name == r.input) {
                return bad(format!("rule refers to unknown input {:?}", r.input));
            }
            if !self.outputs.iter().any(|m| m.name == r.output) {
                return bad(format!("rule refers to unknown output {:?}", r.output));
            }
        }
        Ok(())
    }

    fn input(&self, name: &str) -> &MembershipFn {
        self.inputs.iter().find(|m| m.name == name).expect("validated rule")
    }

    fn output(&self, name: &str) -> &MembershipFn {
        self.outputs.iter().find(|m| m.name == name).expect("validated rule")
    }
}

/// Mamdani inference: each rule clips its output set at the input's
/// membership degree (min), clipped sets are joined by max, and `y` is the
/// centroid of the union by the trapezoid rule on [`OUTPUT_GRID`] points.
pub fn fuzzy_evaluate(d: f64, cfg: &FuzzyConfig) -> Result<f64, ControlError> {
    cfg.validate()?;
    evaluate_unchecked(d, cfg)
}

pub(super) fn evaluate_unchecked(d: f64, cfg: &FuzzyConfig) -> Result<f64, ControlError> {
    if d.is_nan() || d < 0.0 {
        return Err(ControlError::InvalidDistance(d));
    }
    let x = d.clamp(cfg.input_range.0, cfg.input_range.1);
    let fired: Vec<(f64, &MembershipFn)> = cfg
        .rules
        .iter()
        .map(|r| (cfg.input(&r.input).degree(x), cfg.output(&r.output)))
        .filter(|(w, _)| *w > 0.0)
        .collect();
    if fired.is_empty() {
        return Err(ControlError::NoRuleFires(d));
    }

    let (lo, hi) = cfg.output_range;
    let h = (hi - lo) / (OUTPUT_GRID - 1) as f64;
    let (mut area, mut moment) = (0.0, 0.0);
    for i in 0..OUTPUT_GRID {
        let y = lo + h * i as f64;
        let mu = fired
            .iter()
            .map(|(w, mf)| w.min(mf.degree(y)))
            .fold(0.0, f64::max);
        let weight = if i == 0 || i == OUTPUT_GRID - 1 { 0.5 } else { 1.0 };
        area += weight * mu;
        moment += weight * mu * y;
    }
    if area <= 0.0 {
        return Err(ControlError::NoRuleFires(d));
    }
    Ok(moment / area)
}
