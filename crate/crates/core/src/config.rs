//! Flat key=value run configuration.
//!
//! The format is deliberately minimal: one `key=value` per line, `#` comments,
//! strict rejection of unknown keys. Canonical serialization (fixed key
//! order) feeds a SHA-256 digest so that identical effective configs hash
//! identically regardless of input formatting.

use crate::error::{Error, Result};
use crate::solver::{PicardParams, SolverConfig};
use sha2::{Digest, Sha256};

/// Which batch study a `run` invocation executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Commuting-case analytic oracle and rate ladder.
    Oracle,
    /// Mollified-driver comparison across mollifier widths.
    Wz,
    /// Integral-representation residual ladder.
    Repr,
    /// Change-of-variable residuals for linear and quadratic observables.
    Ito,
    /// Weighted regularity profile near t = 0.
    Smoothing,
    /// Scheme-error convergence rates under grid refinement.
    Rates,
    /// Every verification suite in sequence.
    VerifyAll,
}

impl Study {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Study::Oracle),
            "wz" => Ok(Study::Wz),
            "repr" => Ok(Study::Repr),
            "ito" => Ok(Study::Ito),
            "smoothing" => Ok(Study::Smoothing),
            "rates" => Ok(Study::Rates),
            "verify_all" => Ok(Study::VerifyAll),
            other => Err(Error::Config(format!(
                "unknown study '{other}' (expected oracle|wz|repr|ito|smoothing|rates|verify_all)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Study::Oracle => "oracle",
            Study::Wz => "wz",
            Study::Repr => "repr",
            Study::Ito => "ito",
            Study::Smoothing => "smoothing",
            Study::Rates => "rates",
            Study::VerifyAll => "verify_all",
        }
    }
}

/// Multiplication operator family named in the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GKind {
    Diagonal,
    Collocation,
    Zero,
}

impl GKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(GKind::Diagonal),
            "collocation" => Ok(GKind::Collocation),
            "zero" => Ok(GKind::Zero),
            other => Err(Error::Config(format!(
                "unknown G.kind '{other}' (expected diagonal|collocation|zero)"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GKind::Diagonal => "diagonal",
            GKind::Collocation => "collocation",
            GKind::Zero => "zero",
        }
    }
}

/// Symbol of the operator: an amplitude and a named shape, written
/// `<amp>*<shape>`. Shapes: `sin`, `cos`, `const` (collocation, functions of
/// the spatial node), `inv_k` (diagonal, amp/k per mode).
#[derive(Debug, Clone, PartialEq)]
pub struct GSymbol {
    pub amp: f64,
    pub shape: String,
}

impl GSymbol {
    fn parse(s: &str) -> Result<Self> {
        let (amp_str, shape) = s.split_once('*').ok_or_else(|| {
            Error::Config(format!("G.symbol '{s}' must have the form <amp>*<shape>"))
        })?;
        let amp: f64 = amp_str
            .parse()
            .map_err(|_| Error::Config(format!("G.symbol amplitude '{amp_str}' is not a number")))?;
        if !amp.is_finite() {
            return Err(Error::Config("G.symbol amplitude must be finite".into()));
        }
        match shape {
            "sin" | "cos" | "const" | "inv_k" => Ok(GSymbol {
                amp,
                shape: shape.to_string(),
            }),
            other => Err(Error::Config(format!(
                "unknown G.symbol shape '{other}' (expected sin|cos|const|inv_k)"
            ))),
        }
    }

    fn canonical(&self) -> String {
        format!("{}*{}", self.amp, self.shape)
    }
}

/// Lift family named in the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftKindCfg {
    Geometric,
    Ito,
    /// Geometric lift shifted by the increment of h(t) = c t; `lift.h` is c.
    Shifted,
}

impl LiftKindCfg {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(LiftKindCfg::Geometric),
            "ito" => Ok(LiftKindCfg::Ito),
            "shifted" => Ok(LiftKindCfg::Shifted),
            other => Err(Error::Config(format!(
                "unknown lift.kind '{other}' (expected geometric|ito|shifted)"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            LiftKindCfg::Geometric => "geometric",
            LiftKindCfg::Ito => "ito",
            LiftKindCfg::Shifted => "shifted",
        }
    }
}

/// Parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hurst: f64,
    pub eta: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub steps: usize,
    pub modes: usize,
    pub seed: u64,
    pub g_kind: GKind,
    pub g_symbol: GSymbol,
    pub lift_kind: LiftKindCfg,
    pub lift_h: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub study: Study,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hurst: 0.4,
            eta: 0.38,
            alpha: 0.25,
            horizon: 1.0,
            steps: 1 << 12,
            modes: 16,
            seed: 42,
            g_kind: GKind::Collocation,
            g_symbol: GSymbol {
                amp: 0.4,
                shape: "sin".to_string(),
            },
            lift_kind: LiftKindCfg::Geometric,
            lift_h: 0.5,
            picard_tol: 1e-9,
            picard_max_iter: 60,
            study: Study::VerifyAll,
            out_dir: "out".to_string(),
        }
    }
}

impl RunConfig {
    /// Parses key=value text on top of the defaults. Unknown keys, malformed
    /// lines, and invariant violations are all hard errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: '{raw}' is not key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let mark = |e: Error| Error::Config(format!("line {}: {e}", lineno + 1));
            match key {
                "H" => cfg.hurst = parse_f64(key, value).map_err(mark)?,
                "eta" => cfg.eta = parse_f64(key, value).map_err(mark)?,
                "alpha" => cfg.alpha = parse_f64(key, value).map_err(mark)?,
                "T" => cfg.horizon = parse_f64(key, value).map_err(mark)?,
                "N" => cfg.steps = parse_usize(key, value).map_err(mark)?,
                "K" => cfg.modes = parse_usize(key, value).map_err(mark)?,
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| {
                        mark(Error::Config(format!("seed '{value}' is not an integer")))
                    })?
                }
                "G.kind" => cfg.g_kind = GKind::parse(value).map_err(mark)?,
                "G.symbol" => cfg.g_symbol = GSymbol::parse(value).map_err(mark)?,
                "lift.kind" => cfg.lift_kind = LiftKindCfg::parse(value).map_err(mark)?,
                "lift.h" => cfg.lift_h = parse_f64(key, value).map_err(mark)?,
                "picard.tol" => cfg.picard_tol = parse_f64(key, value).map_err(mark)?,
                "picard.max_iter" => cfg.picard_max_iter = parse_usize(key, value).map_err(mark)?,
                "study" => cfg.study = Study::parse(value).map_err(mark)?,
                "out_dir" => cfg.out_dir = value.to_string(),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::Config(format!("H={} outside (0,1)", self.hurst)));
        }
        // eta/alpha constraints are owned by the solver config
        self.solver_config()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("T={} must be positive", self.horizon)));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!("N={} must be at least 2", self.steps)));
        }
        if self.modes == 0 {
            return Err(Error::Config("K must be positive".into()));
        }
        if !(self.lift_h.is_finite()) {
            return Err(Error::Config(format!("lift.h={} must be finite", self.lift_h)));
        }
        match self.g_kind {
            GKind::Diagonal if self.g_symbol.shape != "inv_k" && self.g_symbol.shape != "const" => {
                return Err(Error::Config(format!(
                    "G.symbol shape '{}' is not a diagonal symbol (expected inv_k|const)",
                    self.g_symbol.shape
                )))
            }
            GKind::Collocation if self.g_symbol.shape == "inv_k" => {
                return Err(Error::Config(
                    "G.symbol shape 'inv_k' is diagonal-only".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// The Holder-exponent part of the config as the solver sees it.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig::new(self.eta, self.alpha)?.with_picard(PicardParams {
            tol: self.picard_tol,
            max_iter: self.picard_max_iter,
        }))
    }

    /// Canonical key=value lines in fixed key order.
    pub fn canonical(&self) -> Vec<String> {
        vec![
            format!("H={}", self.hurst),
            format!("eta={}", self.eta),
            format!("alpha={}", self.alpha),
            format!("T={}", self.horizon),
            format!("N={}", self.steps),
            format!("K={}", self.modes),
            format!("seed={}", self.seed),
            format!("G.kind={}", self.g_kind.name()),
            format!("G.symbol={}", self.g_symbol.canonical()),
            format!("lift.kind={}", self.lift_kind.name()),
            format!("lift.h={}", self.lift_h),
            format!("picard.tol={}", self.picard_tol),
            format!("picard.max_iter={}", self.picard_max_iter),
            format!("study={}", self.study.name()),
            format!("out_dir={}", self.out_dir),
        ]
    }

    /// SHA-256 of the canonical text, hex-encoded. The output directory is
    /// excluded: it locates artifacts but does not identify the experiment.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for line in self
            .canonical()
            .into_iter()
            .filter(|l| !l.starts_with("out_dir="))
        {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let x: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("{key}='{value}' is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}='{value}' is not finite")));
    }
    Ok(x)
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}='{value}' is not a positive integer")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_hash_deterministically() {
        let a = RunConfig::parse("").unwrap();
        let b = RunConfig::default();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn formatting_does_not_change_hash() {
        let a = RunConfig::parse("seed=7\nN=512\n").unwrap();
        let b = RunConfig::parse("# comment\n  N = 512 \n\nseed=7").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::parse("seed=8\nN=512\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_key_rejected_with_line_number() {
        let err = RunConfig::parse("N=512\nbogus=1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn exponent_invariants_enforced() {
        // alpha >= eta violates the admissible window
        assert!(RunConfig::parse("eta=0.38\nalpha=0.9\n").is_err());
        // alpha <= 1 - 2 eta violates the lower edge
        assert!(RunConfig::parse("eta=0.38\nalpha=0.2\n").is_err());
        assert!(RunConfig::parse("eta=0.38\nalpha=0.25\n").is_ok());
        assert!(RunConfig::parse("H=1.5\n").is_err());
        assert!(RunConfig::parse("eta=0.55\n").is_err());
    }

    #[test]
    fn symbol_and_kind_cross_checks() {
        assert!(RunConfig::parse("G.kind=diagonal\nG.symbol=0.4*inv_k\n").is_ok());
        assert!(RunConfig::parse("G.kind=diagonal\nG.symbol=0.4*sin\n").is_err());
        assert!(RunConfig::parse("G.kind=collocation\nG.symbol=0.4*inv_k\n").is_err());
        assert!(RunConfig::parse("G.symbol=0.4sin\n").is_err());
        assert!(RunConfig::parse("G.symbol=x*sin\n").is_err());
        assert!(RunConfig::parse("lift.kind=banana\n").is_err());
        assert!(RunConfig::parse("study=banana\n").is_err());
        assert!(RunConfig::parse("study=smoothing\n").is_ok());
    }

    #[test]
    fn malformed_line_rejected() {
        let err = RunConfig::parse("N 512").unwrap_err();
        assert!(err.to_string().contains("key=value"));
    }
}
