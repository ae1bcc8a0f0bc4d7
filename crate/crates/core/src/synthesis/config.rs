use std::fmt;
use std::str::FromStr;

use super::SynthesisError;
use crate::representations::RenderKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorKind {
    Enumerative,
    /// `cmd:<shell command>` or an `http(s)://` URL.
    External(String),
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::Enumerative => f.write_str("enumerative"),
            GeneratorKind::External(e) => write!(f, "external:{e}"),
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = SynthesisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "enumerative" => Ok(GeneratorKind::Enumerative),
            Some(("external", endpoint)) if !endpoint.is_empty() => Ok(GeneratorKind::External(endpoint.to_string())),
            _ => Err(SynthesisError::Config(format!("unknown generator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    /// Minimum mean per-example reward for acceptance.
    pub threshold: f64,
    pub max_iter: usize,
    pub candidates_per_iter: usize,
    pub library_cap: usize,
    /// Iterations without library growth before the run counts as converged.
    pub convergence_patience: usize,
    pub generator: GeneratorKind,
    pub seed: u64,
    /// Largest program size the enumerative generator reaches.
    pub enumeration_budget: usize,
    pub renderer: RenderKind,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            threshold: 0.3,
            max_iter: 20,
            candidates_per_iter: 8,
            library_cap: 8,
            convergence_patience: 3,
            generator: GeneratorKind::Enumerative,
            seed: 0,
            enumeration_budget: 6,
            renderer: RenderKind::Hierarchical,
        }
    }
}

impl SynthesisConfig {
    /// `key = value` lines; `#` starts a comment. Unset keys keep defaults.
    pub fn parse(text: &str) -> Result<Self, SynthesisError> {
        let mut c = SynthesisConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |d: &str| SynthesisError::Config(format!("line {}: {d}", i + 1));
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            let int = || v.parse::<usize>().map_err(|_| err(&format!("`{k}` expects a non-negative integer")));
            match k {
                "threshold" => {
                    c.threshold = v.parse().map_err(|_| err("`threshold` expects a number"))?;
                }
                "max_iter" => c.max_iter = int()?,
                "candidates_per_iter" => c.candidates_per_iter = int()?,
                "library_cap" => c.library_cap = int()?,
                "convergence_patience" => c.convergence_patience = int()?,
                "enumeration_budget" => c.enumeration_budget = int()?,
                "seed" => c.seed = v.parse().map_err(|_| err("`seed` expects an integer"))?,
                "generator" => c.generator = v.parse()?,
                "renderer" => c.renderer = v.parse().map_err(|e| err(&format!("{e}")))?,
                other => return Err(err(&format!("unknown key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |d: &str| Err(SynthesisError::Config(d.to_string()));
        if !self.threshold.is_finite() {
            return bad("threshold must be finite");
        }
        if self.candidates_per_iter == 0 {
            return bad("candidates_per_iter must be at least 1");
        }
        if self.library_cap == 0 {
            return bad("library_cap must be at least 1");
        }
        if self.convergence_patience == 0 {
            return bad("convergence_patience must be at least 1");
        }
        if self.enumeration_budget == 0 {
            return bad("enumeration_budget must be at least 1");
        }
        if !self.renderer.is_view_kind() {
            return bad("renderer must be hierarchical, dfs or random");
        }
        Ok(())
    }

    /// The effective configuration as `key = value` lines (run metadata).
    pub fn to_text(&self) -> String {
        format!(
            "threshold = {}\nmax_iter = {}\ncandidates_per_iter = {}\nlibrary_cap = {}\n\
             convergence_patience = {}\ngenerator = {}\nseed = {}\nenumeration_budget = {}\nrenderer = {}\n",
            self.threshold,
            self.max_iter,
            self.candidates_per_iter,
            self.library_cap,
            self.convergence_patience,
            self.generator,
            self.seed,
            self.enumeration_budget,
            self.renderer
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let c = SynthesisConfig::parse("threshold = 0.25\nmax_iter=3 # short\n\ngenerator = external:cmd:./gen.sh\n").unwrap();
        assert_eq!(c.threshold, 0.25);
        assert_eq!(c.max_iter, 3);
        assert_eq!(c.generator, GeneratorKind::External("cmd:./gen.sh".into()));
        assert_eq!(SynthesisConfig::parse(&c.to_text()).unwrap(), c);
        assert!(SynthesisConfig::parse("bogus = 1").is_err());
        assert!(SynthesisConfig::parse("candidates_per_iter = 0").is_err());
        assert!(SynthesisConfig::parse("threshold = inf").is_err());
    }
}
