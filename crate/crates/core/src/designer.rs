//! Interchangeable strategies for choosing a RIS configuration, registered
//! by name so experiments and the CLI can pick one at runtime.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelSet, PhaseVector};
use crate::objective::{ObjectiveConfig, SecureIsacObjective};
use crate::optimizer::{self, DirectionRule, OptimizerConfig, OptimizerTrace};
use crate::{Error, Result};

/// Inputs available to a designer for one scene.
#[derive(Debug, Clone, Copy)]
pub struct DesignContext<'a> {
    pub channels: &'a ChannelSet,
    pub objective: &'a ObjectiveConfig,
    pub optimizer: &'a OptimizerConfig,
    /// Seed for any randomness (initialization, random draws).
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub phase: PhaseVector,
    /// Present for iterative designers.
    pub trace: Option<OptimizerTrace>,
}

pub trait PhaseDesigner: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn design(&self, ctx: &DesignContext<'_>) -> Result<Design>;
}

/// Manifold conjugate-gradient ascent on the joint objective.
#[derive(Debug, Clone, Copy)]
pub struct ManifoldAscent {
    pub rule: DirectionRule,
}

impl PhaseDesigner for ManifoldAscent {
    fn name(&self) -> &'static str {
        match self.rule {
            DirectionRule::PolakRibiere => "manifold-cg",
            DirectionRule::SteepestAscent => "steepest-ascent",
        }
    }

    fn description(&self) -> &'static str {
        match self.rule {
            DirectionRule::PolakRibiere => "Riemannian conjugate-gradient ascent with Armijo steps and restarts",
            DirectionRule::SteepestAscent => "Riemannian steepest ascent with Armijo steps",
        }
    }

    fn design(&self, ctx: &DesignContext<'_>) -> Result<Design> {
        let objective = SecureIsacObjective::new(ctx.channels, ctx.objective.clone())?;
        let cfg = OptimizerConfig { seed: ctx.seed, rule: self.rule, ..ctx.optimizer.clone() };
        let (phase, trace) = optimizer::optimize(&objective, ctx.channels.elements(), &cfg)?;
        Ok(Design { phase, trace: Some(trace) })
    }
}

/// Uniform random phases; the non-optimized baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPhases;

impl PhaseDesigner for RandomPhases {
    fn name(&self) -> &'static str {
        "random"
    }

    fn description(&self) -> &'static str {
        "i.i.d. uniform phases"
    }

    fn design(&self, ctx: &DesignContext<'_>) -> Result<Design> {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        Ok(Design { phase: PhaseVector::random(ctx.channels.elements(), &mut rng), trace: None })
    }
}

/// All-ones configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPhases;

impl PhaseDesigner for IdentityPhases {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn description(&self) -> &'static str {
        "all phase shifts zero"
    }

    fn design(&self, ctx: &DesignContext<'_>) -> Result<Design> {
        Ok(Design { phase: PhaseVector::identity(ctx.channels.elements()), trace: None })
    }
}

#[derive(Default)]
pub struct DesignerRegistry {
    entries: BTreeMap<&'static str, Box<dyn PhaseDesigner>>,
}

impl fmt::Debug for DesignerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl DesignerRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(ManifoldAscent { rule: DirectionRule::PolakRibiere }));
        reg.register(Box::new(ManifoldAscent { rule: DirectionRule::SteepestAscent }));
        reg.register(Box::new(RandomPhases));
        reg.register(Box::new(IdentityPhases));
        reg
    }

    /// Adds a designer, replacing any existing one with the same name.
    pub fn register(&mut self, designer: Box<dyn PhaseDesigner>) -> Option<Box<dyn PhaseDesigner>> {
        self.entries.insert(designer.name(), designer)
    }

    pub fn get(&self, name: &str) -> Result<&dyn PhaseDesigner> {
        self.entries.get(name).map(|d| d.as_ref()).ok_or_else(|| Error::UnknownDesigner(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn PhaseDesigner> {
        self.entries.values().map(|d| d.as_ref())
    }
}
