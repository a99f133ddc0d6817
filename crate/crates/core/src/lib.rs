// SPDX-License-Identifier: Apache-2.0
//! Levered Cobb-Douglas production networks with rigid, signal-measurable
//! decisions: cost of debt, equilibrium quantities and prices, default
//! prediction and Monte Carlo default campaigns.

pub mod debt;
pub mod defaults;
pub mod document;
pub mod economy;
pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod expsum;
pub mod montecarlo;
pub mod quad;
pub mod scenarios;
pub mod shocks;

pub use debt::{DebtProfile, ZetaSolution};
pub use document::{Document, Setup};
pub use economy::{Economy, Leontief};
pub use engine::{Backend, ConditionalLaw, Estimate, ExpectationEngine, SectorLaw};
pub use equilibrium::{Equilibrium, Realization, Solution};
pub use error::{Error, Result};
pub use shocks::{
    BoxCell, Interval, NormalizedShocks, Observation, ShockModel, SignalModel, SupportPoint,
};
