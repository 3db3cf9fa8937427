//! Exact parameter accounting by named component.

use crate::backbone::Backbone;
use crate::numerics::tensor::ParamStore;
use crate::numerics::Real;

use super::branch::AdaptorBranch;
use super::variant::AdaptorVariant;

/// Integer parameter counts grouped by component name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCensus {
    /// (component, count), in registration order.
    pub components: Vec<(String, usize)>,
    pub total: usize,
}

impl ParamCensus {
    pub fn component(&self, name: &str) -> usize {
        self.components.iter().filter(|(n, _)| n == name).map(|(_, c)| c).sum()
    }
}

/// Groups a store's parameters by the first dotted name segment.
pub fn count_params<R: Real>(store: &ParamStore<R>) -> ParamCensus {
    let mut components: Vec<(String, usize)> = Vec::new();
    let mut total = 0usize;
    for (name, tensor) in store.iter() {
        let component = name.split('.').next().unwrap_or(name).to_string();
        let n = tensor.numel();
        total += n;
        match components.iter_mut().find(|(c, _)| *c == component) {
            Some((_, count)) => *count += n,
            None => components.push((component, n)),
        }
    }
    ParamCensus { components, total }
}

impl<R: Real> AdaptorBranch<R> {
    pub fn census(&self) -> ParamCensus {
        count_params(&self.params)
    }

    pub fn total_params(&self) -> usize {
        self.params.total_params()
    }
}

/// Census of a variant built against a backbone, plus the size ratio to the
/// clone-branch baseline on the same backbone.
pub fn variant_census<R: Real>(
    backbone: &Backbone<R>,
    variant: AdaptorVariant,
    cond_channels: usize,
) -> crate::error::Result<(ParamCensus, f64)> {
    let branch = AdaptorBranch::<R>::new(backbone, variant, cond_channels, 0)?;
    let census = branch.census();
    let clone = AdaptorBranch::<R>::new(backbone, AdaptorVariant::controlnet(), cond_channels, 0)?;
    let ratio = census.total as f64 / clone.total_params() as f64;
    Ok((census, ratio))
}
