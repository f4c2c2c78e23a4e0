//! Chain architectures compared by the tool, selectable by name.

use std::sync::Arc;

use crate::cost::{cost_stn, cost_tn, CostModel};
use crate::error::Result;
use crate::params::ProtocolParams;
use crate::rates::{closed_form_stn, closed_form_tn, KeyRateResult};
use crate::registry::{Named, Registry};

pub trait ChainArchitecture: Named + Send + Sync {
    /// Finite key length for one establishment at the expected chain noise.
    fn key_length(&self, params: &ProtocolParams, ec_efficiency: f64) -> Result<KeyRateResult>;

    /// Cost per secret key bit under `model`.
    fn cost_per_bit(&self, params: &ProtocolParams, model: &CostModel) -> Result<f64>;
}

/// Simplified trusted nodes: parity broadcasts only, end points run EC/PA.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplifiedTrustedNodes;

impl Named for SimplifiedTrustedNodes {
    fn name(&self) -> &str {
        "stn"
    }
}

impl ChainArchitecture for SimplifiedTrustedNodes {
    fn key_length(&self, params: &ProtocolParams, ec_efficiency: f64) -> Result<KeyRateResult> {
        closed_form_stn(params, ec_efficiency)
    }

    fn cost_per_bit(&self, params: &ProtocolParams, model: &CostModel) -> Result<f64> {
        cost_stn(params, model)
    }
}

/// Regular trusted nodes: full QKD on every link.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrustedNodes;

impl Named for TrustedNodes {
    fn name(&self) -> &str {
        "tn"
    }
}

impl ChainArchitecture for TrustedNodes {
    fn key_length(&self, params: &ProtocolParams, ec_efficiency: f64) -> Result<KeyRateResult> {
        closed_form_tn(params, ec_efficiency)
    }

    fn cost_per_bit(&self, params: &ProtocolParams, model: &CostModel) -> Result<f64> {
        cost_tn(params, model)
    }
}

pub fn architecture_registry() -> Registry<dyn ChainArchitecture> {
    let mut reg: Registry<dyn ChainArchitecture> = Registry::new("architecture");
    reg.register(Arc::new(SimplifiedTrustedNodes))
        .register(Arc::new(TrustedNodes));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_dispatches_to_closed_forms() {
        let reg = architecture_registry();
        let params = ProtocolParams::default();
        let stn = reg.get("stn").unwrap().key_length(&params, 1.0).unwrap();
        let tn = reg.get("tn").unwrap().key_length(&params, 1.0).unwrap();
        assert_eq!(stn, closed_form_stn(&params, 1.0).unwrap());
        assert_eq!(tn, closed_form_tn(&params, 1.0).unwrap());
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["stn", "tn"]);
    }
}
