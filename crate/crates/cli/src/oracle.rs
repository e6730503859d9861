//! Builds in-process suspected-model oracles for the probe and trace
//! commands.

use tracemark_core::harness::SimulatedModel;
use tracemark_core::tokens::ActivationTokenSet;
use tracemark_core::watermark::{DwtKey, WatermarkScheme};
use tracemark_core::{Ledger, Seed};

use crate::error::{CliError, CliResult};

/// Which suspected model the command should stand up.
#[derive(Clone, Debug)]
pub enum OracleSpec {
    /// A model never exposed to watermarked data.
    Clean,
    /// A model fine-tuned on the identified user's release, with the given
    /// trigger fidelity and false rate. Dropped tokens never trigger, which
    /// forces partial-trigger forensics cases.
    User {
        user_id: u64,
        trigger_fidelity: f64,
        false_rate: f64,
        drop_tokens: Vec<String>,
    },
}

pub fn build_oracle(
    spec: &OracleSpec,
    ledger: &Ledger,
    base_seed: Seed,
    render_size: usize,
) -> CliResult<SimulatedModel> {
    let model = match spec {
        OracleSpec::Clean => {
            // Never marks anything; trigger set and scheme are inert.
            let placeholder = ActivationTokenSet::single("unused", tracemark_core::TokenKind::NewToken)?;
            SimulatedModel::new(
                placeholder,
                WatermarkScheme::Dwt(DwtKey::new(base_seed, 0.0, 0.0)),
                base_seed.derive("clean-oracle"),
                0.0,
                0.0,
            )?
        }
        OracleSpec::User {
            user_id,
            trigger_fidelity,
            false_rate,
            drop_tokens,
        } => {
            let entry = ledger.get(*user_id).ok_or_else(|| {
                CliError::Input(format!("ledger holds no user {user_id}"))
            })?;
            let kept: Vec<String> = entry
                .token_set
                .tokens()
                .iter()
                .filter(|t| !drop_tokens.contains(t))
                .cloned()
                .collect();
            if kept.is_empty() {
                return Err(CliError::Input(
                    "dropping those tokens leaves the oracle without triggers".into(),
                ));
            }
            let trigger_set = ActivationTokenSet::new(kept, entry.token_set.kind)?;
            SimulatedModel::new(
                trigger_set,
                entry.scheme.clone(),
                base_seed.derive("user-oracle").derive_index(*user_id),
                *trigger_fidelity,
                *false_rate,
            )?
        }
    };
    Ok(model.with_render_size(render_size, render_size))
}
