//! Spend cap with reservations, shared by concurrent workers.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_usd: f64,
    #[serde(default = "BudgetConfig::default_input_price")]
    pub price_per_million_input_tokens: f64,
    #[serde(default = "BudgetConfig::default_output_price")]
    pub price_per_million_output_tokens: f64,
}

impl BudgetConfig {
    fn default_input_price() -> f64 {
        3.0
    }
    fn default_output_price() -> f64 {
        15.0
    }

    pub fn new(max_usd: f64) -> Self {
        Self {
            max_usd,
            price_per_million_input_tokens: Self::default_input_price(),
            price_per_million_output_tokens: Self::default_output_price(),
        }
    }

    pub fn cost(&self, input_tokens: u64, output_tokens: u64) -> f64 {
        input_tokens as f64 * self.price_per_million_input_tokens / 1e6
            + output_tokens as f64 * self.price_per_million_output_tokens / 1e6
    }

    /// Upper bound for a request: every prompt byte counted as a token plus
    /// per-message overhead, and the full output allowance.
    pub fn worst_case_cost(&self, prompt_bytes: usize, messages: usize, max_output_tokens: u32) -> f64 {
        let input = prompt_bytes as u64 + 16 * messages as u64 + 32;
        self.cost(input, max_output_tokens as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("budget exhausted: spent ${spent:.4} of ${max:.4}, next request needs up to ${needed:.4}")]
pub struct BudgetExhausted {
    pub spent: f64,
    pub max: f64,
    pub needed: f64,
}

#[derive(Debug, Default)]
struct State {
    spent: f64,
    reserved: f64,
}

#[derive(Debug)]
pub struct Budget {
    config: BudgetConfig,
    state: Mutex<State>,
}

/// Holds back `amount` until settled.
#[derive(Debug)]
#[must_use]
pub struct Reservation {
    amount: f64,
}

impl Budget {
    pub fn new(config: BudgetConfig) -> Self {
        Self {
            config,
            state: Mutex::new(State::default()),
        }
    }

    pub fn config(&self) -> &BudgetConfig {
        &self.config
    }

    pub fn spent(&self) -> f64 {
        self.state.lock().unwrap().spent
    }

    pub fn max(&self) -> f64 {
        self.config.max_usd
    }

    /// Succeeds only if spent + outstanding reservations + `estimate` stays
    /// within the cap.
    pub fn reserve(&self, estimate: f64) -> Result<Reservation, BudgetExhausted> {
        let mut s = self.state.lock().unwrap();
        let committed = s.spent + s.reserved;
        if committed >= self.config.max_usd || committed + estimate > self.config.max_usd {
            return Err(BudgetExhausted {
                spent: s.spent,
                max: self.config.max_usd,
                needed: estimate,
            });
        }
        s.reserved += estimate;
        Ok(Reservation { amount: estimate })
    }

    /// Releases the reservation and records the provider-reported cost.
    pub fn settle(&self, reservation: Reservation, actual: f64) {
        let mut s = self.state.lock().unwrap();
        s.reserved = (s.reserved - reservation.amount).max(0.0);
        if actual > reservation.amount {
            tracing::warn!(actual, reserved = reservation.amount, "request cost exceeded its reservation");
        }
        s.spent += actual.max(0.0);
    }

    /// Releases a reservation for a request that was never answered.
    pub fn release(&self, reservation: Reservation) {
        let mut s = self.state.lock().unwrap();
        s.reserved = (s.reserved - reservation.amount).max(0.0);
    }
}
