//! Toy Wiesner money: a bill is a product of BB84 states and the bank's
//! verifier for key `k` projects onto the bill that `k` describes.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::linalg::{DimCap, C64};
use crate::quantum::{DensityMatrix, Effect};
use crate::rng::from_seed;

#[derive(Clone, Debug, Serialize)]
pub struct WiesnerInstance {
    /// Qubits per bill.
    pub d: usize,
    /// Secret key in `0..4^d`.
    pub key: usize,
    #[serde(skip)]
    pub bill: Vec<C64>,
}

impl WiesnerInstance {
    pub fn keys(&self) -> usize {
        1 << (2 * self.d)
    }

    pub fn dim(&self) -> usize {
        1 << self.d
    }
}

/// Basis (0 computational, 1 Hadamard) and bit of qubit `r` under key `k`.
/// Qubit 0 is the most significant base-4 digit.
pub fn key_digit(k: usize, d: usize, r: usize) -> (usize, usize) {
    let digit = (k >> (2 * (d - 1 - r))) & 3;
    (digit >> 1, digit & 1)
}

/// The bill described by key `k`.
pub fn bill_state(k: usize, d: usize) -> Vec<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![C64::new(1.0, 0.0)];
    for r in 0..d {
        let (basis, bit) = key_digit(k, d, r);
        let q: [f64; 2] = match (basis, bit) {
            (0, 0) => [1.0, 0.0],
            (0, _) => [0.0, 1.0],
            (_, 0) => [h, h],
            _ => [h, -h],
        };
        v = v
            .iter()
            .flat_map(|a| q.iter().map(move |b| a * b))
            .collect();
    }
    v
}

/// Draws a uniform key from `seed` and returns the bill together with the
/// instance of all `4^d` verifiers against it.
pub fn make_wiesner_instance(d: usize, seed: u64, cap: DimCap) -> Result<(WiesnerInstance, Instance)> {
    if d == 0 || d >= 32 {
        return Err(Error::InvalidParameter(format!("qubit count {d} outside 1..32")));
    }
    cap.check_power(2, d)?;
    let keys = 1usize << (2 * d);
    let key = from_seed(seed).random_range(0..keys);
    let bill = bill_state(key, d);
    let rho = DensityMatrix::pure(&bill)?;
    let effects = (0..keys)
        .map(|k| Effect::projector(&bill_state(k, d)))
        .collect::<Result<Vec<_>>>()?;
    let instance = Instance::new(rho, effects)?
        .with_meta("scheme", "wiesner")
        .with_meta("qubits", d)
        .with_meta("key", key);
    Ok((WiesnerInstance { d, key, bill }, instance))
}
