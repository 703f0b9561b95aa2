//! Joint precoder and reflect-coefficient design for active-RIS-aided
//! multiuser MISO downlink.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: seeded Rician/path-loss channel realizations and the
//!   effective (direct + reflected) channel.
//! - [`objective`]: SINR, sum rate, the weighted-MSE surrogate and the
//!   constraint residuals every other module is checked against.
//! - [`projections`]: exact projections onto the BS power ball, the
//!   per-antenna box, the BS-side ellipsoid and the RIS box/ellipsoid
//!   intersection, each with a KKT certificate.
//! - [`solver`]: the block successive upper-bound minimization loop with
//!   proximal-distance updates and a homotopy penalty schedule.
//! - [`harness`]: experiment configuration, seeded multi-trial sweeps and
//!   CSV/JSON emission used by the `ris-bsum` binary.
//!
//! ```
//! use ris_bsum::{bsum_solve, dbm_to_watts, generate_channels, FadingConfig, Geometry, NoisePowers, PowerBudget, SolverConfig};
//!
//! # fn main() -> ris_bsum::Result<()> {
//! let geometry = Geometry { num_users: 4, ..Default::default() };
//! let fading = FadingConfig { seed: 1, ..Default::default() };
//! let ch = generate_channels(&geometry, &fading, (16, 8), NoisePowers::default())?;
//!
//! let total = dbm_to_watts(30.0);
//! let budget = PowerBudget::uniform(0.99 * total, 0.01 * total, 8.0, 8, false)?;
//! let sol = bsum_solve(&ch, &budget, &SolverConfig::default(), None)?;
//! assert!(sol.residuals.is_feasible(1e-8));
//! println!("{:.3} bits/s/Hz after {} iterations", sol.sum_rate, sol.iterations);
//! # Ok(())
//! # }
//! ```

pub mod channel;
pub mod error;
pub mod harness;
pub mod objective;
pub mod projections;
pub mod solver;

pub use channel::{effective_channel, generate_channels, ChannelSet, FadingConfig, Geometry, NoisePowers};
pub use error::{Error, Result};
pub use objective::{
    constraint_residuals, sinr, sum_rate, surrogate_g, AuxiliaryVars, PowerBudget, Precoder,
    ReflectCoeffs, Residuals,
};
pub use solver::{bsum_solve, BsumSolver, Solution, SolverConfig, StopRule, TraceRecord};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_dbm_is_one_watt() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-24);
    }

    proptest::proptest! {
        #[test]
        fn dbm_round_trip(dbm in -150.0f64..80.0) {
            let back = watts_to_dbm(dbm_to_watts(dbm));
            proptest::prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        }
    }
}
