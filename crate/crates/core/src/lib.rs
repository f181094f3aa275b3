//! Distance and fidelity measures between quantum processes.
//!
//! Channels are held in Kraus, Choi or chi form ([`channels`]), compared
//! through their Choi states ([`process_metrics::j_distance`],
//! [`process_metrics::j_fidelity`]), by Haar averages, by worst-case inputs,
//! and by the ancilla-stabilized worst case, which is found by a
//! conditional-gradient search over input density matrices
//! ([`optimize`]). [`estimation`] builds the direct measurement scheme for
//! the process fidelity against a unitary target, and [`bounds`] relates the
//! measures to error probabilities of function and sampling computations.

pub mod bounds;
pub mod channels;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod process_metrics;
pub mod rng;
pub mod state_metrics;

pub use channels::{Channel, ChiMatrix, ChoiState, KrausChannel, OperatorBasis};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, DensityMatrix, PureState, UnitaryOperator};
pub use num_complex::Complex64;
pub use optimize::{OptimizerConfig, OptimizerResult};
pub use process_metrics::{MeasureReport, Metric};
pub use state_metrics::ClassicalDistribution;
