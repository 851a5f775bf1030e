//! Simulator for a DPLL SAT solver whose unit propagation runs on an
//! FPGA-style accelerator of parallel clause processors.
//!
//! The crate contains the CNF model, a greedy clause partitioner, a
//! cycle-counting engine model with its register interface, the DPLL driver
//! with software and simulated-hardware propagation backends, a performance
//! model, a benchmark harness and an exhaustive oracle.

pub mod bench;
pub mod cnf;
pub mod engine;
pub mod hwif;
pub mod oracle;
pub mod partition;
pub mod perf;
pub mod solver;

pub use cnf::{parse_dimacs, serialize_dimacs, Clause, Formula, Literal, TruthValue, Verdict};
pub use partition::{greedy_partition, PartitionLimits, PartitionPlan};
pub use perf::{CostModel, PerfCounters};
pub use solver::{calibrate_software_cost, solve, BackendKind, Outcome, SolveReport, SolverConfig};
