//! Cycle accounting and the metrics derived from it.
//!
//! Hardware time is counted in accelerator clock cycles, split into three
//! buckets: engine (broadcast/evaluate/select/clear), swap (partition loads)
//! and interface (register traffic and polling). Host software time is
//! modeled from operation counts so that runs are reproducible bit for bit;
//! measured wall time is kept alongside but never enters a metric.
//!
//! One BCP event is one literal broadcast evaluated against every resident
//! clause. On the software path it is one propagated literal checked against
//! every clause of the formula.

use std::fmt;
use std::time::Duration;

/// Printed at the top of every report so the numbers are self-describing.
pub const BCP_EVENT_DEFINITION: &str =
    "one BCP event = one literal broadcast evaluated against all resident clauses";

#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    pub clock_hz: f64,
    pub cycles_broadcast: u64,
    pub cycles_evaluate: u64,
    pub cycles_select: u64,
    /// Full cost of one LOAD_CLAUSE word, bus transfer included.
    pub cycles_load_per_literal: u64,
    pub axi_write_cycles: u64,
    pub axi_read_cycles: u64,
    pub poll_interval_cycles: u64,
    pub software_ns_per_clause_visit: f64,
    /// Host-side bookkeeping per decision, backtrack or trail assignment.
    pub software_ns_per_host_op: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            clock_hz: 106_660_000.0,
            cycles_broadcast: 1,
            cycles_evaluate: 1,
            cycles_select: 1,
            cycles_load_per_literal: 1,
            axi_write_cycles: 8,
            axi_read_cycles: 8,
            poll_interval_cycles: 4,
            software_ns_per_clause_visit: DEFAULT_NS_PER_CLAUSE_VISIT,
            software_ns_per_host_op: DEFAULT_NS_PER_HOST_OP,
        }
    }
}

/// Median of 11 runs of [`crate::solver::calibrate_software_cost`] on the
/// development machine (one Xeon core), rounded. Pass `--calibrate` to the
/// CLI to measure the local machine instead.
pub const DEFAULT_NS_PER_CLAUSE_VISIT: f64 = 7.0;
/// Median of 11 runs of [`crate::solver::calibrate_host_op_cost`], rounded.
pub const DEFAULT_NS_PER_HOST_OP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostModelError {
    #[error("`{0}` must be strictly positive")]
    NotPositive(&'static str),
    #[error("`{0}` must be finite and non-negative")]
    Negative(&'static str),
    #[error("unknown cost parameter `{0}`")]
    UnknownParameter(String),
    #[error("cannot parse `{value}` for `{name}`")]
    BadValue { name: String, value: String },
}

impl CostModel {
    /// Engine stage costs, the clock and the poll interval must be positive.
    /// Bus, load and software costs may be zero, which models an ideal link.
    pub fn validate(&self) -> Result<(), CostModelError> {
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(CostModelError::NotPositive("clock_hz"));
        }
        for (name, v) in [
            ("cycles_broadcast", self.cycles_broadcast),
            ("cycles_evaluate", self.cycles_evaluate),
            ("cycles_select", self.cycles_select),
            ("poll_interval_cycles", self.poll_interval_cycles),
        ] {
            if v == 0 {
                return Err(CostModelError::NotPositive(name));
            }
        }
        for (name, v) in [
            ("software_ns_per_clause_visit", self.software_ns_per_clause_visit),
            ("software_ns_per_host_op", self.software_ns_per_host_op),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CostModelError::Negative(name));
            }
        }
        Ok(())
    }

    pub const PARAMETERS: [&'static str; 10] = [
        "clock_hz",
        "cycles_broadcast",
        "cycles_evaluate",
        "cycles_select",
        "cycles_load_per_literal",
        "axi_write_cycles",
        "axi_read_cycles",
        "poll_interval_cycles",
        "software_ns_per_clause_visit",
        "software_ns_per_host_op",
    ];

    /// Sets a parameter by name, as used by `--cost.<name>=<value>`.
    pub fn set(&mut self, name: &str, value: &str) -> Result<(), CostModelError> {
        let bad = || CostModelError::BadValue {
            name: name.to_string(),
            value: value.to_string(),
        };
        let int = |v: &str| v.parse::<u64>().map_err(|_| bad());
        let float = |v: &str| v.parse::<f64>().map_err(|_| bad());
        match name {
            "clock_hz" => self.clock_hz = float(value)?,
            "cycles_broadcast" => self.cycles_broadcast = int(value)?,
            "cycles_evaluate" => self.cycles_evaluate = int(value)?,
            "cycles_select" => self.cycles_select = int(value)?,
            "cycles_load_per_literal" => self.cycles_load_per_literal = int(value)?,
            "axi_write_cycles" => self.axi_write_cycles = int(value)?,
            "axi_read_cycles" => self.axi_read_cycles = int(value)?,
            "poll_interval_cycles" => self.poll_interval_cycles = int(value)?,
            "software_ns_per_clause_visit" => self.software_ns_per_clause_visit = float(value)?,
            "software_ns_per_host_op" => self.software_ns_per_host_op = float(value)?,
            other => return Err(CostModelError::UnknownParameter(other.to_string())),
        }
        Ok(())
    }

    /// Number of status polls a host needs for an operation that keeps the
    /// engine busy for `busy_cycles`: one poll every `poll_interval_cycles`,
    /// and at least one.
    pub fn polls_for(&self, busy_cycles: u64) -> u64 {
        busy_cycles.div_ceil(self.poll_interval_cycles).max(1)
    }

    pub fn cycles_to_ns(&self, cycles: u64) -> f64 {
        cycles as f64 * 1e9 / self.clock_hz
    }
}

/// Event and cycle tallies for one solve.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PerfCounters {
    pub bcp_events: u64,
    pub engine_cycles: u64,
    pub swap_cycles: u64,
    pub interface_cycles: u64,
    /// Clauses evaluated by host software (software backend only).
    pub clause_visits: u64,
    pub host_ops: u64,
    pub decisions: u64,
    /// Order-sensitive digest of every decision literal.
    pub decision_digest: u64,
    pub wall_time: Duration,
}

impl PerfCounters {
    pub fn hardware_cycles(&self) -> u64 {
        self.engine_cycles + self.swap_cycles + self.interface_cycles
    }

    pub fn software_time_ns(&self, cm: &CostModel) -> f64 {
        self.clause_visits as f64 * cm.software_ns_per_clause_visit
            + self.host_ops as f64 * cm.software_ns_per_host_op
    }

    pub fn total_time_ns(&self, cm: &CostModel) -> f64 {
        cm.cycles_to_ns(self.hardware_cycles()) + self.software_time_ns(cm)
    }

    pub(crate) fn record_decision(&mut self, lit: crate::cnf::Literal) {
        const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
        if self.decisions == 0 {
            self.decision_digest = 0xcbf2_9ce4_8422_2325;
        }
        self.decisions += 1;
        for b in lit.to_dimacs().to_le_bytes() {
            self.decision_digest = (self.decision_digest ^ b as u64).wrapping_mul(FNV_PRIME);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("no engine cycles recorded")]
    NoEngineCycles,
    #[error("total time is zero")]
    NoTime,
    #[error("runs made different decisions ({hw} vs {sw}); speedup is not comparable")]
    MismatchedTraces { hw: u64, sw: u64 },
}

/// BCP events per second of engine-resident time only, ignoring swap,
/// interface and host time: the peak figure when data is always available.
pub fn engine_throughput(pc: &PerfCounters, cm: &CostModel) -> Result<f64, MetricError> {
    if pc.engine_cycles == 0 {
        return Err(MetricError::NoEngineCycles);
    }
    Ok(pc.bcp_events as f64 * cm.clock_hz / pc.engine_cycles as f64)
}

/// BCP events per second of total execution time.
pub fn effective_throughput(pc: &PerfCounters, cm: &CostModel) -> Result<f64, MetricError> {
    let total = pc.total_time_ns(cm);
    if total <= 0.0 {
        return Err(MetricError::NoTime);
    }
    Ok(pc.bcp_events as f64 * 1e9 / total)
}

/// Software time over hardware time for two runs of the same search.
pub fn speedup(hw: &PerfCounters, sw: &PerfCounters, cm: &CostModel) -> Result<f64, MetricError> {
    if hw.decisions != sw.decisions || hw.decision_digest != sw.decision_digest {
        return Err(MetricError::MismatchedTraces {
            hw: hw.decisions,
            sw: sw.decisions,
        });
    }
    let hw_t = hw.total_time_ns(cm);
    if hw_t <= 0.0 {
        return Err(MetricError::NoTime);
    }
    Ok(sw.total_time_ns(cm) / hw_t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBreakdown {
    pub engine: f64,
    pub swap: f64,
    pub interface: f64,
    pub software: f64,
}

impl TimeBreakdown {
    pub fn sum(&self) -> f64 {
        self.engine + self.swap + self.interface + self.software
    }
}

pub fn time_breakdown(pc: &PerfCounters, cm: &CostModel) -> Result<TimeBreakdown, MetricError> {
    let total = pc.total_time_ns(cm);
    if total <= 0.0 {
        return Err(MetricError::NoTime);
    }
    Ok(TimeBreakdown {
        engine: cm.cycles_to_ns(pc.engine_cycles) / total,
        swap: cm.cycles_to_ns(pc.swap_cycles) / total,
        interface: cm.cycles_to_ns(pc.interface_cycles) / total,
        software: pc.software_time_ns(cm) / total,
    })
}

/// Renders a rate with a K/M/G suffix and at most two decimals.
pub fn format_rate(per_second: f64) -> String {
    let (scaled, suffix) = if per_second >= 1e9 {
        (per_second / 1e9, "G")
    } else if per_second >= 1e6 {
        (per_second / 1e6, "M")
    } else if per_second >= 1e3 {
        (per_second / 1e3, "K")
    } else {
        (per_second, "")
    };
    format!("{}{}", trim_decimals(scaled), suffix)
}

pub fn format_speedup(ratio: f64) -> String {
    format!("{}x", trim_decimals(ratio))
}

fn trim_decimals(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Published peak engine throughput (millions of BCP/s) for two benchmark
/// instances: two prior accelerators and the partitioned design.
pub const PUBLISHED_ENGINE_THROUGHPUT: [(&str, f64, f64, f64); 2] = [
    ("bmc-galileo-8", 40.0, 102.0, 175.0),
    ("bmc-ibm-12", 33.0, 150.0, 169.0),
];

/// Published hardware/software matrix: (variables, clauses, BCP/s, speedup).
/// Cells missing from the matrix were not reported.
pub const PUBLISHED_SPEEDUP_MATRIX: [(u32, usize, f64, f64); 13] = [
    (63, 224, 362e6, 2.2),
    (126, 224, 17e3, 0.17),
    (63, 448, 702e3, 1.6),
    (126, 448, 21e3, 0.21),
    (252, 448, 13e3, 0.08),
    (63, 2240, 441e3, 1.91),
    (126, 2240, 22e3, 1.26),
    (252, 2240, 16e3, 0.61),
    (630, 2240, 12e3, 0.10),
    (63, 22400, 313e3, 6.32),
    (126, 22400, 20e3, 5.04),
    (252, 22400, 16e3, 4.86),
    (630, 22400, 14e3, 3.31),
];

/// One row of the engine-throughput comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputRow {
    pub instance: String,
    pub prior_a_mbcps: f64,
    pub prior_b_mbcps: f64,
    pub ours_mbcps: f64,
}

impl fmt::Display for ThroughputRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<16} | {:>8} | {:>8} | {:>8}",
            self.instance,
            format_rate(self.prior_a_mbcps * 1e6),
            format_rate(self.prior_b_mbcps * 1e6),
            format_rate(self.ours_mbcps * 1e6)
        )
    }
}

/// Renders the engine-throughput comparison with the published rows and an
/// optional measured row.
pub fn render_throughput_table(measured: Option<(&str, f64)>) -> String {
    let mut out = format!("# {BCP_EVENT_DEFINITION}\n");
    out.push_str(&format!(
        "{:<16} | {:>8} | {:>8} | {:>8}\n",
        "instance", "prior-a", "prior-b", "this"
    ));
    for (name, a, b, ours) in PUBLISHED_ENGINE_THROUGHPUT {
        let row = ThroughputRow {
            instance: name.to_string(),
            prior_a_mbcps: a,
            prior_b_mbcps: b,
            ours_mbcps: ours,
        };
        out.push_str(&format!("{row}\n"));
    }
    if let Some((name, bcps)) = measured {
        out.push_str(&format!(
            "{:<16} | {:>8} | {:>8} | {:>8}\n",
            name,
            "-",
            "-",
            format_rate(bcps)
        ));
    }
    out
}

/// Renders one matrix cell as `<rate> BCP/s <speedup>x`.
pub fn render_matrix_cell(bcps: f64, ratio: f64) -> String {
    format!("{} BCP/s {}", format_rate(bcps), format_speedup(ratio))
}

/// Published cell for (variables, clauses), if reported.
pub fn published_cell(vars: u32, clauses: usize) -> Option<(f64, f64)> {
    PUBLISHED_SPEEDUP_MATRIX
        .iter()
        .find(|(v, c, _, _)| *v == vars && *c == clauses)
        .map(|&(_, _, b, s)| (b, s))
}
