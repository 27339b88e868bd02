use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TRACE_HEADER: &str = "t,eta,J,volume,min_radius,u_min,u_max,grad_q,residual,dt";

/// One row of the monitor trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub eta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// `int u sigma_k`
    pub volume: f64,
    pub min_radius: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// `max |grad u|^2 / u^gamma`
    pub grad_q: f64,
    /// `rho_hat_relspread`
    pub residual: f64,
    /// Step that produced this state; 0 for the initial record.
    pub dt: f64,
}

impl TraceRecord {
    fn fields(&self) -> [f64; 10] {
        [
            self.t,
            self.eta,
            self.j,
            self.volume,
            self.min_radius,
            self.u_min,
            self.u_max,
            self.grad_q,
            self.residual,
            self.dt,
        ]
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub gamma: f64,
    pub records: Vec<TraceRecord>,
}

impl FlowTrace {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 + 250 * self.records.len());
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for r in &self.records {
            let row: Vec<String> = r.fields().iter().map(|&x| fmt17(x)).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// `t` strictly increasing and every `min_radius` positive.
    pub fn is_well_formed(&self) -> bool {
        self.records.windows(2).all(|w| w[1].t > w[0].t) && self.records.iter().all(|r| r.min_radius > 0.0)
    }
}
