//! Episode recording: a 20 Hz kinematic trace, one row per planning
//! decision, and an end-of-episode summary.

use crate::traffic::VehicleState;
use serde::Serialize;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// One 20 Hz motion-planner tick, logged after the world stepped.
#[derive(Debug, Clone, PartialEq)]
pub struct MpTick {
    pub time: f64,
    pub ego_y: f64,
    pub ego_vy: f64,
    pub ego_ay: f64,
    /// Difference quotient of the executed acceleration (m/s³).
    pub jerk: f64,
    /// Bumper-to-bumper gap to the true nearest same-lane lead, if any.
    pub gap_to_lead: Option<f64>,
    /// Gap divided by the ego velocity (s), when both are defined.
    pub time_headway: Option<f64>,
}

/// One 2 Hz behavior-planner decision.
#[derive(Debug, Clone, PartialEq)]
pub struct BpTick {
    pub time: f64,
    pub action: usize,
    pub action_lo: f64,
    pub action_hi: f64,
    pub n_sigma_points: usize,
    pub q_mean: Vec<f64>,
    pub q_variance: Vec<f64>,
    pub root_visits: Vec<u32>,
}

/// Both vehicles' states at the first tick where the ego passes the merge
/// point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeSnapshot {
    pub time: f64,
    pub ego_y: f64,
    pub ego_vy: f64,
    pub mv_y: f64,
    pub mv_vy: f64,
    /// Signed bumper gap from ego to the merging vehicle (positive when it
    /// leads).
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_headway: Option<f64>,
}

impl MergeSnapshot {
    pub fn capture(time: f64, ego: &VehicleState, mv: &VehicleState, vehicle_length: f64) -> Self {
        let gap = mv.y - ego.y - vehicle_length;
        let time_headway = if gap > 0.0 && ego.vy > 0.0 { Some(gap / ego.vy) } else { None };
        Self { time, ego_y: ego.y, ego_vy: ego.vy, mv_y: mv.y, mv_vy: mv.vy, gap, time_headway }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    DurationReached,
    Crash,
    StoppedBehindObstacle,
}

/// End-of-episode aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    /// Mean ego velocity over the whole episode (m/s).
    pub avg_velocity: f64,
    /// Mean ego velocity before the first sensing event (object detection or
    /// merge-point crossing); equals `avg_velocity` when no event occurred.
    pub avg_velocity_pre_event: f64,
    /// Largest |jerk| over the trace (m/s³).
    pub max_abs_jerk: f64,
    pub crashed: bool,
    pub end_reason: EndReason,
    pub end_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge: Option<MergeSnapshot>,
}

/// Complete record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Telemetry {
    pub mp: Vec<MpTick>,
    pub bp: Vec<BpTick>,
    pub summary: EpisodeSummary,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Telemetry {
    /// Recompute the largest |jerk| from the acceleration trace; must agree
    /// with the summary.
    pub fn max_abs_jerk_from_trace(&self, dt: f64, initial_ay: f64) -> f64 {
        let mut prev = initial_ay;
        let mut max = 0.0_f64;
        for row in &self.mp {
            max = max.max(((row.ego_ay - prev) / dt).abs());
            prev = row.ego_ay;
        }
        max
    }

    /// 20 Hz trace as CSV with a fixed column order.
    pub fn telemetry_csv(&self) -> String {
        let mut out = String::with_capacity(self.mp.len() * 64 + 64);
        out.push_str("time,ego_y,ego_vy,ego_ay,jerk,gap_to_lead,time_headway\n");
        for r in &self.mp {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.time,
                r.ego_y,
                r.ego_vy,
                r.ego_ay,
                r.jerk,
                fmt_opt(r.gap_to_lead),
                fmt_opt(r.time_headway),
            );
        }
        out
    }

    /// Decision log as CSV: one row per planning cycle, per-action columns
    /// appended in action order.
    pub fn decisions_csv(&self) -> String {
        let n_actions = self.bp.first().map_or(0, |b| b.q_mean.len());
        let mut out = String::new();
        out.push_str("time,action,action_lo,action_hi,n_sigma_points");
        for a in 0..n_actions {
            let _ = write!(out, ",q_mean_{a},q_var_{a},visits_{a}");
        }
        out.push('\n');
        for b in &self.bp {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                b.time, b.action, b.action_lo, b.action_hi, b.n_sigma_points
            );
            for a in 0..n_actions {
                let _ = write!(out, ",{},{},{}", b.q_mean[a], b.q_variance[a], b.root_visits[a]);
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_toml(&self) -> String {
        toml::to_string(&self.summary).expect("summary serializes")
    }

    /// Write `telemetry.csv`, `decisions.csv`, and `summary.toml` into
    /// `dir`, atomically per file.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in [
            ("telemetry.csv", self.telemetry_csv()),
            ("decisions.csv", self.decisions_csv()),
            ("summary.toml", self.summary_toml()),
        ] {
            let tmp = dir.join(format!(".{name}.tmp"));
            std::fs::write(&tmp, content)?;
            std::fs::rename(&tmp, dir.join(name))?;
        }
        Ok(())
    }
}
