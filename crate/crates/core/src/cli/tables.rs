//! CSV tables written by the runner. Each row type is both the writer and
//! the parser of its file; headers are the field names.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::Result;

/// `gate_errors.csv`: one row per gate and T1P.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateErrorRow {
    pub gate: String,
    pub t1p_us: f64,
    pub duration_ns: f64,
    pub n_cycles: usize,
    pub p: f64,
}

/// `directions.csv`: one row per initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionRow {
    pub gate: String,
    pub t1p_us: f64,
    pub label: String,
    pub fidelity_before: f64,
    pub fidelity_after: f64,
    pub delta: f64,
}

/// `baselines.csv`: closed-form bare-gate errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub kind: String,
    pub t1p_us: f64,
    pub tg_ns: f64,
    pub error: f64,
}

/// `fit.csv`: `p = a/T + b/T²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub gate: String,
    pub a: f64,
    pub b: f64,
    pub residual_rms: f64,
}

/// `lifetime.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeRow {
    /// Empty for the noise-free run.
    pub t2r_ratio: Option<f64>,
    #[serde(rename = "T1P_us")]
    pub t1p_us: f64,
    pub n_traces: usize,
    #[serde(rename = "T_L_us")]
    pub t_l_us: f64,
    pub ratio: f64,
    pub fit_r2: f64,
    pub master_seed: u64,
}

/// `lifetime_curve.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub t2r_ratio: Option<f64>,
    pub t_us: f64,
    pub x_l: f64,
}

/// `pointer.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerRow {
    pub t_ns: f64,
    pub intact: f64,
    pub intact_minus: f64,
    pub lost: f64,
}

/// `envelopes.csv`: sampled drive envelopes of a schedule (MHz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub drive: String,
    pub t_ns: f64,
    pub value: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(rows: Vec<T>) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_rows(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(read_rows::<T>(&path).unwrap(), rows);
    }

    #[test]
    fn tables_round_trip() {
        round_trip(vec![GateErrorRow { gate: "czz".into(), t1p_us: 64.0, duration_ns: 200.0, n_cycles: 2, p: 1.5e-4 }]);
        round_trip(vec![DirectionRow {
            gate: "xcx".into(),
            t1p_us: 8.0,
            label: "+X,-Z".into(),
            fidelity_before: 0.99,
            fidelity_after: 0.98,
            delta: 0.01,
        }]);
        round_trip(vec![BaselineRow { kind: "two_qubit".into(), t1p_us: 8.0, tg_ns: 40.0, error: 0.004987 }]);
        round_trip(vec![FitRow { gate: "czz".into(), a: 0.0057, b: 0.253, residual_rms: 1e-7 }]);
        round_trip(vec![
            LifetimeRow { t2r_ratio: None, t1p_us: 8.0, n_traces: 1, t_l_us: 80.0, ratio: 10.0, fit_r2: 0.99, master_seed: 7 },
            LifetimeRow { t2r_ratio: Some(0.5), t1p_us: 8.0, n_traces: 100, t_l_us: 50.0, ratio: 6.25, fit_r2: 0.98, master_seed: 7 },
        ]);
        round_trip(vec![CurveRow { t2r_ratio: Some(1.0), t_us: 0.1, x_l: 0.99 }]);
        round_trip(vec![PointerRow { t_ns: 1.0, intact: 0.1, intact_minus: -0.1, lost: 0.05 }]);
        round_trip(vec![EnvelopeRow { drive: "ec".into(), t_ns: 3.0, value: 1.25 }]);
    }
}
