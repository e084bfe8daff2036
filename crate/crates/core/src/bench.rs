//! Wall-time scaling of the Gaussian engine.
//!
//! Random all-Gaussian programs are generated at geometrically spaced mode
//! counts and executed for one shot; the median wall time per mode count is
//! fitted against the mode count on a log-log scale.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::execute_shot;
use crate::circuit::generate::{random_program, GeneratorConfig};
use crate::error::{Error, Result};
use crate::measure::RandomStream;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub min_modes: usize,
    pub max_modes: usize,
    /// Gates per mode.
    pub ops_per_mode: usize,
    /// Homodyne measurements per mode; each is followed by a fresh vacuum.
    pub measurements_per_mode: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            min_modes: 8,
            max_modes: 256,
            ops_per_mode: 1,
            measurements_per_mode: 0.25,
            repetitions: 3,
            seed: 0,
        }
    }
}

impl BenchConfig {
    /// `min_modes, 2·min_modes, …` up to and including `max_modes`.
    pub fn mode_counts(&self) -> Vec<usize> {
        let mut counts = Vec::new();
        let mut n = self.min_modes;
        while n <= self.max_modes {
            counts.push(n);
            n *= 2;
        }
        counts
    }
}

/// One mode count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub modes: usize,
    pub gates: usize,
    pub measurements: usize,
    /// Median over repetitions, in seconds.
    pub seconds: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    /// Name of the resource proxy `R`.
    pub resource: &'static str,
    /// Name of the instance size `S`.
    pub size: &'static str,
    pub mode_counts: Vec<usize>,
    pub wall_times: Vec<BenchRow>,
    /// Least-squares slope of `ln R` against `ln S`; absent with fewer than
    /// two mode counts.
    pub fitted_exponent: Option<f64>,
}

impl BenchReport {
    /// `modes,gates,measurements,seconds` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["modes", "gates", "measurements", "seconds"])?;
        for row in &self.wall_times {
            w.write_record([
                row.modes.to_string(),
                row.gates.to_string(),
                row.measurements.to_string(),
                format!("{:e}", row.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn run(config: &BenchConfig) -> Result<BenchReport> {
    if config.min_modes == 0 || config.max_modes < config.min_modes || config.repetitions == 0 {
        return Err(Error::Unsupported(format!(
            "benchmark needs 1 ≤ min_modes ≤ max_modes and repetitions ≥ 1, got {}..{} × {}",
            config.min_modes, config.max_modes, config.repetitions
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::new();
    for n in config.mode_counts() {
        let gates = config.ops_per_mode * n;
        let measurements = (config.measurements_per_mode * n as f64).round() as usize;
        let generator = GeneratorConfig::gaussian(n, gates, measurements);
        let program = random_program(&generator, &mut rng);
        let mut samples = Vec::with_capacity(config.repetitions);
        for r in 0..config.repetitions {
            let stream = RandomStream::new(config.seed, r as u64);
            let start = Instant::now();
            execute_shot(&program, stream)?;
            samples.push(start.elapsed().as_secs_f64());
        }
        let seconds = median(&mut samples.clone());
        rows.push(BenchRow {
            modes: n,
            gates,
            measurements,
            seconds,
            samples,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.modes as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    Ok(BenchReport {
        resource: "wall-clock seconds",
        size: "number of modes",
        mode_counts: rows.iter().map(|r| r.modes).collect(),
        fitted_exponent: loglog_slope(&x, &y),
        wall_times: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[2.0], &[1.0]), None);
    }

    #[test]
    fn single_mode_count_smoke_run() {
        let config = BenchConfig {
            min_modes: 8,
            max_modes: 8,
            ..BenchConfig::default()
        };
        let report = run(&config).unwrap();
        assert_eq!(report.mode_counts, vec![8]);
        assert_eq!(report.wall_times[0].samples.len(), 3);
        assert_eq!(report.wall_times[0].measurements, 2);
        assert!(report.fitted_exponent.is_none());
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }

    #[test]
    fn mode_counts_double() {
        let config = BenchConfig {
            min_modes: 64,
            max_modes: 2048,
            ..BenchConfig::default()
        };
        assert_eq!(config.mode_counts(), vec![64, 128, 256, 512, 1024, 2048]);
    }
}
