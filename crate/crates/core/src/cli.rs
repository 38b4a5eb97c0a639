//! Experiment runners behind the `franson` binary.
//!
//! Each command writes its data files next to `--out <prefix>` and returns
//! the text for stdout/stderr plus an exit status, so the binary stays a
//! thin argument parser and the commands can be driven from tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::circuits::{validate_cascade_timing, CascadeConfig};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::measurement::{entangle, fit_fringe, fringe_scan, phase_to_pzt_volts, pzt_volts_to_phase, FringeFit};
use crate::montecarlo::{run_fringe_at_phases, run_truth_table_experiment};
use crate::state::{Mode, PolPair, AMPLITUDE_EPSILON};

/// Longest sweep accepted on the command line.
pub const MAX_SWEEP_POINTS: usize = 100_000;

/// What a command prints and how the process should exit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthMode {
    Ideal,
    MonteCarlo,
}

/// Inclusive `start:stop:step` range. Each bound may carry a `pi` suffix
/// (`2pi`, `0.5pi`, `pi`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.strip_suffix("pi") {
        Some("") | Some("+") => Some(std::f64::consts::PI),
        Some("-") => Some(-std::f64::consts::PI),
        Some(k) => k.parse::<f64>().ok().map(|k| k * std::f64::consts::PI),
        None => s.parse().ok(),
    }
    .filter(|x| x.is_finite())
}

impl FromStr for SweepRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts[..] else {
            return Err(format!("expected start:stop:step, got {s:?}"));
        };
        let num = |t: &str| parse_number(t).ok_or_else(|| format!("not a number: {t:?}"));
        let r = SweepRange {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        };
        if r.step <= 0.0 {
            return Err(format!("step must be > 0, got {}", r.step));
        }
        if r.stop < r.start {
            return Err(format!("stop {} is below start {}", r.stop, r.start));
        }
        if (r.stop - r.start) / r.step >= MAX_SWEEP_POINTS as f64 {
            return Err(format!("more than {MAX_SWEEP_POINTS} points"));
        }
        Ok(r)
    }
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sweep {
    Volts(SweepRange),
    Theta(SweepRange),
}

pub fn output_path(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_header(cfg: &ExperimentConfig) -> String {
    format!("# config_hash={} seed={}\n", cfg.config_hash(), cfg.noise.seed)
}

/// 15 significant digits, shortest form; hides last-bit noise like 0.25000000000000006.
/// Magnitudes below the amplitude cutoff print as 0.
pub fn csv_num(x: f64) -> String {
    let r: f64 = format!("{x:.14e}").parse().unwrap_or(x);
    if r.abs() < AMPLITUDE_EPSILON {
        "0".into()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

fn mode_label(m: &Mode) -> String {
    format!("{}:{}:{}", m.port.0, m.pol, m.t.0)
}

pub fn cmd_truth_table(cfg: &ExperimentConfig, mode: TruthMode, prefix: &str) -> Result<Outcome> {
    let path = output_path(prefix, "truth.csv");
    let mut csv = csv_header(cfg);
    let mut stdout = String::new();
    match mode {
        TruthMode::Ideal => {
            let table = crate::measurement::truth_table(&cfg.gate, cfg.window)?;
            csv.push_str("input,output,probability\n");
            for input in PolPair::ALL {
                for output in PolPair::ALL {
                    writeln!(csv, "{input},{output},{}", csv_num(table.get(input, output))).unwrap();
                }
            }
            writeln!(
                stdout,
                "unconditional probabilities (rows sum to the success probability)"
            )
            .unwrap();
            write_grid(&mut stdout, &table.probs);
        }
        TruthMode::MonteCarlo => {
            let exp = run_truth_table_experiment(&cfg.gate, cfg.window, &cfg.noise)?;
            csv.push_str("input,output,probability,counts,renormalized\n");
            for input in PolPair::ALL {
                for output in PolPair::ALL {
                    let (i, j) = (input.index(), output.index());
                    writeln!(
                        csv,
                        "{input},{output},{},{},{}",
                        csv_num(exp.ideal.probs[i][j]),
                        exp.records[i][j].counts,
                        csv_num(exp.renormalized[i][j])
                    )
                    .unwrap();
                }
            }
            writeln!(stdout, "renormalized counts (each row divided by its total)").unwrap();
            write_grid(&mut stdout, &exp.renormalized);
        }
    }
    write_file(&path, &csv)?;
    writeln!(stdout, "wrote {}", path.display()).unwrap();
    Ok(Outcome {
        stdout,
        ..Outcome::default()
    })
}

fn write_grid(out: &mut String, grid: &[[f64; 4]; 4]) {
    writeln!(out, "in\\out      HH      HV      VH      VV").unwrap();
    for input in PolPair::ALL {
        write!(out, "{input:<6}").unwrap();
        for x in grid[input.index()] {
            write!(out, "{x:>8.4}").unwrap();
        }
        out.push('\n');
    }
}

pub fn cmd_entangle(cfg: &ExperimentConfig, prefix: &str) -> Result<Outcome> {
    let path = output_path(prefix, "entangle.csv");
    let report = entangle(&cfg.gate, cfg.window, cfg.control_input, cfg.target_pol)?;
    let mut csv = csv_header(cfg);
    csv.push_str("kind,key,value,imag\n");
    for ((m1, m2), a) in report.kept.iter() {
        writeln!(
            csv,
            "amplitude,{}/{},{},{}",
            mode_label(m1),
            mode_label(m2),
            csv_num(a.re),
            csv_num(a.im)
        )
        .unwrap();
    }
    writeln!(csv, "success,,{},", csv_num(report.success)).unwrap();
    for pair in PolPair::ALL {
        writeln!(csv, "histogram,{pair},{},", csv_num(report.histogram[pair.index()])).unwrap();
    }
    writeln!(csv, "concurrence,,{},", csv_num(report.concurrence)).unwrap();
    write_file(&path, &csv)?;

    let mut stdout = String::new();
    writeln!(stdout, "success probability {:.6}", report.success).unwrap();
    for pair in PolPair::ALL {
        writeln!(stdout, "P({pair}) = {:.6}", report.histogram[pair.index()]).unwrap();
    }
    writeln!(stdout, "concurrence {:.6}", report.concurrence).unwrap();
    writeln!(stdout, "wrote {}", path.display()).unwrap();
    Ok(Outcome {
        stdout,
        ..Outcome::default()
    })
}

struct FringeRow {
    volts: f64,
    theta: f64,
    probability: f64,
    counts: Option<u64>,
}

pub fn cmd_fringe(cfg: &ExperimentConfig, sweep: Sweep, montecarlo: bool, prefix: &str) -> Result<Outcome> {
    let base = cfg.gate.total_phase();
    let (volts, thetas) = match sweep {
        Sweep::Volts(r) => {
            let v = r.values();
            let t = v
                .iter()
                .map(|&x| Ok(base + pzt_volts_to_phase(x, cfg.nm_per_volt, cfg.wavelength_nm)?))
                .collect::<Result<Vec<_>>>()?;
            (v, t)
        }
        Sweep::Theta(r) => {
            let t = r.values();
            let v = t
                .iter()
                .map(|&x| phase_to_pzt_volts(x - base, cfg.nm_per_volt, cfg.wavelength_nm))
                .collect::<Result<Vec<_>>>()?;
            (v, t)
        }
    };

    let rows: Vec<FringeRow> = if montecarlo {
        run_fringe_at_phases(&cfg.gate, cfg.window, &volts, &thetas, &cfg.noise)?
            .into_iter()
            .map(|p| FringeRow {
                volts: p.volts,
                theta: p.theta,
                probability: p.degraded_probability,
                counts: Some(p.record.counts),
            })
            .collect()
    } else {
        fringe_scan(&cfg.gate, &thetas, cfg.window)?
            .into_iter()
            .zip(&volts)
            .map(|((theta, probability), &volts)| FringeRow {
                volts,
                theta,
                probability,
                counts: None,
            })
            .collect()
    };

    let mut csv = csv_header(cfg);
    csv.push_str("volts,theta_rad,probability,counts,poisson_err\n");
    for r in &rows {
        match r.counts {
            Some(c) => writeln!(
                csv,
                "{},{},{},{c},{}",
                csv_num(r.volts),
                csv_num(r.theta),
                csv_num(r.probability),
                csv_num((c as f64).sqrt())
            )
            .unwrap(),
            None => writeln!(
                csv,
                "{},{},{},,",
                csv_num(r.volts),
                csv_num(r.theta),
                csv_num(r.probability)
            )
            .unwrap(),
        }
    }
    let csv_path = output_path(prefix, "fringe.csv");
    write_file(&csv_path, &csv)?;

    let samples: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.theta, r.counts.map_or(r.probability, |c| c as f64)))
        .collect();
    let fit = fit_fringe(&samples);
    let svg_path = output_path(prefix, "fringe.svg");
    write_file(&svg_path, &fringe_svg(&samples, fit.as_ref().ok(), montecarlo))?;

    let mut out = Outcome::default();
    writeln!(out.stdout, "wrote {}", csv_path.display()).unwrap();
    writeln!(out.stdout, "wrote {}", svg_path.display()).unwrap();
    match fit {
        Ok(f) => {
            let fit_path = output_path(prefix, "fit.csv");
            let line = format!(
                "{},{},{}",
                csv_num(f.amplitude),
                csv_num(f.visibility),
                csv_num(f.phase)
            );
            write_file(&fit_path, &format!("{}A,V,phi\n{line}\n", csv_header(cfg)))?;
            writeln!(out.stdout, "A,V,phi\n{line}").unwrap();
            if let Some(se) = f.visibility_stderr {
                writeln!(out.stdout, "V standard error {se:.4}").unwrap();
            }
            writeln!(out.stdout, "wrote {}", fit_path.display()).unwrap();
        }
        Err(e) => {
            writeln!(out.stderr, "error: {e}").unwrap();
            out.exit_code = e.exit_code().max(2);
        }
    }
    Ok(out)
}

fn fringe_svg(samples: &[(f64, f64)], fit: Option<&FringeFit>, counts: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let (mut x0, mut x1) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.0), hi.max(s.0))
    });
    if x1.partial_cmp(&x0) != Some(std::cmp::Ordering::Greater) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let mut y1 = samples.iter().fold(0.0f64, |m, s| m.max(s.1));
    if let Some(f) = fit {
        y1 = y1.max(f.amplitude * (1.0 + f.visibility));
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    y1 *= 1.1;
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - y / y1 * (H - 2.0 * M);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">theta (rad)</text>"#,
        W / 2.0,
        H - 12.0
    )
    .unwrap();
    let ylabel = if counts { "coincidences" } else { "probability" };
    writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    for (v, anchor, x) in [(x0, "start", M), (x1, "end", W - M)] {
        writeln!(
            s,
            r#"<text x="{x}" y="{}" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#,
            H - M + 14.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.4}</text>"#,
        M - 4.0,
        M + 4.0,
        y1
    )
    .unwrap();
    if let Some(f) = fit {
        let pts: Vec<String> = (0..=200)
            .map(|k| {
                let x = x0 + (x1 - x0) * k as f64 / 200.0;
                format!("{:.2},{:.2}", px(x), py(f.model(x)))
            })
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }
    for &(x, y) in samples {
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#, px(x), py(y)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn cmd_cascade_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let delays = cfg.cascade_delays.as_ref().ok_or_else(|| Error::Validation {
        key: "cascade.delays_bins".into(),
        message: "cascade-check needs a [cascade] section".into(),
    })?;
    let cascade = CascadeConfig::from_delays(delays, cfg.window.window_bins)?;
    let conflicts = validate_cascade_timing(&cascade)?;
    let mut out = Outcome::default();
    for (k, d) in delays.iter().enumerate() {
        writeln!(
            out.stdout,
            "gate {}: delay {d} bins ({:.3} ns)",
            k + 1,
            f64::from(*d) * cfg.bin.ns()
        )
        .unwrap();
    }
    writeln!(out.stdout, "window: {} bins", cfg.window.window_bins).unwrap();
    if conflicts.is_empty() {
        out.stdout.push_str("SAFE\n");
    } else {
        for c in &conflicts {
            writeln!(out.stdout, "CONFLICT {c}").unwrap();
        }
        writeln!(out.stdout, "{} conflicting branch pairs", conflicts.len()).unwrap();
        out.exit_code = 1;
    }
    Ok(out)
}
