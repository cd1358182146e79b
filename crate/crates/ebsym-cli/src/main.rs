//! Command-line front end: runs the derivation and verification pipelines
//! and emits pretty or structured reports. Exit codes are the scripting
//! contract: 0 verified, 2 refuted, 3 assumption-blocked, 4 degenerate
//! chart, 1 usage or parse error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ebsym::derivation;
use ebsym::expr::Bindings;
use ebsym::group::EquivParams;
use ebsym::oracle;
use ebsym::parse::{parse_expr, SymTable};
use ebsym::symmetry;
use ebsym::transform::{
    instantiate_applied, match_eb_form, transform_pde, EbEquation, EbForm, PointTransformation,
};
use ebsym::{Assumptions, Error, Expr, Frame};

#[derive(Parser)]
#[command(name = "ebsym", about = "Equivalence analysis of the beam equation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Pretty)]
    format: Format,
    /// Bind a parameter, e.g. --set k7=1 (repeatable)
    #[arg(long = "set", global = true)]
    set: Vec<String>,
    /// Register a positivity assumption, e.g. --assume "k2 - k3*k4"
    #[arg(long, global = true)]
    assume: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pretty,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Classic,
    Generalized,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay the constraint chain that pins down the equivalence group
    Derive {
        #[arg(long, value_enum, default_value_t = FlavorArg::Classic)]
        flavor: FlavorArg,
        /// Evaluate a single named step (gamma1, wy, gamma2, gamma3) ...
        #[arg(long)]
        step: Option<String>,
        /// ... under a concrete chart, e.g. --chart "R=y*z,S=z,L=1"
        #[arg(long)]
        chart: Option<String>,
    },
    /// Verify a theorem symbolically and numerically
    Verify {
        #[arg(long)]
        theorem: u8,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Apply an equivalence transformation and report F, M, mu, J
    Transform {
        /// Parameter file: one `name = value` per line, # comments
        #[arg(long)]
        params: Option<PathBuf>,
        /// Keep all k-parameters symbolic
        #[arg(long, default_value_t = false)]
        symbolic: bool,
    },
    /// Run the numeric oracle only
    Oracle {
        #[arg(long)]
        theorem: u8,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct StepReport {
    name: String,
    constraint: String,
    solved_form: String,
    verdict: String,
    note: String,
}

#[derive(Serialize, Default)]
struct Report {
    command: String,
    verdict: String,
    steps: Vec<StepReport>,
    items: BTreeMap<String, String>,
    max_discrepancy: Option<f64>,
    witness: Option<String>,
}

enum Outcome {
    Verified,
    Refuted,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::AssumptionMissing(_) | Error::NegativeRadicand(_) => 3,
        Error::DegenerateChart(_) | Error::ChartBoundary | Error::SingularJacobian => 4,
        Error::Parse(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap defaults to exit 2 for usage errors; the contract says 1
            eprint!("{}", e);
            return ExitCode::from(1);
        }
    };
    let frame = Frame::yz();
    let table = SymTable::new(frame.clone()).with_func("f").with_func("m");

    let mut asm = Assumptions::new();
    let base_asm = Assumptions::new();
    for a in &cli.assume {
        match parse_expr(a, &table, &base_asm) {
            Ok(e) => asm.assume_positive(&e),
            Err(err) => {
                eprintln!("bad --assume expression: {}", err);
                return ExitCode::from(1);
            }
        }
    }

    let mut sets: BTreeMap<String, Expr> = BTreeMap::new();
    for s in &cli.set {
        let Some((name, value)) = s.split_once('=') else {
            eprintln!("bad --set (expected name=value): {}", s);
            return ExitCode::from(1);
        };
        match parse_expr(value.trim(), &table, &asm) {
            Ok(e) => {
                sets.insert(name.trim().to_string(), e);
            }
            Err(err) => {
                eprintln!("bad --set value {}: {}", s, err);
                return ExitCode::from(1);
            }
        }
    }

    let mut report = Report::default();
    let result = match &cli.cmd {
        Cmd::Derive {
            flavor,
            step,
            chart,
        } => cmd_derive(*flavor, step, chart, &asm, &table, &mut report),
        Cmd::Verify {
            theorem,
            scenes,
            seed,
        } => cmd_verify(*theorem, *scenes, *seed, &sets, &asm, &mut report),
        Cmd::Transform { params, symbolic } => {
            cmd_transform(params, *symbolic, &sets, &asm, &table, &mut report)
        }
        Cmd::Oracle {
            theorem,
            scenes,
            seed,
        } => cmd_oracle(*theorem, *scenes, *seed, &mut report),
    };

    let code = match result {
        Ok(Outcome::Verified) => {
            report.verdict = "verified".into();
            0
        }
        Ok(Outcome::Refuted) => {
            report.verdict = "refuted".into();
            2
        }
        Err(e) => {
            report.verdict = if matches!(e, Error::AssumptionMissing(_)) {
                "assumption-blocked".into()
            } else {
                format!("error: {}", e)
            };
            exit_code_for(&e)
        }
    };
    emit(&report, cli.format);
    ExitCode::from(code)
}

fn emit(report: &Report, format: Format) {
    match format {
        Format::Structured => {
            println!("{}", serde_json::to_string_pretty(report).unwrap());
        }
        Format::Pretty => {
            println!("{}: {}", report.command, report.verdict);
            for s in &report.steps {
                println!("  [{}] {}", s.verdict, s.name);
                println!("      constraint: {}", s.constraint);
                println!("      solved by:  {}", s.solved_form);
                if !s.note.is_empty() {
                    println!("      note: {}", s.note);
                }
            }
            for (k, v) in &report.items {
                println!("  {} = {}", k, v);
            }
            if let Some(d) = report.max_discrepancy {
                println!("  max numeric discrepancy: {:.3e}", d);
            }
            if let Some(w) = &report.witness {
                println!("  witness: {}", w);
            }
        }
    }
}

fn push_trace(report: &mut Report, trace: &derivation::DerivationTrace, frame: &Frame) {
    for s in &trace.steps {
        report.steps.push(StepReport {
            name: s.name.clone(),
            constraint: s.constraint.pretty(frame),
            solved_form: s.solved_form.clone(),
            verdict: "verified".into(),
            note: s.note.clone(),
        });
    }
}

fn cmd_derive(
    flavor: FlavorArg,
    step: &Option<String>,
    chart: &Option<String>,
    extra_asm: &Assumptions,
    table: &SymTable,
    report: &mut Report,
) -> Result<Outcome, Error> {
    report.command = "derive".into();
    let frame = Frame::yz();
    let mut asm = derivation::standard_assumptions();
    asm.merge(extra_asm);

    if let Some(step_name) = step {
        let chart_src = chart
            .as_deref()
            .ok_or_else(|| Error::Parse("--step requires --chart".into()))?;
        let t = parse_chart(chart_src, table, &asm)?;
        let pde = transform_pde(&EbEquation::classic(), &t, &frame)?;
        let idx = match step_name.as_str() {
            "gamma1" => [4, 0],
            "wy" => [1, 0],
            "gamma2" => [0, 1],
            "gamma3" => [0, 0],
            other => return Err(Error::Parse(format!("unknown step {}", other))),
        };
        let c = pde.coeff(idx);
        report
            .items
            .insert(format!("{} coefficient", step_name), c.pretty(&frame));
        return Ok(Outcome::Verified);
    }

    if matches!(flavor, FlavorArg::Generalized) {
        let trace = derivation::verify_theorem2_generalized(&asm)?;
        push_trace(report, &trace, &frame);
    }
    let trace = derivation::run_derivation(&asm)?;
    push_trace(report, &trace, &frame);
    Ok(Outcome::Verified)
}

fn parse_chart(src: &str, table: &SymTable, asm: &Assumptions) -> Result<PointTransformation, Error> {
    let mut parts: BTreeMap<String, Expr> = BTreeMap::new();
    for item in src.split(',') {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad chart component: {}", item)))?;
        parts.insert(name.trim().to_string(), parse_expr(value.trim(), table, asm)?);
    }
    let take = |parts: &BTreeMap<String, Expr>, n: &str, default: Option<Expr>| {
        parts
            .get(n)
            .cloned()
            .or(default)
            .ok_or_else(|| Error::Parse(format!("chart is missing {}", n)))
    };
    Ok(PointTransformation::new(
        take(&parts, "R", None)?,
        take(&parts, "S", None)?,
        take(&parts, "L", Some(Expr::one()))?,
        take(&parts, "J", Some(Expr::zero()))?,
    ))
}

fn cmd_verify(
    theorem: u8,
    scenes: usize,
    seed: u64,
    sets: &BTreeMap<String, Expr>,
    extra_asm: &Assumptions,
    report: &mut Report,
) -> Result<Outcome, Error> {
    report.command = format!("verify --theorem {}", theorem);
    let frame = Frame::yz();
    let mut asm = derivation::standard_assumptions();
    asm.merge(extra_asm);
    match theorem {
        1 => {
            // the k7 obstruction: a nonzero k7 leaves the image y-dependent
            if let Some(k7) = sets.get("k7") {
                if !k7.is_zero() {
                    let (f_big, m_big) = derivation::eubytr_f_m()?;
                    let b = bindings_from(sets);
                    let f_y = f_big.total_derivative(0, &frame).substitute(&b, &frame, &asm)?;
                    let m_y = m_big.total_derivative(0, &frame).substitute(&b, &frame, &asm)?;
                    if !f_y.is_zero() || !m_y.is_zero() {
                        report.witness = Some(format!(
                            "dF/dy = {}",
                            f_y.pretty(&frame)
                        ));
                        return Ok(Outcome::Refuted);
                    }
                }
            }
            let (_t, f_big, m_big, mu) = derivation::assemble_theorem1(&asm)?;
            report.items.insert("F".into(), f_big.pretty(&frame));
            report.items.insert("M".into(), m_big.pretty(&frame));
            report.items.insert("mu".into(), mu.pretty(&frame));
            let r = oracle::theorem1_oracle(seed, scenes)?;
            report.max_discrepancy = Some(r.max_rel);
            Ok(if r.passed { Outcome::Verified } else { Outcome::Refuted })
        }
        2 => {
            let trace = derivation::verify_theorem2_generalized(&asm)?;
            push_trace(report, &trace, &frame);
            let r = oracle::theorem2_oracle(seed, scenes)?;
            report.max_discrepancy = Some(r.max_rel);
            Ok(if r.passed { Outcome::Verified } else { Outcome::Refuted })
        }
        3 => {
            let src = symmetry::source_frame();
            let v = symmetry::SymmetryParams::symbolic().generator();
            let defect = symmetry::symmetry_defect(&v, &src)?;
            if !defect.is_zero() {
                report.witness = Some(defect.pretty(&src));
                return Ok(Outcome::Refuted);
            }
            report.steps.push(StepReport {
                name: "prolonged generator annihilates the equation on shell".into(),
                constraint: "pr4(v) Delta == 0 mod Delta".into(),
                solved_form: "v = p6 d/dt + (p4 + p2 t + p3 x + p1 tx + p5 u) d/du".into(),
                verdict: "verified".into(),
                note: String::new(),
            });
            let t = symmetry::SymmetryParams::symbolic().finite()?;
            let pde = transform_pde(&EbEquation::classic(), &t, &frame)?;
            if !pde.inhom.is_zero() {
                report.witness = Some(pde.inhom.pretty(&frame));
                return Ok(Outcome::Refuted);
            }
            let r = oracle::theorem3_oracle(seed, scenes)?;
            report.max_discrepancy = Some(r.max_rel);
            Ok(if r.passed { Outcome::Verified } else { Outcome::Refuted })
        }
        other => Err(Error::Parse(format!("no theorem {}", other))),
    }
}

fn bindings_from(sets: &BTreeMap<String, Expr>) -> Bindings {
    let mut b = Bindings::new();
    for (name, value) in sets {
        b = b.param(name, value.clone());
    }
    b
}

fn cmd_transform(
    params_file: &Option<PathBuf>,
    symbolic: bool,
    sets: &BTreeMap<String, Expr>,
    asm: &Assumptions,
    table: &SymTable,
    report: &mut Report,
) -> Result<Outcome, Error> {
    report.command = "transform".into();
    let frame = Frame::yz();
    // transform runs under exactly the assumptions the caller registered
    let mut values: BTreeMap<String, Expr> = sets.clone();
    if let Some(path) = params_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {}", path.display(), e)))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected name = value", lineno + 1))
            })?;
            values.insert(
                name.trim().to_string(),
                parse_expr(value.trim(), table, asm)?,
            );
        }
    }

    let mut params = if symbolic {
        EquivParams::symbolic()
    } else {
        EquivParams::identity()
    };
    for (name, value) in &values {
        match name.as_str() {
            "k0" => params.k0 = value.clone(),
            "k1" => params.k1 = value.clone(),
            "k2" => params.k2 = value.clone(),
            "k3" => params.k3 = value.clone(),
            "k4" => params.k4 = value.clone(),
            "k5" => params.k5 = value.clone(),
            "k6" => params.k6 = value.clone(),
            "k8" => params.k8 = value.clone(),
            "k9" => params.k9 = value.clone(),
            "k10" => params.k10 = value.clone(),
            "f" | "m" => {}
            other => return Err(Error::Parse(format!("unknown parameter {}", other))),
        }
    }

    let chart = params.chart(asm)?;
    let mut pde = transform_pde(&EbEquation::classic(), &chart, &frame)?;
    for fname in ["f", "m"] {
        if let Some(body) = values.get(fname) {
            let mut coeffs = BTreeMap::new();
            for (idx, c) in &pde.coeffs {
                coeffs.insert(
                    *idx,
                    instantiate_applied(c, fname, &["z"], body, &frame, asm)?,
                );
            }
            pde.coeffs = coeffs;
            pde.inhom = instantiate_applied(&pde.inhom, fname, &["z"], body, &frame, asm)?;
        }
    }
    report.items.insert("J".into(), chart.j.pretty(&frame));
    for (idx, c) in &pde.coeffs {
        if !c.is_zero() {
            report
                .items
                .insert(format!("coeff w_[{},{}]", idx.0[0], idx.0[1]), c.pretty(&frame));
        }
    }
    if !pde.inhom.is_zero() {
        report.items.insert("inhomogeneity".into(), pde.inhom.pretty(&frame));
    }
    // first try the normal-form candidates for this chart family; fall back
    // to blind matching when they do not apply
    if let Ok(Some((f_cand, m_cand, mu))) = normal_form_candidates(&pde, &params, &values, asm, &frame) {
        report.items.insert("F".into(), f_cand.pretty(&frame));
        report.items.insert("M".into(), m_cand.pretty(&frame));
        report.items.insert("mu".into(), mu.pretty(&frame));
        return Ok(Outcome::Verified);
    }
    match match_eb_form(&pde, &frame)? {
        EbForm::Explicit { f, m, mu } => {
            report.items.insert("F".into(), f.pretty(&frame));
            report.items.insert("M".into(), m.pretty(&frame));
            report.items.insert("mu".into(), mu.pretty(&frame));
            Ok(Outcome::Verified)
        }
        EbForm::Consistent => {
            report
                .items
                .insert("form".into(), "beam form (gauge factor not rational)".into());
            Ok(Outcome::Verified)
        }
        EbForm::No => Ok(Outcome::Refuted),
    }
}

fn normal_form_candidates(
    pde: &ebsym::transform::LinearPde,
    params: &EquivParams,
    values: &BTreeMap<String, Expr>,
    asm: &Assumptions,
    frame: &Frame,
) -> Result<Option<(Expr, Expr, Expr)>, Error> {
    let (mut f_cand, mut m_cand) = derivation::theorem1_f_m(asm)?;
    let b = Bindings::new()
        .param("k1", params.k1.clone())
        .param("k2", params.k2.clone())
        .param("k3", params.k3.clone())
        .param("k4", params.k4.clone())
        .param("k5", params.k5.clone())
        .param("k6", params.k6.clone());
    f_cand = f_cand.substitute(&b, frame, asm)?;
    m_cand = m_cand.substitute(&b, frame, asm)?;
    for fname in ["f", "m"] {
        if let Some(body) = values.get(fname) {
            f_cand = instantiate_applied(&f_cand, fname, &["z"], body, frame, asm)?;
            m_cand = instantiate_applied(&m_cand, fname, &["z"], body, frame, asm)?;
        }
    }
    match ebsym::transform::verify_eb_form(pde, &f_cand, &m_cand, frame)? {
        Some(mu) => Ok(Some((f_cand, m_cand, mu))),
        None => Ok(None),
    }
}

fn cmd_oracle(theorem: u8, scenes: usize, seed: u64, report: &mut Report) -> Result<Outcome, Error> {
    report.command = format!("oracle --theorem {}", theorem);
    let (pos, neg) = match theorem {
        1 => oracle::theorem1_reports(seed, scenes)?,
        2 => oracle::theorem2_reports(seed, scenes)?,
        3 => (
            oracle::theorem3_oracle(seed, scenes)?,
            oracle::theorem3_negative_control(seed, scenes)?,
        ),
        other => return Err(Error::Parse(format!("no theorem {}", other))),
    };
    report.max_discrepancy = Some(pos.max_rel);
    report
        .items
        .insert("scenes".into(), pos.scenes.to_string());
    report
        .items
        .insert("negative control min deviation".into(), format!("{:.3e}", neg.min_rel));
    Ok(if pos.passed && neg.passed {
        Outcome::Verified
    } else {
        Outcome::Refuted
    })
}
