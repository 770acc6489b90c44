//! Subcommands other than `plotdata`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use abclab::complexity::{
    check_invariants, hamming_cover, slow_entropy_report, witness_untwisted, CountKind, CountRecord, OrbitTable,
};
use abclab::diffeo::{build_ue_h, build_untwisted_h, build_wm_stage};
use abclab::normest::{norms_csv, triple_norm, NormEstimate};
use abclab::params::{build_chain, chain_from_json, chain_to_json, ratio_string, validate_chain, StageParams};
use abclab::report::fmt_f64;
use abclab::words::{sample_selection, verify_selection, Selection};
use abclab::{AbCSystem, BowenConfig, Construction, MapNode, Sampling};

use crate::config::{check_schema, parse_real, ExperimentConfig, HorizonSpec, SCHEMA_VERSION};
use crate::output::{header, header_for, Writer};
use crate::CliError;

fn construction_name(c: &Construction) -> &'static str {
    match c {
        Construction::Untwisted { .. } => "untwisted",
        Construction::UniquelyErgodic { .. } => "uniquely_ergodic",
        Construction::WeakMixing { .. } => "weak_mixing",
    }
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub files: Vec<PathBuf>,
    /// Process exit code; nonzero when results were written but a check failed.
    pub status: i32,
}

#[derive(Serialize)]
struct ChainFile {
    schema_version: &'static str,
    config_sha256: String,
    config: serde_json::Value,
    chain: serde_json::Value,
}

/// Reads a chain written by `params`, or a bare JSON array of stages.
pub fn load_chain(path: &Path) -> Result<Vec<StageParams>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let arr = match &v {
        serde_json::Value::Array(_) => v.clone(),
        serde_json::Value::Object(o) => {
            let ver = o.get("schema_version").and_then(|s| s.as_str()).unwrap_or("");
            check_schema(ver).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            o.get("chain")
                .cloned()
                .ok_or_else(|| CliError::config(format!("{}: missing field \"chain\"", path.display())))?
        }
        _ => return Err(CliError::config(format!("{}: expected a chain object or array", path.display()))),
    };
    chain_from_json(&arr.to_string()).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Builds (or loads) the chain, validates it and writes `chain.json` and
/// `validation.txt`. The outcome carries the validation exit code if any
/// check fails.
pub fn cmd_params(cfg: &ExperimentConfig, chain_file: Option<&Path>) -> Result<Outcome, CliError> {
    let chain = match chain_file {
        Some(p) => load_chain(p)?,
        None => build_chain(&cfg.profile, cfg.stages.to)?,
    };
    let report = validate_chain(&chain, &cfg.profile);
    let chain_json: serde_json::Value = serde_json::from_str(&chain_to_json(&chain)).expect("chain json");
    let config = serde_json::from_str(&cfg.echo()).expect("config json");
    let file = ChainFile { schema_version: SCHEMA_VERSION, config_sha256: cfg.hash(), config, chain: chain_json };
    let mut chain_text = serde_json::to_string_pretty(&file).expect("chain file serializes");
    chain_text.push('\n');

    let status = if report.ok() { "ok" } else { "failed" };
    let mut text = header(cfg, &[("file", "validation".into())]);
    let _ = write!(text, "{report}");
    let _ = writeln!(text, "status={status}");

    let mut w = Writer::new(&cfg.output_dir());
    w.add("chain.json", chain_text);
    w.add("validation.txt", text.clone());
    let files = w.flush()?;
    let mut stdout = format!("{report}");
    for s in &chain {
        let _ = writeln!(stdout, "stage {}: q has {} digits", s.n, s.q_digits());
    }
    let _ = writeln!(stdout, "status={status}");
    let status = if report.ok() { 0 } else { CliError::VALIDATION };
    Ok(Outcome { stdout, files, status })
}

/// The conjugacies `h_2, ..., h_to` and any word selections.
pub fn stage_maps(
    chain: &[StageParams],
    to: u32,
    construction: &Construction,
) -> Result<(Vec<MapNode>, Vec<Selection>), CliError> {
    let mut maps = Vec::new();
    let mut sels = Vec::new();
    for m in 2..=to {
        let st = chain
            .get(m as usize - 1)
            .ok_or_else(|| CliError::config(format!("chain has no stage {m}")))?;
        let h = match construction {
            Construction::Untwisted { variant } => build_untwisted_h(st, *variant)?,
            Construction::UniquelyErgodic { step } => build_ue_h(st, *step)?,
            Construction::WeakMixing { spec, words } => {
                let (h, sel) = build_wm_stage(st, spec, words)?;
                sels.push(sel);
                h
            }
        };
        maps.push(h);
    }
    Ok((maps, sels))
}

fn system(chain: &[StageParams], maps: &[MapNode], n: u32) -> Result<AbCSystem, CliError> {
    Ok(AbCSystem::from_maps(chain, maps[..n as usize - 1].to_vec())?)
}

struct HorizonPlan {
    spec: usize,
    horizon: BigUint,
    sampling: Sampling,
}

struct StagePlan {
    n: u32,
    horizons: Vec<HorizonPlan>,
    witness: bool,
}

/// Witness orbits are enumerated over the full period; beyond this they are skipped.
const WITNESS_MAX_PERIOD_BITS: u64 = 32;

fn plan(cfg: &ExperimentConfig, chain: &[StageParams]) -> Result<(Vec<StagePlan>, u128), CliError> {
    let specs: Vec<HorizonSpec> = cfg.horizon_specs()?;
    let eps = cfg.eps_values()?;
    let heps = cfg.hamming_eps()?;
    let points = (cfg.grid * cfg.grid) as u128;
    let hsamples = cfg.hamming.as_ref().map_or(0, |h| h.samples) as u128;
    let mut total: u128 = 0;
    let mut plans = Vec::new();
    for n in cfg.stages.iter() {
        let st = &chain[n as usize - 1];
        let period = st.next_q();
        let mut horizons = Vec::new();
        for (i, s) in specs.iter().enumerate() {
            let horizon = s.resolve(st);
            let sampling = Sampling::capped(&horizon, &period, cfg.max_samples);
            let len = sampling.count as u128;
            total += points * len + hsamples * len * heps.len() as u128;
            horizons.push(HorizonPlan { spec: i, horizon, sampling });
        }
        let witness = matches!(cfg.construction, Construction::Untwisted { .. })
            && period.bits() <= WITNESS_MAX_PERIOD_BITS
            && st.q_u64().is_some();
        if witness {
            let q = u128::from(st.q_u64().unwrap_or(0));
            let per = period.to_u128().unwrap_or(u128::MAX);
            for &e in &eps {
                let levels = (1.0 / (4.0 * e) + 1e-12).floor() as u128 + 1;
                total = total.saturating_add((q / 2 * levels).saturating_mul(per));
            }
        }
        plans.push(StagePlan { n, horizons, witness });
    }
    Ok((plans, total))
}

#[derive(PartialEq)]
enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok { Verdict::Pass } else { Verdict::Fail }
    }

    fn and(self, ok: bool) -> Self {
        match (self, ok) {
            (Verdict::Fail, _) | (_, false) => Verdict::Fail,
            _ => Verdict::Pass,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "not_applicable",
        }
    }
}

fn csv_row(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

/// Runs the configured measurements and writes every report file.
pub fn cmd_run(cfg: &ExperimentConfig, allow_over_budget: bool) -> Result<Outcome, CliError> {
    let chain = build_chain(&cfg.profile, cfg.stages.to)?;
    let validation = validate_chain(&chain, &cfg.profile);
    let (plans, estimate) = plan(cfg, &chain)?;
    if estimate > u128::from(cfg.budget) && !allow_over_budget {
        return Err(CliError::new(
            CliError::BUDGET,
            format!(
                "estimated {estimate} orbit evaluations exceed the budget of {} (raise \"budget\" or pass --allow-over-budget)",
                cfg.budget
            ),
        ));
    }
    let eps = cfg.eps_values()?;
    let heps = cfg.hamming_eps()?;
    let specs = cfg.horizon_specs()?;
    let (maps, selections) = stage_maps(&chain, cfg.stages.to, &cfg.construction)?;

    let mut records = Vec::new();
    let mut witness_rows = String::from("stage,eps,points,expected,pairs,separated_pairs,min_distance,verdict\n");
    let mut witness = Verdict::NotApplicable;
    let mut witness_notes = Vec::new();
    let mut hamming_rows = String::from("stage,horizon,eps,count,covered_fraction,samples,growth\n");
    let mut goodwyn_rows = String::from("stage,horizon,eps,hamming_count,cover_count,cell_diameter,holds\n");
    let mut goodwyn = Verdict::NotApplicable;
    let mut sandwich_rows = String::from("stage,next_stage,horizon,eps,lower,middle,upper,holds\n");
    let mut sandwich = Verdict::NotApplicable;
    let mut prev_hamming: BTreeMap<(usize, u64), usize> = BTreeMap::new();
    let mut prev_tables: Option<(u32, Vec<OrbitTable>)> = None;

    for p in &plans {
        let sys = system(&chain, &maps, p.n)?;
        let st = &chain[p.n as usize - 1];
        let mut tables = Vec::new();
        for hp in &p.horizons {
            let bc = BowenConfig::grid(cfg.grid, hp.sampling.clone());
            for &e in &eps {
                bc.check_eps(e)?;
            }
            let table = OrbitTable::of_points(&sys, &bc.points, &hp.sampling);
            let mut covers = Vec::new();
            for &e in &eps {
                let cover = table.min_cover(e).len();
                covers.push(cover);
                for (kind, r, count) in [
                    (CountKind::Separated, e, table.max_separated(e).len()),
                    (CountKind::Separated, 2.0 * e, table.max_separated(2.0 * e).len()),
                    (CountKind::Cover, e, cover),
                ] {
                    records.push(CountRecord { stage: p.n, horizon: hp.horizon.clone(), eps: r, kind, count });
                }
            }
            for &he in &heps {
                let spec = cfg.hamming.as_ref().expect("hamming eps implies a hamming spec");
                let hc = hamming_cover(&sys, &cfg.partition, &hp.sampling, he, spec.samples, cfg.seed)?;
                records.push(CountRecord {
                    stage: p.n,
                    horizon: hp.horizon.clone(),
                    eps: he,
                    kind: CountKind::Hamming,
                    count: hc.count,
                });
                let key = (hp.spec, he.to_bits());
                let growth = prev_hamming
                    .get(&key)
                    .map_or_else(String::new, |&prev| fmt_f64(hc.count as f64 / prev.max(1) as f64));
                prev_hamming.insert(key, hc.count);
                hamming_rows.push_str(&csv_row(&[
                    p.n.to_string(),
                    hp.horizon.to_string(),
                    fmt_f64(he),
                    hc.count.to_string(),
                    fmt_f64(hc.covered_fraction),
                    hc.samples.to_string(),
                    growth,
                ]));
                let diam = cfg.partition.grid_diameter();
                for (i, &e) in eps.iter().enumerate() {
                    if (e - he).abs() < 1e-12 && diam >= 2.0 * he {
                        let holds = hc.count <= covers[i];
                        goodwyn = goodwyn.and(holds);
                        goodwyn_rows.push_str(&csv_row(&[
                            p.n.to_string(),
                            hp.horizon.to_string(),
                            fmt_f64(he),
                            hc.count.to_string(),
                            covers[i].to_string(),
                            fmt_f64(diam),
                            holds.to_string(),
                        ]));
                    }
                }
            }
            tables.push(table);
        }
        if let Some((prev_n, prev)) = &prev_tables {
            for (i, hp) in p.horizons.iter().enumerate() {
                // the previous stage resolves the same horizon spec to the same value only for fixed horizons
                if !matches!(specs[hp.spec], HorizonSpec::Fixed(_)) {
                    continue;
                }
                for &e in &eps {
                    let s = (prev[i].min_cover(4.0 * e).len(), tables[i].min_cover(2.0 * e).len(), prev[i].min_cover(e).len());
                    let holds = s.0 <= s.1 && s.1 <= s.2;
                    sandwich = sandwich.and(holds);
                    sandwich_rows.push_str(&csv_row(&[
                        prev_n.to_string(),
                        p.n.to_string(),
                        hp.horizon.to_string(),
                        fmt_f64(e),
                        s.0.to_string(),
                        s.1.to_string(),
                        s.2.to_string(),
                        holds.to_string(),
                    ]));
                }
            }
        }
        if matches!(cfg.construction, Construction::Untwisted { .. }) {
            if p.witness {
                let q = st.q_u64().unwrap_or(0) as usize;
                for &e in &eps {
                    let w = witness_untwisted(&chain, &sys, e)?;
                    let expected = q / 2 * ((1.0 / (4.0 * e) + 1e-12).floor() as usize + 1);
                    let ok = w.all_separated() && w.count() == expected;
                    witness = witness.and(ok);
                    records.push(CountRecord {
                        stage: p.n,
                        horizon: sys.period.clone(),
                        eps: e,
                        kind: CountKind::Witness,
                        count: w.count(),
                    });
                    witness_rows.push_str(&csv_row(&[
                        p.n.to_string(),
                        fmt_f64(e),
                        w.count().to_string(),
                        expected.to_string(),
                        w.pairs.to_string(),
                        w.separated_pairs.to_string(),
                        fmt_f64(w.min_distance),
                        ok.to_string(),
                    ]));
                }
            } else {
                witness_notes.push(format!("stage {} skipped: period q_{} exceeds 2^32", p.n, p.n + 1));
            }
        }
        prev_tables = Some((p.n, tables));
    }

    let invariant = check_invariants(&records);
    let report = match &invariant {
        Ok(()) => slow_entropy_report(records, &cfg.families, &cfg.t)?,
        // keep the raw counts; the summary reports the violation
        Err(_) => abclab::ComplexityReport { records, ..Default::default() },
    };

    let sampling_note = format!("orbits sampled at up to {} evenly strided times below min(horizon, q_(n+1))", cfg.max_samples);
    let mut w = Writer::new(&cfg.output_dir());
    w.add("counts.csv", report.to_csv(&header(cfg, &[("file", "counts".into()), ("sampling", sampling_note)])));
    w.add("thresholds.csv", report.thresholds_csv(&header(cfg, &[("file", "thresholds".into())])));
    if matches!(cfg.construction, Construction::Untwisted { .. }) {
        w.add("witness.csv", format!("{}{witness_rows}", header(cfg, &[("file", "witness".into())])));
    }
    if !heps.is_empty() {
        w.add("hamming.csv", format!("{}{hamming_rows}", header(cfg, &[("file", "hamming".into())])));
        w.add("goodwyn.csv", format!("{}{goodwyn_rows}", header(cfg, &[("file", "goodwyn".into())])));
    }
    if cfg.stages.to > cfg.stages.from {
        w.add("sandwich.csv", format!("{}{sandwich_rows}", header(cfg, &[("file", "sandwich".into())])));
    }
    let mut words = Verdict::NotApplicable;
    for (sel, n) in selections.iter().zip(2u32..) {
        words = words.and(sel.verified);
        let extra = [("file", format!("words_stage{n}")), ("rounds", sel.rounds.to_string())];
        w.add(format!("words_stage{n}.txt"), format!("{}{}", header(cfg, &extra), sel.to_text()));
    }

    let mut summary = header(cfg, &[("file", "summary".into())]);
    let _ = writeln!(summary, "construction: {}", construction_name(&cfg.construction));
    let _ = writeln!(summary, "stages: {}..{}", cfg.stages.from, cfg.stages.to);
    let _ = writeln!(summary, "estimated_orbit_evaluations: {estimate}");
    let mut props: Vec<(&str, Verdict, String)> = Vec::new();
    let failed: Vec<String> = validation.failures().map(|(n, c)| format!("n={n} {}", c.name)).collect();
    props.push(("parameter_checks", Verdict::of(failed.is_empty()), failed.join("; ")));
    props.push((
        "packing_covering",
        Verdict::of(invariant.is_ok()),
        invariant.as_ref().err().map_or_else(|| "S(2 eps) <= N(eps) <= S(eps)".into(), |e| e.to_string()),
    ));
    props.push(("witness_separation", witness, witness_notes.join("; ")));
    props.push(("sandwich", sandwich, "N_n(4 eps) <= N_(n+1)(2 eps) <= N_n(eps) at fixed horizons".into()));
    props.push(("hamming_below_bowen", goodwyn, "hamming cover <= Bowen cover where cell diameter >= 2 eps".into()));
    props.push(("word_selection", words, String::new()));
    for (name, v, detail) in &props {
        if detail.is_empty() {
            let _ = writeln!(summary, "{name}: {}", v.name());
        } else {
            let _ = writeln!(summary, "{name}: {} ({detail})", v.name());
        }
    }
    w.add("summary.txt", summary.clone());
    let names: Vec<String> = w.names().map(str::to_string).collect();
    let files = w.flush()?;
    let body: String = summary.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    Ok(Outcome { stdout: format!("{body}wrote {}\n", names.join(", ")), files, status: 0 })
}

/// `|||h_m|||_k` for each stage map and `|||H_n|||_k` for each stage.
pub fn cmd_norms(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let chain = build_chain(&cfg.profile, cfg.stages.to)?;
    let (maps, _) = stage_maps(&chain, cfg.stages.to, &cfg.construction)?;
    let ns = &cfg.norms;
    let mut rows: Vec<(String, NormEstimate)> = Vec::new();
    let mut warnings = Vec::new();
    for n in cfg.stages.iter() {
        let h = &maps[n as usize - 2];
        let big = MapNode::compose(maps[..n as usize - 1].to_vec());
        for (name, node) in [(format!("h_{n}"), h), (format!("H_{n}"), &big)] {
            for &k in &ns.k {
                let est = triple_norm(node, k, ns.grid, ns.fd_step)?;
                warnings.extend(est.warnings.iter().map(|w| format!("{name} k={k}: {w}")));
                rows.push((name.clone(), est));
            }
        }
    }
    let csv = norms_csv(&header(cfg, &[("file", "norms".into())]), &rows);
    let mut w = Writer::new(&cfg.output_dir());
    w.add("norms.csv", csv.clone());
    let files = w.flush()?;
    let mut stdout: String = csv.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    for warn in warnings {
        let _ = writeln!(stdout, "warning: {warn}");
    }
    Ok(Outcome { stdout, files, status: 0 })
}

/// Stage parameters and the structure of `H_n`.
pub fn cmd_describe(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let chain = build_chain(&cfg.profile, cfg.stages.to)?;
    let (maps, _) = stage_maps(&chain, cfg.stages.to, &cfg.construction)?;
    let mut out = header(cfg, &[("file", "describe".into())]);
    for n in cfg.stages.iter() {
        let st = &chain[n as usize - 1];
        let _ = writeln!(
            out,
            "stage {n}: q = {}, alpha = {}, eps = {}, k l = {}, l' = {}",
            st.q,
            ratio_string(&st.alpha),
            ratio_string(&st.eps),
            st.kl(),
            st.l_prime
        );
        let _ = writeln!(out, "T_{n} = H_{n} R(alpha_{}) H_{n}^-1, period {}", n + 1, st.next_q());
        out.push_str(&MapNode::compose(maps[..n as usize - 1].to_vec()).describe());
    }
    Ok(Outcome { stdout: out, files: Vec::new(), status: 0 })
}

/// Parameters of a standalone word selection.
#[derive(Clone, Debug, Serialize)]
pub struct WordsRequest {
    pub alphabet: u32,
    pub length: usize,
    pub count: usize,
    pub eps: String,
    pub seed: u64,
    pub retries: u32,
}

pub fn cmd_words(req: &WordsRequest, out: Option<&Path>) -> Result<Outcome, CliError> {
    let eps = parse_real(&req.eps)?;
    let sel = sample_selection(req.alphabet, req.length, req.count, eps, req.seed, req.retries)?;
    let echo = serde_json::to_string(req).expect("request serializes");
    let hash = crate::config::sha256_hex(echo.as_bytes());
    let text = format!(
        "{}{}",
        header_for(&hash, &echo, &[("file", "words".into()), ("rounds", sel.rounds.to_string())]),
        sel.to_text()
    );
    let mut files = Vec::new();
    let stdout = match out {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| CliError::io(p, e))?;
            files.push(p.to_path_buf());
            format!("selected {} words of length {} in {} rounds\n", sel.words.len(), sel.k, sel.rounds)
        }
        None => text,
    };
    Ok(Outcome { stdout, files, status: 0 })
}

/// Re-checks a selection file: exact letter balance and overlap separation.
pub fn cmd_words_verify(path: &Path) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let sel = Selection::from_text(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    verify_selection(&sel.words, sel.s, sel.eps)
        .map_err(|e| CliError::new(CliError::SELECTION, format!("{}: {e}", path.display())))?;
    Ok(Outcome {
        stdout: format!("{}: {} words of length {} verified\n", path.display(), sel.words.len(), sel.k),
        files: Vec::new(),
        status: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StageRange;

    #[test]
    fn budget_estimate_counts_grid_and_witness() {
        let cfg = ExperimentConfig::default();
        let chain = build_chain(&cfg.profile, 2).unwrap();
        let (plans, total) = plan(&cfg, &chain).unwrap();
        assert_eq!(plans.len(), 1);
        assert!(plans[0].witness);
        // 1024 points x (1 + 8 + 4096) samples, plus 12 witness orbits of 4096
        assert_eq!(total, 1024 * (1 + 8 + 4096) + 12 * 4096);
    }

    #[test]
    fn long_periods_skip_the_witness() {
        let cfg = ExperimentConfig { stages: StageRange { from: 2, to: 3 }, ..Default::default() };
        let chain = build_chain(&cfg.profile, 3).unwrap();
        let (plans, _) = plan(&cfg, &chain).unwrap();
        assert!(plans[0].witness);
        assert!(!plans[1].witness);
    }

    #[test]
    fn verdicts_combine() {
        assert!(Verdict::NotApplicable.and(true) == Verdict::Pass);
        assert!(Verdict::Pass.and(false) == Verdict::Fail);
        assert!(Verdict::Fail.and(true) == Verdict::Fail);
    }
}
