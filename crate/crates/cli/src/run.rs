use std::collections::BTreeMap;

use dqma::adversary::{realize, AdversaryFamily};
use dqma::ff::SetEqInstance;
use dqma::netsim::{estimate_acceptance, Accounting, Acceptance, Mode, ProtocolOutcome, Transcript};
use dqma::primitives::phi_plus;
use dqma::protocols::{
    fuzz_counting, honest_counting, honest_lists, locc_convert, repeated_acceptance, run_classical_seteq_counting,
    run_classical_seteq_trivial, run_seteq, run_sgdi, run_sgdiv, run_zh_locc, sgdi_descriptor, sgdiv_descriptor,
    seteq_bounds, swap_equality_base, zh_classical_bits, zh_descriptor, SgdiInput,
};
use dqma::qcore::C64;
use dqma::{Error, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    ClassicalParams, ClassicalVariant, Config, InstanceParams, LineParams, LoccParams, ModeName, ProtocolName,
    QubitSpec, SeteqParams, ZhParams, CLASSICAL_KEYS, INSTANCE_KEYS, LINE_KEYS, LOCC_KEYS, SETEQ_KEYS, ZH_KEYS,
};

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub protocol: &'static str,
    pub strategy: &'static str,
    pub mode: ModeName,
    pub seed: u64,
    pub trials: usize,
    pub accept_probability: f64,
    pub acceptance: Acceptance,
    pub output_fidelity: Option<f64>,
    pub accounting: Accounting,
    pub details: BTreeMap<String, Value>,
    pub transcript_sample: Option<Transcript>,
    pub config: Config,
    pub generated_unix: u64,
}

impl RunResult {
    pub fn ci(&self) -> (f64, f64) {
        match self.acceptance {
            Acceptance::Exact { probability } => (probability, probability),
            Acceptance::Estimate { ci_low, ci_high, .. } => (ci_low, ci_high),
        }
    }
}

type Runner<'a> = Box<dyn Fn(Mode) -> Result<ProtocolOutcome> + Sync + 'a>;

struct Job<'a> {
    run: Runner<'a>,
    target: Option<DVector<C64>>,
    details: BTreeMap<String, Value>,
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn evaluate(cfg: &Config) -> Result<RunResult> {
    if cfg.protocol == ProtocolName::SeteqClassical {
        return classical(cfg);
    }
    let job = build(cfg)?;
    let (acceptance, output_fidelity, accounting, transcript) = match cfg.mode {
        ModeName::Exact => {
            let out = (job.run)(Mode::Exact)?;
            let fid = match (&job.target, &out.output) {
                (Some(t), Some(o)) => Some(o.overlap_with_pure(t).clamp(0.0, 1.0).sqrt()),
                _ => None,
            };
            let t = out.transcripts.first().cloned();
            (out.acceptance, fid, out.accounting, t)
        }
        ModeName::Sample => {
            let est = estimate_acceptance(
                |seed| Ok((job.run)(Mode::Sampled { seed })?.accept_probability() > 0.5),
                cfg.trials,
                cfg.seed,
            )?;
            let one = (job.run)(Mode::Sampled { seed: cfg.seed })?;
            let acc = Acceptance::Estimate {
                p_hat: est.p_hat,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                trials: est.trials,
                accepted: est.accepted,
            };
            (acc, None, one.accounting, one.transcripts.into_iter().next())
        }
    };
    Ok(RunResult {
        protocol: cfg.protocol.as_str(),
        strategy: cfg.strategy.name(),
        mode: cfg.mode,
        seed: cfg.seed,
        trials: if cfg.mode == ModeName::Exact { 0 } else { cfg.trials },
        accept_probability: acceptance.value(),
        acceptance,
        output_fidelity,
        accounting,
        details: job.details,
        transcript_sample: transcript,
        config: cfg.clone(),
        generated_unix: now(),
    })
}

fn keys(groups: &[&[&'static str]]) -> Vec<&'static str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

fn line_input(cfg: &Config, p: &LineParams, columns: bool) -> Result<SgdiInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.instance_seed.unwrap_or(cfg.seed));
    let mut input = SgdiInput::random(p.r, p.n, &mut rng)?.with_v_r_flips(p.v_r_flips);
    if columns {
        input = input.with_columns(p.k.unwrap_or(1), p.m.unwrap_or(0));
    }
    Ok(input)
}

fn instance(cfg: &Config, p: &InstanceParams) -> Result<SetEqInstance> {
    if let Some(inst) = &p.instance {
        inst.validate()?;
        return Ok(inst.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.instance_seed.unwrap_or(cfg.seed));
    let width = p.c_tilde * (p.ell * (p.r + 1)) as f64;
    let universe = match (p.universe, p.p) {
        (Some(u), _) => u,
        (None, Some(q)) => (q as f64 / width).floor() as u64,
        (None, None) => 2,
    };
    if universe == 0 {
        return Err(Error::Config(format!(
            "p = {} leaves an empty universe at c̃ = {}, ℓ = {}, r = {}",
            p.p.unwrap_or(0),
            p.c_tilde,
            p.ell,
            p.r
        )));
    }
    let mut inst = SetEqInstance::random(&mut rng, p.r, p.ell, universe, p.c_tilde, p.equal)?;
    if let Some(q) = p.p {
        inst.p = q;
        inst.validate()?;
    }
    Ok(inst)
}

fn qubit(spec: &QubitSpec) -> Result<DVector<C64>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps: Vec<(f64, f64)> = match spec {
        QubitSpec::Named(n) => match n.as_str() {
            "zero" => vec![(1.0, 0.0), (0.0, 0.0)],
            "one" => vec![(0.0, 0.0), (1.0, 0.0)],
            "plus" => vec![(h, 0.0), (h, 0.0)],
            "minus" => vec![(h, 0.0), (-h, 0.0)],
            other => return Err(Error::Config(format!("unknown qubit state `{other}`"))),
        },
        QubitSpec::Amplitudes(a) => a.iter().map(|z| (z[0], z[1])).collect(),
    };
    if amps.len() != 2 {
        return Err(Error::Config(format!("a qubit needs 2 amplitudes, got {}", amps.len())));
    }
    let v = DVector::from_iterator(2, amps.into_iter().map(|(re, im)| C64::new(re, im)));
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("qubit amplitudes have norm {norm}")));
    }
    Ok(v)
}

fn build(cfg: &Config) -> Result<Job<'static>> {
    let family = cfg.strategy.clone();
    match cfg.protocol {
        ProtocolName::Sgdiv | ProtocolName::Sgdi => {
            let columns = cfg.protocol == ProtocolName::Sgdi;
            let p: LineParams = cfg.params(LINE_KEYS)?;
            if !columns && (p.k.is_some() || p.m.is_some()) {
                return Err(Error::Config("params: k and m only apply to sgdi".into()));
            }
            let input = line_input(cfg, &p, columns)?;
            let desc = if columns { sgdi_descriptor(&input)? } else { sgdiv_descriptor(&input)? };
            let strategy = realize(&family, &desc)?;
            let target = input.target()?;
            let details = BTreeMap::from([
                ("r".into(), json!(input.r)),
                ("n".into(), json!(input.n)),
                ("k".into(), json!(input.k)),
                ("m".into(), json!(input.m)),
            ]);
            let run: Runner = if columns {
                Box::new(move |mode| run_sgdi(&input, &strategy, mode))
            } else {
                Box::new(move |mode| run_sgdiv(&input, &strategy, mode))
            };
            Ok(Job { run, target: Some(target), details })
        }
        ProtocolName::Seteq => {
            let p: SeteqParams = cfg.params(&keys(&[INSTANCE_KEYS, SETEQ_KEYS]))?;
            let inst = instance(cfg, &p.instance)?;
            let b = seteq_bounds(&inst);
            let reps = p.repetitions;
            let details = BTreeMap::from([
                ("p".into(), json!(inst.p)),
                ("universe".into(), json!(inst.universe)),
                ("equal".into(), json!(inst.is_equal())),
                ("completeness_bound".into(), json!(b.completeness)),
                ("soundness_bound".into(), json!(b.soundness)),
                ("repetitions".into(), json!(reps)),
                ("instance".into(), serde_json::to_value(&inst)?),
            ]);
            let (k, m) = (p.k, p.m);
            let run: Runner = Box::new(move |mode| {
                let mut out = run_seteq(&inst, &family, mode, k, m)?;
                if reps > 1 {
                    if let Acceptance::Exact { probability } = out.acceptance {
                        out.acceptance = Acceptance::Exact {
                            probability: repeated_acceptance(probability, reps as u32),
                        };
                    } else {
                        for i in 1..reps {
                            let again = run_seteq(&inst, &family, resample(mode, i), k, m)?;
                            if again.accept_probability() < 0.5 {
                                out.acceptance = again.acceptance;
                            }
                        }
                    }
                }
                Ok(out)
            });
            Ok(Job { run, target: None, details })
        }
        ProtocolName::ZhLocc => {
            let p: ZhParams = cfg.params(ZH_KEYS)?;
            let strategy = realize(&family, &zh_descriptor(p.n)?)?;
            let details = BTreeMap::from([
                ("n".into(), json!(p.n)),
                ("classical_bits".into(), json!(zh_classical_bits(p.n))),
            ]);
            let n = p.n;
            Ok(Job {
                run: Box::new(move |mode| run_zh_locc(n, &strategy, mode)),
                target: Some(phi_plus()),
                details,
            })
        }
        ProtocolName::LoccConvert => {
            let p: LoccParams = cfg.params(LOCC_KEYS)?;
            let base = swap_equality_base(qubit(&p.m0)?, qubit(&p.m1)?)?;
            let base_p = base
                .run(&realize(&AdversaryFamily::Honest, &base.descriptor()?)?, Mode::Exact)?
                .accept_probability();
            let conv = locc_convert(base, p.gamma, p.n)?;
            let strategy = realize(&family, &conv.descriptor()?)?;
            let declared = conv.declared()?;
            let details = BTreeMap::from([
                ("n".into(), json!(p.n)),
                ("gamma".into(), json!(conv.gamma)),
                ("epsilon".into(), json!(conv.epsilon)),
                ("base_accept_probability".into(), json!(base_p)),
                ("declared_certificate_per_node".into(), json!(declared.certificate_per_node)),
                ("declared_classical_bits_per_edge".into(), json!(declared.classical_bits_per_edge)),
            ]);
            Ok(Job {
                run: Box::new(move |mode| conv.run(&strategy, mode)),
                target: None,
                details,
            })
        }
        ProtocolName::SeteqClassical => unreachable!("handled separately"),
    }
}

fn resample(mode: Mode, i: usize) -> Mode {
    match mode {
        Mode::Sampled { seed } => Mode::Sampled {
            seed: dqma::netsim::trial_seed(seed, i as u64),
        },
        m => m,
    }
}

fn classical(cfg: &Config) -> Result<RunResult> {
    let p: ClassicalParams = cfg.params(&keys(&[INSTANCE_KEYS, CLASSICAL_KEYS]))?;
    let inst = instance(cfg, &p.instance)?;
    if !matches!(cfg.strategy, AdversaryFamily::Honest) {
        return Err(Error::Config(format!(
            "seteq-classical takes the honest strategy, got `{}`; use params.fuzz for corrupted certificates",
            cfg.strategy.name()
        )));
    }
    let honest = match p.variant {
        ClassicalVariant::Counting => run_classical_seteq_counting(&inst, &honest_counting(&inst))?,
        ClassicalVariant::Trivial => run_classical_seteq_trivial(&inst, &honest_lists(&inst))?,
    };
    let mut details = BTreeMap::from([
        ("variant".into(), serde_json::to_value(p.variant)?),
        ("equal".into(), json!(inst.is_equal())),
        ("verdict".into(), json!(honest.verdict)),
        ("consistent".into(), json!(honest.consistent)),
        ("universe".into(), json!(inst.universe)),
        ("certificate_bits".into(), json!(honest.certificate_bits)),
    ]);
    if p.fuzz > 0 {
        if p.variant != ClassicalVariant::Counting {
            return Err(Error::Config("params.fuzz is only supported for the counting variant".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (mut passed, mut wrong) = (0usize, 0usize);
        for _ in 0..p.fuzz {
            let out = run_classical_seteq_counting(&inst, &fuzz_counting(&inst, &mut rng))?;
            if out.all_consistent() {
                passed += 1;
                if out.verdict != inst.is_equal() {
                    wrong += 1;
                }
            }
        }
        details.insert("fuzzed".into(), json!(p.fuzz));
        details.insert("fuzzed_consistent".into(), json!(passed));
        details.insert("fuzzed_wrong_verdicts".into(), json!(wrong));
    }
    let prob = if honest.accepted { 1.0 } else { 0.0 };
    Ok(RunResult {
        protocol: cfg.protocol.as_str(),
        strategy: cfg.strategy.name(),
        mode: cfg.mode,
        seed: cfg.seed,
        trials: 0,
        accept_probability: prob,
        acceptance: Acceptance::Exact { probability: prob },
        output_fidelity: None,
        accounting: Accounting {
            classical_bits_per_edge: honest.message_bits,
            total_classical_bits: honest.message_bits * inst.r,
            ..Accounting::default()
        },
        details,
        transcript_sample: None,
        config: cfg.clone(),
        generated_unix: now(),
    })
}
