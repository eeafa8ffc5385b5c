//! Self-contained oracle checks run by `tfdm verify` and by the acceptance
//! suite. Every check builds its own synthetic inputs from a seed.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{synthetic_dataset, Split};
use crate::error::Result;
use crate::layers::{dropout_multipliers, eml_forward, noise_rng, BatchNormCore, Eml, ForwardCtx};
use crate::models::{build_network, LayerSpec, Network, NetworkConfig};
use crate::opcount::count_ops;
use crate::reference::{self, circular_xcorr, naive_conv2d, random_real, MulCounter};
use crate::spectral::{complex_conj_mul, dft2, idft2, parseval_gap, Dft2Plan};
use crate::tensor::{ComplexTensor4, RealTensor4};
use crate::training::{gradcheck, jitter_params, train_step, GradcheckOptions, Optimizer, OptimizerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub level: Level,
    pub seed: u64,
    /// Negative control: evaluate the cross-correlation identity without
    /// conjugating the first spectrum.
    pub drop_conjugation: bool,
}

impl VerifyOptions {
    pub fn new(level: Level, seed: u64) -> Self {
        Self {
            level,
            seed,
            drop_conjugation: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    fn below(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            measured,
            tolerance,
            passed: measured.is_finite() && measured < tolerance,
            detail,
            seconds: 0.0,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} measured={:.3e} tolerance={:.1e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

fn timed(f: impl FnOnce() -> Result<CheckResult>, name: &'static str) -> CheckResult {
    let t = Instant::now();
    let mut r = f().unwrap_or_else(|e| CheckResult {
        name,
        measured: f64::NAN,
        tolerance: 0.0,
        passed: false,
        detail: format!("error: {e}"),
        seconds: 0.0,
    });
    r.seconds = t.elapsed().as_secs_f64();
    r
}

/// Run every check at `opts.level`.
pub fn run_suite(opts: &VerifyOptions) -> Vec<CheckResult> {
    let s = opts.seed;
    let full = opts.level == Level::Full;
    vec![
        timed(|| check_xcorr_theorem(100, 16, s, opts.drop_conjugation), "xcorr_theorem"),
        timed(|| check_eml_conv_interior(8, 3, if full { 4 } else { 1 }, s), "eml_conv_interior"),
        timed(|| check_gradients(s, full), "gradcheck"),
        timed(|| check_fixation(s), "weight_fixation"),
        timed(|| check_dropout_stats(1_000_000, 0.5, s), "dropout_stats"),
        timed(|| check_parseval(s), "parseval"),
        timed(|| check_freq_bn_scaling(s), "freq_bn_scaling"),
        timed(|| check_bridge_round_trip(s), "bridge_round_trip"),
        timed(check_opcount_ratio, "opcount_ratio"),
        timed(|| check_determinism(s, if full { 20 } else { 3 }), "determinism"),
    ]
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter().zip(want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

/// `idft2(conj(dft2 u)·dft2 v)` against the direct circular
/// cross-correlation for `pairs` random real planes up to `max`×`max`.
pub fn check_xcorr_theorem(pairs: usize, max: usize, seed: u64, drop_conjugation: bool) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_at = (0, 0);
    for i in 0..pairs {
        let (m, n) = (rng.random_range(1..=max), rng.random_range(1..=max));
        let u = random_real::<f64>([1, m, n, 1], rng.random());
        let v = random_real::<f64>([1, m, n, 1], rng.random());
        let mut fu = dft2(&u)?;
        if drop_conjugation {
            fu = fu.conj();
        }
        let prod = complex_conj_mul(&fu, &dft2(&v)?)?;
        let got = idft2(&prod)?;
        let want = circular_xcorr(u.data(), v.data(), m, n);
        let e = rel_err(got.re.data(), &want);
        if e > worst {
            worst = e;
            worst_at = (i, m * 100 + n);
        }
    }
    Ok(CheckResult::below(
        "xcorr_theorem",
        worst,
        1e-4,
        format!("pairs={pairs} worst_pair={} size={}x{}", worst_at.0, worst_at.1 / 100, worst_at.1 % 100),
    ))
}

/// An EML built from a K×K filter against the zero-padded `same`
/// convolution on every non-wrapping interior position. The EML output at
/// index `m` is the convolution at the reflected offset `p − m`.
pub fn check_eml_conv_interior(n: usize, k: usize, trials: usize, seed: u64) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for t in 0..trials as u64 {
        let (cin, cout) = (2, 3);
        let x = random_real::<f64>([1, n, n, cin], seed.wrapping_add(2 * t));
        let f = random_real::<f64>([k, k, cin, cout], seed.wrapping_add(2 * t + 1));
        let mut eml = Eml::from_filter(&f, n, n)?;
        let y = idft2(&eml_forward(&dft2(&x)?, &mut eml)?)?;
        let conv = naive_conv2d(&x, &f, &vec![0.0; cout], 1, &MulCounter::new());
        let (_, pad) = reference::same_padding(n, k, 1);
        let (mut got, mut want) = (Vec::new(), Vec::new());
        for sy in pad..=n - k + pad {
            for sx in pad..=n - k + pad {
                for co in 0..cout {
                    let my = (n + pad - sy) % n;
                    let mx = (n + pad - sx) % n;
                    got.push(y.re.get([0, my, mx, co]));
                    want.push(conv.get([0, sy, sx, co]));
                }
            }
        }
        worst = worst.max(rel_err(&got, &want));
    }
    Ok(CheckResult::below(
        "eml_conv_interior",
        worst,
        1e-4,
        format!("plane={n}x{n} k={k} trials={trials}"),
    ))
}

fn mini_config(name: &str, input: [usize; 3], layers: Vec<LayerSpec>) -> NetworkConfig {
    NetworkConfig {
        name: name.into(),
        input,
        classes: 3,
        assumed: false,
        assumptions: vec![],
        layers,
    }
}

/// Two small mixture networks that between them contain every layer kind:
/// a time front end bridged into an EML stack ending in the two-branch
/// head, and one bridged back to the time domain ending in a dense layer.
/// Frequency planes stay odd-sized at the head: the spectrum of a real
/// 2×2 plane has no imaginary part, which would park the imaginary branch
/// exactly on its ReLU kink.
pub fn mini_tfdmnets() -> Vec<NetworkConfig> {
    use LayerSpec::*;
    vec![
        mini_config(
            "mini-tfdm-head",
            [6, 6, 1],
            vec![
                Conv { k: 3, channels: 2, stride: 1 },
                Relu,
                BridgeToFreq,
                Eml { k: 3, channels: 3 },
                FreqBn,
                SplitRelu,
                FreqMaxpool { window: 2, stride: 2 },
                FreqDropout { p: 0.4 },
                FlattenHead { hidden: vec![4] },
            ],
        ),
        mini_config(
            "mini-tfdm-tail",
            [6, 6, 2],
            vec![
                Conv { k: 3, channels: 4, stride: 1 },
                Bn,
                Relu,
                Maxpool { window: 2, stride: 2 },
                Dropout { p: 0.3 },
                BridgeToFreq,
                Eml { k: 2, channels: 2 },
                FreqBn,
                SplitRelu,
                BridgeToTime,
                Relu,
                Dense { units: 3 },
            ],
        ),
    ]
}

/// Full finite-difference gradcheck of [`mini_tfdmnets`] in 64-bit.
pub fn check_gradients(seed: u64, full: bool) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    let (mut checked, mut kinks) = (0, 0);
    let mut kinks_ok = true;
    let mut detail_kinks = Vec::new();
    for (i, cfg) in mini_tfdmnets().iter().enumerate() {
        let net_seed = seed.wrapping_add(i as u64);
        let mut net = build_network::<f64>(cfg, net_seed)?;
        jitter_params(&mut net, 0.2, net_seed);
        let [h, w, c] = cfg.input;
        let batch = if full { 4 } else { 3 };
        let x = random_real::<f64>([batch, h, w, c], net_seed ^ 0x5eed);
        let labels: Vec<usize> = (0..batch).map(|b| b % cfg.classes).collect();
        let opts = GradcheckOptions {
            seed: net_seed,
            ..GradcheckOptions::default()
        };
        let report = gradcheck(&mut net, &x, &labels, &opts)?;
        checked += report.layers.iter().map(|l| l.checked).sum::<usize>();
        kinks += report.kinks();
        kinks_ok &= report.passed() || report.max_rel_error() >= report.tolerance;
        for l in report.layers.iter().filter(|l| l.checked > 0 && l.kinks >= l.checked) {
            detail_kinks.push(format!("{}:{}", cfg.name, l.kind));
        }
        for l in &report.layers {
            if l.max_rel_error > worst {
                worst = l.max_rel_error;
                detail = format!("worst={}:{}:{}", cfg.name, l.kind, l.worst);
            }
        }
    }
    if !detail_kinks.is_empty() {
        detail = format!("{detail} all_kinked=[{}]", detail_kinks.join(","));
    }
    let mut r = CheckResult::below("gradcheck", worst, 1e-4, format!("entries={checked} kinks={kinks} {detail}"));
    r.passed &= kinks_ok;
    Ok(r)
}

/// Perturb EML weights with unconstrained spectral noise, fix them, and
/// measure the time-domain energy left outside the K×K corner.
pub fn check_fixation(seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut before = f64::INFINITY;
    for &(h, w, k, cin, cout) in &[(8, 8, 3, 2, 3), (7, 5, 2, 3, 2), (16, 16, 5, 1, 4)] {
        let mut eml = Eml::<f64>::new_random(h, w, k, cin, cout, &mut rng)?;
        for v in eml.weights.values.re.data_mut().iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        for v in eml.weights.values.im.data_mut().iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        let plan = Dft2Plan::new(h, w);
        before = before.min(eml.weights.outside_energy_fraction(&plan)?);
        eml.fix()?;
        worst = worst.max(eml.weights.outside_energy_fraction(&plan)?);
    }
    Ok(CheckResult::below(
        "weight_fixation",
        worst,
        1e-5,
        format!("outside_energy_before>={before:.3}"),
    ))
}

/// Moments of the multiplicative Gaussian dropout noise at drop rate `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutStats {
    pub mean: f64,
    pub std: f64,
    pub mass_half_to_three_halves: f64,
}

pub fn dropout_stats(n: usize, p: f64, seed: u64) -> DropoutStats {
    let draws = dropout_multipliers(n, p, &mut noise_rng(seed, 0, 0));
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    let inside = draws.iter().filter(|d| (0.5..=1.5).contains(*d)).count();
    DropoutStats {
        mean,
        std: var.sqrt(),
        mass_half_to_three_halves: inside as f64 / n as f64,
    }
}

/// Mean 1 ± 0.01, std p/2 ± 0.01, and 95.4% ± 0.5% of mass in [0.5, 1.5].
/// The measured value is the largest deviation as a fraction of its tolerance.
pub fn check_dropout_stats(n: usize, p: f64, seed: u64) -> Result<CheckResult> {
    let s = dropout_stats(n, p, seed);
    let score = [
        (s.mean - 1.0).abs() / 0.01,
        (s.std - p / 2.0).abs() / 0.01,
        (s.mass_half_to_three_halves - 0.954).abs() / 0.005,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(CheckResult::below(
        "dropout_stats",
        score,
        1.0,
        format!(
            "draws={n} mean={:.5} std={:.5} mass={:.5}",
            s.mean, s.std, s.mass_half_to_three_halves
        ),
    ))
}

pub fn check_parseval(seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (m, n) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let x = random_real::<f64>([2, m, n, 3], rng.random());
        worst = worst.max(parseval_gap(&x)?);
    }
    Ok(CheckResult::below("parseval", worst, 1e-10, "planes=20".into()))
}

/// Per-channel batch statistics including the BN epsilon: (mean, σ).
fn bn_stats(x: &RealTensor4<f64>, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let (mean, var) = BatchNormCore::<f64>::batch_stats(x);
    (mean, var.iter().map(|v| (v + eps).sqrt()).collect())
}

/// The two sides of the frequency/time BN correspondence on the real
/// plane: `(freq, time)`, where `freq` is frequency BN of `dft2(u).re` with
/// scale `γ'` and shift `β'`, and `time` is `dft2(BN(u)).re` with unit
/// scale and zero shift.
fn freq_bn_sides(u: &RealTensor4<f64>, gamma: &[f64], beta: &[f64]) -> Result<(RealTensor4<f64>, RealTensor4<f64>)> {
    let ctx = ForwardCtx::train(0, 0);
    let c = u.channels();
    let mut time_bn = BatchNormCore::<f64>::new(c);
    let time = dft2(&time_bn.forward(u, &ctx)?)?.re;
    let mut freq_bn = BatchNormCore::<f64>::new(c);
    freq_bn.gamma = gamma.to_vec();
    freq_bn.beta = beta.to_vec();
    let freq = freq_bn.forward(&dft2(u)?.re, &ctx)?;
    Ok((freq, time))
}

/// Scale correction `C_real = σ_B²/σ_F²` per channel, where σ_B is the
/// time-domain batch deviation and σ_F the deviation of the real spectrum.
pub fn c_real(u: &RealTensor4<f64>) -> Result<Vec<f64>> {
    let eps = crate::layers::BN_EPS;
    let (_, sb) = bn_stats(u, eps);
    let (_, sf) = bn_stats(&dft2(u)?.re, eps);
    Ok(sb.iter().zip(&sf).map(|(b, f)| (b / f).powi(2)).collect())
}

/// The literal correspondence: frequency BN of the real plane with
/// `γ' = γ/√C_real`, `β' = β = 0`, against the DFT of time BN. Frequency
/// BN subtracts the batch mean of the spectrum from every bin, while time
/// BN only moves the DC bin, so this holds only when that mean vanishes.
pub fn check_freq_bn_literal(seed: u64) -> Result<CheckResult> {
    let u = random_real::<f64>([8, 8, 8, 4], seed);
    let c = c_real(&u)?;
    let gamma: Vec<f64> = c.iter().map(|c| 1.0 / c.sqrt()).collect();
    let (freq, time) = freq_bn_sides(&u, &gamma, &vec![0.0; c.len()])?;
    Ok(CheckResult::below(
        "freq_bn_literal",
        rel_err(freq.data(), time.data()),
        1e-4,
        "gamma'=gamma/sqrt(C_real) beta=beta'=0, all bins".into(),
    ))
}

/// The part of the correspondence that holds exactly: with
/// `γ' = σ_F/σ_B` and `β' = μ_F/σ_B`, every non-DC bin of the real plane
/// agrees, and the DC bins differ by exactly `H·W·μ_B/σ_B`.
pub fn check_freq_bn_scaling(seed: u64) -> Result<CheckResult> {
    let eps = crate::layers::BN_EPS;
    let u = random_real::<f64>([8, 8, 8, 4], seed);
    let [b, h, w, c] = u.shape();
    let (mb, sb) = bn_stats(&u, eps);
    let (mf, sf) = bn_stats(&dft2(&u)?.re, eps);
    let gamma: Vec<f64> = (0..c).map(|i| sf[i] / sb[i]).collect();
    let beta: Vec<f64> = (0..c).map(|i| mf[i] / sb[i]).collect();
    let (freq, time) = freq_bn_sides(&u, &gamma, &beta)?;
    let mut want = time.clone();
    for bi in 0..b {
        for ci in 0..c {
            let v = want.get([bi, 0, 0, ci]) + (h * w) as f64 * mb[ci] / sb[ci];
            want.set([bi, 0, 0, ci], v);
        }
    }
    Ok(CheckResult::below(
        "freq_bn_scaling",
        rel_err(freq.data(), want.data()),
        1e-4,
        "non-DC bins equal, DC offset H*W*mu_B/sigma_B".into(),
    ))
}

/// Real input → dft2 → Re(idft2) recovers the input, and the imaginary
/// residual of the round trip vanishes.
pub fn check_bridge_round_trip(seed: u64) -> Result<CheckResult> {
    let x = random_real::<f64>([3, 9, 12, 4], seed);
    let spec: ComplexTensor4<f64> = crate::layers::bridge_to_freq(&x)?;
    let (back, residual) = crate::layers::bridge_to_time(&spec)?;
    let e = reference::max_rel_diff_real(&back, &x).max(residual);
    Ok(CheckResult::below("bridge_round_trip", e, 1e-10, format!("residual={residual:.2e}")))
}

/// Per-layer EML/conv multiply ratio is 4/K² for K = 1..=7.
pub fn check_opcount_ratio() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for k in 1..=7 {
        let layer = |spec: Vec<LayerSpec>| mini_config("ratio", [16, 16, 8], spec);
        let conv = count_ops(&layer(vec![LayerSpec::Conv { k, channels: 8, stride: 1 }]))?;
        let eml = count_ops(&layer(vec![LayerSpec::BridgeToFreq, LayerSpec::Eml { k, channels: 8 }]))?;
        let ratio = eml.rows[1].mult_ops as f64 / conv.rows[0].mult_ops as f64;
        worst = worst.max((ratio - 4.0 / (k * k) as f64).abs());
    }
    Ok(CheckResult::below("opcount_ratio", worst, 1e-15, "k=1..7".into()))
}

fn short_run(seed: u64, steps: u64) -> Result<Vec<u64>> {
    let cfg = &mini_tfdmnets()[0];
    let mut net: Network<f32> = build_network(cfg, seed)?;
    let mut opt = Optimizer::new(OptimizerConfig::rmsprop(1e-3));
    let ds = synthetic_dataset(64, cfg.input, cfg.classes, seed, seed + 1, Split::Train)?;
    let mut trace = Vec::new();
    for step in 0..steps {
        let rows: Vec<usize> = (0..8).map(|i| (step as usize * 8 + i) % ds.len()).collect();
        let (x, labels) = ds.batch::<f32>(&rows);
        let (loss, _) = train_step(&mut net, &mut opt, &x, &labels, step, 1e-3)?;
        trace.push(loss.to_bits());
    }
    net.visit_params(&mut |p| trace.extend(p.value.iter().map(|v| v.to_bits() as u64)));
    Ok(trace)
}

/// Two identical seeded training runs agree bit for bit.
pub fn check_determinism(seed: u64, steps: u64) -> Result<CheckResult> {
    let a = short_run(seed, steps)?;
    let b = short_run(seed, steps)?;
    let diffs = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    Ok(CheckResult::below(
        "determinism",
        diffs as f64,
        0.5,
        format!("steps={steps} compared={}", a.len()),
    ))
}
