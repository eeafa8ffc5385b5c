//! Analytic operation counts for one inference forward pass.
//!
//! Headline numbers are real multiplications; additions are tallied in a
//! separate column. A complex multiply costs 4 real multiplies. A 2D DFT of
//! an N-point plane costs `c_fft · N · log2 N` real operations, split into
//! multiplies and adds by [`FftCost`]; only the multiply share enters the
//! headline. Weight fixation runs once per optimizer step and is reported
//! as a training cost, not part of the forward total.

use std::fmt::Write;

use crate::error::Result;
use crate::models::{Domain, LayerSpec, LayerTrace, NetworkConfig};

/// Real operations per `N · log2 N` for one complex 2D DFT.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FftCost {
    pub mul: f64,
    pub add: f64,
}

impl Default for FftCost {
    /// The standard 5·N·log2 N real-FLOP estimate: 2 multiplies and
    /// 3 additions per butterfly-point.
    fn default() -> Self {
        Self { mul: 2.0, add: 3.0 }
    }
}

impl FftCost {
    pub fn total(&self) -> f64 {
        self.mul + self.add
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpRow {
    pub name: String,
    pub kind: &'static str,
    pub domain: Domain,
    pub mult_ops: u64,
    pub dft_ops: u64,
    pub add_ops: u64,
    pub params: u64,
}

impl OpRow {
    pub fn total(&self) -> u64 {
        self.mult_ops + self.dft_ops
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpCountReport {
    pub network: String,
    pub fft: FftCost,
    pub rows: Vec<OpRow>,
    /// Weight-fixation multiplies per optimizer step, per EML row name.
    pub fixation_per_step: Vec<(String, u64)>,
}

/// DFT cost (multiplies, adds) of `planes` planes of `h × w` points.
fn dft_cost(fft: &FftCost, h: usize, w: usize, planes: usize) -> (u64, u64) {
    let n = (h * w) as f64;
    let base = n * n.log2() * planes as f64;
    ((fft.mul * base).round() as u64, (fft.add * base).round() as u64)
}

fn row_for(t: &LayerTrace, fft: &FftCost) -> OpRow {
    let (i, o) = (t.input, t.output);
    let mut row = OpRow {
        name: format!("{:02}.{}", t.index, t.spec.kind()),
        kind: t.spec.kind(),
        domain: t.spec.domain(),
        mult_ops: 0,
        dft_ops: 0,
        add_ops: 0,
        params: 0,
    };
    let (hi, wi, ci) = (i.height as u64, i.width as u64, i.channels as u64);
    let (ho, wo, co) = (o.height as u64, o.width as u64, o.channels as u64);
    match &t.spec {
        LayerSpec::Conv { k, .. } => {
            let k2 = (*k * *k) as u64;
            row.mult_ops = k2 * ho * wo * ci * co;
            row.add_ops = row.mult_ops;
            row.params = k2 * ci * co + co;
        }
        LayerSpec::Eml { k, .. } => {
            row.mult_ops = 4 * hi * wi * ci * co;
            row.add_ops = co * (ci - 1) * 2 * hi * wi;
            row.params = (*k * *k) as u64 * ci * co;
        }
        LayerSpec::Bn => {
            row.mult_ops = hi * wi * ci;
            row.add_ops = hi * wi * ci;
            row.params = 2 * ci;
        }
        LayerSpec::FreqBn => {
            row.mult_ops = 2 * hi * wi * ci;
            row.add_ops = 2 * hi * wi * ci;
            row.params = 4 * ci;
        }
        LayerSpec::BridgeToFreq | LayerSpec::BridgeToTime => {
            let (m, a) = dft_cost(fft, i.height, i.width, i.channels);
            row.dft_ops = m;
            row.add_ops = a;
        }
        LayerSpec::FreqMaxpool { .. } => {
            let (m1, a1) = dft_cost(fft, i.height, i.width, i.channels);
            let (m2, a2) = dft_cost(fft, o.height, o.width, o.channels);
            row.dft_ops = m1 + m2;
            row.add_ops = a1 + a2;
        }
        LayerSpec::Dense { units } => {
            let f = i.numel() as u64;
            let u = *units as u64;
            row.mult_ops = f * u;
            row.add_ops = f * u;
            row.params = f * u + u;
        }
        LayerSpec::FlattenHead { hidden } => {
            let mut fan_in = i.numel() as u64;
            let mut branch = 0;
            let mut params = 0;
            for &h in hidden {
                branch += fan_in * h as u64;
                params += fan_in * h as u64 + h as u64;
                fan_in = h as u64;
            }
            let fin = 2 * fan_in * co;
            row.mult_ops = 2 * branch + fin;
            row.add_ops = row.mult_ops;
            row.params = 2 * params + fin + co;
        }
        LayerSpec::Relu
        | LayerSpec::SplitRelu
        | LayerSpec::Maxpool { .. }
        | LayerSpec::Dropout { .. }
        | LayerSpec::FreqDropout { .. } => {}
    }
    row
}

/// Per-layer counts for `cfg`. The layer chain must trace; a config with
/// no layers yields an empty report.
pub fn count_ops(cfg: &NetworkConfig) -> Result<OpCountReport> {
    count_ops_with(cfg, FftCost::default())
}

pub fn count_ops_with(cfg: &NetworkConfig, fft: FftCost) -> Result<OpCountReport> {
    let trace = cfg.trace()?;
    let rows: Vec<OpRow> = trace.iter().map(|t| row_for(t, &fft)).collect();
    let fixation_per_step = trace
        .iter()
        .filter_map(|t| match t.spec {
            LayerSpec::Eml { .. } => {
                let planes = t.input.channels * t.output.channels;
                // inverse transform, mask, forward transform
                let (m, _) = dft_cost(&fft, t.input.height, t.input.width, planes);
                Some((format!("{:02}.eml", t.index), 2 * m))
            }
            _ => None,
        })
        .collect();
    Ok(OpCountReport {
        network: cfg.name.clone(),
        fft,
        rows,
        fixation_per_step,
    })
}

impl OpCountReport {
    pub fn total(&self) -> u64 {
        self.rows.iter().map(OpRow::total).sum()
    }

    pub fn total_mult(&self) -> u64 {
        self.rows.iter().map(|r| r.mult_ops).sum()
    }

    pub fn total_dft(&self) -> u64 {
        self.rows.iter().map(|r| r.dft_ops).sum()
    }

    pub fn total_adds(&self) -> u64 {
        self.rows.iter().map(|r| r.add_ops).sum()
    }

    pub fn domain_total(&self, d: Domain) -> u64 {
        self.rows.iter().filter(|r| r.domain == d).map(OpRow::total).sum()
    }

    pub fn fixation_total(&self) -> u64 {
        self.fixation_per_step.iter().map(|(_, v)| v).sum()
    }

    pub fn convention(&self) -> String {
        format!(
            "real multiplies; complex multiply = 4; DFT = c_fft*N*log2(N) with c_fft = {} ({} multiplies + {} adds, multiplies counted); adds reported separately",
            self.fft.total(),
            self.fft.mul,
            self.fft.add
        )
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# {}: {}\nlayer,kind,domain,mult_ops,dft_ops\n", self.network, self.convention());
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.name, r.kind, r.domain, r.mult_ops, r.dft_ops);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("network: {}\nconvention: {}\n", self.network, self.convention());
        let _ = writeln!(
            s,
            "{:<18} {:<6} {:>16} {:>14} {:>16} {:>12}",
            "layer", "domain", "mult_ops", "dft_ops", "add_ops", "params"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<18} {:<6} {:>16} {:>14} {:>16} {:>12}",
                r.name, r.domain, r.mult_ops, r.dft_ops, r.add_ops, r.params
            );
        }
        let _ = writeln!(s, "time-domain total: {}", self.domain_total(Domain::Time));
        let _ = writeln!(s, "freq-domain total: {}", self.domain_total(Domain::Freq));
        let _ = writeln!(s, "total (mult + dft): {}", self.total());
        if !self.fixation_per_step.is_empty() {
            let _ = writeln!(s, "training cost, weight fixation per step: {}", self.fixation_total());
            for (name, v) in &self.fixation_per_step {
                let _ = writeln!(s, "  {name}: {v}");
            }
        }
        s
    }
}

/// Two reports side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub a: OpCountReport,
    pub b: OpCountReport,
}

impl Comparison {
    /// Total of `a` over total of `b` (1 when both are empty).
    pub fn ratio(&self) -> f64 {
        match (self.a.total(), self.b.total()) {
            (0, 0) => 1.0,
            (x, y) => x as f64 / y as f64,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<40} | {:<40}", self.a.network, self.b.network);
        let n = self.a.rows.len().max(self.b.rows.len());
        let cell = |r: Option<&OpRow>| match r {
            Some(r) => format!("{:<18} {:>21}", r.name, r.total()),
            None => String::new(),
        };
        for i in 0..n {
            let _ = writeln!(s, "{:<40} | {:<40}", cell(self.a.rows.get(i)), cell(self.b.rows.get(i)));
        }
        let _ = writeln!(s, "{:<40} | {:<40}", format!("total {}", self.a.total()), format!("total {}", self.b.total()));
        let _ = writeln!(s, "ratio: {:.6}", self.ratio());
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("network,layer,kind,domain,mult_ops,dft_ops\n");
        for rep in [&self.a, &self.b] {
            for r in &rep.rows {
                let _ = writeln!(s, "{},{},{},{},{},{}", rep.network, r.name, r.kind, r.domain, r.mult_ops, r.dft_ops);
            }
        }
        let _ = writeln!(s, "# ratio,{:.6}", self.ratio());
        s
    }
}

pub fn compare_report(a: &NetworkConfig, b: &NetworkConfig) -> Result<Comparison> {
    Ok(Comparison {
        a: count_ops(a)?,
        b: count_ops(b)?,
    })
}
