//! Continuous inputs `u(t)` and discrete input sequences `v_k`.

use serde::{Deserialize, Serialize};

use crate::norm::euclidean;

/// Continuous-time input signal on `[0, inf)`.
///
/// Signals are evaluated on the global clock: the executor never rebases
/// time at impacts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContinuousSignal {
    #[default]
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `u(t) = amplitude * sin(omega * t + phase)`.
    Sinusoid {
        amplitude: Vec<f64>,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear interpolation between samples, held constant outside the table.
    Tabulated {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    Composite {
        parts: Vec<ContinuousSignal>,
    },
}

impl ContinuousSignal {
    pub fn constant(value: Vec<f64>) -> Self {
        ContinuousSignal::Constant { value }
    }

    pub fn sinusoid(amplitude: Vec<f64>, omega: f64, phase: f64) -> Self {
        ContinuousSignal::Sinusoid {
            amplitude,
            omega,
            phase,
        }
    }

    /// Writes `u(t)` into `out` (overwrites).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.accumulate(t, out);
    }

    pub fn eval(&self, t: f64, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        self.eval_into(t, &mut out);
        out
    }

    fn accumulate(&self, t: f64, out: &mut [f64]) {
        match self {
            ContinuousSignal::Zero => {}
            ContinuousSignal::Constant { value } => {
                for (o, v) in out.iter_mut().zip(value) {
                    *o += v;
                }
            }
            ContinuousSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                let s = (omega * t + phase).sin();
                for (o, a) in out.iter_mut().zip(amplitude) {
                    *o += a * s;
                }
            }
            ContinuousSignal::Tabulated { times, values } => {
                if times.is_empty() {
                    return;
                }
                let idx = times.partition_point(|&ti| ti <= t);
                let row: Vec<f64> = if idx == 0 {
                    values[0].clone()
                } else if idx >= times.len() {
                    values[times.len() - 1].clone()
                } else {
                    let (t0, t1) = (times[idx - 1], times[idx]);
                    let w = (t - t0) / (t1 - t0);
                    values[idx - 1]
                        .iter()
                        .zip(&values[idx])
                        .map(|(a, b)| a + w * (b - a))
                        .collect()
                };
                for (o, v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
            ContinuousSignal::Composite { parts } => {
                for part in parts {
                    part.accumulate(t, out);
                }
            }
        }
    }

    /// Upper bound on `sup_t ||u(t)||`.
    ///
    /// Exact for zero, constant and sinusoid; the maximum sample norm for a
    /// table (linear interpolation cannot exceed it); the sum of the parts'
    /// bounds for a composite.
    pub fn sup_norm(&self) -> f64 {
        match self {
            ContinuousSignal::Zero => 0.0,
            ContinuousSignal::Constant { value } => euclidean(value),
            ContinuousSignal::Sinusoid { amplitude, .. } => euclidean(amplitude),
            ContinuousSignal::Tabulated { values, .. } => values
                .iter()
                .map(|v| euclidean(v))
                .fold(0.0, f64::max),
            ContinuousSignal::Composite { parts } => parts.iter().map(|p| p.sup_norm()).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm() == 0.0
    }

    /// The same waveform multiplied by `k`; `sup_norm` scales by `|k|`.
    pub fn scaled(&self, k: f64) -> Self {
        let mul = |v: &[f64]| v.iter().map(|x| x * k).collect::<Vec<_>>();
        match self {
            ContinuousSignal::Zero => ContinuousSignal::Zero,
            ContinuousSignal::Constant { value } => ContinuousSignal::Constant { value: mul(value) },
            ContinuousSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } => ContinuousSignal::Sinusoid {
                amplitude: mul(amplitude),
                omega: *omega,
                phase: *phase,
            },
            ContinuousSignal::Tabulated { times, values } => ContinuousSignal::Tabulated {
                times: times.clone(),
                values: values.iter().map(|v| mul(v)).collect(),
            },
            ContinuousSignal::Composite { parts } => ContinuousSignal::Composite {
                parts: parts.iter().map(|p| p.scaled(k)).collect(),
            },
        }
    }

    /// `t -> u(t + dt)`.
    pub fn shifted(&self, dt: f64) -> Self {
        match self {
            ContinuousSignal::Zero | ContinuousSignal::Constant { .. } => self.clone(),
            ContinuousSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } => ContinuousSignal::Sinusoid {
                amplitude: amplitude.clone(),
                omega: *omega,
                phase: phase + omega * dt,
            },
            ContinuousSignal::Tabulated { times, values } => ContinuousSignal::Tabulated {
                times: times.iter().map(|t| t - dt).collect(),
                values: values.clone(),
            },
            ContinuousSignal::Composite { parts } => ContinuousSignal::Composite {
                parts: parts.iter().map(|p| p.shifted(dt)).collect(),
            },
        }
    }

    /// Checks structural consistency against the input dimension `p`.
    pub fn check(&self, p: usize) -> Result<(), String> {
        let check_len = |v: &[f64], what: &str| {
            if v.len() != p {
                Err(format!("{what} has length {} but the input dimension is {p}", v.len()))
            } else if !v.iter().all(|x| x.is_finite()) {
                Err(format!("{what} has non-finite entries"))
            } else {
                Ok(())
            }
        };
        match self {
            ContinuousSignal::Zero => Ok(()),
            ContinuousSignal::Constant { value } => check_len(value, "constant value"),
            ContinuousSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                check_len(amplitude, "sinusoid amplitude")?;
                if !omega.is_finite() || !phase.is_finite() {
                    return Err("sinusoid frequency and phase must be finite".into());
                }
                Ok(())
            }
            ContinuousSignal::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err("tabulated signal needs equally many (>0) times and values".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("tabulated times must be strictly increasing".into());
                }
                values.iter().try_for_each(|v| check_len(v, "tabulated value"))
            }
            ContinuousSignal::Composite { parts } => parts.iter().try_for_each(|p_| p_.check(p)),
        }
    }
}

/// SplitMix64 finaliser (Steele, Lea & Flood). Constants:
/// increment `0x9E3779B97F4A7C15`, multipliers `0xBF58476D1CE4E5B9` and
/// `0x94D049BB133111EB`, shifts 30/27/31.
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9E3779B97F4A7C15;

/// Sequential SplitMix64 generator.
///
/// The `n`-th output (zero based) equals `splitmix64_mix(seed + (n + 1) * gamma)`,
/// so streams can also be addressed randomly with [`SplitMix64::nth_output`].
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix64_mix(self.state)
    }

    pub fn nth_output(seed: u64, n: u64) -> u64 {
        splitmix64_mix(seed.wrapping_add(n.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniformly distributed unit vector in `R^dim`.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.next_gaussian()).collect();
            let n = euclidean(&v);
            if n > 1e-12 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent stream seed from a parent seed and a tuple of indices.
pub fn derive_seed(seed: u64, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(splitmix64_mix(seed ^ 0x5EED), |acc, &i| {
            splitmix64_mix(acc ^ splitmix64_mix(i.wrapping_add(GOLDEN_GAMMA)))
        })
}

/// Discrete input sequence `k -> v_k in R^q`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiscreteSequence {
    #[default]
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// Component `i` of `v_k` is uniform on `[-bound_i, bound_i]`, drawn from
    /// the SplitMix64 stream of `seed` at index `k * q + i`.
    IidUniform {
        bound: Vec<f64>,
        seed: u64,
    },
    /// Explicit list; indices past the end are zero.
    Explicit {
        values: Vec<Vec<f64>>,
    },
}

impl DiscreteSequence {
    pub fn value_into(&self, k: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            DiscreteSequence::Zero => {}
            DiscreteSequence::Constant { value } => out.copy_from_slice(value),
            DiscreteSequence::IidUniform { bound, seed } => {
                let q = bound.len() as u64;
                for (i, (o, b)) in out.iter_mut().zip(bound).enumerate() {
                    let bits = SplitMix64::nth_output(*seed, k as u64 * q + i as u64);
                    *o = b * (2.0 * unit_f64(bits) - 1.0);
                }
            }
            DiscreteSequence::Explicit { values } => {
                if let Some(v) = values.get(k) {
                    out.copy_from_slice(v);
                }
            }
        }
    }

    pub fn value(&self, k: usize, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        self.value_into(k, &mut out);
        out
    }

    /// `sup_k ||v_k||`; for i.i.d. uniform this is the norm of the declared bound.
    pub fn sup_norm(&self) -> f64 {
        match self {
            DiscreteSequence::Zero => 0.0,
            DiscreteSequence::Constant { value } => euclidean(value),
            DiscreteSequence::IidUniform { bound, .. } => euclidean(bound),
            DiscreteSequence::Explicit { values } => {
                values.iter().map(|v| euclidean(v)).fold(0.0, f64::max)
            }
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mul = |v: &[f64]| v.iter().map(|x| x * k).collect::<Vec<_>>();
        match self {
            DiscreteSequence::Zero => DiscreteSequence::Zero,
            DiscreteSequence::Constant { value } => DiscreteSequence::Constant { value: mul(value) },
            DiscreteSequence::IidUniform { bound, seed } => DiscreteSequence::IidUniform {
                bound: mul(bound).into_iter().map(f64::abs).collect(),
                seed: *seed,
            },
            DiscreteSequence::Explicit { values } => DiscreteSequence::Explicit {
                values: values.iter().map(|v| mul(v)).collect(),
            },
        }
    }

    /// Replaces the seed of an i.i.d. sequence; other kinds are unchanged.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            DiscreteSequence::IidUniform { bound, .. } => DiscreteSequence::IidUniform {
                bound: bound.clone(),
                seed,
            },
            other => other.clone(),
        }
    }

    pub fn check(&self, q: usize) -> Result<(), String> {
        let check_len = |v: &[f64]| {
            if v.len() != q {
                Err(format!("discrete value has length {} but q = {q}", v.len()))
            } else if !v.iter().all(|x| x.is_finite()) {
                Err("discrete value has non-finite entries".to_string())
            } else {
                Ok(())
            }
        };
        match self {
            DiscreteSequence::Zero => Ok(()),
            DiscreteSequence::Constant { value } => check_len(value),
            DiscreteSequence::IidUniform { bound, .. } => {
                check_len(bound)?;
                if bound.iter().any(|b| *b < 0.0) {
                    return Err("uniform bounds must be non-negative".into());
                }
                Ok(())
            }
            DiscreteSequence::Explicit { values } => values.iter().try_for_each(|v| check_len(v)),
        }
    }
}
